fn main() {
    std::process::exit(physarum_cli::run(std::env::args_os()));
}
