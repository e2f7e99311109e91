//! `physarum` command line: generate instances, solve them, check reports, run sweeps.
//!
//! Exit codes: 0 on convergence or a passing check, 2 when a run did not
//! converge or a report fails verification, 1 on usage and I/O errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use physarum_sdp::batch::{reference_objective, sweep_dir, SweepSummary};
use physarum_sdp::io::{read_problem, write_problem};
use physarum_sdp::par::{threads_from_env, with_threads};
use physarum_sdp::probgen::{generate, GenSpec, Scheme};
use physarum_sdp::report::RunReport;
use physarum_sdp::solvers::{solve, Algorithm, SolverConfig, Status};
use physarum_sdp::{ConductanceKind, Exec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "physarum", version, about = "Physarum dynamics solver for positive semidefinite programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and write it to a `.dat-s` or `.json` file.
    Gen {
        #[arg(value_enum)]
        scheme: SchemeArg,
        /// Matrix size, or vertex count for graph schemes.
        #[arg(long)]
        n: usize,
        /// Constraint count, or edge count for graph schemes.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one problem file.
    Solve {
        path: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
        /// Write a run report (JSON) here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Re-verify the certificate recorded in a run report.
    Check { report: PathBuf },
    /// Solve every problem file in a directory and print a summary table.
    Sweep {
        dir: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
        /// Write one `<name>.report.json` per problem into this directory.
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SolveOpts {
    #[arg(long, value_enum, default_value_t = AnsatzArg::First)]
    ansatz: AnsatzArg,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Vanilla)]
    algorithm: AlgorithmArg,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SchemeArg {
    Random,
    VertexCover,
    MaxCut,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AnsatzArg {
    First,
    Second,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum AlgorithmArg {
    Vanilla,
    Modified,
}

impl SolveOpts {
    fn config(&self) -> SolverConfig {
        let ansatz = match self.ansatz {
            AnsatzArg::First => ConductanceKind::First,
            AnsatzArg::Second => ConductanceKind::Second,
        };
        let algorithm = match self.algorithm {
            AlgorithmArg::Vanilla => Algorithm::Vanilla,
            AlgorithmArg::Modified => Algorithm::Modified,
        };
        let mut cfg = SolverConfig::new(ansatz, algorithm);
        if let Some(g) = self.gamma {
            cfg.gamma = g;
        }
        cfg.eta = self.eta;
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
        if let Some(k) = self.max_iters {
            cfg.max_iters = k;
        }
        cfg
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Gen { scheme, n, m, seed, out } => {
            let scheme = match scheme {
                SchemeArg::Random => Scheme::Random,
                SchemeArg::VertexCover => Scheme::VertexCover,
                SchemeArg::MaxCut => Scheme::MaxCut,
            };
            let prob = generate(&GenSpec { scheme, n, m, seed })?;
            write_problem(&prob, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {} (n = {}, m = {})", out.display(), prob.n(), prob.m());
            Ok(EXIT_OK)
        }
        Command::Solve { path, opts, report } => solve_file(&path, &opts.config(), report.as_deref()),
        Command::Check { report } => check(&report),
        Command::Sweep { dir, opts, report_dir } => sweep(&dir, &opts.config(), report_dir.as_deref()),
    }
}

fn solve_file(path: &Path, cfg: &SolverConfig, report_path: Option<&Path>) -> Result<i32> {
    let prob = read_problem(path).with_context(|| format!("reading {}", path.display()))?;
    let started = Instant::now();
    let out = match solve(&prob, cfg) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("solver failed: {e}");
            return Ok(EXIT_FAILED);
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let reference = reference_objective(&prob);
    let report = RunReport::new(&prob, cfg, &out, seconds, reference).with_source(path.display().to_string());

    let c = &out.certificate;
    println!("status:        {}", out.status);
    println!("iterations:    {}", out.iterations);
    println!("objective:     {:.10}", c.objective);
    println!("dual:          {:.10}", c.dual_objective);
    println!("infeasibility: {:.3e}", c.infeasibility);
    println!("dual slack:    {:.3e}", c.dual_slack_min_eig);
    if let (Some(r), Some(g)) = (&report.summary.reference, report.summary.gap) {
        println!("reference:     {:.10} ({})", r.value, r.source);
        println!("gap:           {g:.3e}");
    }
    if let Some(b) = out.beta {
        println!("beta:          {b:.3e}");
    }
    if let Some(cv) = report.summary.cut_value {
        println!("cut value:     {cv:.6}");
    }
    println!("time:          {seconds:.3} s");
    if let Some(rp) = report_path {
        report.write(rp).with_context(|| format!("writing {}", rp.display()))?;
    }
    Ok(if out.converged() { EXIT_OK } else { EXIT_FAILED })
}

fn check(path: &Path) -> Result<i32> {
    let report = RunReport::read(path).with_context(|| format!("reading {}", path.display()))?;
    let v = report.verify()?;
    for m in &v.mismatches {
        println!("mismatch: {m}");
    }
    if !v.converged {
        println!("run status: {}", report.status);
    }
    if !v.accepted {
        let c = &v.recomputed;
        println!(
            "certificate rejected: gap {:.3e}, slack {:.3e}, infeasibility {:.3e}",
            c.duality_gap, c.dual_slack_min_eig, c.infeasibility
        );
    }
    if v.passed() {
        println!("ok");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_FAILED)
    }
}

fn sweep(dir: &Path, cfg: &SolverConfig, report_dir: Option<&Path>) -> Result<i32> {
    let items = with_threads(threads_from_env(), || sweep_dir(dir, cfg, Exec::Parallel))
        .with_context(|| format!("reading {}", dir.display()))?;
    if let Some(rd) = report_dir {
        std::fs::create_dir_all(rd).with_context(|| format!("creating {}", rd.display()))?;
        for item in &items {
            if let Some(r) = &item.report {
                let stem = item.row.name.trim_end_matches(".json").trim_end_matches(".dat-s");
                let p = rd.join(format!("{stem}.report.json"));
                r.write(&p).with_context(|| format!("writing {}", p.display()))?;
            }
        }
    }
    let all_converged = items.iter().all(|i| i.report.as_ref().is_some_and(|r| r.status == Status::Converged));
    let summary = SweepSummary::from_rows(items.into_iter().map(|i| i.row).collect());
    print!("{}", summary.render());
    Ok(if all_converged { EXIT_OK } else { EXIT_FAILED })
}
