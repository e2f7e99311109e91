//! Problem files: sparse text (`.dat-s`) and dense JSON (`.json`).
//!
//! The sparse format follows the familiar single-block layout
//!
//! ```text
//! * physarum-primal-v1
//! m
//! 1
//! n
//! b1 ... bm
//! matno 1 i j value      (matno 0 is C, 1-based indices, one triangle)
//! ```
//!
//! but matrices are stored exactly as in `min tr(CX)`, not in the dual sign
//! convention other readers expect. Files without the marker line are rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::model::{ProblemMeta, SdpProblem};

pub const DAT_S_MARKER: &str = "physarum-primal-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    DatS,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Format> {
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        if name.ends_with(".dat-s") {
            Ok(Format::DatS)
        } else if name.ends_with(".json") {
            Ok(Format::Json)
        } else {
            Err(Error::Unsupported(format!("{}: expected a .dat-s or .json extension", path.display())))
        }
    }
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<SdpProblem> {
    let path = path.as_ref();
    let format = Format::from_path(path)?;
    let text = std::fs::read_to_string(path)?;
    match format {
        Format::DatS => parse_dat_s(&text),
        Format::Json => Ok(serde_json::from_str(&text)?),
    }
}

pub fn write_problem(prob: &SdpProblem, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match Format::from_path(path)? {
        Format::DatS => to_dat_s(prob),
        Format::Json => serde_json::to_string_pretty(prob)? + "\n",
    };
    std::fs::write(path, text)?;
    Ok(())
}

pub fn to_dat_s(prob: &SdpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "* {DAT_S_MARKER}");
    let meta = &prob.meta;
    if let Some(s) = &meta.scheme {
        let _ = writeln!(out, "* meta scheme {s}");
    }
    if let Some(s) = meta.seed {
        let _ = writeln!(out, "* meta seed {s}");
    }
    if let Some(x) = meta.xi {
        let _ = writeln!(out, "* meta xi {x:e}");
    }
    if let Some(r) = meta.reference_objective {
        let _ = writeln!(out, "* meta reference_objective {r:e}");
    }
    if let Some(d) = &meta.distribution {
        let _ = writeln!(out, "* meta distribution {}", d.replace('\n', " "));
    }
    let _ = writeln!(out, "{}", prob.m());
    let _ = writeln!(out, "1");
    let _ = writeln!(out, "{}", prob.n());
    let b: Vec<String> = prob.b().iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));
    let mats = std::iter::once(prob.c()).chain(prob.a());
    for (k, mat) in mats.enumerate() {
        for i in 0..prob.n() {
            for j in i..prob.n() {
                let v = mat.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{k} 1 {} {} {v:e}", i + 1, j + 1);
                }
            }
        }
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c.is_whitespace() || "{}(),".contains(c)).filter(|t| !t.is_empty()).collect()
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| perr(line, format!("cannot parse {what} from '{tok}'")))
}

fn apply_meta(meta: &mut ProblemMeta, rest: &str, line: usize) -> Result<()> {
    let (key, value) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let value = value.trim();
    match key {
        "scheme" => meta.scheme = Some(value.to_string()),
        "seed" => meta.seed = Some(parse_num(value, line, "seed")?),
        "xi" => meta.xi = Some(parse_num(value, line, "xi")?),
        "reference_objective" => meta.reference_objective = Some(parse_num(value, line, "reference objective")?),
        "distribution" => meta.distribution = Some(value.to_string()),
        _ => {}
    }
    Ok(())
}

pub fn parse_dat_s(text: &str) -> Result<SdpProblem> {
    let mut meta = ProblemMeta::default();
    let mut marked = false;
    let mut body = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('"') || line.starts_with('*') {
            let content = line.trim_start_matches(['"', '*']).trim();
            if content.contains(DAT_S_MARKER) {
                marked = true;
            } else if let Some(rest) = content.strip_prefix("meta ") {
                apply_meta(&mut meta, rest.trim(), lineno)?;
            }
            continue;
        }
        body.push((lineno, line));
    }
    if !marked {
        return Err(Error::Unsupported(format!(
            "missing '{DAT_S_MARKER}' header line; dual-convention sparse files are not read"
        )));
    }

    let mut lines = body.into_iter();
    let mut next = |what: &str| lines.next().ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")));

    let (ln, l) = next("constraint count")?;
    let t = tokens(l);
    let m: usize = parse_num(t.first().copied().unwrap_or(""), ln, "constraint count")?;

    let (ln, l) = next("block count")?;
    let t = tokens(l);
    let nblocks: i64 = parse_num(t.first().copied().unwrap_or(""), ln, "block count")?;
    if nblocks != 1 {
        return Err(perr(ln, format!("exactly one block supported, found {nblocks}")));
    }

    let (ln, l) = next("block size")?;
    let t = tokens(l);
    if t.len() != 1 {
        return Err(perr(ln, format!("expected one block size, found {}", t.len())));
    }
    let n: i64 = parse_num(t[0], ln, "block size")?;
    if n <= 0 {
        return Err(perr(ln, "block size must be positive (diagonal blocks are not supported)"));
    }
    let n = n as usize;

    let (ln, l) = next("right-hand side")?;
    let t = tokens(l);
    if t.len() != m {
        return Err(perr(ln, format!("expected {m} right-hand side values, found {}", t.len())));
    }
    let b: Vec<f64> = t.iter().map(|tok| parse_num(tok, ln, "right-hand side")).collect::<Result<_>>()?;

    let mut mats = vec![DMatrix::<f64>::zeros(n, n); m + 1];
    let mut seen: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for (ln, l) in lines {
        let t = tokens(l);
        if t.len() != 5 {
            return Err(perr(ln, format!("entry line needs 5 fields, found {}", t.len())));
        }
        let k: usize = parse_num(t[0], ln, "matrix number")?;
        let blk: usize = parse_num(t[1], ln, "block number")?;
        let i: usize = parse_num(t[2], ln, "row")?;
        let j: usize = parse_num(t[3], ln, "column")?;
        let v: f64 = parse_num(t[4], ln, "value")?;
        if k > m {
            return Err(perr(ln, format!("matrix number {k} exceeds {m}")));
        }
        if blk != 1 {
            return Err(perr(ln, format!("block number {blk} but only block 1 exists")));
        }
        if i == 0 || j == 0 || i > n || j > n {
            return Err(perr(ln, format!("index ({i}, {j}) outside 1..={n}")));
        }
        let (i, j) = (i.min(j) - 1, i.max(j) - 1);
        if let Some(&prev) = seen.get(&(k, i, j)) {
            if prev != v {
                return Err(perr(ln, format!("conflicting values {prev} and {v} for matrix {k} entry ({}, {})", i + 1, j + 1)));
            }
        }
        seen.insert((k, i, j), v);
        mats[k][(i, j)] = v;
        mats[k][(j, i)] = v;
    }

    let mut mats = mats.into_iter().map(SymMatrix::from_dmatrix);
    let c = mats.next().expect("cost matrix")?;
    let a = mats.collect::<Result<Vec<_>>>()?;
    Ok(SdpProblem::new(c, a, b)?.with_meta(meta))
}
