//! Many independent solves at once, and the sweep summary table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceKind;
use crate::error::Result;
use crate::io::read_problem;
use crate::model::{Certificate, SdpProblem, Thresholds};
use crate::par::{map_slice, Exec};
use crate::report::{Reference, RunReport};
use crate::solvers::{solve, Algorithm, SolveOutput, SolverConfig};

/// Gap below which a sweep entry counts as accepted.
pub const ACCEPT_GAP: f64 = 1e-2;

/// Solves every problem with `cfg`; each run itself is sequential.
pub fn solve_batch(problems: &[SdpProblem], cfg: &SolverConfig, exec: Exec) -> Vec<Result<SolveOutput>> {
    let inner = SolverConfig { exec: Exec::Sequential, ..cfg.clone() };
    map_slice(problems, exec, |p| solve(p, &inner))
}

/// Whether a certificate is tight enough to serve as a reference:
/// duality gap at most `1e-4·(1 + |objective|)`, dual slack and
/// infeasibility within `1e-5`.
pub fn reference_grade(cert: &Certificate) -> bool {
    let t = Thresholds { feas: 1e-5, psd: 1e-5, opt: 1e-4 * (1.0 + cert.objective.abs()) };
    cert.accepts(&t)
}

/// Iteration cap for each reference attempt.
const REFERENCE_MAX_ITERS: usize = 50_000;

/// Reference objective: recorded in the problem metadata, else the first
/// converged solve whose certificate is [`reference_grade`], trying
/// second/vanilla, second/modified and first/vanilla in that order.
pub fn reference_objective(prob: &SdpProblem) -> Option<Reference> {
    if let Some(value) = prob.meta.reference_objective {
        return Some(Reference { value, source: "meta".into() });
    }
    let attempts = [
        (ConductanceKind::Second, Algorithm::Vanilla),
        (ConductanceKind::Second, Algorithm::Modified),
        (ConductanceKind::First, Algorithm::Vanilla),
    ];
    attempts.into_iter().find_map(|(kind, algorithm)| {
        let cfg = SolverConfig { max_iters: REFERENCE_MAX_ITERS, ..SolverConfig::new(kind, algorithm) };
        let out = solve(prob, &cfg).ok()?;
        (out.converged() && reference_grade(&out.certificate)).then(|| Reference {
            value: out.certificate.objective,
            source: format!("certified:{}/{}", kind.name(), algorithm.name()),
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub name: String,
    pub status: Option<String>,
    pub error: Option<String>,
    pub objective: Option<f64>,
    pub reference: Option<f64>,
    pub gap: Option<f64>,
    pub infeasibility: Option<f64>,
    pub beta: Option<f64>,
    pub seconds: f64,
}

impl SweepRow {
    pub fn accepted(&self) -> bool {
        self.gap.is_some_and(|g| g < ACCEPT_GAP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub accepted: usize,
    pub total: usize,
    pub average_seconds: f64,
    /// Largest gap among accepted entries.
    pub max_gap: Option<f64>,
    pub max_infeasibility: Option<f64>,
    pub max_beta: Option<f64>,
}

fn fold_max(it: impl Iterator<Item = f64>) -> Option<f64> {
    it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
}

impl SweepSummary {
    pub fn from_rows(rows: Vec<SweepRow>) -> Self {
        let total = rows.len();
        let accepted = rows.iter().filter(|r| r.accepted()).count();
        let average_seconds = if total == 0 { 0.0 } else { rows.iter().map(|r| r.seconds).sum::<f64>() / total as f64 };
        SweepSummary {
            max_gap: fold_max(rows.iter().filter(|r| r.accepted()).filter_map(|r| r.gap)),
            max_infeasibility: fold_max(rows.iter().filter_map(|r| r.infeasibility)),
            max_beta: fold_max(rows.iter().filter_map(|r| r.beta)),
            rows,
            accepted,
            total,
            average_seconds,
        }
    }

    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:<14} {:>12} {:>12} {:>10} {:>10} {:>10} {:>9}", "problem", "status", "objective", "reference", "gap", "infeas", "beta", "time[s]");
        for r in &self.rows {
            let status = r.status.clone().or_else(|| r.error.as_ref().map(|_| "ERROR".into())).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:<28} {:<14} {:>12} {:>12} {:>10} {:>10} {:>10} {:>9.3}",
                r.name,
                status,
                r.objective.map_or_else(|| "-".into(), |v| format!("{v:.6}")),
                r.reference.map_or_else(|| "-".into(), |v| format!("{v:.6}")),
                opt(r.gap),
                opt(r.infeasibility),
                opt(r.beta),
                r.seconds
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "gap < {ACCEPT_GAP:e}: {}/{}", self.accepted, self.total);
        let _ = writeln!(s, "average time: {:.3} s", self.average_seconds);
        let _ = writeln!(s, "max gap (accepted): {}", opt(self.max_gap));
        let _ = writeln!(s, "max infeasibility: {}", opt(self.max_infeasibility));
        let _ = writeln!(s, "max final beta: {}", opt(self.max_beta));
        s
    }
}

/// Outcome of one sweep entry, with its report when the solve ran.
pub struct SweepItem {
    pub row: SweepRow,
    pub report: Option<RunReport>,
}

pub fn sweep_one(name: &str, prob: &SdpProblem, cfg: &SolverConfig) -> SweepItem {
    let started = Instant::now();
    let out = solve(prob, cfg);
    let seconds = started.elapsed().as_secs_f64();
    match out {
        Err(e) => SweepItem {
            row: SweepRow {
                name: name.into(),
                status: None,
                error: Some(e.to_string()),
                objective: None,
                reference: None,
                gap: None,
                infeasibility: None,
                beta: None,
                seconds,
            },
            report: None,
        },
        Ok(out) => {
            let reference = reference_objective(prob);
            let report = RunReport::new(prob, cfg, &out, seconds, reference.clone()).with_source(name);
            SweepItem {
                row: SweepRow {
                    name: name.into(),
                    status: Some(out.status.to_string()),
                    error: None,
                    objective: Some(out.certificate.objective),
                    reference: reference.map(|r| r.value),
                    gap: report.summary.gap,
                    infeasibility: Some(out.certificate.infeasibility),
                    beta: out.beta,
                    seconds,
                },
                report: Some(report),
            }
        }
    }
}

/// Problem files (`.dat-s`, `.json`) directly inside `dir`, sorted by name.
pub fn problem_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|s| s.to_str()).unwrap_or_default();
            p.is_file() && (name.ends_with(".dat-s") || name.ends_with(".json")) && !name.ends_with(".report.json")
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Solves every problem file in `dir` concurrently.
pub fn sweep_dir(dir: &Path, cfg: &SolverConfig, exec: Exec) -> Result<Vec<SweepItem>> {
    let files = problem_files(dir)?;
    let inner = SolverConfig { exec: Exec::Sequential, ..cfg.clone() };
    Ok(map_slice(&files, exec, |path| {
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        match read_problem(path) {
            Ok(p) => sweep_one(&name, &p, &inner),
            Err(e) => SweepItem {
                row: SweepRow {
                    name,
                    status: None,
                    error: Some(e.to_string()),
                    objective: None,
                    reference: None,
                    gap: None,
                    infeasibility: None,
                    beta: None,
                    seconds: 0.0,
                },
                report: None,
            },
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_problem;
    use crate::model::fixtures::e1;
    use crate::probgen::gen_max_cut;

    #[test]
    fn batch_matches_individual_runs() {
        let probs = vec![e1(), gen_max_cut(4, 4, 3).unwrap()];
        let cfg = SolverConfig::vanilla(ConductanceKind::Second);
        let seq = solve_batch(&probs, &cfg, Exec::Sequential);
        let par = solve_batch(&probs, &cfg, Exec::Parallel);
        for (s, p) in seq.iter().zip(&par) {
            assert_eq!(s.as_ref().unwrap().solution, p.as_ref().unwrap().solution);
        }
    }

    #[test]
    fn sweep_over_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut k3 = gen_max_cut(3, 3, 1).unwrap();
        k3.meta.reference_objective = Some(6.0);
        write_problem(&k3, dir.path().join("k3.dat-s")).unwrap();
        write_problem(&e1(), dir.path().join("e1.json")).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let cfg = SolverConfig::vanilla(ConductanceKind::Second);
        let items = sweep_dir(dir.path(), &cfg, Exec::Parallel).unwrap();
        let summary = SweepSummary::from_rows(items.into_iter().map(|i| i.row).collect());
        assert_eq!(summary.total, 2);
        assert_eq!(summary.accepted, 2, "{}", summary.render());
        assert_eq!(summary.rows[1].reference, Some(6.0));
        assert!(summary.render().contains("gap < 1e-2: 2/2"));
    }
}
