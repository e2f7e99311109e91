//! Self-contained run reports that can be re-verified offline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{certify, Certificate, Diagnostics, PrimalDualSolution, SdpProblem};
use crate::probgen::cut_value;
use crate::solvers::{SolveOutput, SolverConfig, StartKind, Status};

pub const REPORT_FORMAT: &str = "physarum-run-report-v1";
pub const MAX_RECORDS: usize = 10_000;
pub const TAIL_RECORDS: usize = 100;

/// Relative tolerance for recorded-vs-recomputed comparisons in [`RunReport::verify`].
const RECOMPUTE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub value: f64,
    /// Where the value came from, e.g. `meta` or `certified:second/modified`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub objective: f64,
    pub dual_objective: f64,
    pub infeasibility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_off_block: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    /// `|objective − reference|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// `tr(W X)` for max-cut instances.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub problem: SdpProblem,
    pub config: SolverConfig,
    pub status: Status,
    pub iterations: usize,
    pub wall_time_secs: f64,
    pub start: StartKind,
    pub summary: SolutionSummary,
    pub certificate: Certificate,
    pub solution: PrimalDualSolution,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub recomputed: Certificate,
    pub accepted: bool,
    pub converged: bool,
    pub mismatches: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.accepted && self.converged && self.mismatches.is_empty()
    }
}

fn differs(a: f64, b: f64) -> bool {
    (a - b).abs() > RECOMPUTE_TOL * (1.0 + a.abs().max(b.abs()))
}

impl RunReport {
    pub fn new(
        problem: &SdpProblem,
        config: &SolverConfig,
        out: &SolveOutput,
        wall_time_secs: f64,
        reference: Option<Reference>,
    ) -> Self {
        let objective = out.certificate.objective;
        RunReport {
            format: REPORT_FORMAT.to_string(),
            source: None,
            problem: problem.clone(),
            config: config.clone(),
            status: out.status,
            iterations: out.iterations,
            wall_time_secs,
            start: out.start,
            summary: SolutionSummary {
                objective,
                dual_objective: out.certificate.dual_objective,
                infeasibility: out.certificate.infeasibility,
                beta: out.beta,
                max_off_block: out.max_off_block,
                eta: out.eta,
                gap: reference.as_ref().map(|r| (objective - r.value).abs()),
                reference,
                cut_value: cut_value(problem, objective),
            },
            certificate: out.certificate,
            solution: out.solution.clone(),
            diagnostics: out.diagnostics.downsample(MAX_RECORDS, TAIL_RECORDS),
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }

    /// Recomputes the certificate and summary from the embedded problem and solution.
    pub fn verify(&self) -> Result<Verification> {
        let rc = certify(&self.problem, &self.solution)?;
        let mut mismatches = Vec::new();
        if self.format != REPORT_FORMAT {
            mismatches.push(format!("unknown report format '{}'", self.format));
        }
        let recorded = &self.certificate;
        let fields = [
            ("certificate.objective", recorded.objective, rc.objective),
            ("certificate.dual_objective", recorded.dual_objective, rc.dual_objective),
            ("certificate.duality_gap", recorded.duality_gap, rc.duality_gap),
            ("certificate.dual_slack_min_eig", recorded.dual_slack_min_eig, rc.dual_slack_min_eig),
            ("certificate.infeasibility", recorded.infeasibility, rc.infeasibility),
            ("summary.objective", self.summary.objective, rc.objective),
            ("summary.dual_objective", self.summary.dual_objective, rc.dual_objective),
            ("summary.infeasibility", self.summary.infeasibility, rc.infeasibility),
        ];
        for (name, have, want) in fields {
            if differs(have, want) {
                mismatches.push(format!("{name}: recorded {have:e}, recomputed {want:e}"));
            }
        }
        if let (Some(r), Some(g)) = (&self.summary.reference, self.summary.gap) {
            let want = (rc.objective - r.value).abs();
            if differs(g, want) {
                mismatches.push(format!("summary.gap: recorded {g:e}, recomputed {want:e}"));
            }
        }
        if let Some(cv) = self.summary.cut_value {
            match cut_value(&self.problem, rc.objective) {
                Some(want) if !differs(cv, want) => {}
                other => mismatches.push(format!("summary.cut_value: recorded {cv:e}, recomputed {other:?}")),
            }
        }
        Ok(Verification {
            accepted: rc.accepts(&self.config.thresholds),
            converged: self.status == Status::Converged,
            recomputed: rc,
            mismatches,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
