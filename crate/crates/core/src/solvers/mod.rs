//! End-to-end solvers: the vanilla Euler iteration and the modified
//! iteration with rank-drop epochs.

mod integrate;
mod modified;
mod projection;
mod vanilla;

use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceKind;
use crate::dynamics::{StepControl, UpdateMode, Velocity};
use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::model::{Certificate, Diagnostics, PrimalDualSolution, SdpProblem, Thresholds};
use crate::par::Exec;

pub use modified::{default_eta, modified_solve, modified_solve_observed};
pub use projection::project_matrix;
pub use vanilla::{vanilla_solve, vanilla_solve_observed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Vanilla,
    Modified,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Vanilla => "vanilla",
            Self::Modified => "modified",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Self::Vanilla),
            "modified" => Ok(Self::Modified),
            other => Err(format!("unknown algorithm '{other}' (expected vanilla or modified)")),
        }
    }
}

/// Default whitened local-error tolerance of the step control.
pub const LOCAL_ERROR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub ansatz: ConductanceKind,
    pub algorithm: Algorithm,
    /// Stop once `max(1, h)·‖Ẋ‖_F ≤ eps`.
    pub eps: f64,
    /// Eigenvalue floor that ends a modified-solver epoch.
    pub eps_eig: f64,
    /// Augmentation weight for vanilla runs without a feasible start.
    pub gamma: f64,
    /// Initial scale of the modified solver; `None` uses [`default_eta`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub max_iters: usize,
    pub step: StepControl,
    /// Consecutive floor-limited steps before giving up.
    pub stall_limit: usize,
    pub thresholds: Thresholds,
    #[serde(default)]
    pub exec: Exec,
}

impl SolverConfig {
    pub fn new(ansatz: ConductanceKind, algorithm: Algorithm) -> Self {
        // The second ansatz shrinks collapsing directions like δ², so it needs
        // long steps to reach them geometrically; the PSD bound keeps them safe.
        let h_max = match ansatz {
            ConductanceKind::First => 1.0,
            ConductanceKind::Second => 1e8,
        };
        Self {
            ansatz,
            algorithm,
            eps: 1e-8,
            eps_eig: 1e-6,
            gamma: 0.01,
            eta: None,
            max_iters: 200_000,
            step: StepControl { h_max, local_error: Some(LOCAL_ERROR), ..StepControl::default() },
            stall_limit: 100,
            thresholds: Thresholds::default(),
            exec: Exec::Sequential,
        }
    }

    pub fn vanilla(ansatz: ConductanceKind) -> Self {
        Self::new(ansatz, Algorithm::Vanilla)
    }

    pub fn modified(ansatz: ConductanceKind) -> Self {
        Self::new(ansatz, Algorithm::Modified)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("eps", self.eps), ("eps_eig", self.eps_eig), ("gamma", self.gamma)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
            }
        }
        self.step.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Converged,
    NotConverged,
    Stalled,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Converged => "CONVERGED",
            Status::NotConverged => "NOT_CONVERGED",
            Status::Stalled => "STALLED",
        })
    }
}

/// How the iteration was started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartKind {
    Supplied,
    Identity,
    Augmented,
    Scaled,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Solution of the problem passed in (extracted from the augmented run if any).
    pub solution: PrimalDualSolution,
    pub certificate: Certificate,
    pub diagnostics: Diagnostics,
    pub status: Status,
    pub iterations: usize,
    pub start: StartKind,
    /// Final corner entry of an augmented run.
    pub beta: Option<f64>,
    /// Largest off-block magnitude over all iterates of an augmented run.
    pub max_off_block: Option<f64>,
    pub eta: Option<f64>,
}

impl SolveOutput {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

/// One Euler step, handed to an [`Observer`] after it is taken.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub iter: usize,
    pub epoch: usize,
    pub mode: UpdateMode,
    /// The problem the dynamic runs on (augmented or projected, when applicable).
    pub problem: &'a SdpProblem,
    pub x: &'a SymMatrix,
    pub velocity: &'a Velocity,
    pub h: f64,
    pub x_next: &'a SymMatrix,
}

pub trait Observer {
    fn on_step(&mut self, event: &StepEvent<'_>);
}

impl<F: FnMut(&StepEvent<'_>)> Observer for F {
    fn on_step(&mut self, event: &StepEvent<'_>) {
        self(event)
    }
}

/// Dispatches on `cfg.algorithm`.
pub fn solve(prob: &SdpProblem, cfg: &SolverConfig) -> Result<SolveOutput> {
    match cfg.algorithm {
        Algorithm::Vanilla => vanilla_solve(prob, cfg, None),
        Algorithm::Modified => modified_solve(prob, cfg),
    }
}
