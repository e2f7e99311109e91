//! Physarum-style projection dynamics for positive semidefinite programs.
//!
//! Solves `min tr(CX)` subject to `tr(Aℓ X) = bℓ`, `X ⪰ 0` with `C ≻ 0` by
//! Euler-integrating a conductance-weighted projected gradient flow, and
//! certifies the result with the dual candidate it produces.
//!
//! ```
//! use physarum_sdp::{solvers::{vanilla_solve, SolverConfig}, ConductanceKind, SdpProblem, SymMatrix};
//!
//! let prob = SdpProblem::new(
//!     SymMatrix::diagonal(&[1.0, 2.0]),
//!     vec![SymMatrix::identity(2)],
//!     vec![1.0],
//! )
//! .unwrap();
//! let out = vanilla_solve(&prob, &SolverConfig::vanilla(ConductanceKind::Second), None).unwrap();
//! assert!((out.certificate.objective - 1.0).abs() < 1e-2);
//! ```

pub mod augment;
pub mod batch;
pub mod conductance;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod matcore;
pub mod model;
pub mod par;
pub mod probgen;
pub mod report;
pub mod solvers;

pub use conductance::{ConductanceKind, ConductanceOperator};
pub use error::{Error, Result};
pub use matcore::SymMatrix;
pub use model::{Certificate, Diagnostics, PrimalDualSolution, SdpProblem, Thresholds};
pub use par::Exec;
