//! Problem data, solutions, per-step diagnostics and primal-dual certificates.
//!
//! The primal problem is
//!
//! ```text
//! min tr(C X)  s.t.  tr(Aℓ X) = bℓ (ℓ = 1..m),  X ⪰ 0
//! ```
//!
//! with `C ≻ 0`. The dual candidate `p` produced by the dynamics gives the
//! slack `S = C − Σ pℓ Aℓ`; weak duality holds whenever `S ⪰ 0`.

use serde::{Deserialize, Serialize};

use crate::dynamics::UpdateMode;
use crate::error::{Error, Result};
use crate::matcore::{eigendecompose, min_eigenvalue, SymMatrix};

/// Optional provenance carried alongside a problem (generator scheme, seed,
/// max-cut shift ξ, an oracle objective when one is known).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<String>,
}

impl ProblemMeta {
    pub fn is_empty(&self) -> bool {
        *self == ProblemMeta::default()
    }
}

#[derive(Serialize, Deserialize)]
struct RawProblem {
    n: usize,
    m: usize,
    c: SymMatrix,
    a: Vec<SymMatrix>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "ProblemMeta::is_empty")]
    meta: ProblemMeta,
}

/// A positive SDP: `C ≻ 0`, symmetric constraint matrices of matching size.
#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct SdpProblem {
    c: SymMatrix,
    a: Vec<SymMatrix>,
    b: Vec<f64>,
    c_inv: SymMatrix,
    pub meta: ProblemMeta,
}

impl std::fmt::Debug for SdpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdpProblem")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("c", &self.c)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("meta", &self.meta)
            .finish()
    }
}

impl PartialEq for SdpProblem {
    fn eq(&self, other: &Self) -> bool {
        self.c == other.c && self.a == other.a && self.b == other.b && self.meta == other.meta
    }
}

impl TryFrom<RawProblem> for SdpProblem {
    type Error = Error;

    fn try_from(raw: RawProblem) -> Result<Self> {
        if raw.m != raw.a.len() || raw.m != raw.b.len() {
            return Err(Error::InvalidProblem(format!(
                "declared m = {} but found {} matrices and {} right-hand sides",
                raw.m,
                raw.a.len(),
                raw.b.len()
            )));
        }
        if raw.n != raw.c.dim() {
            return Err(Error::InvalidProblem(format!(
                "declared n = {} but C is {}x{}",
                raw.n,
                raw.c.dim(),
                raw.c.dim()
            )));
        }
        Ok(SdpProblem::new(raw.c, raw.a, raw.b)?.with_meta(raw.meta))
    }
}

impl From<SdpProblem> for RawProblem {
    fn from(p: SdpProblem) -> Self {
        RawProblem { n: p.n(), m: p.m(), c: p.c, a: p.a, b: p.b, meta: p.meta }
    }
}

impl SdpProblem {
    /// Validates dimensions and `λ_min(C) > 1e-12·‖C‖_F`.
    pub fn new(c: SymMatrix, a: Vec<SymMatrix>, b: Vec<f64>) -> Result<Self> {
        let n = c.dim();
        if a.len() != b.len() {
            return Err(Error::InvalidProblem(format!(
                "{} constraint matrices but {} right-hand sides",
                a.len(),
                b.len()
            )));
        }
        for (l, al) in a.iter().enumerate() {
            if al.dim() != n {
                return Err(Error::InvalidProblem(format!(
                    "constraint {} has dimension {}, expected {}",
                    l + 1,
                    al.dim(),
                    n
                )));
            }
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("non-finite right-hand side".into()));
        }
        let eig = eigendecompose(&c);
        let lmin = eig.min();
        if !(lmin > 1e-12 * c.frobenius_norm()) {
            return Err(Error::CostNotPositive { min_eig: lmin });
        }
        let c_inv = eig.map_values(|l| 1.0 / l);
        Ok(Self { c, a, b, c_inv, meta: ProblemMeta::default() })
    }

    /// Replaces the computed `C⁻¹` with one known in closed form.
    pub(crate) fn with_exact_inverse(mut self, c_inv: SymMatrix) -> Self {
        debug_assert_eq!(c_inv.dim(), self.n());
        self.c_inv = c_inv;
        self
    }

    pub fn with_meta(mut self, meta: ProblemMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.c.dim()
    }

    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn c(&self) -> &SymMatrix {
        &self.c
    }

    pub fn c_inv(&self) -> &SymMatrix {
        &self.c_inv
    }

    pub fn a(&self) -> &[SymMatrix] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn objective(&self, x: &SymMatrix) -> f64 {
        self.c.dot(x)
    }

    /// `tr(Aℓ X) − bℓ` for every constraint.
    pub fn residuals(&self, x: &SymMatrix) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a.dot(x) - b).collect()
    }

    pub fn max_residual(&self, x: &SymMatrix) -> f64 {
        self.residuals(x).into_iter().fold(0.0, |acc, r| acc.max(r.abs()))
    }

    /// `C − Σ pℓ Aℓ`.
    pub fn dual_slack(&self, p: &[f64]) -> SymMatrix {
        assert_eq!(p.len(), self.m());
        self.a.iter().zip(p).fold(self.c.clone(), |s, (a, &pl)| s.add_scaled(-pl, a))
    }

    pub fn dual_objective(&self, p: &[f64]) -> f64 {
        self.b.iter().zip(p).map(|(b, p)| b * p).sum()
    }

    fn check_dim(&self, x: &SymMatrix) -> Result<()> {
        if x.dim() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.dim() });
        }
        Ok(())
    }
}

/// `max( maxℓ |bℓ − tr(Aℓ X)|, max(0, −λ_min(X)) )`.
pub fn infeasibility(prob: &SdpProblem, x: &SymMatrix) -> Result<f64> {
    prob.check_dim(x)?;
    let linear = prob.max_residual(x);
    let conic = (-min_eigenvalue(x)).max(0.0);
    Ok(linear.max(conic))
}

/// `|tr(C X) − reference|`.
pub fn gap(prob: &SdpProblem, x: &SymMatrix, reference_obj: f64) -> Result<f64> {
    prob.check_dim(x)?;
    Ok((prob.objective(x) - reference_obj).abs())
}

/// Primal iterate and dual candidate. Objectives are always recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualSolution {
    pub x: SymMatrix,
    pub p: Vec<f64>,
}

impl PrimalDualSolution {
    pub fn objective(&self, prob: &SdpProblem) -> f64 {
        prob.objective(&self.x)
    }

    pub fn dual_objective(&self, prob: &SdpProblem) -> f64 {
        prob.dual_objective(&self.p)
    }
}

/// Acceptance thresholds for [`Certificate::accepts`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub feas: f64,
    pub psd: f64,
    pub opt: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { feas: 1e-6, psd: 1e-6, opt: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub objective: f64,
    pub dual_objective: f64,
    /// `|tr(CX) − b·p|`.
    pub duality_gap: f64,
    /// `λ_min(C − Σ pℓ Aℓ)`.
    pub dual_slack_min_eig: f64,
    pub infeasibility: f64,
}

impl Certificate {
    /// `tr(CX) − b·p`, non-negative under weak duality.
    pub fn signed_gap(&self) -> f64 {
        self.objective - self.dual_objective
    }

    pub fn accepts(&self, t: &Thresholds) -> bool {
        self.duality_gap <= t.opt && self.dual_slack_min_eig >= -t.psd && self.infeasibility <= t.feas
    }
}

pub fn certify(prob: &SdpProblem, sol: &PrimalDualSolution) -> Result<Certificate> {
    prob.check_dim(&sol.x)?;
    if sol.p.len() != prob.m() {
        return Err(Error::DimensionMismatch { expected: prob.m(), got: sol.p.len() });
    }
    let objective = sol.objective(prob);
    let dual_objective = sol.dual_objective(prob);
    Ok(Certificate {
        objective,
        dual_objective,
        duality_gap: (objective - dual_objective).abs(),
        dual_slack_min_eig: min_eigenvalue(&prob.dual_slack(&sol.p)),
        infeasibility: infeasibility(prob, &sol.x)?,
    })
}

/// One accepted step of a solver run. Values describe the iterate after the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub epoch: usize,
    /// Accumulated continuous time `Σ h`.
    pub t: f64,
    pub h: f64,
    /// `tr(C X)` of the problem the dynamic runs on.
    pub objective: f64,
    pub objective_change: f64,
    /// `ln det X`.
    pub work: f64,
    /// `(W(t+h) − W(t)) / h`.
    pub work_rate: f64,
    /// `tr(Aℓ X) − bℓ`.
    pub residuals: Vec<f64>,
    /// Corner entry of an augmented iterate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// `‖Ẋ‖_F` at the iterate the update was evaluated on.
    pub xdot_norm: f64,
    /// `λ_min` of the iterate the update was evaluated on.
    pub lambda_min: f64,
    pub mode: UpdateMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopRoute {
    /// The epoch converged; nothing popped.
    None,
    /// Columns of the diagonalization basis with collapsed diagonal entries.
    Basis,
    /// The basis no longer diagonalized the iterate; collapsed eigenvectors were used.
    Eigen,
}

/// One epoch of the modified solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub index: usize,
    /// Basis size during the epoch.
    pub dim: usize,
    pub iterations: usize,
    pub start_objective: f64,
    pub end_objective: f64,
    /// Largest off-diagonal of `ŨᵀX(t)Ũ` (unit-normalized columns) seen during the epoch.
    pub max_basis_offdiag: f64,
    pub popped: usize,
    pub route: PopRoute,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: Vec<StepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epochs: Vec<EpochSummary>,
}

impl Diagnostics {
    pub fn push(&mut self, record: StepRecord) {
        self.steps.push(record);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }

    /// Uniform-stride subsample of at most `max_records` steps that always keeps the final `keep_tail`.
    pub fn downsample(&self, max_records: usize, keep_tail: usize) -> Diagnostics {
        let len = self.steps.len();
        if len <= max_records {
            return self.clone();
        }
        let tail = keep_tail.min(max_records).min(len);
        let head_len = len - tail;
        let head_budget = max_records - tail;
        let mut steps = Vec::with_capacity(max_records);
        if head_budget > 0 {
            let stride = head_len.div_ceil(head_budget);
            steps.extend(self.steps[..head_len].iter().step_by(stride).cloned());
        }
        steps.extend(self.steps[head_len..].iter().cloned());
        Diagnostics { steps, epochs: self.epochs.clone() }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::e1;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_positive_cost() {
        let r = SdpProblem::new(SymMatrix::diagonal(&[1.0, 0.0]), vec![], vec![]);
        assert!(matches!(r, Err(Error::CostNotPositive { .. })));
        let r = SdpProblem::new(SymMatrix::diagonal(&[1.0, -1.0]), vec![], vec![]);
        assert!(matches!(r, Err(Error::CostNotPositive { .. })));
    }

    #[test]
    fn rejects_mismatched_constraints() {
        let c = SymMatrix::identity(2);
        assert!(SdpProblem::new(c.clone(), vec![SymMatrix::identity(3)], vec![1.0]).is_err());
        assert!(SdpProblem::new(c, vec![SymMatrix::identity(2)], vec![]).is_err());
    }

    #[test]
    fn infeasibility_examples() {
        let p = e1();
        assert_eq!(infeasibility(&p, &SymMatrix::diagonal(&[1.0, 0.0])).unwrap(), 0.0);
        let x = SymMatrix::diagonal(&[1.0, -0.1]);
        assert!((infeasibility(&p, &x).unwrap() - 0.1).abs() < 1e-15);
        let x = SymMatrix::diagonal(&[0.6, 0.6]);
        assert!((infeasibility(&p, &x).unwrap() - 0.2).abs() < 1e-15);
        assert!(infeasibility(&p, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn gap_examples() {
        let p = e1();
        assert_eq!(gap(&p, &SymMatrix::diagonal(&[1.0, 0.0]), 1.0).unwrap(), 0.0);
        let g = gap(&p, &SymMatrix::diagonal(&[0.9, 0.1]), 1.0).unwrap();
        assert!((g - 0.1).abs() < 1e-15);
    }

    #[test]
    fn certify_e1_optimum() {
        let p = e1();
        let sol = PrimalDualSolution { x: SymMatrix::diagonal(&[1.0, 0.0]), p: vec![1.0] };
        let cert = certify(&p, &sol).unwrap();
        assert_eq!(cert.duality_gap, 0.0);
        assert_eq!(cert.dual_slack_min_eig, 0.0);
        assert_eq!(cert.infeasibility, 0.0);
        assert!(cert.accepts(&Thresholds::default()));
    }

    #[test]
    fn certify_zero_dual() {
        let p = e1();
        let x = SymMatrix::diagonal(&[3.0, 0.25]);
        let cert = certify(&p, &PrimalDualSolution { x: x.clone(), p: vec![0.0] }).unwrap();
        assert_eq!(cert.duality_gap, p.objective(&x));
        assert_eq!(cert.dual_slack_min_eig, 1.0);
        assert!(!cert.accepts(&Thresholds::default()));
    }

    #[test]
    fn certify_checks_lengths() {
        let p = e1();
        let sol = PrimalDualSolution { x: SymMatrix::identity(2), p: vec![] };
        assert!(certify(&p, &sol).is_err());
    }

    #[test]
    fn downsample_keeps_tail_and_bound() {
        let rec = |i: usize| StepRecord {
            iter: i,
            epoch: 0,
            t: i as f64,
            h: 1.0,
            objective: 0.0,
            objective_change: 0.0,
            work: 0.0,
            work_rate: 0.0,
            residuals: vec![],
            beta: None,
            xdot_norm: 0.0,
            lambda_min: 1.0,
            mode: UpdateMode::Feasible,
        };
        let d = Diagnostics { steps: (0..25_000).map(rec).collect(), epochs: vec![] };
        let s = d.downsample(10_000, 100);
        assert!(s.len() <= 10_000);
        let tail: Vec<usize> = s.steps[s.len() - 100..].iter().map(|r| r.iter).collect();
        assert_eq!(tail, (24_900..25_000).collect::<Vec<_>>());
        assert_eq!(s.steps[0].iter, 0);
        let short = Diagnostics { steps: (0..10).map(rec).collect(), epochs: vec![] };
        assert_eq!(short.downsample(10_000, 100), short);
    }

    proptest! {
        // Weak duality on E1: every feasible X and dual-feasible p satisfy tr(CX) ≥ b·p.
        #[test]
        fn weak_duality_e1(x1 in 0.0f64..1.0, off in -1.0f64..1.0, p in -5.0f64..1.0) {
            let prob = e1();
            let x2 = 1.0 - x1;
            let off = off * (x1 * x2).sqrt();
            let x = SymMatrix::from_rows(&[vec![x1, off], vec![off, x2]]).unwrap();
            let slack = prob.dual_slack(&[p]);
            prop_assume!(min_eigenvalue(&slack) >= 0.0);
            let cert = certify(&prob, &PrimalDualSolution { x, p: vec![p] }).unwrap();
            prop_assert!(cert.signed_gap() >= -1e-9 * (1.0 + cert.objective.abs()));
        }

        #[test]
        fn infeasibility_non_negative(d in proptest::collection::vec(-2.0f64..2.0, 4)) {
            let x = SymMatrix::from_rows(&[vec![d[0], d[1]], vec![d[2], d[3]]]).unwrap();
            prop_assert!(infeasibility(&e1(), &x).unwrap() >= 0.0);
        }
    }
}
