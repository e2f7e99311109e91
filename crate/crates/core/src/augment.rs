//! One-row/one-column augmentation that makes `C̄⁻¹` linearly feasible.
//!
//! ```text
//! C̄ = [γC 0; 0 1],   Āℓ = [Aℓ 0; 0 αℓ],   αℓ = bℓ − tr(Aℓ C⁻¹)/γ
//! ```
//!
//! For a block-diagonal `X̄ = diag(X̃, β)` the objective is `γ·tr(C X̃) + β`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::model::SdpProblem;

#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    base: SdpProblem,
    aug: SdpProblem,
    gamma: f64,
    alpha: Vec<f64>,
    start: SymMatrix,
}

/// Upper-left block, corner entry and largest off-block magnitude of an augmented iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub x: SymMatrix,
    pub beta: f64,
    pub off_block: f64,
}

fn block_diag(top: &SymMatrix, corner: f64) -> SymMatrix {
    let n = top.dim();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(top.as_dmatrix());
    m[(n, n)] = corner;
    SymMatrix::symmetrized(m)
}

pub fn augment(prob: &SdpProblem, gamma: f64) -> Result<AugmentedProblem> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let c_inv = prob.c_inv();
    let alpha: Vec<f64> =
        prob.a().iter().zip(prob.b()).map(|(a, b)| b - a.dot(c_inv) / gamma).collect();
    let c_bar = block_diag(&prob.c().scale(gamma), 1.0);
    let a_bar = prob.a().iter().zip(&alpha).map(|(a, &al)| block_diag(a, al)).collect();
    let start = block_diag(&c_inv.scale(1.0 / gamma), 1.0);
    let aug = SdpProblem::new(c_bar, a_bar, prob.b().to_vec())?.with_exact_inverse(start.clone());
    Ok(AugmentedProblem { base: prob.clone(), aug, gamma, alpha, start })
}

impl AugmentedProblem {
    pub fn base(&self) -> &SdpProblem {
        &self.base
    }

    pub fn problem(&self) -> &SdpProblem {
        &self.aug
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `C̄⁻¹`, a linearly feasible PD starting point.
    pub fn initial_point(&self) -> SymMatrix {
        self.start.clone()
    }

    pub fn extract(&self, x_bar: &SymMatrix) -> Result<Extracted> {
        let n = self.base.n();
        if x_bar.dim() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: x_bar.dim() });
        }
        let m = x_bar.as_dmatrix();
        let x = SymMatrix::symmetrized(m.view((0, 0), (n, n)).clone_owned());
        let off_block = (0..n).fold(0.0f64, |acc, i| acc.max(m[(i, n)].abs()));
        Ok(Extracted { x, beta: m[(n, n)], off_block })
    }

    /// `diag(X̃, β)`.
    pub fn lift(&self, x: &SymMatrix, beta: f64) -> SymMatrix {
        block_diag(x, beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::min_eigenvalue;
    use crate::model::{fixtures::e1, infeasibility};
    use proptest::prelude::*;

    #[test]
    fn identity_example() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![1.0]).unwrap();
        let ap = augment(&p, 0.01).unwrap();
        assert!((ap.alpha()[0] + 199.0).abs() < 1e-10);
        assert!(ap.problem().c().max_abs_diff(&SymMatrix::diagonal(&[0.01, 0.01, 1.0])) < 1e-15);
        assert!(ap.problem().a()[0].max_abs_diff(&SymMatrix::diagonal(&[1.0, 1.0, -199.0])) < 1e-10);
        let x0 = ap.initial_point();
        assert!(x0.max_abs_diff(&SymMatrix::diagonal(&[100.0, 100.0, 1.0])) < 1e-10);
        assert!((ap.problem().a()[0].dot(&x0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn already_feasible_corner() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![2.0]).unwrap();
        assert_eq!(augment(&p, 1.0).unwrap().alpha(), &[0.0]);
    }

    #[test]
    fn e1_alpha() {
        let ap = augment(&e1(), 0.01).unwrap();
        assert!((ap.alpha()[0] + 149.0).abs() < 1e-10);
        let x0 = ap.initial_point();
        assert!(min_eigenvalue(&x0) > 0.0);
        assert!(infeasibility(ap.problem(), &x0).unwrap() <= 1e-10);
    }

    #[test]
    fn rejects_bad_gamma() {
        assert!(augment(&e1(), 0.0).is_err());
        assert!(augment(&e1(), -1.0).is_err());
        assert!(augment(&e1(), f64::NAN).is_err());
    }

    #[test]
    fn extract_block_diagonal() {
        let ap = augment(&e1(), 0.5).unwrap();
        let x = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let e = ap.extract(&ap.lift(&x, 0.25)).unwrap();
        assert_eq!(e.x, x);
        assert_eq!(e.beta, 0.25);
        assert_eq!(e.off_block, 0.0);
        assert!(ap.extract(&x).is_err());
    }

    #[test]
    fn objective_relation() {
        let ap = augment(&e1(), 0.01).unwrap();
        let x = SymMatrix::diagonal(&[0.7, 0.2]);
        let obj = ap.problem().objective(&ap.lift(&x, 0.3));
        assert!((obj - (0.01 * e1().objective(&x) + 0.3)).abs() < 1e-15);
    }

    /// Under the first ansatz the corner moves as `β̇ = β(αᵀp − 1)`.
    #[test]
    fn corner_rate_first_ansatz() {
        use crate::conductance::{ConductanceKind, ConductanceOperator};
        use crate::dynamics::{solve_update, UpdateMode};
        let p = SdpProblem::new(
            SymMatrix::diagonal(&[1.0, 2.0, 3.0]),
            vec![SymMatrix::identity(3), SymMatrix::diagonal(&[1.0, 0.0, -1.0])],
            vec![1.0, 0.2],
        )
        .unwrap();
        let ap = augment(&p, 0.05).unwrap();
        let xbar = ap.lift(&SymMatrix::diagonal(&[3.0, 2.0, 1.5]), 0.4);
        for mode in [UpdateMode::Feasible, UpdateMode::General] {
            let op = ConductanceOperator::new(ConductanceKind::First, ap.problem(), &xbar);
            let v = solve_update(ap.problem(), &op, mode);
            let ap_dot: f64 = ap.alpha().iter().zip(&v.p).map(|(a, p)| a * p).sum();
            let want = 0.4 * (ap_dot - 1.0);
            assert!((v.xdot.get(3, 3) - want).abs() <= 1e-9 * (1.0 + want.abs()), "{mode:?}");
        }
    }

    proptest! {
        #[test]
        fn corner_feasibility_is_exact(
            ce in prop::collection::vec(-1.0f64..1.0, 9),
            ae in prop::collection::vec(-2.0f64..2.0, 18),
            b in prop::collection::vec(-5.0f64..5.0, 2),
            gamma in 1e-3f64..10.0,
        ) {
            let cm = DMatrix::from_column_slice(3, 3, &ce);
            let c = SymMatrix::from_dmatrix(&cm * cm.transpose() + DMatrix::identity(3, 3)).unwrap();
            let a: Vec<SymMatrix> = (0..2)
                .map(|l| SymMatrix::from_dmatrix(DMatrix::from_column_slice(3, 3, &ae[9 * l..9 * l + 9])).unwrap())
                .collect();
            let p = SdpProblem::new(c, a, b.clone()).unwrap();
            let ap = augment(&p, gamma).unwrap();
            let x0 = ap.initial_point();
            for (al, bl) in ap.problem().a().iter().zip(&b) {
                let scale = 1.0 + bl.abs() + ap.alpha().iter().fold(0.0f64, |m, a| m.max(a.abs()));
                prop_assert!((al.dot(&x0) - bl).abs() <= 1e-12 * scale);
            }
        }
    }
}
