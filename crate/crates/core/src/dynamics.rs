//! Velocity field of the projection dynamic and PSD-preserving Euler steps.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::conductance::{assemble, Conductance, ConductanceKind, ConductanceOperator};
use crate::error::{Error, Result};
use crate::matcore::{eigendecompose, pinv_solve, EigenDecomp, SymMatrix};
use crate::model::SdpProblem;
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Keeps `tr(Aℓ X)` fixed; valid from a feasible iterate.
    Feasible,
    /// Also drives the residual `b − tr(Aℓ X)` to zero at unit rate.
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub xdot: SymMatrix,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub h_max: f64,
    pub safety: f64,
    pub floor: f64,
    /// Bound on the change of the whitened velocity field across a step, per
    /// unit time: `½‖X^{-1/2}(Ẋ(X + hẊ) − Ẋ(X))X^{-1/2}‖₂`. The solvers measure
    /// the first ansatz through its generator instead. `None` takes the PSD
    /// bound as is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_error: Option<f64>,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { h_max: 1.0, safety: 0.9, floor: 1e-12, local_error: None }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.safety > 0.0 && self.safety < 1.0) {
            return Err(Error::InvalidParameter(format!("safety must lie in (0,1), got {}", self.safety)));
        }
        if let Some(tol) = self.local_error {
            if !(tol > 0.0) {
                return Err(Error::InvalidParameter(format!("local error tolerance must be positive, got {tol}")));
            }
        }
        if !(self.h_max > 0.0) || !(self.floor > 0.0) || self.floor > self.h_max {
            return Err(Error::InvalidParameter(format!(
                "need 0 < floor <= h_max, got floor {} and h_max {}",
                self.floor, self.h_max
            )));
        }
        Ok(())
    }
}

/// Result of the step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSize {
    pub h: f64,
    /// The PSD bound fell below `floor`; `h` was raised to `floor`.
    pub stalled: bool,
}

pub fn solve_update(prob: &SdpProblem, op: &ConductanceOperator<'_>, mode: UpdateMode) -> Velocity {
    solve_update_with(prob, op, mode, Exec::Sequential)
}

pub fn solve_update_with(
    prob: &SdpProblem,
    op: &ConductanceOperator<'_>,
    mode: UpdateMode,
    exec: Exec,
) -> Velocity {
    let sys = assemble(op, prob, exec);
    let m = prob.m();
    let first_general = mode == UpdateMode::General && op.kind() == ConductanceKind::First;

    // G(C) equals X for the first ansatz; the general first-ansatz form uses X directly.
    let gc = if first_general { op.x().clone() } else { op.apply(prob.c()) };
    let rhs = match mode {
        UpdateMode::Feasible => DVector::from_iterator(m, prob.a().iter().map(|a| a.dot(&gc))),
        UpdateMode::General if first_general => DVector::from_column_slice(prob.b()),
        UpdateMode::General => {
            // Minimizer of tr(C F) + ½⟨F, G⁻¹F⟩ subject to tr(Aℓ F) = bℓ − tr(Aℓ X).
            DVector::from_iterator(
                m,
                prob.a().iter().zip(prob.b()).map(|(a, b)| b - a.dot(op.x()) + a.dot(&gc)),
            )
        }
    };
    let p = pinv_solve(&sys.l, &rhs);
    let xdot = sys.images.iter().zip(p.iter()).fold(gc.scale(-1.0), |acc, (img, &pl)| acc.add_scaled(pl, img));
    Velocity { xdot, p: p.iter().copied().collect() }
}

/// Largest safe step `min(h_max, safety/λ_max(−X^{-1/2} Ẋ X^{-1/2}))`.
pub fn max_psd_step(x: &SymMatrix, xdot: &SymMatrix, ctl: &StepControl) -> Result<f64> {
    Ok(psd_step(&eigendecompose(x), xdot, ctl)?.h)
}

/// As [`max_psd_step`], reusing an eigendecomposition of `X` and reporting stalls.
pub fn psd_step(x_eig: &EigenDecomp, xdot: &SymMatrix, ctl: &StepControl) -> Result<StepSize> {
    if x_eig.min() <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eig: x_eig.min() });
    }
    let inv_sqrt = x_eig.map_values(|l| 1.0 / l.sqrt());
    let k = xdot.congruence(inv_sqrt.as_dmatrix()).scale(-1.0);
    let mu = eigendecompose(&k).max();
    let bound = if mu > 0.0 { ctl.safety / mu } else { f64::INFINITY };
    let h = bound.min(ctl.h_max);
    if h < ctl.floor {
        return Ok(StepSize { h: ctl.floor, stalled: true });
    }
    Ok(StepSize { h, stalled: false })
}

/// Spectral norm of `X^{-1/2} E X^{-1/2}` given `X`'s eigendecomposition.
pub fn whitened_norm(x_eig: &EigenDecomp, e: &SymMatrix) -> f64 {
    let inv_sqrt = x_eig.map_values(|l| 1.0 / l.sqrt());
    let w = eigendecompose(&e.congruence(inv_sqrt.as_dmatrix()));
    w.max().abs().max(w.min().abs())
}

/// Euler step `X + h·Ẋ`.
pub fn step(x: &SymMatrix, v: &Velocity, h: f64) -> SymMatrix {
    x.add_scaled(h, &v.xdot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::min_eigenvalue;
    use crate::model::fixtures::e1;

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) < tol
    }

    #[test]
    fn e1_feasible_first() {
        let p = e1();
        let x = SymMatrix::diagonal(&[0.5, 0.5]);
        let op = ConductanceOperator::new(ConductanceKind::First, &p, &x);
        let v = solve_update(&p, &op, UpdateMode::Feasible);
        assert!((v.p[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!(close(&v.xdot, &SymMatrix::diagonal(&[1.0 / 6.0, -1.0 / 6.0]), 1e-14));
        assert!(p.a()[0].dot(&v.xdot).abs() < 1e-14);
        assert!((p.c().dot(&v.xdot) + 1.0 / 6.0).abs() < 1e-14);

        let next = step(&x, &v, 0.3);
        assert!(close(&next, &SymMatrix::diagonal(&[0.55, 0.45]), 1e-14));
        assert_eq!(step(&x, &v, 0.0), x);
    }

    #[test]
    fn e1_feasible_second() {
        let p = e1();
        let x = SymMatrix::diagonal(&[0.5, 0.5]);
        let op = ConductanceOperator::new(ConductanceKind::Second, &p, &x);
        let v = solve_update(&p, &op, UpdateMode::Feasible);
        assert!((v.p[0] - 1.5).abs() < 1e-14);
        assert!(close(&v.xdot, &SymMatrix::diagonal(&[0.125, -0.125]), 1e-14));
    }

    #[test]
    fn equilibrium_when_objective_is_constant() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![2.0]).unwrap();
        let x = SymMatrix::identity(2);
        for kind in [ConductanceKind::First, ConductanceKind::Second] {
            let op = ConductanceOperator::new(kind, &p, &x);
            let v = solve_update(&p, &op, UpdateMode::Feasible);
            assert!((v.p[0] - 1.0).abs() < 1e-14);
            assert!(v.xdot.max_abs() < 1e-14);
        }
    }

    #[test]
    fn general_mode_corrects_residual() {
        let p = e1();
        let x = SymMatrix::identity(2);
        for kind in [ConductanceKind::First, ConductanceKind::Second] {
            let op = ConductanceOperator::new(kind, &p, &x);
            let v = solve_update(&p, &op, UpdateMode::General);
            assert!((p.a()[0].dot(&v.xdot) + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_constraint_operator_gives_zero_multipliers() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::zeros(2)], vec![0.0]).unwrap();
        let x = SymMatrix::identity(2);
        let op = ConductanceOperator::new(ConductanceKind::Second, &p, &x);
        let v = solve_update(&p, &op, UpdateMode::Feasible);
        assert_eq!(v.p, vec![0.0]);
        assert!(close(&v.xdot, &SymMatrix::identity(2).scale(-1.0), 1e-15));
    }

    #[test]
    fn step_bound_examples() {
        let ctl = StepControl::default();
        let x = SymMatrix::identity(2);
        assert_eq!(max_psd_step(&x, &SymMatrix::zeros(2), &ctl).unwrap(), 1.0);
        let ctl_big = StepControl { h_max: 10.0, ..ctl };
        let h = max_psd_step(&x, &SymMatrix::identity(2).scale(-1.0), &ctl_big).unwrap();
        assert!((h - 0.9).abs() < 1e-14);
        let h = max_psd_step(&SymMatrix::diagonal(&[1.0, 2.0]), &SymMatrix::diagonal(&[-2.0, 0.0]), &ctl).unwrap();
        assert!((h - 0.45).abs() < 1e-14);

        let singular = SymMatrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(max_psd_step(&singular, &SymMatrix::zeros(2), &ctl), Err(Error::NotPositiveDefinite { .. })));

        let s = psd_step(&eigendecompose(&x), &SymMatrix::identity(2).scale(-1e14), &ctl).unwrap();
        assert!(s.stalled);
        assert_eq!(s.h, ctl.floor);
    }

    #[test]
    fn repeated_steps_approach_e1_optimum() {
        let p = e1();
        let mut x = SymMatrix::diagonal(&[0.5, 0.5]);
        let ctl = StepControl::default();
        for _ in 0..400 {
            let op = ConductanceOperator::new(ConductanceKind::First, &p, &x);
            let v = solve_update(&p, &op, UpdateMode::Feasible);
            let h = max_psd_step(&x, &v.xdot, &ctl).unwrap();
            x = step(&x, &v, h);
            assert!(min_eigenvalue(&x) > 0.0);
        }
        assert!(close(&x, &SymMatrix::diagonal(&[1.0, 0.0]), 1e-6));
    }

    #[test]
    fn invalid_step_control() {
        assert!(StepControl { safety: 1.0, ..Default::default() }.validate().is_err());
        assert!(StepControl { floor: 2.0, ..Default::default() }.validate().is_err());
        assert!(StepControl::default().validate().is_ok());
    }
}
