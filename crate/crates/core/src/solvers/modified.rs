//! Epoch-restarted iteration on a shrinking subspace.
//!
//! The iterate is kept as `X = Q Y Qᵀ` with `Q` an orthonormal `n × k` basis
//! and the dynamic run on the compressed problem `(QᵀCQ, QᵀAℓQ, b)`. An epoch
//! ends when `λ_min(Y)` reaches `eps_eig`; the collapsed directions are then
//! dropped from `Q` and the run restarts from `η` times the projection of the
//! last iterate onto the kept directions.

use nalgebra::DMatrix;

use super::integrate::{run_segment, Segment, SegmentEnd};
use super::projection::project_matrix;
use super::vanilla::status_of;
use super::{Observer, SolveOutput, SolverConfig, StartKind, Status, StepEvent};
use crate::error::{Error, Result};
use crate::matcore::{eigendecompose, orthonormalize, simultaneous_diagonalize, SymMatrix};
use crate::model::{certify, Diagnostics, EpochSummary, PopRoute, PrimalDualSolution, SdpProblem};

/// Relative off-diagonal size up to which the epoch basis still counts as diagonalizing.
const BASIS_DIAG_TOL: f64 = 1e-6;

/// `10·max(1, maxℓ|bℓ| / max(1e-12, minℓ‖Aℓ‖_F))`.
pub fn default_eta(prob: &SdpProblem) -> f64 {
    let bmax = prob.b().iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let amin = prob.a().iter().map(SymMatrix::frobenius_norm).fold(f64::INFINITY, f64::min);
    if !amin.is_finite() {
        return 10.0;
    }
    10.0 * (bmax / amin.max(1e-12)).max(1.0)
}

fn compress(prob: &SdpProblem, q: &DMatrix<f64>) -> Result<SdpProblem> {
    SdpProblem::new(
        prob.c().congruence(q),
        prob.a().iter().map(|a| a.congruence(q)).collect(),
        prob.b().to_vec(),
    )
}

fn unit_columns(mut u: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in u.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    u
}

/// Kept directions (orthonormal, in current coordinates) after a collapse.
fn pop(basis: &DMatrix<f64>, c: &SymMatrix, y: &SymMatrix, eps_eig: f64) -> Result<(DMatrix<f64>, PopRoute)> {
    let k = y.dim();
    let unit = unit_columns(basis.clone());
    let g = y.congruence(&unit);
    let dmax = (0..k).fold(0.0f64, |m, i| m.max(g.get(i, i).abs()));
    let offdiag = (0..k).flat_map(|j| (0..j).map(move |i| (i, j))).fold(0.0f64, |m, (i, j)| m.max(g.get(i, j).abs()));
    if offdiag <= BASIS_DIAG_TOL * dmax.max(f64::MIN_POSITIVE) {
        let kept: Vec<usize> = (0..k).filter(|&i| g.get(i, i) >= eps_eig).collect();
        if kept.len() < k {
            // Y = Ũ⁻ᵀ D Ũ⁻¹ and Ũ⁻ᵀ = C Ũ, so the kept range is spanned by C ũᵢ.
            let cu = c.as_dmatrix() * basis;
            let cols: Vec<_> = kept.iter().map(|&i| cu.column(i).clone_owned()).collect();
            let q = if cols.is_empty() { DMatrix::zeros(k, 0) } else { orthonormalize(&DMatrix::from_columns(&cols))? };
            return Ok((q, PopRoute::Basis));
        }
    }
    let eig = eigendecompose(y);
    let cols: Vec<_> = (0..k).filter(|&i| eig.values[i] > eps_eig).map(|i| eig.vectors.column(i).clone_owned()).collect();
    let q = if cols.is_empty() { DMatrix::zeros(k, 0) } else { DMatrix::from_columns(&cols) };
    Ok((q, PopRoute::Eigen))
}

pub fn modified_solve(prob: &SdpProblem, cfg: &SolverConfig) -> Result<SolveOutput> {
    modified_solve_observed(prob, cfg, &mut |_: &StepEvent<'_>| {})
}

pub fn modified_solve_observed(prob: &SdpProblem, cfg: &SolverConfig, observer: &mut dyn Observer) -> Result<SolveOutput> {
    cfg.validate()?;
    let n = prob.n();
    let eta = cfg.eta.unwrap_or_else(|| default_eta(prob));
    let mut q = DMatrix::<f64>::identity(n, n);
    let mut y0 = SymMatrix::identity(n).scale(eta);
    let mut diagnostics = Diagnostics::default();
    let mut last_p: Option<Vec<f64>> = None;
    let mut iterations = 0usize;
    let mut t = 0.0;

    let (y, q, status) = 'epochs: {
        for epoch in 0.. {
            if epoch > n + 1 {
                return Err(Error::EpochLimit { epochs: epoch, n });
            }
            let sub = compress(prob, &q)?;
            let basis = simultaneous_diagonalize(sub.c(), &y0)?;
            let unit = unit_columns(basis.clone());
            let seg = Segment {
                prob: &sub,
                cfg,
                epoch,
                collapse_floor: Some(cfg.eps_eig),
                basis: Some(&unit),
                corner: false,
                budget: cfg.max_iters - iterations,
                iter_offset: iterations,
                t_offset: t,
            };
            let start_objective = sub.objective(&y0);
            let r = run_segment(&seg, y0, &mut diagnostics, observer)?;
            iterations += r.iterations;
            t = r.t;
            if r.p.is_some() {
                last_p = r.p;
            }
            let mut summary = EpochSummary {
                index: epoch,
                dim: sub.n(),
                iterations: r.iterations,
                start_objective,
                end_objective: sub.objective(&r.x),
                max_basis_offdiag: r.max_basis_offdiag,
                popped: 0,
                route: PopRoute::None,
            };
            if r.end != SegmentEnd::Collapsed {
                diagnostics.epochs.push(summary);
                break 'epochs (r.x, q, status_of(r.end));
            }

            let (keep, route) = pop(&basis, sub.c(), &r.x, cfg.eps_eig)?;
            summary.popped = sub.n() - keep.ncols();
            summary.route = route;
            diagnostics.epochs.push(summary);
            if keep.ncols() == 0 {
                break 'epochs (r.x, q, Status::NotConverged);
            }
            y0 = project_matrix(&r.x, &keep)?.congruence(&keep).scale(eta);
            q = &q * keep;
        }
        unreachable!()
    };

    let x = SymMatrix::symmetrized(&q * y.as_dmatrix() * q.transpose());
    let p = last_p.unwrap_or_else(|| vec![0.0; prob.m()]);
    let solution = PrimalDualSolution { x, p };
    Ok(SolveOutput {
        certificate: certify(prob, &solution)?,
        solution,
        diagnostics,
        status,
        iterations,
        start: StartKind::Scaled,
        beta: None,
        max_off_block: None,
        eta: Some(eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::ConductanceKind;
    use crate::model::fixtures::e1;

    #[test]
    fn eta_heuristic() {
        assert_eq!(default_eta(&e1()), 10.0);
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![30.0]).unwrap();
        assert!((default_eta(&p) - 10.0 * 30.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn e1_drops_one_direction() {
        for kind in [ConductanceKind::First, ConductanceKind::Second] {
            let mut cfg = SolverConfig::modified(kind);
            cfg.eta = Some(10.0);
            let out = modified_solve(&e1(), &cfg).unwrap();
            assert_eq!(out.status, Status::Converged, "{kind:?}");
            assert!(out.diagnostics.epochs.len() >= 2, "{kind:?}");
            assert_eq!(out.diagnostics.epochs[0].popped, 1);
            assert!((out.certificate.objective - 1.0).abs() < 1e-2);
            assert!(out.certificate.infeasibility <= 1e-4);
        }
    }

    #[test]
    fn pd_optimum_needs_no_epochs() {
        let p = SdpProblem::new(SymMatrix::identity(2), vec![SymMatrix::identity(2)], vec![1.0]).unwrap();
        let out = modified_solve(&p, &SolverConfig::modified(ConductanceKind::First)).unwrap();
        assert_eq!(out.status, Status::Converged);
        assert_eq!(out.diagnostics.epochs.len(), 1);
        assert_eq!(out.diagnostics.epochs[0].route, PopRoute::None);
        assert!((out.certificate.objective - 1.0).abs() < 1e-8);
    }
}
