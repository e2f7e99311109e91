use nalgebra::DMatrix;

use super::{Observer, SolverConfig, StepEvent};
use crate::conductance::{ConductanceKind, ConductanceOperator};
use crate::dynamics::{psd_step, solve_update_with, whitened_norm, StepControl, StepSize, UpdateMode, Velocity};
use crate::error::{Error, Result};
use crate::matcore::{eigendecompose, EigenDecomp, SymMatrix};
use crate::model::{Diagnostics, SdpProblem, StepRecord};

/// Residual below which General mode hands over to Feasible mode.
const FEASIBLE_TOL: f64 = 1e-10;

/// Relative residual up to which a General-mode iterate may end an epoch
/// (residuals below the collapse floor itself always qualify).
const SETTLED_TOL: f64 = 1e-8;

/// Step reductions tried by the local error control before flagging a stall.
const MAX_REJECTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SegmentEnd {
    Converged,
    /// `λ_min` reached the collapse floor.
    Collapsed,
    Budget,
    Stalled,
}

pub(crate) struct Segment<'a> {
    pub prob: &'a SdpProblem,
    pub cfg: &'a SolverConfig,
    pub epoch: usize,
    pub collapse_floor: Option<f64>,
    /// Unit-norm columns whose Gram matrix against `X` is monitored.
    pub basis: Option<&'a DMatrix<f64>>,
    /// Track the last row/column as an augmentation corner.
    pub corner: bool,
    pub budget: usize,
    pub iter_offset: usize,
    pub t_offset: f64,
}

pub(crate) struct SegmentResult {
    pub x: SymMatrix,
    pub p: Option<Vec<f64>>,
    pub end: SegmentEnd,
    pub iterations: usize,
    pub t: f64,
    pub max_basis_offdiag: f64,
    pub max_off_block: f64,
}

fn velocity(prob: &SdpProblem, cfg: &SolverConfig, x: &SymMatrix, mode: UpdateMode) -> Velocity {
    let op = ConductanceOperator::new(cfg.ansatz, prob, x);
    // The factored step is exact only to first order in the constraints, so the
    // first ansatz always uses the self-correcting form; on feasible points the
    // two coincide.
    let mode = if cfg.ansatz == ConductanceKind::First { UpdateMode::General } else { mode };
    solve_update_with(prob, &op, mode, cfg.exec)
}

fn b_scale(prob: &SdpProblem) -> f64 {
    1.0 + prob.b().iter().fold(0.0f64, |m, b| m.max(b.abs()))
}

pub(crate) fn feasible_enough(prob: &SdpProblem, x: &SymMatrix) -> bool {
    prob.max_residual(x) <= FEASIBLE_TOL * b_scale(prob)
}

fn basis_offdiag(basis: &DMatrix<f64>, x: &SymMatrix) -> f64 {
    let g = x.congruence(basis);
    let k = g.dim();
    let mut worst = 0.0f64;
    for j in 0..k {
        for i in 0..j {
            worst = worst.max(g.get(i, j).abs());
        }
    }
    worst
}

fn corner_stats(x: &SymMatrix) -> (f64, f64) {
    let n = x.dim() - 1;
    let off = (0..n).fold(0.0f64, |acc, i| acc.max(x.get(i, n).abs()));
    (x.get(n, n), off)
}

/// An accepted iterate.
///
/// Under the first ansatz the velocity has the form `Ẋ = BX + XBᵀ` with
/// `B = ½(C⁻¹M − I)`, `M = Σ pℓAℓ`, so the Euler step is taken on a factor
/// `X = FFᵀ` as `F ← (I + hB)F`. Eigenvalues that the dynamic drives towards
/// zero then stay positive and keep their relative accuracy.
#[derive(Clone)]
struct Point {
    x: SymMatrix,
    factor: Option<DMatrix<f64>>,
    eig: Option<EigenDecomp>,
    lambda_min: f64,
    log_det: f64,
}

impl Point {
    fn plain(x: SymMatrix) -> Self {
        let eig = eigendecompose(&x);
        let (lambda_min, log_det) = (eig.min(), eig.log_det());
        Point { x, factor: None, eig: Some(eig), lambda_min, log_det }
    }

    /// `log_det` is carried along rather than recomputed, since singular values
    /// of `F` below `ε‖F‖` are not resolved by the SVD.
    fn factored(f: DMatrix<f64>, log_det: f64) -> Self {
        let x = SymMatrix::symmetrized(&f * f.transpose());
        let sv = f.clone().svd(false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        Point { x, factor: Some(f), eig: None, lambda_min: smin * smin, log_det }
    }

    fn from_factor(f: DMatrix<f64>) -> Self {
        let log_det = 2.0 * f.diagonal().iter().map(|d| d.abs().ln()).sum::<f64>();
        Self::factored(f, log_det)
    }
}

/// `C`-whitened generator `½(L⁻¹ M L⁻ᵀ − I)` with `C = LLᵀ`; similar to `B`.
fn whitened_generator(prob: &SdpProblem, l_inv: &DMatrix<f64>, p: &[f64]) -> SymMatrix {
    let m = prob.a().iter().zip(p).fold(SymMatrix::zeros(prob.n()), |acc, (a, &pl)| acc.add_scaled(pl, a));
    m.congruence(&l_inv.transpose()).sub(&SymMatrix::identity(prob.n())).scale(0.5)
}

fn generator(prob: &SdpProblem, p: &[f64]) -> DMatrix<f64> {
    let m = prob.a().iter().zip(p).fold(SymMatrix::zeros(prob.n()), |acc, (a, &pl)| acc.add_scaled(pl, a));
    let n = prob.n();
    (prob.c_inv().as_dmatrix() * m.as_dmatrix() - DMatrix::identity(n, n)) * 0.5
}

fn spectral_norm(m: &SymMatrix) -> f64 {
    let e = eigendecompose(m);
    e.max().abs().max(e.min().abs())
}

/// Steps the iterate along `v` by `h`.
fn advance(prob: &SdpProblem, at: &Point, v: &Velocity, h: f64) -> Point {
    match &at.factor {
        Some(f) => {
            let n = f.nrows();
            let g = DMatrix::identity(n, n) + generator(prob, &v.p) * h;
            let log_det = at.log_det + 2.0 * g.clone().lu().determinant().abs().ln();
            Point::factored(g * f, log_det)
        }
        None => Point::plain(at.x.add_scaled(h, &v.xdot)),
    }
}

/// Step bound: the PSD rule for plain iterates; for factored ones `I + hB` is
/// kept away from singular by the same safety factor.
fn step_bound(at: &Point, v: &Velocity, wgen: Option<&SymMatrix>, ctl: &StepControl) -> Result<StepSize> {
    match (&at.eig, wgen) {
        (Some(eig), _) => psd_step(eig, &v.xdot, ctl),
        (None, Some(g)) => {
            let mu = -eigendecompose(g).min();
            let bound = if mu > 0.0 { ctl.safety / mu } else { f64::INFINITY };
            let h = bound.min(ctl.h_max);
            Ok(if h < ctl.floor { StepSize { h: ctl.floor, stalled: true } } else { StepSize { h, stalled: false } })
        }
        (None, None) => unreachable!("factored iterate without generator"),
    }
}

pub(crate) fn run_segment(
    seg: &Segment<'_>,
    x0: SymMatrix,
    diag: &mut Diagnostics,
    observer: &mut dyn Observer,
) -> Result<SegmentResult> {
    let prob = seg.prob;
    let cfg = seg.cfg;
    let factored = cfg.ansatz == ConductanceKind::First;
    let l_inv = if factored {
        let chol = prob.c().as_dmatrix().clone().cholesky().ok_or(Error::NotPositiveDefinite { min_eig: f64::NAN })?;
        chol.l().try_inverse().ok_or(Error::NotPositiveDefinite { min_eig: f64::NAN })?
    } else {
        DMatrix::zeros(0, 0)
    };
    let mut at = if factored {
        let chol = x0.as_dmatrix().clone().cholesky().ok_or(Error::NotPositiveDefinite { min_eig: f64::NAN })?;
        Point::from_factor(chol.l())
    } else {
        Point::plain(x0)
    };

    let mut mode = if feasible_enough(prob, &at.x) { UpdateMode::Feasible } else { UpdateMode::General };
    let general_ctl = StepControl { h_max: cfg.step.h_max.min(1.0), ..cfg.step };
    let mut p = None;
    let mut t = seg.t_offset;
    let mut stall_run = 0usize;
    let mut max_basis_offdiag = seg.basis.map_or(0.0, |b| basis_offdiag(b, &at.x));
    let mut max_off_block = if seg.corner { corner_stats(&at.x).1 } else { 0.0 };
    let mut iterations = 0usize;
    let mut cached: Option<Velocity> = None;

    let end = loop {
        if iterations >= seg.budget {
            break SegmentEnd::Budget;
        }
        let lambda_min = at.lambda_min;
        // Only a (nearly) feasible trajectory collapses towards a face of the
        // optimum; transients of the residual correction are left alone.
        let floor = seg.collapse_floor.filter(|&f| {
            mode == UpdateMode::Feasible || prob.max_residual(&at.x) <= (SETTLED_TOL * b_scale(prob)).max(f)
        });
        if floor.is_some_and(|f| lambda_min <= f) {
            break SegmentEnd::Collapsed;
        }
        if at.factor.is_none() && lambda_min <= 0.0 {
            break SegmentEnd::Stalled;
        }

        let v = match cached.take() {
            Some(v) => v,
            None => velocity(prob, cfg, &at.x, mode),
        };
        let wgen = factored.then(|| whitened_generator(prob, &l_inv, &v.p));
        let ctl = if mode == UpdateMode::General { &general_ctl } else { &cfg.step };
        let bound = step_bound(&at, &v, wgen.as_ref(), ctl)?;
        let xdot_norm = v.xdot.frobenius_norm();
        p = Some(v.p.clone());
        if bound.h.max(1.0) * xdot_norm <= cfg.eps {
            if mode == UpdateMode::General && prob.max_residual(&at.x) > cfg.thresholds.feas {
                // Stationary but infeasible: the residual cannot be reduced further.
                break SegmentEnd::Stalled;
            }
            break SegmentEnd::Converged;
        }

        let mut h = bound.h;
        let mut stalled = bound.stalled;
        let mut next = advance(prob, &at, &v, h);
        if let Some(tol) = ctl.local_error {
            for _ in 0..MAX_REJECTIONS {
                let below_floor = floor.is_some_and(|f| next.lambda_min < 0.5 * f);
                if (next.factor.is_some() || next.lambda_min > 0.0) && !below_floor {
                    let v_next = velocity(prob, cfg, &next.x, mode);
                    // Rate of change of the velocity field along the step, per unit time.
                    let err = match &wgen {
                        Some(g) => 0.5 * spectral_norm(&whitened_generator(prob, &l_inv, &v_next.p).sub(g)),
                        None => 0.5 * whitened_norm(at.eig.as_ref().expect("plain iterate"), &v_next.xdot.sub(&v.xdot)),
                    };
                    if err <= tol {
                        cached = Some(v_next);
                        break;
                    }
                    h *= (0.9 * tol / err).clamp(0.1, 0.9);
                } else {
                    h *= 0.5;
                }
                if h < ctl.floor {
                    h = ctl.floor;
                    stalled = true;
                    next = advance(prob, &at, &v, h);
                    break;
                }
                next = advance(prob, &at, &v, h);
            }
        }
        if stalled {
            stall_run += 1;
            if stall_run >= cfg.stall_limit {
                break SegmentEnd::Stalled;
            }
        } else {
            stall_run = 0;
        }

        t += h;
        let objective = prob.objective(&next.x);
        let beta = if seg.corner {
            let (beta, off) = corner_stats(&next.x);
            max_off_block = max_off_block.max(off);
            Some(beta)
        } else {
            None
        };
        if let Some(b) = seg.basis {
            max_basis_offdiag = max_basis_offdiag.max(basis_offdiag(b, &next.x));
        }
        diag.push(StepRecord {
            iter: seg.iter_offset + iterations,
            epoch: seg.epoch,
            t,
            h,
            objective,
            objective_change: objective - prob.objective(&at.x),
            work: next.log_det,
            work_rate: (next.log_det - at.log_det) / h,
            residuals: prob.residuals(&next.x),
            beta,
            xdot_norm,
            lambda_min,
            mode,
        });
        observer.on_step(&StepEvent {
            iter: seg.iter_offset + iterations,
            epoch: seg.epoch,
            mode,
            problem: prob,
            x: &at.x,
            velocity: &v,
            h,
            x_next: &next.x,
        });

        at = next;
        iterations += 1;
        if mode == UpdateMode::General && feasible_enough(prob, &at.x) {
            mode = UpdateMode::Feasible;
            cached = None;
        }
    };

    Ok(SegmentResult { x: at.x, p, end, iterations, t, max_basis_offdiag, max_off_block })
}
