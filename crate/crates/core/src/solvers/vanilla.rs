use super::integrate::{feasible_enough, run_segment, Segment, SegmentEnd};
use super::{Observer, SolveOutput, SolverConfig, StartKind, Status, StepEvent};
use crate::augment::augment;
use crate::error::{Error, Result};
use crate::matcore::{min_eigenvalue, SymMatrix};
use crate::model::{certify, Diagnostics, PrimalDualSolution, SdpProblem};

pub(super) fn status_of(end: SegmentEnd) -> Status {
    match end {
        SegmentEnd::Converged => Status::Converged,
        SegmentEnd::Stalled => Status::Stalled,
        SegmentEnd::Budget | SegmentEnd::Collapsed => Status::NotConverged,
    }
}

/// Euler iteration from `x0`, from `I` when it is feasible, or else on the
/// augmented problem from `C̄⁻¹`.
pub fn vanilla_solve(prob: &SdpProblem, cfg: &SolverConfig, x0: Option<&SymMatrix>) -> Result<SolveOutput> {
    vanilla_solve_observed(prob, cfg, x0, &mut |_: &StepEvent<'_>| {})
}

pub fn vanilla_solve_observed(
    prob: &SdpProblem,
    cfg: &SolverConfig,
    x0: Option<&SymMatrix>,
    observer: &mut dyn Observer,
) -> Result<SolveOutput> {
    cfg.validate()?;
    let mut diagnostics = Diagnostics::default();

    let direct = |x0: SymMatrix, start: StartKind, diagnostics: &mut Diagnostics, observer: &mut dyn Observer| {
        let seg = Segment {
            prob,
            cfg,
            epoch: 0,
            collapse_floor: None,
            basis: None,
            corner: false,
            budget: cfg.max_iters,
            iter_offset: 0,
            t_offset: 0.0,
        };
        let r = run_segment(&seg, x0, diagnostics, observer)?;
        let p = r.p.unwrap_or_else(|| vec![0.0; prob.m()]);
        let solution = PrimalDualSolution { x: r.x, p };
        Ok::<_, Error>(SolveOutput {
            certificate: certify(prob, &solution)?,
            solution,
            diagnostics: std::mem::take(diagnostics),
            status: status_of(r.end),
            iterations: r.iterations,
            start,
            beta: None,
            max_off_block: None,
            eta: None,
        })
    };

    if let Some(x0) = x0 {
        if x0.dim() != prob.n() {
            return Err(Error::DimensionMismatch { expected: prob.n(), got: x0.dim() });
        }
        let lmin = min_eigenvalue(x0);
        if lmin <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: lmin });
        }
        return direct(x0.clone(), StartKind::Supplied, &mut diagnostics, observer);
    }

    let identity = SymMatrix::identity(prob.n());
    if feasible_enough(prob, &identity) {
        return direct(identity, StartKind::Identity, &mut diagnostics, observer);
    }

    let ap = augment(prob, cfg.gamma)?;
    let seg = Segment {
        prob: ap.problem(),
        cfg,
        epoch: 0,
        collapse_floor: None,
        basis: None,
        corner: true,
        budget: cfg.max_iters,
        iter_offset: 0,
        t_offset: 0.0,
    };
    let r = run_segment(&seg, ap.initial_point(), &mut diagnostics, observer)?;
    let ex = ap.extract(&r.x)?;
    let p = r
        .p
        .map(|p| p.iter().map(|v| v / cfg.gamma).collect())
        .unwrap_or_else(|| vec![0.0; prob.m()]);
    let solution = PrimalDualSolution { x: ex.x, p };
    let certificate = certify(prob, &solution)?;
    // A stationary augmented run whose corner did not vanish has not solved the original problem.
    let status = match status_of(r.end) {
        Status::Converged if certificate.infeasibility > cfg.thresholds.feas => Status::Stalled,
        s => s,
    };
    Ok(SolveOutput {
        certificate,
        solution,
        diagnostics,
        status,
        iterations: r.iterations,
        start: StartKind::Augmented,
        beta: Some(ex.beta),
        max_off_block: Some(r.max_off_block.max(ex.off_block)),
        eta: None,
    })
}
