//! Projected gradient descent for blind calibration, with fixed or exact
//! line-search steps, plus a gain-agnostic least-squares baseline.

use std::time::{Duration, Instant};

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm, norm_sq};
use crate::model::ProblemInstance;
use crate::objective::{Evaluation, Iterate, Mode, Objective};
use crate::projections::{project_b_rho_with, project_g_rho_with, ProjectionMethod};
use crate::scalar::Real;

/// How step sizes are chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepPolicy {
    Fixed { mu_signal: f64, mu_gain: f64 },
    /// Exact minimizer of the objective along each block's gradient.
    LineSearch,
}

impl StepPolicy {
    /// Fixed steps with ratio `μ_γ/μ_ξ = m/‖ξ₀‖²`, the initializer's norm standing
    /// in for the unknown signal energy.
    pub fn fixed_with_default_ratio<S: Real>(mu_signal: f64, inst: &ProblemInstance<S>, mode: Mode) -> Result<Self> {
        let obj = Objective::new(inst, mode)?;
        let init = initialize(&obj);
        let energy = norm_sq(init.signal.view()).to_f64_lossy();
        if energy <= 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(StepPolicy::Fixed { mu_signal, mu_gain: mu_signal * inst.m() as f64 / energy })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::Fixed { mu_signal, mu_gain } if !(mu_signal > 0.0 && mu_gain > 0.0) => Err(
                Error::InvalidArgument(format!("fixed steps must be positive, got ({mu_signal}, {mu_gain})")),
            ),
            _ => Ok(()),
        }
    }
}

/// Termination tests; at least one tolerance or the iteration cap applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Stop when `f < objective_tol`.
    pub objective_tol: Option<f64>,
    /// Stop when the largest relative block change falls below `iterate_tol`.
    pub iterate_tol: Option<f64>,
    pub max_iters: usize,
}

impl StopCriteria {
    pub const DEFAULT_MAX_ITERS: usize = 100_000;

    pub fn noiseless() -> Self {
        Self { objective_tol: Some(1e-8), iterate_tol: None, max_iters: Self::DEFAULT_MAX_ITERS }
    }

    pub fn noisy() -> Self {
        Self { objective_tol: None, iterate_tol: Some(1e-6), max_iters: Self::DEFAULT_MAX_ITERS }
    }

    /// [`Self::noisy`] for noisy instances, [`Self::noiseless`] otherwise.
    pub fn for_instance<S: Real>(inst: &ProblemInstance<S>) -> Self {
        if inst.is_noisy() {
            Self::noisy()
        } else {
            Self::noiseless()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self::noiseless()
    }
}

/// Order of the two block updates inside one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Both steps from the same point.
    #[default]
    Jacobi,
    /// Gain step uses the gradient refreshed after the signal step.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: Mode,
    pub policy: StepPolicy,
    pub stop: StopCriteria,
    /// Project the gain iterate onto its constraint set after every step.
    pub project_each_step: bool,
    pub order: UpdateOrder,
    pub projection: ProjectionMethod,
}

impl SolverOptions {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            policy: StepPolicy::LineSearch,
            stop: StopCriteria::noiseless(),
            project_each_step: true,
            order: UpdateOrder::Jacobi,
            projection: ProjectionMethod::Dykstra,
        }
    }

    /// Defaults matched to the instance: subspace mode when a prior is present,
    /// noisy stop criterion when the instance is noisy.
    pub fn for_instance<S: Real>(inst: &ProblemInstance<S>) -> Self {
        let mode = if inst.prior().is_some() { Mode::Subspace } else { Mode::Ambient };
        Self { stop: StopCriteria::for_instance(inst), ..Self::new(mode) }
    }

    pub fn with_policy(mut self, policy: StepPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_stop(mut self, stop: StopCriteria) -> Self {
        self.stop = stop;
        self
    }

    pub fn with_order(mut self, order: UpdateOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_projection(mut self, project_each_step: bool) -> Self {
        self.project_each_step = project_each_step;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ObjectiveTol,
    IterateTol,
    MaxIters,
    ProjectionFailure,
    /// The objective became NaN or infinite; the last finite iterate is kept.
    NonFinite,
}

/// One logged iterate. Entry 0 is the initialization (zero steps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    pub iter: usize,
    pub f: f64,
    pub delta: f64,
    pub delta_f: f64,
    pub mu_signal: f64,
    pub mu_gain: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport<S> {
    /// Final iterate in the solver's parameterization.
    pub final_iterate: Iterate<S>,
    /// Final signal in `Rⁿ` (lifted through `Z` in subspace mode).
    pub signal_estimate: Array1<S>,
    /// Final gains in `Rᵐ`.
    pub gain_estimate: Array1<S>,
    /// `iterations + 1` entries.
    pub trajectory: Vec<TrajectoryEntry>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl<S: Real> SolverReport<S> {
    pub fn final_value(&self) -> f64 {
        self.trajectory.last().map(|e| e.f).unwrap_or(f64::NAN)
    }

    pub fn converged(&self) -> bool {
        matches!(self.stop_reason, StopReason::ObjectiveTol | StopReason::IterateTol)
    }

    /// Median of `μ_γ/μ_ξ` over iterations where both steps are positive.
    pub fn median_step_ratio(&self) -> Option<f64> {
        let mut ratios: Vec<f64> = self
            .trajectory
            .iter()
            .filter(|e| e.mu_signal > 0.0 && e.mu_gain > 0.0)
            .map(|e| e.mu_gain / e.mu_signal)
            .collect();
        if ratios.is_empty() {
            return None;
        }
        ratios.sort_by(|a, b| a.total_cmp(b));
        Some(ratios[ratios.len() / 2])
    }
}

/// Back-projection start: `ξ₀ = (1/mp) Σ_l A_lᵀ y_l` (or `ζ₀` through `Z`) with flat gains.
pub fn initialize<S: Real>(obj: &Objective<'_, S>) -> Iterate<S> {
    let mut signal = obj.adjoint(obj.stacked_measurements());
    signal.mapv_inplace(|v| v * obj.scale());
    let m = obj.instance().m();
    match obj.mode() {
        Mode::Ambient => Iterate::ambient(signal, Array1::ones(m)),
        Mode::Subspace => {
            let h = obj.instance().prior().expect("subspace objective has a prior").gain.rank();
            let mut beta = Array1::zeros(h);
            beta[0] = S::lit(m as f64).sqrt();
            Iterate::subspace(signal, beta)
        }
    }
}

/// `argmin_μ ‖r − μ w‖² = ⟨r, w⟩ / ‖w‖²`, zero for a vanishing direction.
fn exact_step<S: Real>(residual: &Array1<S>, w: &Array1<S>) -> S {
    let den = norm_sq(w.view());
    if den > S::zero() && den.is_finite() {
        residual.dot(w) / den
    } else {
        S::zero()
    }
}

/// Sensor-space image of a gain-block direction.
fn gain_direction<S: Real>(obj: &Objective<'_, S>, d_gain: &Array1<S>) -> Array1<S> {
    match obj.mode() {
        Mode::Ambient => d_gain.clone(),
        Mode::Subspace => obj.instance().prior().expect("prior").gain.synthesize(d_gain),
    }
}

/// `γ ∘ (A d)` stacked over snapshots.
fn tiled_product<S: Real>(gains: &Array1<S>, stacked: &Array1<S>) -> Array1<S> {
    let m = gains.len();
    let mut out = stacked.clone();
    for chunk in out.exact_chunks_mut(m) {
        ndarray::Zip::from(chunk).and(gains).for_each(|o, &g| *o *= g);
    }
    out
}

/// Exact line-search steps for both blocks at `it`, each along its own (projected)
/// gradient with the other block frozen. A block with zero gradient gets step 0.
pub fn line_search_steps<S: Real>(obj: &Objective<'_, S>, it: &Iterate<S>) -> Result<(S, S)> {
    let ev = obj.evaluate(it)?;
    let grad = obj.grad_from(&ev, true);
    let w_signal = tiled_product(&ev.gains, &obj.forward(&grad.signal));
    let w_gain = tiled_product(&gain_direction(obj, &grad.gain), &ev.forward);
    Ok((exact_step(&ev.residual, &w_signal), exact_step(&ev.residual, &w_gain)))
}

fn relative_change<S: Real>(new: &Array1<S>, old: &Array1<S>) -> f64 {
    let d = norm((new - old).view()).to_f64_lossy();
    let o = norm(old.view()).to_f64_lossy();
    if o > 0.0 {
        d / o
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Exact recomputation interval for the incrementally updated forward product.
const REFRESH_EVERY: usize = 64;

struct Projector<'s, S: Real> {
    mode: Mode,
    rho: S,
    method: ProjectionMethod,
    basis: Option<&'s ndarray::Array2<S>>,
}

impl<S: Real> Projector<'_, S> {
    fn apply(&self, gain: &Array1<S>) -> Result<Array1<S>> {
        match self.mode {
            Mode::Ambient => project_g_rho_with(gain.view(), self.rho, self.method),
            Mode::Subspace => project_b_rho_with(gain.view(), self.basis.expect("basis").view(), self.rho, self.method),
        }
    }
}

/// Runs projected gradient descent from the back-projection initializer.
pub fn solve<S: Real>(inst: &ProblemInstance<S>, opts: &SolverOptions) -> Result<SolverReport<S>> {
    opts.policy.validate()?;
    opts.stop.validate()?;
    let start = Instant::now();
    let obj = Objective::new(inst, opts.mode)?;
    let projector = Projector {
        mode: opts.mode,
        rho: S::lit(inst.truth().rho),
        method: opts.projection,
        basis: inst.prior().map(|p| p.gain.matrix()),
    };

    let mut it = initialize(&obj);
    let mut ev = obj.evaluate(&it)?;
    let log = |it: &Iterate<S>, ev: &Evaluation<S>, iter: usize, mu: (f64, f64)| -> Result<TrajectoryEntry> {
        Ok(TrajectoryEntry {
            iter,
            f: ev.value.to_f64_lossy(),
            delta: obj.delta(it)?.to_f64_lossy(),
            delta_f: obj.delta_f(it)?.to_f64_lossy(),
            mu_signal: mu.0,
            mu_gain: mu.1,
        })
    };
    let mut trajectory = vec![log(&it, &ev, 0, (0.0, 0.0))?];
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;

    let finish = |it: Iterate<S>, trajectory: Vec<TrajectoryEntry>, stop_reason, iterations| -> Result<SolverReport<S>> {
        let lifted = it.lift(inst.prior())?;
        Ok(SolverReport {
            final_iterate: it,
            signal_estimate: lifted.signal,
            gain_estimate: lifted.gain,
            trajectory,
            stop_reason,
            iterations,
            wall_time: start.elapsed(),
        })
    };

    if let Some(tol) = opts.stop.objective_tol {
        if ev.value.to_f64_lossy() < tol {
            return finish(it, trajectory, StopReason::ObjectiveTol, 0);
        }
    }

    for iter in 1..=opts.stop.max_iters {
        // signal step
        let g_signal = obj.signal_gradient(&ev);
        let a_dir = obj.forward(&g_signal);
        let mu_signal = match opts.policy {
            StepPolicy::Fixed { mu_signal, .. } => S::lit(mu_signal),
            StepPolicy::LineSearch => exact_step(&ev.residual, &tiled_product(&ev.gains, &a_dir)),
        };
        let next_signal = &it.signal - &(&g_signal * mu_signal);
        let next_forward = &ev.forward - &(&a_dir * mu_signal);

        // gain step, from the same point (Jacobi) or after the signal step (Gauss–Seidel)
        let gain_ev = match opts.order {
            UpdateOrder::Jacobi => None,
            UpdateOrder::GaussSeidel => Some(obj.evaluation_from(ev.gains.clone(), next_forward.clone())),
        };
        let base = gain_ev.as_ref().unwrap_or(&ev);
        let g_gain = obj.gain_gradient(base, true);
        let mu_gain = match opts.policy {
            StepPolicy::Fixed { mu_gain, .. } => S::lit(mu_gain),
            StepPolicy::LineSearch => {
                exact_step(&base.residual, &tiled_product(&gain_direction(&obj, &g_gain), &base.forward))
            }
        };
        let mut next_gain = &it.gain - &(&g_gain * mu_gain);
        if opts.project_each_step {
            let projected = match projector.apply(&next_gain) {
                Ok(v) => v,
                Err(Error::ProjectionFailure { .. }) => {
                    stop_reason = StopReason::ProjectionFailure;
                    break;
                }
                Err(e) => return Err(e),
            };
            // A clipped step can overshoot and cycle on the boundary; search the
            // feasible segment towards the projected point instead.
            next_gain = match opts.policy {
                StepPolicy::LineSearch if projected != next_gain => {
                    let seg = &projected - &it.gain;
                    let w = tiled_product(&gain_direction(&obj, &seg), &base.forward);
                    let t = exact_step(&base.residual, &-w).max(S::zero()).min(S::one());
                    &it.gain + &(&seg * t)
                }
                _ => projected,
            };
        }

        let next = Iterate { signal: next_signal, gain: next_gain, mode: opts.mode };
        let next_ev = if iter % REFRESH_EVERY == 0 {
            obj.evaluate(&next)?
        } else {
            obj.evaluation_from(obj.gains(&next), next_forward)
        };
        if !next_ev.value.is_finite() || !mu_signal.is_finite() || !mu_gain.is_finite() {
            stop_reason = StopReason::NonFinite;
            break;
        }
        let change = relative_change(&next.signal, &it.signal).max(relative_change(&next.gain, &it.gain));
        it = next;
        ev = next_ev;
        iterations = iter;

        if let Some(tol) = opts.stop.objective_tol {
            if ev.value.to_f64_lossy() < tol {
                // confirm on an exact evaluation before stopping
                ev = obj.evaluate(&it)?;
                if ev.value.to_f64_lossy() < tol {
                    trajectory.push(log(&it, &ev, iter, (mu_signal.to_f64_lossy(), mu_gain.to_f64_lossy()))?);
                    stop_reason = StopReason::ObjectiveTol;
                    break;
                }
            }
        }
        trajectory.push(log(&it, &ev, iter, (mu_signal.to_f64_lossy(), mu_gain.to_f64_lossy()))?);
        if let Some(tol) = opts.stop.iterate_tol {
            if change < tol {
                stop_reason = StopReason::IterateTol;
                break;
            }
        }
    }
    finish(it, trajectory, stop_reason, iterations)
}

/// Signal estimate that ignores the gains: minimizes `(1/2mp) Σ_l ‖A_l ξ − y_l‖²`
/// (through `Z` in subspace mode) by conjugate gradients on the normal equations,
/// relative tolerance `1e-10`, at most `10·d` iterations. Returned in `Rⁿ`.
pub fn least_squares_baseline<S: Real>(inst: &ProblemInstance<S>, mode: Mode) -> Result<Array1<S>> {
    let obj = Objective::new(inst, mode)?;
    let rhs = obj.adjoint(obj.stacked_measurements());
    let d = rhs.len();
    let normal = |v: &Array1<S>| obj.adjoint(&obj.forward(v));
    let mut x = Array1::zeros(d);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rs = norm_sq(r.view());
    let target = S::lit(1e-10) * norm(rhs.view());
    for _ in 0..10 * d {
        if rs.sqrt() <= target {
            break;
        }
        let ap = normal(&p);
        let den = p.dot(&ap);
        if den <= S::zero() {
            break;
        }
        let alpha = rs / den;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rs_new = norm_sq(r.view());
        p = &r + &(&p * (rs_new / rs));
        rs = rs_new;
    }
    Ok(match mode {
        Mode::Ambient => x,
        Mode::Subspace => inst.prior().expect("checked by objective").signal.synthesize(&x),
    })
}

/// Floor reported for an exact estimate.
pub const RMSE_FLOOR_DB: f64 = -300.0;

/// Relative errors `(‖x̄ − x‖/‖x‖, ‖ḡ − g‖/‖g‖)` after rescaling the estimate pair
/// by `α = m / Σḡ` (gains times `α`, signal divided by `α`).
pub fn relative_errors<S: Real>(
    signal: &Array1<S>,
    gains: &Array1<S>,
    x: &Array1<S>,
    g: &Array1<S>,
) -> Result<(f64, f64)> {
    if signal.len() != x.len() || gains.len() != g.len() {
        return Err(Error::ShapeMismatch("estimate and truth lengths differ".into()));
    }
    let nx = norm(x.view()).to_f64_lossy();
    let ng = norm(g.view()).to_f64_lossy();
    if nx == 0.0 || ng == 0.0 {
        return Err(Error::ZeroVector);
    }
    let sum = gains.sum().to_f64_lossy();
    let alpha = if sum != 0.0 && sum.is_finite() { g.len() as f64 / sum } else { 1.0 };
    let ex = signal
        .iter()
        .zip(x.iter())
        .map(|(&a, &b)| (a.to_f64_lossy() / alpha - b.to_f64_lossy()).powi(2))
        .sum::<f64>()
        .sqrt()
        / nx;
    let eg = gains
        .iter()
        .zip(g.iter())
        .map(|(&a, &b)| (a.to_f64_lossy() * alpha - b.to_f64_lossy()).powi(2))
        .sum::<f64>()
        .sqrt()
        / ng;
    Ok((ex, eg))
}

/// `20 log₁₀ max{‖x̄ − x‖/‖x‖, ‖ḡ − g‖/‖g‖}` after scale normalization, floored at −300 dB.
pub fn rmse_max<S: Real>(signal: &Array1<S>, gains: &Array1<S>, x: &Array1<S>, g: &Array1<S>) -> Result<f64> {
    let (ex, eg) = relative_errors(signal, gains, x, g)?;
    let worst = ex.max(eg);
    if worst.is_nan() {
        return Ok(f64::INFINITY);
    }
    Ok(if worst > 0.0 { (20.0 * worst.log10()).max(RMSE_FLOOR_DB) } else { RMSE_FLOOR_DB })
}

/// Largest scale-normalized relative error of a solver report against the instance truth.
pub fn max_relative_error<S: Real>(inst: &ProblemInstance<S>, report: &SolverReport<S>) -> Result<f64> {
    let t = inst.truth();
    let (ex, eg) = relative_errors(&report.signal_estimate, &report.gain_estimate, &t.x, &t.g)?;
    Ok(if ex.is_nan() || eg.is_nan() { f64::INFINITY } else { ex.max(eg) })
}

/// Contraction factor `η = 1 − 31ρ − 4δ` of the small-step analysis; a usable step
/// scale is of order `η/m`. Diagnostic only, never enforced.
pub fn step_bound_eta(rho: f64, delta: f64) -> f64 {
    1.0 - 31.0 * rho - 4.0 * delta
}
