//! The least-squares calibration objective: value, gradients, Hessians, their
//! expectations over the sensing ensemble, and the distances used to measure
//! progress toward the true pair.

use std::borrow::Cow;

use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, ones_complement_basis, symmetric_eigenvalues};
use crate::model::{GroundTruth, ProblemInstance, SubspacePrior};
use crate::scalar::Real;

/// Dense Hessians are refused beyond this order.
pub const HESSIAN_MAX_ORDER: usize = 2048;

/// Parameterization of an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Signal `ξ ∈ Rⁿ`, gains `γ ∈ Rᵐ`.
    Ambient,
    /// Signal coefficients `ζ ∈ Rᵏ`, gain coefficients `β ∈ Rʰ` with `β₁ = √m`.
    Subspace,
}

/// Current estimate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate<S> {
    pub signal: Array1<S>,
    pub gain: Array1<S>,
    pub mode: Mode,
}

impl<S: Real> Iterate<S> {
    pub fn ambient(signal: Array1<S>, gain: Array1<S>) -> Self {
        Self { signal, gain, mode: Mode::Ambient }
    }

    pub fn subspace(signal: Array1<S>, gain: Array1<S>) -> Self {
        Self { signal, gain, mode: Mode::Subspace }
    }

    /// The true pair in the requested parameterization.
    pub fn truth(truth: &GroundTruth<S>, mode: Mode) -> Result<Self> {
        match mode {
            Mode::Ambient => Ok(Self::ambient(truth.x.clone(), truth.g.clone())),
            Mode::Subspace => match (&truth.z, &truth.b) {
                (Some(z), Some(b)) => Ok(Self::subspace(z.clone(), b.clone())),
                _ => Err(Error::ModeMismatch("truth has no subspace coefficients".into())),
            },
        }
    }

    /// `(Zζ, Bβ)` for subspace iterates; a clone otherwise.
    pub fn lift(&self, prior: Option<&SubspacePrior<S>>) -> Result<Self> {
        match self.mode {
            Mode::Ambient => Ok(self.clone()),
            Mode::Subspace => {
                let pr = prior.ok_or_else(|| Error::ModeMismatch("subspace iterate needs a prior to lift".into()))?;
                check_len("signal coefficients", self.signal.len(), pr.signal.rank())?;
                check_len("gain coefficients", self.gain.len(), pr.gain.rank())?;
                Ok(Self::ambient(pr.signal.synthesize(&self.signal), pr.gain.synthesize(&self.gain)))
            }
        }
    }
}

/// Gradient blocks matching an [`Iterate`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradPair<S> {
    pub signal: Array1<S>,
    pub gain: Array1<S>,
}

impl<S: Real> GradPair<S> {
    pub fn norm(&self) -> S {
        (norm_sq(self.signal.view()) + norm_sq(self.gain.view())).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.signal.iter().chain(self.gain.iter()).all(|v| v.is_finite())
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!("{what} has length {got}, expected {want}")))
    }
}

/// Forward quantities at an iterate, reused by gradients and line searches.
#[derive(Debug, Clone)]
pub struct Evaluation<S> {
    /// Gains in sensor space (`γ`, or `Bβ`).
    pub gains: Array1<S>,
    /// Stacked `A_l ξ` over snapshots (length `p·m`).
    pub forward: Array1<S>,
    /// Stacked residuals `diag(γ)A_l ξ − y_l`.
    pub residual: Array1<S>,
    pub value: S,
}

/// Objective bound to one instance and one parameterization.
///
/// Holds the stacked sensing operator (`(p·m) × n`, or the product with the
/// signal basis in subspace mode) and the stacked measurements.
#[derive(Debug, Clone)]
pub struct Objective<'a, S: Real> {
    inst: &'a ProblemInstance<S>,
    mode: Mode,
    op: Cow<'a, Array2<S>>,
    y: Array1<S>,
    scale: S,
}

/// `P_{1⊥}` applied in place.
fn center_in_place<S: Real>(v: &mut Array1<S>) {
    if v.is_empty() {
        return;
    }
    let mean = v.sum() / S::lit(v.len() as f64);
    v.mapv_inplace(|t| t - mean);
}

impl<'a, S: Real> Objective<'a, S> {
    pub fn new(inst: &'a ProblemInstance<S>, mode: Mode) -> Result<Self> {
        let stacked = inst.sensing().stacked();
        let op = match mode {
            Mode::Ambient => stacked,
            Mode::Subspace => {
                let prior = inst
                    .prior()
                    .ok_or_else(|| Error::ModeMismatch("subspace mode requires a subspace prior".into()))?;
                Cow::Owned(stacked.dot(prior.signal.matrix()))
            }
        };
        let (m, p) = (inst.m(), inst.p());
        let mut y = Array1::zeros(m * p);
        for l in 0..p {
            y.slice_mut(s![l * m..(l + 1) * m]).assign(&inst.y().column(l));
        }
        let scale = S::one() / S::lit((m * p) as f64);
        Ok(Self { inst, mode, op, y, scale })
    }

    pub fn instance(&self) -> &'a ProblemInstance<S> {
        self.inst
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// `1/(mp)`.
    pub fn scale(&self) -> S {
        self.scale
    }

    /// Stacked measurements (length `p·m`).
    pub fn stacked_measurements(&self) -> &Array1<S> {
        &self.y
    }

    fn prior(&self) -> &SubspacePrior<S> {
        self.inst.prior().expect("checked at construction")
    }

    fn check(&self, it: &Iterate<S>) -> Result<()> {
        if it.mode != self.mode {
            return Err(Error::ModeMismatch(format!("iterate is {:?}, objective is {:?}", it.mode, self.mode)));
        }
        let (ns, ng) = match self.mode {
            Mode::Ambient => (self.inst.n(), self.inst.m()),
            Mode::Subspace => (self.prior().signal.rank(), self.prior().gain.rank()),
        };
        check_len("signal block", it.signal.len(), ns)?;
        check_len("gain block", it.gain.len(), ng)
    }

    /// Sensor-space gains of an iterate.
    pub fn gains(&self, it: &Iterate<S>) -> Array1<S> {
        match self.mode {
            Mode::Ambient => it.gain.clone(),
            Mode::Subspace => self.prior().gain.synthesize(&it.gain),
        }
    }

    /// Stacked `A_l ξ` (through `Z` in subspace mode).
    pub fn forward(&self, signal: &Array1<S>) -> Array1<S> {
        self.op.dot(signal)
    }

    /// Adjoint of [`Self::forward`].
    pub fn adjoint(&self, v: &Array1<S>) -> Array1<S> {
        self.op.t().dot(v)
    }

    /// Residual and value from a precomputed forward product.
    pub fn evaluation_from(&self, gains: Array1<S>, forward: Array1<S>) -> Evaluation<S> {
        let m = self.inst.m();
        let mut residual = forward.clone();
        for (chunk, ychunk) in residual.exact_chunks_mut(m).into_iter().zip(self.y.exact_chunks(m)) {
            Zip::from(chunk).and(&gains).and(ychunk).for_each(|r, &g, &y| *r = g * *r - y);
        }
        let value = norm_sq(residual.view()) * self.scale / S::lit(2.0);
        Evaluation { gains, forward, residual, value }
    }

    pub fn evaluate(&self, it: &Iterate<S>) -> Result<Evaluation<S>> {
        self.check(it)?;
        Ok(self.evaluation_from(self.gains(it), self.forward(&it.signal)))
    }

    /// `f = (1/2mp) Σ_l ‖diag(γ)A_l ξ − y_l‖²`.
    pub fn value(&self, it: &Iterate<S>) -> Result<S> {
        Ok(self.evaluate(it)?.value)
    }

    /// Gradient of the signal block from an evaluation.
    pub fn signal_gradient(&self, ev: &Evaluation<S>) -> Array1<S> {
        let m = self.inst.m();
        let mut weighted = ev.residual.clone();
        for chunk in weighted.exact_chunks_mut(m) {
            Zip::from(chunk).and(&ev.gains).for_each(|r, &g| *r *= g);
        }
        let mut grad = self.adjoint(&weighted);
        grad.mapv_inplace(|v| v * self.scale);
        grad
    }

    /// Sensor-space gain gradient `(1/mp) Σ_l diag(A_l ξ) r_l`, optionally centred.
    pub fn sensor_gain_gradient(&self, ev: &Evaluation<S>, project: bool) -> Array1<S> {
        let m = self.inst.m();
        let mut grad = Array1::zeros(m);
        for (u, r) in ev.forward.exact_chunks(m).into_iter().zip(ev.residual.exact_chunks(m)) {
            Zip::from(&mut grad).and(u).and(r).for_each(|g, &u, &r| *g += u * r);
        }
        grad.mapv_inplace(|v| v * self.scale);
        if project {
            center_in_place(&mut grad);
        }
        grad
    }

    /// Gain-block gradient in the iterate's own parameterization. In subspace mode the
    /// projected version has its DC coefficient zeroed.
    pub fn gain_gradient(&self, ev: &Evaluation<S>, project: bool) -> Array1<S> {
        match self.mode {
            Mode::Ambient => self.sensor_gain_gradient(ev, project),
            Mode::Subspace => {
                let sensor = self.sensor_gain_gradient(ev, false);
                let mut g = self.prior().gain.analyze(&sensor);
                if project {
                    g[0] = S::zero();
                }
                g
            }
        }
    }

    pub fn grad_from(&self, ev: &Evaluation<S>, project_gain: bool) -> GradPair<S> {
        GradPair { signal: self.signal_gradient(ev), gain: self.gain_gradient(ev, project_gain) }
    }

    pub fn grad(&self, it: &Iterate<S>, project_gain: bool) -> Result<GradPair<S>> {
        let ev = self.evaluate(it)?;
        Ok(self.grad_from(&ev, project_gain))
    }

    /// The noise-dependent part of the gradient:
    /// `−(1/mp) Σ_l A_lᵀ diag(γ) ν_l` and `−(1/mp) Σ_l diag(A_l ξ) ν_l`, mapped to the
    /// iterate's parameterization. Zero for noiseless instances.
    pub fn noise_gradient_terms(&self, it: &Iterate<S>, project_gain: bool) -> Result<GradPair<S>> {
        self.check(it)?;
        let (ns, ng) = (it.signal.len(), it.gain.len());
        let noise = match self.inst.noise() {
            Some(nz) => nz,
            None => return Ok(GradPair { signal: Array1::zeros(ns), gain: Array1::zeros(ng) }),
        };
        let (m, p) = (self.inst.m(), self.inst.p());
        let gains = self.gains(it);
        let forward = self.forward(&it.signal);
        let mut weighted = Array1::zeros(m * p);
        let mut sensor = Array1::zeros(m);
        for l in 0..p {
            for i in 0..m {
                let nu = noise[[i, l]];
                weighted[l * m + i] = -gains[i] * nu;
                sensor[i] -= forward[l * m + i] * nu;
            }
        }
        let mut signal = self.adjoint(&weighted);
        signal.mapv_inplace(|v| v * self.scale);
        sensor.mapv_inplace(|v| v * self.scale);
        let gain = match self.mode {
            Mode::Ambient => {
                if project_gain {
                    center_in_place(&mut sensor);
                }
                sensor
            }
            Mode::Subspace => {
                let mut g = self.prior().gain.analyze(&sensor);
                if project_gain {
                    g[0] = S::zero();
                }
                g
            }
        };
        Ok(GradPair { signal, gain })
    }

    /// Dense finite-sample Hessian in ambient coordinates, order `n + m`. The
    /// projected variant is `blockdiag(I, P_{1⊥}) H blockdiag(I, P_{1⊥})`.
    pub fn hessian(&self, it: &Iterate<S>, projected: bool) -> Result<Array2<S>> {
        if self.mode != Mode::Ambient {
            return Err(Error::ModeMismatch("Hessians are formed in ambient coordinates".into()));
        }
        self.check(it)?;
        let (n, m, p) = (self.inst.n(), self.inst.m(), self.inst.p());
        if n + m > HESSIAN_MAX_ORDER {
            return Err(Error::TooLarge(n + m));
        }
        let gamma = &it.gain;
        let forward = self.forward(&it.signal);
        let a = self.op.as_ref();
        let mut weighted = a.clone();
        let mut cross_w = Array2::zeros((m * p, 1));
        for l in 0..p {
            for i in 0..m {
                let row = l * m + i;
                let gi = gamma[i];
                weighted.row_mut(row).mapv_inplace(|v| v * gi * gi);
                cross_w[[row, 0]] = S::lit(2.0) * gi * forward[row] - self.y[row];
            }
        }
        let mut h = Array2::zeros((n + m, n + m));
        let hxx = a.t().dot(&weighted);
        h.slice_mut(s![..n, ..n]).assign(&hxx.mapv(|v| v * self.scale));
        let mut hxg = Array2::<S>::zeros((n, m));
        let mut hgg = Array1::<S>::zeros(m);
        for l in 0..p {
            for i in 0..m {
                let row = l * m + i;
                let w = cross_w[[row, 0]];
                hxg.column_mut(i).scaled_add(w, &a.row(row));
                hgg[i] += forward[row] * forward[row];
            }
        }
        hxg.mapv_inplace(|v| v * self.scale);
        h.slice_mut(s![..n, n..]).assign(&hxg);
        h.slice_mut(s![n.., ..n]).assign(&hxg.t());
        for i in 0..m {
            h[[n + i, n + i]] = hgg[i] * self.scale;
        }
        if projected {
            project_hessian(&mut h, n);
        }
        Ok(h)
    }

    /// `Δ` against the instance truth, in the objective's parameterization.
    pub fn delta(&self, it: &Iterate<S>) -> Result<S> {
        delta(it, self.inst.truth())
    }

    /// `Δ_F` against the instance truth (subspace iterates are lifted first).
    pub fn delta_f(&self, it: &Iterate<S>) -> Result<S> {
        let amb = it.lift(self.inst.prior())?;
        let t = self.inst.truth();
        Ok(delta_f(&amb.signal, &amb.gain, &t.x, &t.g))
    }
}

/// Applies `blockdiag(I_n, P_{1⊥})` on both sides of a square matrix.
fn project_hessian<S: Real>(h: &mut Array2<S>, n: usize) {
    let total = h.nrows();
    // right multiplication: centre each row's gain part
    for mut row in h.axis_iter_mut(Axis(0)) {
        let mut tail = row.slice_mut(s![n..]);
        let mean = tail.sum() / S::lit((total - n) as f64);
        tail.mapv_inplace(|v| v - mean);
    }
    // left multiplication: centre each column's gain part
    for mut col in h.axis_iter_mut(Axis(1)) {
        let mut tail = col.slice_mut(s![n..]);
        let mean = tail.sum() / S::lit((total - n) as f64);
        tail.mapv_inplace(|v| v - mean);
    }
}

/// `Δ = ‖ξ − x‖² + (‖x‖²/m)‖γ − g‖²`; the subspace form uses `(ζ, z)` and `(β, b)`.
pub fn delta<S: Real>(it: &Iterate<S>, truth: &GroundTruth<S>) -> Result<S> {
    let (x, g) = match it.mode {
        Mode::Ambient => (&truth.x, &truth.g),
        Mode::Subspace => match (&truth.z, &truth.b) {
            (Some(z), Some(b)) => (z, b),
            _ => return Err(Error::ModeMismatch("truth has no subspace coefficients".into())),
        },
    };
    check_len("signal block", it.signal.len(), x.len())?;
    check_len("gain block", it.gain.len(), g.len())?;
    let m = S::lit(truth.m() as f64);
    let ds = norm_sq((&it.signal - x).view());
    let dg = norm_sq((&it.gain - g).view());
    Ok(ds + norm_sq(x.view()) / m * dg)
}

/// `Δ_F = (1/m)‖ξγᵀ − xgᵀ‖²_F`, evaluated without forming the outer products and
/// without the cancellation of the expanded form near the solution.
pub fn delta_f<S: Real>(xi: &Array1<S>, gamma: &Array1<S>, x: &Array1<S>, g: &Array1<S>) -> S {
    let m = S::lit(g.len() as f64);
    let dx = xi - x;
    let dg = gamma - g;
    let two = S::lit(2.0);
    let val = norm_sq(dx.view()) * norm_sq(gamma.view())
        + norm_sq(x.view()) * norm_sq(dg.view())
        + two * dx.dot(x) * gamma.dot(&dg);
    val.max(S::zero()) / m
}

/// Membership in the `(κ, ρ)`-neighbourhood: `Δ ≤ κ²‖x‖²` plus gain feasibility
/// (`γ ∈ G_ρ`, or `Bβ ∈ G_ρ` with `β₁ = √m` in subspace mode).
pub fn in_neighborhood<S: Real>(
    it: &Iterate<S>,
    truth: &GroundTruth<S>,
    kappa: f64,
    rho: f64,
    prior: Option<&SubspacePrior<S>>,
) -> Result<bool> {
    let d = delta(it, truth)?;
    let xnorm = match it.mode {
        Mode::Ambient => norm_sq(truth.x.view()),
        Mode::Subspace => norm_sq(truth.z.as_ref().expect("checked by delta").view()),
    };
    if d > S::lit(kappa * kappa) * xnorm {
        return Ok(false);
    }
    let gains = match it.mode {
        Mode::Ambient => it.gain.clone(),
        Mode::Subspace => {
            let pr = prior.ok_or_else(|| Error::ModeMismatch("subspace feasibility needs the gain basis".into()))?;
            let sqrt_m = S::lit(truth.m() as f64).sqrt();
            if (it.gain[0] - sqrt_m).abs() > S::lit(1e-12) * sqrt_m {
                return Ok(false);
            }
            pr.gain.synthesize(&it.gain)
        }
    };
    Ok(gain_feasible(gains.view(), rho))
}

/// `γ ∈ G_ρ` up to rounding: sum `m` to `1e-9` relative and `‖γ − 1‖_∞ ≤ ρ + 1e-10`.
pub fn gain_feasible<S: Real>(gains: ArrayView1<'_, S>, rho: f64) -> bool {
    let m = gains.len() as f64;
    let sum = gains.sum().to_f64_lossy();
    let dev = gains.iter().fold(0.0f64, |a, v| a.max((v.to_f64_lossy() - 1.0).abs()));
    (sum - m).abs() <= 1e-9 * m && dev <= rho + 1e-10
}

/// `E f = Δ_F / 2`.
pub fn expected_objective<S: Real>(truth: &GroundTruth<S>, it: &Iterate<S>) -> Result<S> {
    ambient_only(it)?;
    Ok(delta_f(&it.signal, &it.gain, &truth.x, &truth.g) / S::lit(2.0))
}

/// `E∇_ξ = (1/m)[‖γ‖²ξ − (γᵀg)x]`, `E∇_γ = (1/m)[‖ξ‖²γ − (ξᵀx)g]` (centred when projected,
/// which turns `γ, g` into the deviations `ε, e`).
pub fn expected_grad<S: Real>(truth: &GroundTruth<S>, it: &Iterate<S>, project_gain: bool) -> Result<GradPair<S>> {
    ambient_only(it)?;
    let m = S::lit(truth.m() as f64);
    let (xi, gamma) = (&it.signal, &it.gain);
    let signal = (xi * norm_sq(gamma.view()) - &truth.x * gamma.dot(&truth.g)) / m;
    let mut gain = (gamma * norm_sq(xi.view()) - &truth.g * xi.dot(&truth.x)) / m;
    if project_gain {
        center_in_place(&mut gain);
    }
    Ok(GradPair { signal, gain })
}

/// `E H = (1/m) [[‖γ‖² I, 2ξγᵀ − xgᵀ], [2γξᵀ − gxᵀ, ‖ξ‖² I]]`, optionally projected.
pub fn expected_hessian<S: Real>(truth: &GroundTruth<S>, it: &Iterate<S>, projected: bool) -> Result<Array2<S>> {
    ambient_only(it)?;
    let (n, mdim) = (truth.n(), truth.m());
    if n + mdim > HESSIAN_MAX_ORDER {
        return Err(Error::TooLarge(n + mdim));
    }
    check_len("signal block", it.signal.len(), n)?;
    check_len("gain block", it.gain.len(), mdim)?;
    let m = S::lit(mdim as f64);
    let (xi, gamma) = (&it.signal, &it.gain);
    let two = S::lit(2.0);
    let mut h = Array2::zeros((n + mdim, n + mdim));
    let gg = norm_sq(gamma.view()) / m;
    let xx = norm_sq(xi.view()) / m;
    for j in 0..n {
        h[[j, j]] = gg;
    }
    for i in 0..mdim {
        h[[n + i, n + i]] = xx;
    }
    for j in 0..n {
        for i in 0..mdim {
            let v = (two * xi[j] * gamma[i] - truth.x[j] * truth.g[i]) / m;
            h[[j, n + i]] = v;
            h[[n + i, j]] = v;
        }
    }
    if projected {
        project_hessian(&mut h, n);
    }
    Ok(h)
}

fn ambient_only<S: Real>(it: &Iterate<S>) -> Result<()> {
    if it.mode == Mode::Ambient {
        Ok(())
    } else {
        Err(Error::ModeMismatch("expectations are defined on ambient iterates; lift first".into()))
    }
}

/// Smallest eigenvalue of `Vᵀ H V` for `V = blockdiag(I_n, U)` with `U` an orthonormal
/// basis of `1⊥_m`: positive iff `H` is positive definite on `Rⁿ × 1⊥_m`.
pub fn restricted_min_eigenvalue<S: Real>(h: &Array2<S>, n: usize) -> f64 {
    let total = h.nrows();
    let m = total - n;
    let u = ones_complement_basis::<S>(m);
    let mut v = Array2::<S>::zeros((total, n + m - 1));
    for j in 0..n {
        v[[j, j]] = S::one();
    }
    v.slice_mut(s![n.., n..]).assign(&u);
    let restricted = v.t().dot(h).dot(&v);
    symmetric_eigenvalues(restricted.view())[0]
}

/// Largest `ρ` for which convexity in expectation holds on the `(κ, ρ)`-neighbourhood:
/// `1 − √3 κ / (√m (1 − κ))`.
pub fn convexity_rho_bound(m: usize, kappa: f64) -> f64 {
    1.0 - 3f64.sqrt() * kappa / ((m as f64).sqrt() * (1.0 - kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_instance, Dims};
    use crate::rng::Distribution;

    #[test]
    fn truth_is_a_zero_of_the_objective() {
        let inst = make_instance::<f64>(Dims::new(6, 5, 3), Distribution::Gaussian, 0.4, 2, None, None).unwrap();
        let obj = Objective::new(&inst, Mode::Ambient).unwrap();
        let it = Iterate::truth(inst.truth(), Mode::Ambient).unwrap();
        assert!(obj.value(&it).unwrap() < 1e-28);
        let gp = obj.grad(&it, true).unwrap();
        assert!(gp.norm() < 1e-14);
    }

    #[test]
    fn zero_signal_gives_half_energy() {
        let inst = make_instance::<f64>(Dims::new(4, 3, 2), Distribution::Gaussian, 0.2, 9, None, None).unwrap();
        let obj = Objective::new(&inst, Mode::Ambient).unwrap();
        let it = Iterate::ambient(Array1::zeros(4), Array1::from_elem(3, 0.7));
        let want = inst.y().iter().map(|v| v * v).sum::<f64>() / 12.0;
        assert!((obj.value(&it).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn scaled_signal_expected_gradient() {
        let inst = make_instance::<f64>(Dims::new(5, 4, 1), Distribution::Gaussian, 0.3, 1, None, None).unwrap();
        let t = inst.truth();
        let it = Iterate::ambient(&t.x * 2.0, t.g.clone());
        let gp = expected_grad(t, &it, false).unwrap();
        let want = &t.x * (t.g.dot(&t.g) / 4.0);
        assert!((&gp.signal - &want).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn expected_hessian_at_origin_is_indefinite() {
        let inst = make_instance::<f64>(Dims::new(3, 4, 1), Distribution::Gaussian, 0.3, 4, None, None).unwrap();
        let it = Iterate::ambient(Array1::zeros(3), Array1::zeros(4));
        let h = expected_hessian(inst.truth(), &it, false).unwrap();
        let eig = symmetric_eigenvalues(h.view());
        assert!(eig[0] < 0.0 && *eig.last().unwrap() > 0.0);
    }

    #[test]
    fn mode_mismatch_is_reported() {
        let inst = make_instance::<f64>(Dims::new(3, 4, 1), Distribution::Gaussian, 0.3, 4, None, None).unwrap();
        assert!(matches!(Objective::new(&inst, Mode::Subspace), Err(Error::ModeMismatch(_))));
        let obj = Objective::new(&inst, Mode::Ambient).unwrap();
        let bad = Iterate::subspace(Array1::zeros(3), Array1::zeros(4));
        assert!(obj.value(&bad).is_err());
        let short = Iterate::ambient(Array1::zeros(2), Array1::zeros(4));
        assert!(matches!(obj.value(&short), Err(Error::ShapeMismatch(_))));
    }
}
