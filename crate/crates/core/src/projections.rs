//! Euclidean projections onto the gain constraint sets and the auxiliary
//! matrix subspace used to verify the lifted geometry.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::scalar::Real;

/// Sweep cap for the alternating schemes.
pub const MAX_SWEEPS: usize = 10_000;
/// Stop once successive iterates move by less than this.
pub const CHANGE_TOL: f64 = 1e-12;
/// A run that hits the sweep cap is accepted only below this feasibility residual.
pub const FAILURE_RESIDUAL: f64 = 1e-8;

/// Algorithm used for the two-set projections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    /// Exact Euclidean projection onto the intersection.
    #[default]
    Dykstra,
    /// Plain alternating projections: a point of the intersection, not necessarily the nearest.
    Pocs,
}

/// `P_{1⊥} v = v − mean(v)·1`.
pub fn project_centered<S: Real>(v: ArrayView1<'_, S>) -> Array1<S> {
    if v.is_empty() {
        return v.to_owned();
    }
    let mean = v.sum() / S::lit(v.len() as f64);
    v.mapv(|t| t - mean)
}

/// Entrywise clamp to `[−ρ, ρ]`.
pub fn project_linf_ball<S: Real>(v: ArrayView1<'_, S>, rho: S) -> Array1<S> {
    v.mapv(|t| t.max(-rho).min(rho))
}

fn sup_norm<S: Real>(v: ArrayView1<'_, S>) -> S {
    v.iter().fold(S::zero(), |a, t| a.max(t.abs()))
}

fn check_rho<S: Real>(rho: S) -> Result<()> {
    if rho >= S::zero() && rho < S::one() {
        Ok(())
    } else {
        Err(Error::InvalidRho(rho.to_f64_lossy()))
    }
}

/// Alternates between a linear projector `first` and the ℓ∞ box, Dykstra-corrected
/// unless `method` is POCS. Returns the box-side iterate.
fn alternate<S: Real>(
    start: Array1<S>,
    rho: S,
    method: ProjectionMethod,
    first: impl Fn(&Array1<S>) -> Array1<S>,
) -> Result<Array1<S>> {
    let tol = S::lit(CHANGE_TOL).max(S::epsilon() * S::lit(64.0));
    let give_up = S::lit(FAILURE_RESIDUAL).max(S::sqrt_eps());
    let mut x = start;
    let mut p = Array1::zeros(x.len());
    let mut q = Array1::zeros(x.len());
    for sweep in 1..=MAX_SWEEPS {
        let (y, x_new) = match method {
            ProjectionMethod::Dykstra => {
                let y = first(&(&x + &p));
                p = &x + &p - &y;
                let x_new = project_linf_ball((&y + &q).view(), rho);
                q = &y + &q - &x_new;
                (y, x_new)
            }
            ProjectionMethod::Pocs => {
                let y = first(&x);
                let x_new = project_linf_ball(y.view(), rho);
                (y, x_new)
            }
        };
        let change = norm((&x_new - &x).view());
        x = x_new;
        // Dykstra's iterate can stall for a sweep while the corrections still move,
        // so a small step alone does not mean the two sets agree.
        let residual = norm((&x - &y).view());
        if change <= tol && residual <= tol {
            return Ok(x);
        }
        if sweep == MAX_SWEEPS && residual > give_up {
            return Err(Error::ProjectionFailure { sweeps: sweep, residual: residual.to_f64_lossy() });
        }
    }
    Ok(x)
}

/// Projection onto `G_ρ = 1 + (1⊥ ∩ ρB_∞)`.
pub fn project_g_rho<S: Real>(gamma: ArrayView1<'_, S>, rho: S) -> Result<Array1<S>> {
    project_g_rho_with(gamma, rho, ProjectionMethod::Dykstra)
}

pub fn project_g_rho_with<S: Real>(gamma: ArrayView1<'_, S>, rho: S, method: ProjectionMethod) -> Result<Array1<S>> {
    check_rho(rho)?;
    let m = gamma.len();
    if m == 0 {
        return Err(Error::InvalidDims("empty gain vector".into()));
    }
    let eps = gamma.mapv(|t| t - S::one());
    let mf = S::lit(m as f64);
    let feas_tol = S::epsilon() * S::lit(16.0) * mf;
    if (eps.sum()).abs() <= feas_tol && sup_norm(eps.view()) <= rho {
        return Ok(gamma.to_owned());
    }
    let mut x = alternate(eps, rho, method, |v| project_centered(v.view()))?;
    // The box iterate carries an O(tol) sum defect; absorb it on the free coordinates.
    let free: Vec<usize> = (0..m).filter(|&i| x[i].abs() < rho).collect();
    if !free.is_empty() {
        let shift = x.sum() / S::lit(free.len() as f64);
        for &i in &free {
            x[i] = (x[i] - shift).max(-rho).min(rho);
        }
    }
    Ok(x.mapv(|t| t + S::one()))
}

/// Projection onto `B_ρ = {β : Bβ ∈ G_ρ}` for a gain basis whose first column is DC.
pub fn project_b_rho<S: Real>(beta: ArrayView1<'_, S>, basis: ArrayView2<'_, S>, rho: S) -> Result<Array1<S>> {
    project_b_rho_with(beta, basis, rho, ProjectionMethod::Dykstra)
}

pub fn project_b_rho_with<S: Real>(
    beta: ArrayView1<'_, S>,
    basis: ArrayView2<'_, S>,
    rho: S,
    method: ProjectionMethod,
) -> Result<Array1<S>> {
    check_rho(rho)?;
    let (m, h) = basis.dim();
    if beta.len() != h || h == 0 {
        return Err(Error::ShapeMismatch(format!("beta has length {}, basis is {m} x {h}", beta.len())));
    }
    let mut out = Array1::zeros(h);
    out[0] = S::lit(m as f64).sqrt();
    if h == 1 {
        return Ok(out);
    }
    let comp = basis.slice(ndarray::s![.., 1..]);
    let coeffs = beta.slice(ndarray::s![1..]).to_owned();
    let w = comp.dot(&coeffs);
    if sup_norm(w.view()) <= rho {
        out.slice_mut(ndarray::s![1..]).assign(&coeffs);
        return Ok(out);
    }
    let x = alternate(w, rho, method, |v| comp.dot(&comp.t().dot(v)))?;
    let mut u = comp.t().dot(&x);
    // Pulling back can overshoot the box by O(tol); shrink toward zero if so.
    let sup = sup_norm(comp.dot(&u).view());
    if sup > rho && sup > S::zero() {
        let excess = (sup - rho) / sup;
        if excess > S::lit(FAILURE_RESIDUAL) {
            return Err(Error::ProjectionFailure { sweeps: MAX_SWEEPS, residual: (sup - rho).to_f64_lossy() });
        }
        u.mapv_inplace(|t| t * (rho / sup));
    }
    out.slice_mut(ndarray::s![1..]).assign(&u);
    Ok(out)
}

/// `P_M(Q) = ẑẑᵀQ + Qb̂b̂ᵀ − ẑẑᵀQb̂b̂ᵀ`, the orthogonal projector onto
/// `M = {u b̂ᵀ + ẑ vᵀ}` for unit vectors `ẑ` and `b̂`.
pub fn project_m<S: Real>(q: ArrayView2<'_, S>, z_hat: ArrayView1<'_, S>, b_hat: ArrayView1<'_, S>) -> Result<Array2<S>> {
    let (k, h) = q.dim();
    if z_hat.len() != k || b_hat.len() != h {
        return Err(Error::ShapeMismatch(format!(
            "Q is {k} x {h}, z_hat has {}, b_hat has {}",
            z_hat.len(),
            b_hat.len()
        )));
    }
    let tol = S::lit(1e-10).max(S::sqrt_eps());
    for v in [z_hat, b_hat] {
        let nv = norm(v);
        if (nv - S::one()).abs() > tol {
            return Err(Error::NonUnit(nv.to_f64_lossy()));
        }
    }
    let ztq = z_hat.dot(&q); // length h
    let qb = q.dot(&b_hat); // length k
    let c = ztq.dot(&b_hat);
    let mut out = Array2::zeros((k, h));
    for i in 0..k {
        for j in 0..h {
            out[[i, j]] = z_hat[i] * ztq[j] + qb[i] * b_hat[j] - z_hat[i] * c * b_hat[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2};

    #[test]
    fn centered_examples() {
        assert_eq!(project_centered(arr1(&[3.0, 1.0]).view()), arr1(&[1.0, -1.0]));
        assert!(project_centered(Array1::<f64>::ones(5).view()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_example() {
        assert_eq!(project_linf_ball(arr1(&[2.0, -3.0]).view(), 1.0), arr1(&[1.0, -1.0]));
    }

    #[test]
    fn g_rho_two_sensor_example() {
        let out = project_g_rho(arr1(&[1.5f64, 0.5]).view(), 0.3).unwrap();
        assert!((out[0] - 1.3).abs() < 1e-12 && (out[1] - 0.7).abs() < 1e-12);
        let feasible = arr1(&[1.1, 0.9, 1.0]);
        assert_eq!(project_g_rho(feasible.view(), 0.2).unwrap(), feasible);
        assert!(project_g_rho(feasible.view(), 1.0).is_err());
    }

    #[test]
    fn g_rho_output_feasible() {
        let v = arr1(&[3.0f64, -2.0, 0.4, 1.7, 1.0]);
        for method in [ProjectionMethod::Dykstra, ProjectionMethod::Pocs] {
            let out = project_g_rho_with(v.view(), 0.5, method).unwrap();
            assert!((out.sum() - 5.0).abs() < 1e-10);
            assert!(out.iter().all(|&t| (t - 1.0).abs() <= 0.5 + 1e-10));
        }
    }

    #[test]
    fn b_rho_pins_dc_coefficient() {
        let r = 1.0 / 2f64.sqrt();
        let b = arr2(&[[r, r], [r, -r]]);
        let out = project_b_rho(arr1(&[0.0, 5.0]).view(), b.view(), 0.25).unwrap();
        assert!((out[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((out[1] - 0.25 / r).abs() < 1e-10);
    }

    #[test]
    fn m_projector_examples() {
        let z = arr1(&[0.6f64, 0.8]);
        let b = arr1(&[0.0, 1.0, 0.0]);
        let zb = arr2(&[[0.0, 0.6, 0.0], [0.0, 0.8, 0.0]]);
        let out = project_m(zb.view(), z.view(), b.view()).unwrap();
        for (a, c) in out.iter().zip(zb.iter()) {
            assert!((a - c).abs() < 1e-15);
        }
        let perp = arr2(&[[0.8, 0.0, 0.0], [-0.6, 0.0, 0.0]]);
        assert!(project_m(perp.view(), z.view(), b.view()).unwrap().iter().all(|v: &f64| v.abs() < 1e-15));
        assert!(matches!(project_m(zb.view(), arr1(&[1.0, 1.0]).view(), b.view()), Err(Error::NonUnit(_))));
    }
}
