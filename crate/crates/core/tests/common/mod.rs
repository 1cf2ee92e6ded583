//! Oracles shared by the integration tests. Everything here is written against
//! the public API only and recomputes quantities from first principles.
#![allow(dead_code)]

use blindcal::ndarray::{Array1, Array2};
use blindcal::{Iterate, Mode, Objective, ProblemInstance};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    let d = rand_distr::StandardNormal;
    (0..len).map(|_| rng.sample::<f64, _>(d)).collect()
}

pub fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// `f` from the definition: `(1/2mp) Σ_l Σ_i (γ_i ⟨a_il, ξ⟩ − y_il)²`, looping over
/// rows of each sensing matrix. Signal and gains are given in ambient coordinates.
pub fn naive_objective(inst: &ProblemInstance<f64>, xi: &Array1<f64>, gamma: &Array1<f64>) -> f64 {
    let (m, p) = (inst.m(), inst.p());
    let mut total = 0.0;
    for l in 0..p {
        let a = inst.sensing_matrix(l);
        for i in 0..m {
            let r = gamma[i] * a.row(i).dot(xi) - inst.y()[[i, l]];
            total += r * r;
        }
    }
    total / (2.0 * (m * p) as f64)
}

/// `f` at an iterate in its own parameterization, through the naive formula.
pub fn naive_value(inst: &ProblemInstance<f64>, it: &Iterate<f64>) -> f64 {
    match it.mode {
        Mode::Ambient => naive_objective(inst, &it.signal, &it.gain),
        Mode::Subspace => {
            let pr = inst.prior().expect("subspace iterate needs a prior");
            naive_objective(inst, &pr.signal.synthesize(&it.signal), &pr.gain.synthesize(&it.gain))
        }
    }
}

/// Central differences of `f` along every coordinate of one block.
pub fn fd_block(f: impl Fn(&Array1<f64>) -> f64, at: &Array1<f64>, step: f64) -> Array1<f64> {
    let mut out = Array1::zeros(at.len());
    for j in 0..at.len() {
        let h = step * at[j].abs().max(1.0);
        let mut plus = at.clone();
        plus[j] += h;
        let mut minus = at.clone();
        minus[j] -= h;
        out[j] = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    out
}

/// Central difference along a direction.
pub fn fd_directional(f: impl Fn(&Array1<f64>) -> f64, at: &Array1<f64>, dir: &Array1<f64>, step: f64) -> f64 {
    (f(&(at + &(dir * step))) - f(&(at - &(dir * step)))) / (2.0 * step)
}

/// Relative error `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &Array1<f64>, b: &Array1<f64>, floor: f64) -> f64 {
    norm(&(a - b)) / norm(b).max(floor)
}

/// Largest relative discrepancy between analytic gradient blocks and central
/// differences of the naive objective, plus the worst directional mismatch of the
/// projected gain block along random feasible directions.
pub fn gradient_discrepancy(inst: &ProblemInstance<f64>, mode: Mode, it: &Iterate<f64>, seed: u64) -> (f64, f64) {
    let obj = Objective::new(inst, mode).unwrap();
    let g = obj.grad(it, false).unwrap();
    let gp = obj.grad(it, true).unwrap();
    let step = 1e-6;
    let fs = |s: &Array1<f64>| naive_value(inst, &Iterate { signal: s.clone(), ..it.clone() });
    let fg = |v: &Array1<f64>| naive_value(inst, &Iterate { gain: v.clone(), ..it.clone() });
    let fd_s = fd_block(fs, &it.signal, step);
    let fd_g = fd_block(fg, &it.gain, step);
    let floor = 1e-8;
    let block = rel_err(&g.signal, &fd_s, floor).max(rel_err(&g.gain, &fd_g, floor));

    let mut r = rng(seed);
    let mut directional = 0.0f64;
    for _ in 0..3 {
        let mut d = gaussian_vec(&mut r, it.gain.len());
        match mode {
            Mode::Ambient => {
                let mean = d.mean().unwrap();
                d.mapv_inplace(|v| v - mean);
            }
            Mode::Subspace => d[0] = 0.0,
        }
        d /= norm(&d);
        let fd = fd_directional(fg, &it.gain, &d, step);
        let an = gp.gain.dot(&d);
        let scale = norm(&fd_g).max(floor);
        directional = directional.max((an - fd).abs() / scale);
        // the projected block must itself be a feasible direction
        let leak = match mode {
            Mode::Ambient => gp.gain.sum().abs(),
            Mode::Subspace => gp.gain[0].abs(),
        };
        directional = directional.max(leak / scale);
    }
    (block, directional)
}

/// Random iterate near but not at the truth, in the given parameterization.
pub fn random_iterate(inst: &ProblemInstance<f64>, mode: Mode, seed: u64) -> Iterate<f64> {
    let mut r = rng(seed);
    let t = inst.truth();
    match mode {
        Mode::Ambient => {
            let signal = &t.x + &(gaussian_vec(&mut r, inst.n()) * 0.3);
            let mut dev = gaussian_vec(&mut r, inst.m()) * 0.1;
            let mean = dev.mean().unwrap();
            dev.mapv_inplace(|v| v - mean);
            Iterate::ambient(signal, &t.g + &dev)
        }
        Mode::Subspace => {
            let z = t.z.as_ref().unwrap();
            let b = t.b.as_ref().unwrap();
            let signal = z + &(gaussian_vec(&mut r, z.len()) * 0.3);
            let mut gain = b + &(gaussian_vec(&mut r, b.len()) * 0.1);
            gain[0] = b[0];
            Iterate::subspace(signal, gain)
        }
    }
}

/// Exact solution of `min ‖u − u0‖²` subject to `E u = f` and `|W u − c|_i ≤ ρ`, by
/// enumerating every assignment of the box rows to {inactive, upper, lower}, solving
/// the equality-constrained problem for each, and keeping the best feasible point.
/// Exponential in the number of rows; meant for `rows ≤ 6`.
pub fn brute_force_qp(
    u0: &DVector<f64>,
    eq: Option<(&DMatrix<f64>, &DVector<f64>)>,
    w: &DMatrix<f64>,
    c: &DVector<f64>,
    rho: f64,
) -> DVector<f64> {
    let rows = w.nrows();
    let dim = u0.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(rows as u32) {
        let mut e_rows: Vec<DVector<f64>> = Vec::new();
        let mut f_vals: Vec<f64> = Vec::new();
        if let Some((e, f)) = eq {
            for i in 0..e.nrows() {
                e_rows.push(e.row(i).transpose());
                f_vals.push(f[i]);
            }
        }
        let mut k = code;
        for i in 0..rows {
            match k % 3 {
                1 => {
                    e_rows.push(w.row(i).transpose());
                    f_vals.push(c[i] + rho);
                }
                2 => {
                    e_rows.push(w.row(i).transpose());
                    f_vals.push(c[i] - rho);
                }
                _ => {}
            }
            k /= 3;
        }
        let u = if e_rows.is_empty() {
            u0.clone()
        } else {
            let e = DMatrix::from_fn(e_rows.len(), dim, |r, col| e_rows[r][col]);
            let f = DVector::from_vec(f_vals);
            let gram = &e * e.transpose();
            let pinv = match gram.clone().pseudo_inverse(1e-12) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let u = u0 - e.transpose() * (pinv * (&e * u0 - &f));
            if (&e * &u - &f).amax() > 1e-9 {
                continue; // inconsistent active set
            }
            u
        };
        let slack = (w * &u - c).amax();
        if slack > rho + 1e-11 {
            continue;
        }
        let cost = (&u - u0).norm_squared();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, u));
        }
    }
    best.expect("the constraint set is non-empty").1
}

/// Brute-force projection onto `G_ρ`.
pub fn oracle_g_rho(gamma: &Array1<f64>, rho: f64) -> Array1<f64> {
    let m = gamma.len();
    let u0 = DVector::from_iterator(m, gamma.iter().copied());
    let e = DMatrix::from_element(1, m, 1.0);
    let f = DVector::from_element(1, m as f64);
    let w = DMatrix::identity(m, m);
    let c = DVector::from_element(m, 1.0);
    let u = brute_force_qp(&u0, Some((&e, &f)), &w, &c, rho);
    Array1::from_iter(u.iter().copied())
}

/// Brute-force projection onto `B_ρ` for a gain basis with DC first column.
pub fn oracle_b_rho(beta: &Array1<f64>, basis: &Array2<f64>, rho: f64) -> Array1<f64> {
    let (m, h) = basis.dim();
    let u0 = DVector::from_iterator(h, beta.iter().copied());
    let mut e = DMatrix::zeros(1, h);
    e[(0, 0)] = 1.0;
    let f = DVector::from_element(1, (m as f64).sqrt());
    let w = DMatrix::from_fn(m, h, |i, j| basis[[i, j]]);
    let c = DVector::from_element(m, 1.0);
    let u = brute_force_qp(&u0, Some((&e, &f)), &w, &c, rho);
    Array1::from_iter(u.iter().copied())
}

pub fn sup_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}
