//! Small dense helpers: Gram–Schmidt, orthonormality residuals, symmetric spectra.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::scalar::Real;

pub fn norm<S: Real>(v: ArrayView1<'_, S>) -> S {
    v.dot(&v).sqrt()
}

pub fn norm_sq<S: Real>(v: ArrayView1<'_, S>) -> S {
    v.dot(&v)
}

pub fn frobenius<S: Real>(m: ArrayView2<'_, S>) -> S {
    m.iter().fold(S::zero(), |acc, &v| acc + v * v).sqrt()
}

/// `‖MᵀM − I‖_F` for a column-orthonormal candidate `M`.
pub fn orthonormality_residual<S: Real>(m: ArrayView2<'_, S>) -> S {
    let gram = m.t().dot(&m);
    let r = gram.nrows();
    let mut acc = S::zero();
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { S::one() } else { S::zero() };
            let d = gram[[i, j]] - target;
            acc += d * d;
        }
    }
    acc.sqrt()
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Columns of `candidates` are orthonormalized in order against `fixed` (assumed
/// orthonormal) and against previously accepted columns. Candidates whose residual
/// norm falls below `drop_tol` times their original norm are discarded, which makes
/// the routine usable for completing a partial basis.
pub fn gram_schmidt<S: Real>(
    candidates: ArrayView2<'_, S>,
    fixed: Option<ArrayView2<'_, S>>,
    drop_tol: S,
) -> Array2<S> {
    let d = candidates.nrows();
    let mut accepted: Vec<Array1<S>> = Vec::with_capacity(candidates.ncols());
    let fixed_cols: Vec<Array1<S>> = fixed
        .map(|f| f.axis_iter(Axis(1)).map(|c| c.to_owned()).collect())
        .unwrap_or_default();
    for col in candidates.axis_iter(Axis(1)) {
        let original = norm(col);
        if original == S::zero() {
            continue;
        }
        let mut v = col.to_owned();
        for _pass in 0..2 {
            for q in fixed_cols.iter() {
                let c = q.dot(&v);
                v.scaled_add(-c, q);
            }
            for q in accepted.iter() {
                let c = q.dot(&v);
                v.scaled_add(-c, q);
            }
        }
        let nv = norm(v.view());
        if nv <= drop_tol * original {
            continue;
        }
        v.mapv_inplace(|x| x / nv);
        accepted.push(v);
    }
    let mut out = Array2::zeros((d, accepted.len()));
    for (j, v) in accepted.iter().enumerate() {
        out.column_mut(j).assign(v);
    }
    out
}

/// Orthonormal basis (m × (m−1)) of the zero-sum hyperplane `1⊥`.
pub fn ones_complement_basis<S: Real>(m: usize) -> Array2<S> {
    let dc = Array2::from_elem((m, 1), S::one() / S::lit(m as f64).sqrt());
    let eye = Array2::<S>::eye(m);
    gram_schmidt(eye.view(), Some(dc.view()), S::lit(1e-8))
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues<S: Real>(m: ArrayView2<'_, S>) -> Vec<f64> {
    let n = m.nrows();
    let mat = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| {
        0.5 * (m[[i, j]].to_f64_lossy() + m[[j, i]].to_f64_lossy())
    });
    let eig = nalgebra::SymmetricEigen::new(mat);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// `max_{i,j} |M_ij − M_ji|`.
pub fn asymmetry<S: Real>(m: ArrayView2<'_, S>) -> S {
    let n = m.nrows();
    let mut worst = S::zero();
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
        }
    }
    worst
}
