//! Orthonormal bases for the signal and gain subspace priors, and basis coherence.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_schmidt, ones_complement_basis, orthonormality_residual};
use crate::rng::{rng_from_seed, standard_normal};
use crate::scalar::Real;

/// Provenance of an [`OrthonormalBasis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Dct2Selected,
    RandomOrthonormal,
    IdOffset,
    GainDct,
    WaveletHaar2D,
    Identity,
    Custom,
}

impl BasisKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            BasisKind::Dct2Selected => 0,
            BasisKind::RandomOrthonormal => 1,
            BasisKind::IdOffset => 2,
            BasisKind::GainDct => 3,
            BasisKind::WaveletHaar2D => 4,
            BasisKind::Identity => 5,
            BasisKind::Custom => 6,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => BasisKind::Dct2Selected,
            1 => BasisKind::RandomOrthonormal,
            2 => BasisKind::IdOffset,
            3 => BasisKind::GainDct,
            4 => BasisKind::WaveletHaar2D,
            5 => BasisKind::Identity,
            6 => BasisKind::Custom,
            _ => return None,
        })
    }
}

/// Gain-basis families compared in the coherence experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainBasisKind {
    /// DC column plus `h − 1` randomly selected non-DC type-II DCT columns.
    Dct,
    /// Identity-like basis with a negative offset; attains the maximal coherence.
    IdOffset,
    /// DC column plus a random rotation of an orthonormal basis of `1⊥`.
    RandomRotated,
    /// The `h` lowest-frequency atoms of the separable 2-D DCT of a square sensor grid.
    Dct2dLowpass,
}

impl GainBasisKind {
    pub fn label(self) -> &'static str {
        match self {
            GainBasisKind::Dct => "dct",
            GainBasisKind::IdOffset => "id_offset",
            GainBasisKind::RandomRotated => "random_rotated",
            GainBasisKind::Dct2dLowpass => "dct2d_lowpass",
        }
    }
}

/// Signal-basis families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalBasisKind {
    /// Gram–Schmidt orthonormalized Gaussian columns.
    Random,
    /// Coarsest atoms of the 2-D Haar wavelet basis of a square image.
    Haar2d,
    /// First `k` canonical vectors.
    Identity,
}

/// Column-orthonormal `d × r` matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis<S> {
    matrix: Array2<S>,
    kind: BasisKind,
    includes_dc: bool,
}

impl<S: Real> OrthonormalBasis<S> {
    /// Validates orthonormality (residual at most `sqrt(eps)`) and wraps the matrix.
    pub fn new(matrix: Array2<S>, kind: BasisKind) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 || matrix.ncols() > matrix.nrows() {
            return Err(Error::InvalidDims(format!(
                "basis must be d x r with 1 <= r <= d, got {:?}",
                matrix.dim()
            )));
        }
        let res = orthonormality_residual(matrix.view());
        if res.is_nan() || res > S::sqrt_eps() {
            return Err(Error::NotOrthonormal(res.to_f64_lossy()));
        }
        let includes_dc = first_column_is_dc(matrix.view());
        Ok(Self { matrix, kind, includes_dc })
    }

    /// Loads an arbitrary user basis.
    pub fn custom(matrix: Array2<S>) -> Result<Self> {
        Self::new(matrix, BasisKind::Custom)
    }

    pub fn matrix(&self) -> &Array2<S> {
        &self.matrix
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn includes_dc(&self) -> bool {
        self.includes_dc
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Subspace dimension `r`.
    pub fn rank(&self) -> usize {
        self.matrix.ncols()
    }

    /// Columns after the DC column (`B⊥`); the whole matrix when there is no DC column.
    pub fn complement(&self) -> ArrayView2<'_, S> {
        if self.includes_dc {
            self.matrix.slice(s![.., 1..])
        } else {
            self.matrix.view()
        }
    }

    /// `B v`.
    pub fn synthesize(&self, coeffs: &Array1<S>) -> Array1<S> {
        self.matrix.dot(coeffs)
    }

    /// `Bᵀ v`.
    pub fn analyze(&self, v: &Array1<S>) -> Array1<S> {
        self.matrix.t().dot(v)
    }

    pub fn coherence(&self) -> Result<S> {
        coherence(self.matrix.view())
    }

    pub fn orthonormality_residual(&self) -> S {
        orthonormality_residual(self.matrix.view())
    }
}

fn first_column_is_dc<S: Real>(m: ArrayView2<'_, S>) -> bool {
    let d = m.nrows();
    let dc = S::one() / S::lit(d as f64).sqrt();
    let tol = S::epsilon() * S::lit(1e4);
    m.column(0).iter().all(|&v| (v - dc).abs() <= tol)
}

fn dct2_matrix<S: Real>(d: usize) -> Array2<S> {
    let scale0 = 1.0 / (d as f64).sqrt();
    let scale = (2.0 / d as f64).sqrt();
    Array2::from_shape_fn((d, d), |(i, j)| {
        let v = if j == 0 {
            scale0
        } else {
            scale
                * (std::f64::consts::PI / (2.0 * d as f64) * j as f64 * (2 * i + 1) as f64).cos()
        };
        S::lit(v)
    })
}

/// Full `d × d` type-II DCT matrix; column 0 is the DC vector.
pub fn dct2_basis<S: Real>(d: usize) -> Result<OrthonormalBasis<S>> {
    if d < 1 {
        return Err(Error::InvalidDims("DCT dimension must be >= 1".into()));
    }
    OrthonormalBasis::new(dct2_matrix(d), BasisKind::Dct2Selected)
}

/// Identity basis: the first `k` canonical vectors of `R^d`.
pub fn identity_basis<S: Real>(d: usize, k: usize) -> Result<OrthonormalBasis<S>> {
    if k < 1 || k > d {
        return Err(Error::InvalidDims(format!("need 1 <= k <= d, got k={k}, d={d}")));
    }
    let mut m = Array2::zeros((d, k));
    for i in 0..k {
        m[[i, i]] = S::one();
    }
    OrthonormalBasis::new(m, BasisKind::Identity)
}

fn gaussian_matrix<S: Real>(rows: usize, cols: usize, seed: u64) -> Array2<S> {
    let mut rng = rng_from_seed(seed);
    let mut out = Array2::zeros((rows, cols));
    // column-major fill so that a k-column draw is a prefix of a (k+1)-column one
    for j in 0..cols {
        for i in 0..rows {
            out[[i, j]] = S::lit(standard_normal(&mut rng));
        }
    }
    out
}

/// `n × k` orthonormal basis from Gram–Schmidt on i.i.d. Gaussian columns.
pub fn random_signal_basis<S: Real>(n: usize, k: usize, seed: u64) -> Result<OrthonormalBasis<S>> {
    if k < 1 || k > n {
        return Err(Error::InvalidDims(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    // redraw on the (probability zero) event of a rank-deficient sample
    for attempt in 0..8u64 {
        let g = gaussian_matrix::<S>(n, k, seed.wrapping_add(attempt));
        let q = gram_schmidt(g.view(), None, S::lit(1e-6));
        if q.ncols() == k {
            return OrthonormalBasis::new(q, BasisKind::RandomOrthonormal);
        }
    }
    Err(Error::InvalidArgument("failed to draw a full-rank Gaussian matrix".into()))
}

/// `m × h` gain basis whose first column is `1_m/√m`.
pub fn gain_basis<S: Real>(m: usize, h: usize, kind: GainBasisKind, seed: u64) -> Result<OrthonormalBasis<S>> {
    if h < 2 || h > m {
        return Err(Error::InvalidDims(format!("gain basis needs 2 <= h <= m, got h={h}, m={m}")));
    }
    let dc = Array2::from_elem((m, 1), S::one() / S::lit(m as f64).sqrt());
    let mut rng = rng_from_seed(seed);
    let matrix = match kind {
        GainBasisKind::Dct => {
            let c = dct2_matrix::<S>(m);
            let mut picked: Vec<usize> = sample(&mut rng, m - 1, h - 1).into_iter().map(|i| i + 1).collect();
            picked.sort_unstable();
            let mut b = Array2::zeros((m, h));
            b.column_mut(0).assign(&c.column(0));
            for (j, &col) in picked.iter().enumerate() {
                b.column_mut(j + 1).assign(&c.column(col));
            }
            return OrthonormalBasis::new(b, BasisKind::GainDct);
        }
        GainBasisKind::IdOffset => {
            // U = [1/√m, √(m/(m−1))·(e_1 − 1/m)] completed by Gram–Schmidt on e_2..e_m.
            let mut u = Array2::zeros((m, 2));
            u.column_mut(0).assign(&dc.column(0));
            let scale = S::lit((m as f64 / (m as f64 - 1.0)).sqrt());
            let inv_m = S::one() / S::lit(m as f64);
            for i in 0..m {
                let e = if i == 0 { S::one() } else { S::zero() };
                u[[i, 1]] = scale * (e - inv_m);
            }
            let eye = Array2::<S>::eye(m);
            let rest = gram_schmidt(eye.slice(s![.., 1..]), Some(u.view()), S::lit(1e-8));
            let picked: Vec<usize> = if h > 2 {
                let mut p: Vec<usize> = sample(&mut rng, rest.ncols(), h - 2).into_vec();
                p.sort_unstable();
                p
            } else {
                Vec::new()
            };
            let mut b = Array2::zeros((m, h));
            b.column_mut(0).assign(&u.column(0));
            b.column_mut(1).assign(&u.column(1));
            for (j, &col) in picked.iter().enumerate() {
                b.column_mut(j + 2).assign(&rest.column(col));
            }
            b
        }
        GainBasisKind::RandomRotated => {
            let u = ones_complement_basis::<S>(m);
            let v = gaussian_matrix::<S>(m - 1, h - 1, rand::Rng::random(&mut rng));
            let v = gram_schmidt(v.view(), None, S::lit(1e-6));
            if v.ncols() != h - 1 {
                return Err(Error::InvalidArgument("rank-deficient random rotation".into()));
            }
            let rotated = u.dot(&v);
            let mut b = Array2::zeros((m, h));
            b.column_mut(0).assign(&dc.column(0));
            b.slice_mut(s![.., 1..]).assign(&rotated);
            // one extra pass to clean rounding drift from the product
            let cleaned = gram_schmidt(b.slice(s![.., 1..]), Some(dc.view()), S::lit(1e-6));
            b.slice_mut(s![.., 1..]).assign(&cleaned);
            return OrthonormalBasis::new(b, BasisKind::RandomOrthonormal);
        }
        GainBasisKind::Dct2dLowpass => return dct2d_lowpass_basis(m, h),
    };
    OrthonormalBasis::new(matrix, BasisKind::IdOffset)
}

/// Lowest-frequency `h` atoms of the separable 2-D DCT on a `side × side` grid
/// (`m = side²`), ordered by total frequency `u + v`, then by `u`. The DC atom is first.
pub fn dct2d_lowpass_basis<S: Real>(m: usize, h: usize) -> Result<OrthonormalBasis<S>> {
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m {
        return Err(Error::InvalidDims(format!("m = {m} is not a perfect square")));
    }
    if h < 1 || h > m {
        return Err(Error::InvalidDims(format!("need 1 <= h <= m, got h={h}")));
    }
    let c = dct2_matrix::<S>(side);
    let mut freqs: Vec<(usize, usize)> = (0..side).flat_map(|u| (0..side).map(move |v| (u, v))).collect();
    freqs.sort_by_key(|&(u, v)| (u + v, u));
    let mut b = Array2::zeros((m, h));
    for (j, &(u, v)) in freqs.iter().take(h).enumerate() {
        for r in 0..side {
            for col in 0..side {
                b[[r * side + col, j]] = c[[r, u]] * c[[col, v]];
            }
        }
    }
    OrthonormalBasis::new(b, BasisKind::GainDct)
}

/// First `k` atoms of the orthonormal 2-D Haar wavelet basis of a `side × side`
/// image, in coarse-to-fine order: the flat atom, then for each scale (coarsest
/// first) the horizontal, vertical and diagonal details, each scanned row-major
/// over block positions. Pixels are vectorized row-major.
pub fn haar2d_basis<S: Real>(side: usize, k: usize) -> Result<OrthonormalBasis<S>> {
    if side == 0 || !side.is_power_of_two() {
        return Err(Error::InvalidDims(format!("side = {side} is not a power of two")));
    }
    let d = side * side;
    if k < 1 || k > d {
        return Err(Error::InvalidDims(format!("need 1 <= k <= side^2, got k={k}")));
    }
    let mut b = Array2::<S>::zeros((d, k));
    b.column_mut(0).fill(S::one() / S::lit(side as f64));
    let mut col = 1;
    let mut blocks = 1;
    'levels: while blocks < side {
        let bs = side / blocks;
        let half = bs / 2;
        let amp = S::one() / S::lit(bs as f64);
        for detail in 0..3 {
            for bi in 0..blocks {
                for bj in 0..blocks {
                    if col == k {
                        break 'levels;
                    }
                    for r in 0..bs {
                        for c in 0..bs {
                            let sr = if r < half { S::one() } else { -S::one() };
                            let sc = if c < half { S::one() } else { -S::one() };
                            let sign = match detail {
                                0 => sc,
                                1 => sr,
                                _ => sr * sc,
                            };
                            b[[(bi * bs + r) * side + bj * bs + c, col]] = amp * sign;
                        }
                    }
                    col += 1;
                }
            }
        }
        blocks *= 2;
    }
    OrthonormalBasis::new(b, BasisKind::WaveletHaar2D)
}

/// `√(m/h) · max_i ‖row_i(B)‖₂` for a column-orthonormal `m × h` matrix.
pub fn coherence<S: Real>(b: ArrayView2<'_, S>) -> Result<S> {
    let res = orthonormality_residual(b);
    let tol = S::lit(1e-6).max(S::sqrt_eps());
    if res.is_nan() || res > tol {
        return Err(Error::NotOrthonormal(res.to_f64_lossy()));
    }
    let (m, h) = b.dim();
    let max_row = b
        .axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .fold(S::zero(), |a, v| a.max(v));
    Ok(S::lit((m as f64 / h as f64).sqrt()) * max_row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const SQ2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn dct_small_cases() {
        let one: OrthonormalBasis<f64> = dct2_basis(1).unwrap();
        assert_eq!(one.matrix(), &array![[1.0]]);
        let two: OrthonormalBasis<f64> = dct2_basis(2).unwrap();
        let expect = array![[1.0 / SQ2, 1.0 / SQ2], [1.0 / SQ2, -1.0 / SQ2]];
        for (a, b) in two.matrix().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(two.includes_dc());
        assert!(dct2_basis::<f64>(0).is_err());
    }

    #[test]
    fn dct_orthonormal_up_to_64() {
        for d in 1..=64 {
            let c: OrthonormalBasis<f64> = dct2_basis(d).unwrap();
            assert!(c.orthonormality_residual() < 1e-10, "d={d}");
            assert!((c.coherence().unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gain_basis_contract() {
        for kind in [GainBasisKind::Dct, GainBasisKind::IdOffset, GainBasisKind::RandomRotated] {
            for (m, h) in [(2, 2), (8, 3), (16, 16), (64, 16), (37, 5)] {
                let b: OrthonormalBasis<f64> = gain_basis(m, h, kind, 99).unwrap();
                assert_eq!(b.matrix().dim(), (m, h));
                assert!(b.orthonormality_residual() < 1e-10, "{kind:?} {m} {h}");
                assert!(b.includes_dc(), "{kind:?} {m} {h}");
                let mu = b.coherence().unwrap();
                let upper = (m as f64 / h as f64).sqrt();
                assert!(mu >= 1.0 - 1e-9 && mu <= upper + 1e-9, "{kind:?} mu={mu}");
                if kind == GainBasisKind::IdOffset {
                    assert!((mu - upper).abs() < 1e-9);
                }
                if kind == GainBasisKind::Dct {
                    assert!(mu < SQ2);
                }
            }
        }
        assert!(gain_basis::<f64>(4, 1, GainBasisKind::Dct, 0).is_err());
        assert!(gain_basis::<f64>(4, 5, GainBasisKind::Dct, 0).is_err());
    }

    #[test]
    fn coherence_hand_example() {
        let r3 = 1.0 / 3f64.sqrt();
        let b = array![[r3, 1.0 / SQ2], [r3, -1.0 / SQ2], [r3, 0.0]];
        let mu = coherence(b.view()).unwrap();
        assert!((mu - 1.25f64.sqrt()).abs() < 1e-12);
        let bad = array![[1.0, 1.0], [0.0, 0.0]];
        assert!(matches!(coherence(bad.view()), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn coherence_of_identity_selection() {
        let b: OrthonormalBasis<f64> = identity_basis(12, 3).unwrap();
        assert!((b.coherence().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn haar_side_two_is_full_orthonormal() {
        let b: OrthonormalBasis<f64> = haar2d_basis(2, 4).unwrap();
        let gram = b.matrix().t().dot(b.matrix());
        for i in 0..4 {
            for j in 0..4 {
                let t = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - t).abs() < 1e-15);
            }
        }
        assert!(b.includes_dc());
        let flat: OrthonormalBasis<f64> = haar2d_basis(8, 1).unwrap();
        assert!(flat.matrix().iter().all(|&v| (v - 0.125).abs() < 1e-15));
        assert!(haar2d_basis::<f64>(6, 3).is_err());
    }

    #[test]
    fn haar_large_prefix_orthonormal() {
        let b: OrthonormalBasis<f64> = haar2d_basis(16, 170).unwrap();
        assert!(b.orthonormality_residual() < 1e-10);
        let full: OrthonormalBasis<f64> = haar2d_basis(8, 64).unwrap();
        assert!(full.orthonormality_residual() < 1e-10);
    }

    #[test]
    fn random_signal_basis_repeatable() {
        let a: OrthonormalBasis<f64> = random_signal_basis(20, 20, 5).unwrap();
        let b: OrthonormalBasis<f64> = random_signal_basis(20, 20, 5).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        assert!(a.orthonormality_residual() < 1e-10);
        assert!(random_signal_basis::<f64>(3, 4, 0).is_err());
    }

    #[test]
    fn lowpass_dct2d_has_dc_first() {
        let b: OrthonormalBasis<f64> = dct2d_lowpass_basis(64, 10).unwrap();
        assert!(b.includes_dc());
        assert!(b.orthonormality_residual() < 1e-10);
    }
}
