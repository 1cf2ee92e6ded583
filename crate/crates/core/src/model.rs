//! Random problem instances: ground truth, sensing matrices, noise and measurements.

use std::borrow::Cow;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bases::{
    gain_basis, haar2d_basis, identity_basis, random_signal_basis, GainBasisKind, OrthonormalBasis,
    SignalBasisKind,
};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::rng::{
    derive_seed, rng_from_seed, standard_normal, Distribution, STREAM_GAIN, STREAM_GAIN_BASIS,
    STREAM_NOISE, STREAM_SENSING, STREAM_SIGNAL, STREAM_SIGNAL_BASIS,
};
use crate::scalar::Real;

/// Problem dimensions. `k` and `h` are present only with a subspace prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub k: Option<usize>,
    pub h: Option<usize>,
}

impl Dims {
    pub fn new(n: usize, m: usize, p: usize) -> Self {
        Self { n, m, p, k: None, h: None }
    }

    pub fn with_subspace(n: usize, m: usize, p: usize, k: usize, h: usize) -> Self {
        Self { n, m, p, k: Some(k), h: Some(h) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 {
            return Err(Error::InvalidDims(format!("n, m, p must be positive, got {self:?}")));
        }
        match (self.k, self.h) {
            (None, None) => Ok(()),
            (Some(k), Some(h)) => {
                if k == 0 || k > self.n {
                    Err(Error::InvalidDims(format!("need 1 <= k <= n, got k={k}, n={}", self.n)))
                } else if h == 0 || h > self.m {
                    Err(Error::InvalidDims(format!("need 1 <= h <= m, got h={h}, m={}", self.m)))
                } else {
                    Ok(())
                }
            }
            _ => Err(Error::InvalidDims("k and h must be given together".into())),
        }
    }

    pub fn has_subspace(&self) -> bool {
        self.k.is_some()
    }
}

/// Basis families used to build a subspace prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubspaceSpec {
    pub signal: SignalBasisKind,
    pub gain: GainBasisKind,
}

impl Default for SubspaceSpec {
    fn default() -> Self {
        Self { signal: SignalBasisKind::Random, gain: GainBasisKind::Dct }
    }
}

/// Known signal basis `Z` (n × k) and gain basis `B` (m × h, first column DC).
#[derive(Debug, Clone)]
pub struct SubspacePrior<S> {
    pub signal: OrthonormalBasis<S>,
    pub gain: OrthonormalBasis<S>,
}

impl<S: Real> SubspacePrior<S> {
    pub fn new(signal: OrthonormalBasis<S>, gain: OrthonormalBasis<S>) -> Result<Self> {
        if !gain.includes_dc() {
            return Err(Error::Subspace("gain basis must start with the DC column".into()));
        }
        Ok(Self { signal, gain })
    }

    pub fn build(dims: &Dims, spec: SubspaceSpec, seed: u64) -> Result<Self> {
        let (k, h) = match (dims.k, dims.h) {
            (Some(k), Some(h)) => (k, h),
            _ => return Err(Error::Subspace("subspace prior requires k and h".into())),
        };
        let zseed = derive_seed(seed, STREAM_SIGNAL_BASIS, 0);
        let signal = match spec.signal {
            SignalBasisKind::Random => random_signal_basis(dims.n, k, zseed)?,
            SignalBasisKind::Identity => identity_basis(dims.n, k)?,
            SignalBasisKind::Haar2d => {
                let side = (dims.n as f64).sqrt().round() as usize;
                if side * side != dims.n {
                    return Err(Error::Subspace(format!("n = {} is not a square image", dims.n)));
                }
                haar2d_basis(side, k)?
            }
        };
        let gain = gain_basis(dims.m, h, spec.gain, derive_seed(seed, STREAM_GAIN_BASIS, 0))
            .map_err(|e| Error::Subspace(e.to_string()))?;
        Self::new(signal, gain)
    }
}

/// Ground-truth signal and gains.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<S> {
    pub x: Array1<S>,
    pub g: Array1<S>,
    pub e: Array1<S>,
    pub rho: f64,
    pub z: Option<Array1<S>>,
    pub b: Option<Array1<S>>,
}

impl<S: Real> GroundTruth<S> {
    /// Wraps a user-supplied pair, checking `g ∈ G_ρ` with tolerance `1e-9` relative.
    pub fn new(x: Array1<S>, g: Array1<S>, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        let m = g.len();
        if m == 0 || x.is_empty() {
            return Err(Error::InvalidDims("empty signal or gain vector".into()));
        }
        let e = g.mapv(|v| v - S::one());
        let tol = S::lit(1e-9).max(S::sqrt_eps());
        let sum = g.sum();
        let mf = S::lit(m as f64);
        if ((sum - mf) / mf).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "gains must sum to m = {m}, got {}",
                sum.to_f64_lossy()
            )));
        }
        let dev = e.iter().fold(S::zero(), |a, v| a.max(v.abs()));
        if dev > S::lit(rho) + tol {
            return Err(Error::InvalidArgument(format!(
                "gain deviation {} exceeds rho = {rho}",
                dev.to_f64_lossy()
            )));
        }
        Ok(Self { x, g, e, rho, z: None, b: None })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.g.len()
    }
}

/// Snapshot sensing matrices, stored stacked or regenerated from a seed on demand.
/// Both representations hold identical values.
#[derive(Debug, Clone)]
pub enum SensingMatrices<S> {
    /// `(p·m) × n`; snapshot `l` occupies rows `l·m .. (l+1)·m`.
    Stored(Array2<S>),
    Seeded { seed: u64, dist: Distribution, m: usize, n: usize, p: usize },
}

impl<S: Real> SensingMatrices<S> {
    pub fn generate(seed: u64, dist: Distribution, m: usize, n: usize, p: usize, store: bool) -> Self {
        let seeded = SensingMatrices::Seeded { seed, dist, m, n, p };
        if store {
            SensingMatrices::Stored(seeded.stacked().into_owned())
        } else {
            seeded
        }
    }

    /// Wraps explicit matrices; each must be `m × n`.
    pub fn from_snapshots(mats: &[Array2<S>]) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::InvalidDims("no snapshots".into()))?;
        let (m, n) = first.dim();
        let mut stacked = Array2::zeros((m * mats.len(), n));
        for (l, a) in mats.iter().enumerate() {
            if a.dim() != (m, n) {
                return Err(Error::ShapeMismatch(format!("snapshot {l} is {:?}, expected {:?}", a.dim(), (m, n))));
            }
            stacked.slice_mut(s![l * m..(l + 1) * m, ..]).assign(a);
        }
        Ok(SensingMatrices::Stored(stacked))
    }

    pub fn from_stacked(stacked: Array2<S>, p: usize) -> Result<Self> {
        if p == 0 || !stacked.nrows().is_multiple_of(p) {
            return Err(Error::ShapeMismatch(format!("{} rows not divisible into {p} snapshots", stacked.nrows())));
        }
        Ok(SensingMatrices::Stored(stacked))
    }

    /// Per-snapshot `(m, n, p)`; `p_hint` is used only for stored matrices.
    fn shape(&self, p_hint: usize) -> (usize, usize, usize) {
        match self {
            SensingMatrices::Stored(a) => (a.nrows() / p_hint, a.ncols(), p_hint),
            SensingMatrices::Seeded { m, n, p, .. } => (*m, *n, *p),
        }
    }

    pub fn is_stored(&self) -> bool {
        matches!(self, SensingMatrices::Stored(_))
    }

    /// Snapshot `l` as an `m × n` matrix (borrowed when stored).
    pub fn snapshot(&self, l: usize, m: usize) -> Cow<'_, Array2<S>> {
        match self {
            SensingMatrices::Stored(a) => Cow::Owned(a.slice(s![l * m..(l + 1) * m, ..]).to_owned()),
            SensingMatrices::Seeded { seed, dist, m, n, .. } => {
                let mut rng = rng_from_seed(derive_seed(*seed, STREAM_SENSING, l as u64));
                Cow::Owned(Array2::from_shape_simple_fn((*m, *n), || S::lit(dist.sample(&mut rng))))
            }
        }
    }

    /// Snapshot `l` as a view when stored.
    pub fn snapshot_view(&self, l: usize, m: usize) -> Option<ArrayView2<'_, S>> {
        match self {
            SensingMatrices::Stored(a) => Some(a.slice(s![l * m..(l + 1) * m, ..])),
            SensingMatrices::Seeded { .. } => None,
        }
    }

    /// Stacked `(p·m) × n` matrix (materialized when seeded).
    pub fn stacked(&self) -> Cow<'_, Array2<S>> {
        match self {
            SensingMatrices::Stored(a) => Cow::Borrowed(a),
            SensingMatrices::Seeded { m, n, p, .. } => {
                let mut out = Array2::zeros((m * p, *n));
                for l in 0..*p {
                    out.slice_mut(s![l * m..(l + 1) * m, ..]).assign(&self.snapshot(l, *m));
                }
                Cow::Owned(out)
            }
        }
    }
}

/// Outcome of the advisory fourth-moment check on the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BernoulliCheck {
    Ok { fourth_power: f64 },
    Warning { fourth_power: f64, threshold: f64 },
}

impl BernoulliCheck {
    pub fn is_warning(&self) -> bool {
        matches!(self, BernoulliCheck::Warning { .. })
    }
}

/// Computes `‖x̂‖₄⁴` with `x̂ = x/‖x‖` and warns when it exceeds `1 − 1/(2n)`.
/// Needed only for sensing distributions whose fourth moment equals one.
pub fn check_bernoulli_restriction<S: Real>(x: ArrayView1<'_, S>) -> Result<BernoulliCheck> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidDims("the check needs n > 1".into()));
    }
    let nx = norm(x).to_f64_lossy();
    if nx == 0.0 {
        return Err(Error::ZeroVector);
    }
    let fourth_power: f64 = x.iter().map(|v| (v.to_f64_lossy() / nx).powi(4)).sum();
    let threshold = 1.0 - 0.5 / n as f64;
    Ok(if fourth_power > threshold {
        BernoulliCheck::Warning { fourth_power, threshold }
    } else {
        BernoulliCheck::Ok { fourth_power }
    })
}

/// Noise level `σ = 10^(−noise_db/20)`.
pub fn sigma_from_db(noise_db: f64) -> f64 {
    10f64.powf(-noise_db / 20.0)
}

pub fn db_from_sigma(sigma: f64) -> f64 {
    -20.0 * sigma.log10()
}

/// `y_{i,l} = g_i (a_{i,l}ᵀ x) + ν_{i,l}`, returned as an `m × p` matrix.
pub fn synthesize_measurements<S: Real>(
    truth: &GroundTruth<S>,
    sensing: &SensingMatrices<S>,
    p: usize,
    noise: Option<ArrayView2<'_, S>>,
) -> Result<Array2<S>> {
    let m = truth.m();
    let (sm, sn, sp) = match sensing {
        SensingMatrices::Stored(a) => {
            if a.nrows() != m * p {
                return Err(Error::ShapeMismatch(format!("sensing has {} rows, expected {}", a.nrows(), m * p)));
            }
            (m, a.ncols(), p)
        }
        other => other.shape(p),
    };
    if sm != m || sn != truth.n() || sp != p {
        return Err(Error::ShapeMismatch(format!(
            "sensing (m={sm}, n={sn}, p={sp}) vs truth (m={m}, n={}) and p={p}",
            truth.n()
        )));
    }
    if let Some(nz) = noise {
        if nz.dim() != (m, p) {
            return Err(Error::ShapeMismatch(format!("noise is {:?}, expected {:?}", nz.dim(), (m, p))));
        }
    }
    let mut y = Array2::zeros((m, p));
    for l in 0..p {
        let a = sensing.snapshot(l, m);
        let ax = a.dot(&truth.x);
        let mut col = y.column_mut(l);
        for i in 0..m {
            col[i] = truth.g[i] * ax[i];
        }
        if let Some(nz) = noise {
            col += &nz.column(l);
        }
    }
    Ok(y)
}

/// Complete blind-calibration instance; immutable once built.
#[derive(Debug, Clone)]
pub struct ProblemInstance<S> {
    dims: Dims,
    dist: Distribution,
    seed: u64,
    truth: GroundTruth<S>,
    sensing: SensingMatrices<S>,
    prior: Option<SubspacePrior<S>>,
    noise: Option<Array2<S>>,
    sigma: f64,
    y: Array2<S>,
    bernoulli: Option<BernoulliCheck>,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && (0.0..1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidRho(rho))
    }
}

fn unit_gaussian<S: Real>(len: usize, seed: u64) -> Array1<S> {
    let mut rng = rng_from_seed(seed);
    loop {
        let v: Array1<f64> = (0..len).map(|_| standard_normal(&mut rng)).collect();
        let nv = v.dot(&v).sqrt();
        if nv > 0.0 {
            return v.mapv(|t| S::lit(t / nv));
        }
    }
}

/// Zero-sum deviation with `‖e‖_∞ = ρ`, drawn from a point on the ρ-scaled ℓ∞ sphere.
fn ambient_deviation<S: Real>(m: usize, rho: f64, seed: u64) -> Array1<S> {
    if rho == 0.0 || m < 2 {
        return Array1::zeros(m);
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let mut v: Vec<f64> = (0..m).map(|_| rng.random_range(-rho..=rho)).collect();
        let face = rng.random_range(0..m);
        v[face] = if rng.random::<bool>() { rho } else { -rho };
        let mean = v.iter().sum::<f64>() / m as f64;
        v.iter_mut().for_each(|t| *t -= mean);
        let sup = v.iter().fold(0.0f64, |a, t| a.max(t.abs()));
        if sup > 0.0 {
            return v.iter().map(|t| S::lit(t * rho / sup)).collect();
        }
    }
}

fn noise_matrix<S: Real>(m: usize, p: usize, sigma: f64, seed: u64) -> Array2<S> {
    let mut rng = rng_from_seed(seed);
    let raw = Array2::from_shape_simple_fn((m, p), || standard_normal(&mut rng));
    let fro = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if fro > 0.0 { sigma * ((m * p) as f64).sqrt() / fro } else { 0.0 };
    raw.mapv(|v| S::lit(v * scale))
}

/// Builds a random instance. Each random ingredient comes from its own stream
/// derived from `seed`, so equal arguments give bit-identical instances.
pub fn make_instance<S: Real>(
    dims: Dims,
    dist: Distribution,
    rho: f64,
    seed: u64,
    subspace: Option<SubspaceSpec>,
    noise_db: Option<f64>,
) -> Result<ProblemInstance<S>> {
    dims.validate()?;
    check_rho(rho)?;
    let prior = match (subspace, dims.has_subspace()) {
        (Some(spec), true) => Some(SubspacePrior::build(&dims, spec, seed)?),
        (None, false) => None,
        (Some(_), false) => return Err(Error::Subspace("subspace spec given without k and h".into())),
        (None, true) => return Err(Error::Subspace("k and h given without a subspace spec".into())),
    };
    make_instance_with_prior(dims, dist, rho, seed, prior, noise_db, true)
}

/// As [`make_instance`] but with a prebuilt prior (or none) and a choice of
/// whether the sensing matrices are stored or regenerated on demand.
pub fn make_instance_with_prior<S: Real>(
    dims: Dims,
    dist: Distribution,
    rho: f64,
    seed: u64,
    prior: Option<SubspacePrior<S>>,
    noise_db: Option<f64>,
    store_sensing: bool,
) -> Result<ProblemInstance<S>> {
    check_rho(rho)?;
    let Dims { n, m, .. } = dims;
    let truth = match &prior {
        None => {
            let x = unit_gaussian::<S>(n, derive_seed(seed, STREAM_SIGNAL, 0));
            let e = ambient_deviation::<S>(m, rho, derive_seed(seed, STREAM_GAIN, 0));
            let g = e.mapv(|v| S::one() + v);
            GroundTruth { x, g, e, rho, z: None, b: None }
        }
        Some(pr) => subspace_truth(pr, rho, seed)?,
    };
    let dims = match &prior {
        Some(pr) => Dims { k: Some(pr.signal.rank()), h: Some(pr.gain.rank()), ..dims },
        None => Dims { k: None, h: None, ..dims },
    };
    let noise = match noise_db {
        Some(db) if !db.is_finite() => {
            return Err(Error::InvalidArgument(format!("noise level {db} dB is not finite")))
        }
        Some(db) => Some(noise_matrix::<S>(m, dims.p, sigma_from_db(db), derive_seed(seed, STREAM_NOISE, 0))),
        None => None,
    };
    let sensing = SensingMatrices::generate(seed, dist, m, n, dims.p, store_sensing);
    ProblemInstance::assemble(dims, dist, seed, truth, sensing, prior, noise)
}

fn subspace_truth<S: Real>(prior: &SubspacePrior<S>, rho: f64, seed: u64) -> Result<GroundTruth<S>> {
    let z = unit_gaussian::<S>(prior.signal.rank(), derive_seed(seed, STREAM_SIGNAL, 0));
    let x = prior.signal.synthesize(&z);
    let m = prior.gain.dim();
    let h = prior.gain.rank();
    let sqrt_m = S::lit(m as f64).sqrt();
    let mut b = Array1::zeros(h);
    b[0] = sqrt_m;
    let mut e = Array1::zeros(m);
    if rho > 0.0 && h > 1 {
        let dir = unit_gaussian::<S>(h - 1, derive_seed(seed, STREAM_GAIN, 0));
        let raw = prior.gain.complement().dot(&dir);
        let sup = raw.iter().fold(S::zero(), |a, v| a.max(v.abs()));
        if sup == S::zero() {
            return Err(Error::Subspace("gain complement produced a null deviation".into()));
        }
        let scale = S::lit(rho) / sup;
        b.slice_mut(s![1..]).assign(&dir.mapv(|v| v * scale));
        e = raw.mapv(|v| v * scale);
    }
    let g = e.mapv(|v| S::one() + v);
    Ok(GroundTruth { x, g, e, rho, z: Some(z), b: Some(b) })
}

impl<S: Real> ProblemInstance<S> {
    /// Assembles an instance from explicit parts; measurements are synthesized here.
    pub fn assemble(
        dims: Dims,
        dist: Distribution,
        seed: u64,
        truth: GroundTruth<S>,
        sensing: SensingMatrices<S>,
        prior: Option<SubspacePrior<S>>,
        noise: Option<Array2<S>>,
    ) -> Result<Self> {
        dims.validate()?;
        if truth.n() != dims.n || truth.m() != dims.m {
            return Err(Error::ShapeMismatch(format!(
                "truth is (n={}, m={}), dims are (n={}, m={})",
                truth.n(),
                truth.m(),
                dims.n,
                dims.m
            )));
        }
        if let Some(pr) = &prior {
            if pr.signal.dim() != dims.n || pr.gain.dim() != dims.m {
                return Err(Error::Subspace("basis dimensions do not match n and m".into()));
            }
            if dims.k != Some(pr.signal.rank()) || dims.h != Some(pr.gain.rank()) {
                return Err(Error::Subspace("basis ranks do not match k and h".into()));
            }
        }
        let y = synthesize_measurements(&truth, &sensing, dims.p, noise.as_ref().map(|v| v.view()))?;
        let sigma = noise
            .as_ref()
            .map(|nz| {
                let fro = nz.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
                fro / ((dims.m * dims.p) as f64).sqrt()
            })
            .unwrap_or(0.0);
        let bernoulli = if dist == Distribution::Rademacher && dims.n > 1 {
            check_bernoulli_restriction(truth.x.view()).ok()
        } else {
            None
        };
        Ok(Self { dims, dist, seed, truth, sensing, prior, noise, sigma, y, bernoulli })
    }

    /// Instance around a user-supplied truth (e.g. a structured image and a smooth gain field).
    pub fn from_truth(
        truth: GroundTruth<S>,
        p: usize,
        dist: Distribution,
        seed: u64,
        prior: Option<SubspacePrior<S>>,
        noise_db: Option<f64>,
        store_sensing: bool,
    ) -> Result<Self> {
        let (n, m) = (truth.n(), truth.m());
        let mut truth = truth;
        let dims = match &prior {
            Some(pr) => {
                truth.z = Some(pr.signal.analyze(&truth.x));
                truth.b = Some(pr.gain.analyze(&truth.g));
                Dims::with_subspace(n, m, p, pr.signal.rank(), pr.gain.rank())
            }
            None => Dims::new(n, m, p),
        };
        dims.validate()?;
        let noise = match noise_db {
            Some(db) if !db.is_finite() => {
                return Err(Error::InvalidArgument(format!("noise level {db} dB is not finite")))
            }
            Some(db) => Some(noise_matrix::<S>(m, p, sigma_from_db(db), derive_seed(seed, STREAM_NOISE, 0))),
            None => None,
        };
        let sensing = SensingMatrices::generate(seed, dist, m, n, p, store_sensing);
        Self::assemble(dims, dist, seed, truth, sensing, prior, noise)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn n(&self) -> usize {
        self.dims.n
    }
    pub fn m(&self) -> usize {
        self.dims.m
    }
    pub fn p(&self) -> usize {
        self.dims.p
    }
    pub fn dist(&self) -> Distribution {
        self.dist
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn truth(&self) -> &GroundTruth<S> {
        &self.truth
    }
    pub fn sensing(&self) -> &SensingMatrices<S> {
        &self.sensing
    }
    pub fn prior(&self) -> Option<&SubspacePrior<S>> {
        self.prior.as_ref()
    }
    pub fn noise(&self) -> Option<&Array2<S>> {
        self.noise.as_ref()
    }
    /// `‖N‖_F / √(mp)`; zero when noiseless.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    /// Measurements as an `m × p` matrix (column `l` is snapshot `l`).
    pub fn y(&self) -> &Array2<S> {
        &self.y
    }
    pub fn bernoulli(&self) -> Option<BernoulliCheck> {
        self.bernoulli
    }
    pub fn is_noisy(&self) -> bool {
        self.noise.is_some()
    }

    /// Snapshot `l` of the sensing matrices.
    pub fn sensing_matrix(&self, l: usize) -> Cow<'_, Array2<S>> {
        self.sensing.snapshot(l, self.dims.m)
    }

    /// Same truth and sensing matrices with the noise removed.
    pub fn without_noise(&self) -> Self {
        let mut out = self.clone();
        out.noise = None;
        out.sigma = 0.0;
        out.y = synthesize_measurements(&self.truth, &self.sensing, self.dims.p, None)
            .expect("shapes validated at construction");
        out
    }

    /// Same truth and measurements, prior dropped (ambient-mode view of a subspace instance).
    pub fn without_prior(&self) -> Self {
        let mut out = self.clone();
        out.prior = None;
        out.dims.k = None;
        out.dims.h = None;
        out
    }

    /// Largest relative reconstruction error `max_l ‖diag(g)A_l x + ν_l − y_l‖/‖y_l‖`.
    pub fn reconstruction_error(&self) -> f64 {
        let m = self.dims.m;
        (0..self.dims.p)
            .map(|l| {
                let a = self.sensing.snapshot(l, m);
                let mut pred = a.dot(&self.truth.x) * &self.truth.g;
                if let Some(nz) = &self.noise {
                    pred += &nz.column(l);
                }
                let yl = self.y.column(l);
                let diff = (&pred - &yl).mapv(|v| v.to_f64_lossy().powi(2)).sum().sqrt();
                let ny = yl.mapv(|v| v.to_f64_lossy().powi(2)).sum().sqrt();
                if ny > 0.0 {
                    diff / ny
                } else {
                    diff
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Flat, JSON-compatible instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(default)]
    pub dist: Distribution,
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default)]
    pub signal_basis: Option<SignalBasisKind>,
    #[serde(default)]
    pub gain_basis: Option<GainBasisKind>,
    #[serde(default)]
    pub noise_db: Option<f64>,
    #[serde(default = "default_true")]
    pub store_sensing: bool,
}

fn default_true() -> bool {
    true
}

impl InstanceSpec {
    pub fn dims(&self) -> Dims {
        Dims { n: self.n, m: self.m, p: self.p, k: self.k, h: self.h }
    }

    pub fn subspace(&self) -> Option<SubspaceSpec> {
        if self.k.is_some() || self.h.is_some() {
            Some(SubspaceSpec {
                signal: self.signal_basis.unwrap_or(SignalBasisKind::Random),
                gain: self.gain_basis.unwrap_or(GainBasisKind::Dct),
            })
        } else {
            None
        }
    }

    pub fn build<S: Real>(&self) -> Result<ProblemInstance<S>> {
        let dims = self.dims();
        dims.validate()?;
        check_rho(self.rho)?;
        let prior = match self.subspace() {
            Some(spec) => Some(SubspacePrior::build(&dims, spec, self.seed)?),
            None => None,
        };
        make_instance_with_prior(dims, self.dist, self.rho, self.seed, prior, self.noise_db, self.store_sensing)
    }
}

/// Empirical second-moment deviation `‖(1/q) Σ a aᵀ − I‖₂` over all sensing rows.
pub fn isotropy_deviation<S: Real>(inst: &ProblemInstance<S>) -> f64 {
    let a = inst.sensing.stacked();
    let q = a.nrows() as f64;
    let mut cov = a.t().dot(a.as_ref()).mapv(|v| v.to_f64_lossy() / q);
    for i in 0..cov.nrows() {
        cov[[i, i]] -= 1.0;
    }
    let eig = crate::linalg::symmetric_eigenvalues(cov.view());
    eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_instance_from_truth() {
        let r = 1.0 / 2f64.sqrt();
        let d = 2f64.sqrt() / 25.0;
        let truth = GroundTruth::new(ndarray::arr1(&[r, -r]), ndarray::arr1(&[1.0 + d, 1.0 - d]), 0.06).unwrap();
        let inst = ProblemInstance::<f64>::from_truth(truth, 1, Distribution::Gaussian, 3, None, None, true).unwrap();
        assert!(inst.reconstruction_error() <= 1e-12);
        assert_eq!(inst.y().dim(), (2, 1));
    }

    #[test]
    fn zero_rho_gives_flat_gains() {
        let inst = make_instance::<f64>(Dims::new(8, 5, 2), Distribution::Gaussian, 0.0, 1, None, None).unwrap();
        assert!(inst.truth().g.iter().all(|&v| v == 1.0));
        assert!(inst.truth().e.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeded_instances_repeat() {
        let a = make_instance::<f64>(Dims::new(10, 6, 3), Distribution::Rademacher, 0.5, 7, None, Some(30.0)).unwrap();
        let b = make_instance::<f64>(Dims::new(10, 6, 3), Distribution::Rademacher, 0.5, 7, None, Some(30.0)).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.truth(), b.truth());
        assert_eq!(a.sensing().stacked().as_ref(), b.sensing().stacked().as_ref());
    }

    #[test]
    fn stored_and_seeded_sensing_agree() {
        let stored = SensingMatrices::<f64>::generate(5, Distribution::Gaussian, 4, 3, 2, true);
        let seeded = SensingMatrices::<f64>::generate(5, Distribution::Gaussian, 4, 3, 2, false);
        assert_eq!(stored.stacked().as_ref(), seeded.stacked().as_ref());
        assert_eq!(stored.snapshot(1, 4).as_ref(), seeded.snapshot(1, 4).as_ref());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            make_instance::<f64>(Dims::new(4, 4, 1), Distribution::Gaussian, 1.0, 0, None, None),
            Err(Error::InvalidRho(_))
        ));
        assert!(make_instance::<f64>(Dims::new(0, 4, 1), Distribution::Gaussian, 0.1, 0, None, None).is_err());
        assert!(make_instance::<f64>(
            Dims::with_subspace(4, 4, 1, 5, 2),
            Distribution::Gaussian,
            0.1,
            0,
            Some(SubspaceSpec::default()),
            None
        )
        .is_err());
        assert!(make_instance::<f64>(Dims::new(4, 4, 1), Distribution::Gaussian, 0.1, 0, Some(SubspaceSpec::default()), None).is_err());
        assert!(make_instance::<f64>(Dims::new(4, 4, 1), Distribution::Gaussian, 0.1, 0, None, Some(f64::NAN)).is_err());
    }

    #[test]
    fn bernoulli_examples() {
        let c1 = ndarray::arr1(&[1.0, 0.0, 0.0]);
        assert!(check_bernoulli_restriction(c1.view()).unwrap().is_warning());
        let flat = Array1::from_elem(9, 1.0 / 3.0);
        match check_bernoulli_restriction(flat.view()).unwrap() {
            BernoulliCheck::Ok { fourth_power } => assert!((fourth_power - 1.0 / 9.0).abs() < 1e-14),
            other => panic!("{other:?}"),
        }
        let v = ndarray::arr1(&[0.6, 0.8]);
        match check_bernoulli_restriction(v.view()).unwrap() {
            BernoulliCheck::Ok { fourth_power } => assert!((fourth_power - 0.5392).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(matches!(check_bernoulli_restriction(Array1::<f64>::zeros(3).view()), Err(Error::ZeroVector)));
    }

    #[test]
    fn spec_roundtrip_json() {
        let text = r#"{"n": 16, "m": 8, "p": 2, "rho": 0.2, "seed": 4, "k": 4, "h": 3, "gain_basis": "id_offset", "noise_db": 40}"#;
        let spec: InstanceSpec = serde_json::from_str(text).unwrap();
        let inst = spec.build::<f64>().unwrap();
        assert_eq!(inst.dims().k, Some(4));
        assert!((inst.sigma() - 0.01).abs() < 1e-14);
        assert!(inst.reconstruction_error() < 1e-12);
    }
}
