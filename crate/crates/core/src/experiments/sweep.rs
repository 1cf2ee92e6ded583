//! Grid sweeps of independent trials with per-cell success statistics and
//! phase-transition contours.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trial_seed, with_pool};
use crate::bases::{GainBasisKind, SignalBasisKind};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, fmt_opt_f64, fmt_opt_usize};
use crate::model::{make_instance, Dims, SubspaceSpec};
use crate::rng::Distribution;
use crate::solver::{max_relative_error, solve, SolverOptions, StepPolicy, StopCriteria, UpdateOrder};

/// Probability levels at which contours are extracted.
pub const CONTOUR_LEVELS: [f64; 6] = [0.25, 0.5, 0.75, 0.9, 0.95, 0.99];

fn default_trials() -> usize {
    32
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_max_iters() -> usize {
    10_000
}
fn default_policy() -> StepPolicy {
    StepPolicy::LineSearch
}
fn default_true() -> bool {
    true
}

/// Grid of cells (Cartesian product of the axes) and the per-trial protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub p: Vec<usize>,
    pub rho: Vec<f64>,
    /// Signal-subspace dimensions; empty means no prior.
    #[serde(default)]
    pub k: Vec<usize>,
    /// Gain-subspace dimensions; must be non-empty exactly when `k` is.
    #[serde(default)]
    pub h: Vec<usize>,
    /// Gain-basis families (subspace cells only); defaults to DCT.
    #[serde(default)]
    pub gain_kinds: Vec<GainBasisKind>,
    #[serde(default = "default_signal_basis")]
    pub signal_basis: SignalBasisKind,
    /// Noise levels in dB (`−20 log₁₀ σ`); empty means noiseless.
    #[serde(default)]
    pub noise_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(default = "default_policy")]
    pub policy: StepPolicy,
    /// Stop criterion; defaults to `f < 1e-8` (noiseless) or iterate change `< 1e-6` (noisy).
    #[serde(default)]
    pub stop: Option<StopCriteria>,
    /// Iteration cap used with the default stop criterion.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Success when the larger relative error is below this threshold.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub order: UpdateOrder,
    #[serde(default = "default_true")]
    pub project_each_step: bool,
}

fn default_signal_basis() -> SignalBasisKind {
    SignalBasisKind::Random
}

impl SweepSpec {
    /// Ambient noiseless grid with library defaults.
    pub fn ambient(n: Vec<usize>, m: Vec<usize>, p: Vec<usize>, rho: Vec<f64>, trials: usize, base_seed: u64) -> Self {
        Self {
            n,
            m,
            p,
            rho,
            k: Vec::new(),
            h: Vec::new(),
            gain_kinds: Vec::new(),
            signal_basis: SignalBasisKind::Random,
            noise_db: Vec::new(),
            trials,
            base_seed,
            dist: Distribution::Gaussian,
            policy: StepPolicy::LineSearch,
            stop: None,
            max_iters: default_max_iters(),
            threshold: default_threshold(),
            order: UpdateOrder::Jacobi,
            project_each_step: true,
        }
    }

    /// Phase-transition grid: `n = 64`, `ρ = 0.01`, `m, p` over powers of two.
    pub fn desk_phase_transition() -> Self {
        Self::ambient(vec![64], vec![4, 8, 16, 32, 64], vec![1, 2, 4, 8, 16, 32, 64], vec![0.01], 32, 0)
    }

    /// The full-size grid: `n, m, p ∈ {2, …, 256}`, `ρ ∈ {10⁻³, 10⁻², 10⁻¹}`, 256 trials.
    pub fn paper_phase_transition() -> Self {
        let pow2: Vec<usize> = (1..=8).map(|e| 1usize << e).collect();
        let mut s = Self::ambient(pow2.clone(), pow2.clone(), pow2, vec![1e-3, 1e-2, 1e-1], 256, 0);
        s.max_iters = StopCriteria::DEFAULT_MAX_ITERS;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| -> Result<()> {
            if len == 0 {
                Err(Error::InvalidArgument(format!("sweep axis `{name}` is empty")))
            } else {
                Ok(())
            }
        };
        empty("n", self.n.len())?;
        empty("m", self.m.len())?;
        empty("p", self.p.len())?;
        empty("rho", self.rho.len())?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.k.is_empty() != self.h.is_empty() {
            return Err(Error::InvalidArgument("k and h axes must be given together".into()));
        }
        if self.k.is_empty() && !self.gain_kinds.is_empty() {
            return Err(Error::InvalidArgument("gain_kinds requires a subspace grid".into()));
        }
        for c in self.cells() {
            c.dims().validate()?;
            if !(0.0..1.0).contains(&c.rho) {
                return Err(Error::InvalidRho(c.rho));
            }
            if let Some(h) = c.h {
                if h < 2 {
                    return Err(Error::InvalidDims("gain subspaces need h >= 2".into()));
                }
            }
        }
        Ok(())
    }

    /// Cells in row-major order over `(n, m, rho, k, h, kind, noise_db, p)`; `p` varies fastest.
    pub fn cells(&self) -> Vec<CellParams> {
        let subspace: Vec<(Option<usize>, Option<usize>, Option<GainBasisKind>)> = if self.k.is_empty() {
            vec![(None, None, None)]
        } else {
            let kinds = if self.gain_kinds.is_empty() { vec![GainBasisKind::Dct] } else { self.gain_kinds.clone() };
            let mut v = Vec::new();
            for &k in &self.k {
                for &h in &self.h {
                    for &kind in &kinds {
                        v.push((Some(k), Some(h), Some(kind)));
                    }
                }
            }
            v
        };
        let noise: Vec<Option<f64>> =
            if self.noise_db.is_empty() { vec![None] } else { self.noise_db.iter().map(|&d| Some(d)).collect() };
        let mut out = Vec::new();
        for &n in &self.n {
            for &m in &self.m {
                for &rho in &self.rho {
                    for &(k, h, kind) in &subspace {
                        for &noise_db in &noise {
                            for &p in &self.p {
                                out.push(CellParams { n, m, p, rho, k, h, kind, noise_db });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn solver_options(&self, cell: &CellParams) -> SolverOptions {
        let mode = if cell.k.is_some() { crate::objective::Mode::Subspace } else { crate::objective::Mode::Ambient };
        let stop = self.stop.unwrap_or_else(|| {
            let base = if cell.noise_db.is_some() { StopCriteria::noisy() } else { StopCriteria::noiseless() };
            base.with_max_iters(self.max_iters)
        });
        SolverOptions::new(mode)
            .with_policy(self.policy)
            .with_stop(stop)
            .with_order(self.order)
            .with_projection(self.project_each_step)
    }
}

/// Parameters of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub kind: Option<GainBasisKind>,
    pub noise_db: Option<f64>,
}

impl CellParams {
    pub fn dims(&self) -> Dims {
        Dims { n: self.n, m: self.m, p: self.p, k: self.k, h: self.h }
    }

    pub fn kind_label(&self) -> &'static str {
        self.kind.map(GainBasisKind::label).unwrap_or("none")
    }

    /// Everything but `p`: cells sharing a key form one contour column.
    fn column_key(&self) -> ColumnKey {
        (self.n, self.m, self.rho.to_bits(), self.k, self.h, self.kind, self.noise_db.map(f64::to_bits))
    }
}

type ColumnKey = (usize, usize, u64, Option<usize>, Option<usize>, Option<GainBasisKind>, Option<u64>);

/// Result of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub success: bool,
    /// `RMSE_max` in dB; NaN when the trial errored before producing an estimate.
    pub rmse_db: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
}

/// Aggregated statistics of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub params: CellParams,
    pub trials: usize,
    pub successes: usize,
    /// Mean of the per-trial `RMSE_max` values in dB (finite values only).
    pub mean_rmse_db: f64,
    pub mean_iters: f64,
    pub mean_wall_seconds: f64,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

/// Smallest `p` reaching a success level in one column, interpolated in `log₂ p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub level: f64,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub kind: Option<GainBasisKind>,
    pub noise_db: Option<f64>,
    /// `None` when no grid `p` reaches the level.
    pub p_transition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
    pub contours: Vec<ContourPoint>,
}

/// Runs one trial: build the instance, solve, score against the threshold.
pub(crate) fn run_trial(spec: &SweepSpec, cell: &CellParams, seed: u64) -> TrialOutcome {
    let subspace = cell.kind.map(|gain| SubspaceSpec { signal: spec.signal_basis, gain });
    let inst = match make_instance::<f64>(cell.dims(), spec.dist, cell.rho, seed, subspace, cell.noise_db) {
        Ok(inst) => inst,
        Err(_) => return TrialOutcome { success: false, rmse_db: f64::NAN, iterations: 0, wall_seconds: 0.0 },
    };
    let opts = spec.solver_options(cell);
    match solve(&inst, &opts) {
        Ok(rep) => {
            let err = max_relative_error(&inst, &rep).unwrap_or(f64::INFINITY);
            let rmse_db = if err > 0.0 { (20.0 * err.log10()).max(crate::solver::RMSE_FLOOR_DB) } else { crate::solver::RMSE_FLOOR_DB };
            TrialOutcome {
                success: err < spec.threshold,
                rmse_db,
                iterations: rep.iterations,
                wall_seconds: rep.wall_time.as_secs_f64(),
            }
        }
        Err(_) => TrialOutcome { success: false, rmse_db: f64::NAN, iterations: 0, wall_seconds: 0.0 },
    }
}

pub(crate) fn aggregate(params: CellParams, outcomes: &[TrialOutcome]) -> CellResult {
    let trials = outcomes.len();
    let successes = outcomes.iter().filter(|o| o.success).count();
    let finite: Vec<f64> = outcomes.iter().map(|o| o.rmse_db).filter(|v| v.is_finite()).collect();
    let mean_rmse_db = if finite.is_empty() { f64::NAN } else { finite.iter().sum::<f64>() / finite.len() as f64 };
    let mean_iters = outcomes.iter().map(|o| o.iterations as f64).sum::<f64>() / trials as f64;
    let mean_wall_seconds = outcomes.iter().map(|o| o.wall_seconds).sum::<f64>() / trials as f64;
    CellResult { params, trials, successes, mean_rmse_db, mean_iters, mean_wall_seconds }
}

/// Runs every trial of every cell on `workers` threads.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<SweepResult> {
    spec.validate()?;
    let cells = spec.cells();
    let tasks: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();
    let outcomes: Vec<TrialOutcome> = with_pool(workers, || {
        tasks
            .par_iter()
            .map(|&(c, t)| run_trial(spec, &cells[c], trial_seed(spec.base_seed, c, t)))
            .collect()
    })?;
    let results: Vec<CellResult> = cells
        .iter()
        .enumerate()
        .map(|(c, params)| aggregate(*params, &outcomes[c * spec.trials..(c + 1) * spec.trials]))
        .collect();
    let contours = extract_contours(&results, &CONTOUR_LEVELS);
    Ok(SweepResult { cells: results, contours })
}

/// For each column (all parameters but `p`) and level, the smallest grid `p` whose
/// success rate reaches the level, linearly interpolated in `log₂ p` against the
/// preceding grid point.
pub fn extract_contours(cells: &[CellResult], levels: &[f64]) -> Vec<ContourPoint> {
    let mut keys = Vec::new();
    for c in cells {
        let key = c.params.column_key();
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut out = Vec::new();
    for &level in levels {
        for key in &keys {
            let mut column: Vec<&CellResult> = cells.iter().filter(|c| &c.params.column_key() == key).collect();
            column.sort_by_key(|c| c.params.p);
            let first = column[0].params;
            let mut p_transition = None;
            for (i, c) in column.iter().enumerate() {
                let rate = c.success_rate();
                if rate >= level {
                    let lp = (c.params.p as f64).log2();
                    p_transition = Some(if i == 0 {
                        c.params.p as f64
                    } else {
                        let prev = column[i - 1];
                        let (r0, lp0) = (prev.success_rate(), (prev.params.p as f64).log2());
                        let t = if rate > r0 { (level - r0) / (rate - r0) } else { 1.0 };
                        2f64.powf(lp0 + t * (lp - lp0))
                    });
                    break;
                }
            }
            out.push(ContourPoint {
                level,
                n: first.n,
                m: first.m,
                rho: first.rho,
                k: first.k,
                h: first.h,
                kind: first.kind,
                noise_db: first.noise_db,
                p_transition,
            });
        }
    }
    out
}

impl SweepResult {
    /// `n,m,p,rho,k,h,kind,sigma_db,trials,successes,mean_rmse_db,mean_iters`.
    pub fn write_cells_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n,m,p,rho,k,h,kind,sigma_db,trials,successes,mean_rmse_db,mean_iters")?;
        for c in &self.cells {
            let p = &c.params;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                p.n,
                p.m,
                p.p,
                fmt_f64(p.rho),
                fmt_opt_usize(p.k),
                fmt_opt_usize(p.h),
                p.kind_label(),
                fmt_opt_f64(p.noise_db),
                c.trials,
                c.successes,
                fmt_f64(c.mean_rmse_db),
                fmt_f64(c.mean_iters)
            )?;
        }
        Ok(())
    }

    /// `level,m,p_transition`, followed by the remaining column parameters
    /// (`n,rho,k,h,kind,sigma_db`) so that multi-axis grids stay unambiguous.
    pub fn write_contours_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write_contours(w, &self.contours)
    }

    /// Writes `cells.csv` and `contours.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
        self.write_cells_csv(&mut f)?;
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("contours.csv"))?);
        self.write_contours_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    /// Transition `p` at `level` for the column with the given `m` (first match).
    pub fn transition(&self, level: f64, m: usize) -> Option<Option<f64>> {
        self.contours.iter().find(|c| c.level == level && c.m == m).map(|c| c.p_transition)
    }
}

pub(crate) fn write_contours<W: Write>(w: &mut W, contours: &[ContourPoint]) -> Result<()> {
    writeln!(w, "level,m,p_transition,n,rho,k,h,kind,sigma_db")?;
    for c in contours {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(c.level),
            c.m,
            c.p_transition.map(fmt_f64).unwrap_or_else(|| "nan".into()),
            c.n,
            fmt_f64(c.rho),
            fmt_opt_usize(c.k),
            fmt_opt_usize(c.h),
            c.kind.map(GainBasisKind::label).unwrap_or("none"),
            fmt_opt_f64(c.noise_db)
        )?;
    }
    Ok(())
}
