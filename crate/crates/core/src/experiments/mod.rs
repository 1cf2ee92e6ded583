//! Monte Carlo experiment drivers and their CSV/PGM outputs.
//!
//! Every trial derives its seed from `(base seed, cell index, trial index)` and
//! results are collected in task order, so outputs do not depend on the number
//! of worker threads.

mod coherence;
mod imaging;
mod noise;
mod stepsize;
mod sweep;

pub use coherence::{run_coherence_experiment, CoherenceConfig, CoherenceResult, KindSummary};
pub use imaging::{phantom_image, run_imaging_demo, ImagingConfig, ImagingMetric, ImagingResult};
pub use noise::{run_noise_experiment, NoiseConfig, NoiseResult, NoiseRow};
pub use stepsize::{run_stepsize_experiment, RatioRegime, StepsizeConfig, StepsizeResult};
pub use sweep::{
    extract_contours, run_sweep, CellParams, CellResult, ContourPoint, SweepSpec, SweepResult, TrialOutcome,
    CONTOUR_LEVELS,
};

use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Seed of trial `trial` in cell `cell`.
pub fn trial_seed(base: u64, cell: usize, trial: usize) -> u64 {
    derive_seed(base ^ 0x5EED_CE11_0000_0000, cell as u64, trial as u64)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        assert!((fit_slope(&x, &y) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 0, 1));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(1, 1, 0));
        assert_ne!(trial_seed(1, 0, 0), trial_seed(2, 0, 0));
    }
}
