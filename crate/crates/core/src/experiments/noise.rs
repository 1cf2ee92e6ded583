//! Mean reconstruction error against the noise level.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fit_slope, run_sweep, SweepSpec};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::rng::Distribution;

fn default_max_iters() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub p_list: Vec<usize>,
    /// Noise levels as `−20 log₁₀ σ`.
    pub sigma_db_list: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    /// Cap on iterations; the stop rule is a relative iterate change below `1e-6`.
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl NoiseConfig {
    /// `n = m = 64`, `ρ = 0.1`, `p ∈ {4, 16}`, `σ ∈ {20, …, 60}` dB, 32 trials.
    pub fn desk() -> Self {
        Self {
            n: 64,
            m: 64,
            rho: 0.1,
            p_list: vec![4, 16],
            sigma_db_list: vec![20.0, 30.0, 40.0, 50.0, 60.0],
            trials: 32,
            seed: 0,
            dist: Distribution::Gaussian,
            max_iters: default_max_iters(),
        }
    }

    /// `n = m = 256`, `ρ = 0.1`, `p ∈ {2, …, 256}`, `σ ∈ {10, …, 80}` dB, 64 trials.
    pub fn paper() -> Self {
        Self {
            n: 256,
            m: 256,
            rho: 0.1,
            p_list: (1..=8).map(|e| 1usize << e).collect(),
            sigma_db_list: (1..=8).map(|i| 10.0 * i as f64).collect(),
            trials: 64,
            seed: 0,
            dist: Distribution::Gaussian,
            max_iters: 100_000,
        }
    }

    fn sweep_spec(&self) -> SweepSpec {
        let mut s = SweepSpec::ambient(vec![self.n], vec![self.m], self.p_list.clone(), vec![self.rho], self.trials, self.seed);
        s.noise_db = self.sigma_db_list.clone();
        s.dist = self.dist;
        s.max_iters = self.max_iters;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub p: usize,
    pub sigma_db: f64,
    pub trials: usize,
    /// Sample average of the per-trial `RMSE_max` in dB.
    pub mean_rmse_db: f64,
    pub mean_iters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseResult {
    pub rows: Vec<NoiseRow>,
    /// Per-`p` slope of mean `RMSE_max` (dB) against `20 log₁₀ σ` (dB); near 1 for
    /// error proportional to σ.
    pub slopes: Vec<(usize, f64)>,
}

impl NoiseResult {
    /// Slope pooled over every `p` (each curve centered on its own mean).
    pub fn pooled_slope(&self) -> f64 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &(p, _) in &self.slopes {
            let rows: Vec<&NoiseRow> = self.rows.iter().filter(|r| r.p == p).collect();
            let mx = rows.iter().map(|r| -r.sigma_db).sum::<f64>() / rows.len() as f64;
            let my = rows.iter().map(|r| r.mean_rmse_db).sum::<f64>() / rows.len() as f64;
            for r in rows {
                xs.push(-r.sigma_db - mx);
                ys.push(r.mean_rmse_db - my);
            }
        }
        fit_slope(&xs, &ys)
    }

    /// Average over σ of `mean_rmse(p_low) − mean_rmse(p_high)` in dB.
    pub fn mean_gap(&self, p_low: usize, p_high: usize) -> Option<f64> {
        let mut gaps = Vec::new();
        for lo in self.rows.iter().filter(|r| r.p == p_low) {
            let hi = self.rows.iter().find(|r| r.p == p_high && r.sigma_db == lo.sigma_db)?;
            gaps.push(lo.mean_rmse_db - hi.mean_rmse_db);
        }
        if gaps.is_empty() {
            None
        } else {
            Some(gaps.iter().sum::<f64>() / gaps.len() as f64)
        }
    }

    /// `p,sigma_db,trials,mean_rmse_db,mean_iters`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "p,sigma_db,trials,mean_rmse_db,mean_iters")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.p,
                fmt_f64(r.sigma_db),
                r.trials,
                fmt_f64(r.mean_rmse_db),
                fmt_f64(r.mean_iters)
            )?;
        }
        Ok(())
    }

    /// `p,slope`.
    pub fn write_slopes_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "p,slope")?;
        for &(p, s) in &self.slopes {
            writeln!(w, "{},{}", p, fmt_f64(s))?;
        }
        writeln!(w, "pooled,{}", fmt_f64(self.pooled_slope()))?;
        Ok(())
    }

    /// Writes `noise.csv` and `noise_slopes.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("noise.csv"))?);
        self.write_csv(&mut f)?;
        f.flush()?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("noise_slopes.csv"))?);
        self.write_slopes_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn run_noise_experiment(cfg: &NoiseConfig, workers: usize) -> Result<NoiseResult> {
    if cfg.sigma_db_list.len() < 2 {
        return Err(Error::InvalidArgument("the noise experiment needs at least two noise levels".into()));
    }
    let sweep = run_sweep(&cfg.sweep_spec(), workers)?;
    let rows: Vec<NoiseRow> = sweep
        .cells
        .iter()
        .map(|c| NoiseRow {
            p: c.params.p,
            sigma_db: c.params.noise_db.unwrap_or(f64::INFINITY),
            trials: c.trials,
            mean_rmse_db: c.mean_rmse_db,
            mean_iters: c.mean_iters,
        })
        .collect();
    let slopes = cfg
        .p_list
        .iter()
        .map(|&p| {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                rows.iter().filter(|r| r.p == p).map(|r| (-r.sigma_db, r.mean_rmse_db)).unzip();
            (p, fit_slope(&xs, &ys))
        })
        .collect();
    Ok(NoiseResult { rows, slopes })
}
