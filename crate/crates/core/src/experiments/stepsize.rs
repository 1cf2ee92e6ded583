//! Fixed steps against exact line search on one instance.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::{fmt_f64, write_trajectory_csv};
use crate::model::{make_instance, Dims};
use crate::objective::Mode;
use crate::rng::Distribution;
use crate::solver::{solve, SolverOptions, SolverReport, StepPolicy, StopCriteria, StopReason, TrajectoryEntry};

fn default_mu_signal() -> f64 {
    1e-4
}
fn default_max_iters() -> usize {
    StopCriteria::DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizeConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    /// Signal step of the fixed run; the gain step follows the `m/‖ξ₀‖²` ratio.
    #[serde(default = "default_mu_signal")]
    pub mu_signal: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl StepsizeConfig {
    /// `n = 256`, `m = 64`, `p = 10`, `ρ = 0.99`, fixed `μ_ξ = 10⁻⁴`.
    pub fn desk() -> Self {
        Self {
            n: 256,
            m: 64,
            p: 10,
            rho: 0.99,
            seed: 0,
            dist: Distribution::Gaussian,
            mu_signal: default_mu_signal(),
            max_iters: default_max_iters(),
        }
    }
}

/// Which reference the observed median `μ_γ/μ_ξ` is closer to (in log scale).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioRegime {
    /// `μ_γ/μ_ξ ≈ 1/m`.
    InverseM,
    /// `μ_γ/μ_ξ ≈ m/‖x‖²`.
    MOverEnergy,
}

impl RatioRegime {
    pub fn label(self) -> &'static str {
        match self {
            RatioRegime::InverseM => "inverse_m",
            RatioRegime::MOverEnergy => "m_over_energy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepsizeResult {
    pub line_search: SolverReport<f64>,
    pub fixed: SolverReport<f64>,
    pub fixed_policy: StepPolicy,
    pub m: usize,
    pub signal_energy: f64,
    pub line_search_rmse_db: f64,
    pub fixed_rmse_db: f64,
}

impl StepsizeResult {
    pub fn median_ratio(&self) -> Option<f64> {
        self.line_search.median_step_ratio()
    }

    pub fn regime(&self) -> Option<RatioRegime> {
        let r = self.median_ratio()?.ln();
        let inv_m = (1.0 / self.m as f64).ln();
        let m_energy = (self.m as f64 / self.signal_energy).ln();
        Some(if (r - inv_m).abs() <= (r - m_energy).abs() { RatioRegime::InverseM } else { RatioRegime::MOverEnergy })
    }

    /// Number of logged iterates violating `(1−ρ)Δ ≤ Δ_F ≤ (1+2ρ)Δ` beyond `slack`.
    pub fn sandwich_violations(&self, rho: f64, slack: f64) -> usize {
        let bad = |e: &TrajectoryEntry| {
            e.delta_f < (1.0 - rho) * e.delta - slack || e.delta_f > (1.0 + 2.0 * rho) * e.delta + slack
        };
        self.line_search.trajectory.iter().chain(&self.fixed.trajectory).filter(|e| bad(e)).count()
    }

    /// `key,value` lines.
    pub fn write_summary_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let reason = |r: StopReason| format!("{r:?}").to_lowercase();
        writeln!(w, "key,value")?;
        writeln!(w, "line_search_iterations,{}", self.line_search.iterations)?;
        writeln!(w, "line_search_stop,{}", reason(self.line_search.stop_reason))?;
        writeln!(w, "line_search_rmse_db,{}", fmt_f64(self.line_search_rmse_db))?;
        writeln!(w, "fixed_iterations,{}", self.fixed.iterations)?;
        writeln!(w, "fixed_stop,{}", reason(self.fixed.stop_reason))?;
        writeln!(w, "fixed_rmse_db,{}", fmt_f64(self.fixed_rmse_db))?;
        if let StepPolicy::Fixed { mu_signal, mu_gain } = self.fixed_policy {
            writeln!(w, "fixed_mu_signal,{}", fmt_f64(mu_signal))?;
            writeln!(w, "fixed_mu_gain,{}", fmt_f64(mu_gain))?;
        }
        writeln!(w, "median_step_ratio,{}", self.median_ratio().map(fmt_f64).unwrap_or_else(|| "nan".into()))?;
        writeln!(w, "ratio_inverse_m,{}", fmt_f64(1.0 / self.m as f64))?;
        writeln!(w, "ratio_m_over_energy,{}", fmt_f64(self.m as f64 / self.signal_energy))?;
        writeln!(w, "ratio_regime,{}", self.regime().map(RatioRegime::label).unwrap_or("none"))?;
        Ok(())
    }

    /// Writes `trajectory_linesearch.csv`, `trajectory_fixed.csv` and `stepsize_summary.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, rep) in [("trajectory_linesearch.csv", &self.line_search), ("trajectory_fixed.csv", &self.fixed)] {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(name))?);
            write_trajectory_csv(&mut f, &rep.trajectory)?;
            f.flush()?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("stepsize_summary.csv"))?);
        self.write_summary_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

/// Runs both policies on the same noiseless instance, stopping at `f < 1e-8`.
pub fn run_stepsize_experiment(cfg: &StepsizeConfig) -> Result<StepsizeResult> {
    let inst = make_instance::<f64>(Dims::new(cfg.n, cfg.m, cfg.p), cfg.dist, cfg.rho, cfg.seed, None, None)?;
    let stop = StopCriteria::noiseless().with_max_iters(cfg.max_iters);
    let base = SolverOptions::new(Mode::Ambient).with_stop(stop);
    let line_search = solve(&inst, &base.with_policy(StepPolicy::LineSearch))?;
    let fixed_policy = StepPolicy::fixed_with_default_ratio(cfg.mu_signal, &inst, Mode::Ambient)?;
    let fixed = solve(&inst, &base.with_policy(fixed_policy))?;
    let t = inst.truth();
    let line_search_rmse_db = crate::solver::rmse_max(&line_search.signal_estimate, &line_search.gain_estimate, &t.x, &t.g)?;
    let fixed_rmse_db = crate::solver::rmse_max(&fixed.signal_estimate, &fixed.gain_estimate, &t.x, &t.g)?;
    let signal_energy = t.x.dot(&t.x);
    Ok(StepsizeResult {
        line_search,
        fixed,
        fixed_policy,
        m: cfg.m,
        signal_energy,
        line_search_rmse_db,
        fixed_rmse_db,
    })
}
