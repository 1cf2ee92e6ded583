//! Subspace-prior phase transitions for several gain-basis families, reported
//! alongside each family's coherence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::write_contours;
use super::{run_sweep, trial_seed, ContourPoint, SweepResult, SweepSpec};
use crate::bases::{gain_basis, GainBasisKind};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::rng::{derive_seed, Distribution, STREAM_GAIN_BASIS};

fn default_max_iters() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub n: usize,
    pub k: usize,
    pub h_list: Vec<usize>,
    pub m_list: Vec<usize>,
    pub p_list: Vec<usize>,
    pub kinds: Vec<GainBasisKind>,
    pub rho: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dist: Distribution,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl CoherenceConfig {
    /// `n = 256`, `k = 64`, `h = 16`, `m ∈ {32, …, 256}`, `p ∈ {1, …, 32}`, 32 trials.
    pub fn desk() -> Self {
        Self {
            n: 256,
            k: 64,
            h_list: vec![16],
            m_list: vec![32, 64, 128, 256],
            p_list: vec![1, 2, 4, 8, 16, 32],
            kinds: vec![GainBasisKind::Dct, GainBasisKind::IdOffset, GainBasisKind::RandomRotated],
            rho: 0.1,
            trials: 32,
            seed: 0,
            dist: Distribution::Gaussian,
            max_iters: default_max_iters(),
        }
    }

    /// `h ∈ {16, 32}`, `m ∈ {h, …, 256}`, `p ∈ {1, …, 256}`, 256 trials.
    pub fn paper() -> Self {
        Self {
            h_list: vec![16, 32],
            m_list: vec![16, 32, 64, 128, 256],
            p_list: (0..=8).map(|e| 1usize << e).collect(),
            trials: 256,
            max_iters: 100_000,
            ..Self::desk()
        }
    }

    fn sweep_spec(&self) -> SweepSpec {
        let mut s =
            SweepSpec::ambient(vec![self.n], self.m_list.clone(), self.p_list.clone(), vec![self.rho], self.trials, self.seed);
        s.k = vec![self.k];
        s.h = self.h_list.clone();
        s.gain_kinds = self.kinds.clone();
        s.dist = self.dist;
        s.max_iters = self.max_iters;
        s
    }
}

/// One `(kind, m, h)` column: coherence of the sampled bases and the 0.9 transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: GainBasisKind,
    pub m: usize,
    pub h: usize,
    /// Largest coherence over the bases drawn for this column.
    pub mu_max: f64,
    pub p_transition_90: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub sweep: SweepResult,
    pub summaries: Vec<KindSummary>,
}

impl CoherenceResult {
    pub fn summary(&self, kind: GainBasisKind, m: usize, h: usize) -> Option<&KindSummary> {
        self.summaries.iter().find(|s| s.kind == kind && s.m == m && s.h == h)
    }

    /// `kind,m,h,mu_max`.
    pub fn write_coherence_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "kind,m,h,mu_max")?;
        for s in &self.summaries {
            writeln!(w, "{},{},{},{}", s.kind.label(), s.m, s.h, fmt_f64(s.mu_max))?;
        }
        Ok(())
    }

    /// Writes `cells.csv`, `contours.csv`, one `contours_<kind>.csv` per family and `coherence.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.sweep.save(dir)?;
        let mut kinds: Vec<GainBasisKind> = Vec::new();
        for s in &self.summaries {
            if !kinds.contains(&s.kind) {
                kinds.push(s.kind);
            }
        }
        for kind in kinds {
            let rows: Vec<ContourPoint> =
                self.sweep.contours.iter().filter(|c| c.kind == Some(kind)).copied().collect();
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("contours_{}.csv", kind.label())))?);
            write_contours(&mut f, &rows)?;
            f.flush()?;
        }
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("coherence.csv"))?);
        self.write_coherence_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }
}

pub fn run_coherence_experiment(cfg: &CoherenceConfig, workers: usize) -> Result<CoherenceResult> {
    for &m in &cfg.m_list {
        for &h in &cfg.h_list {
            if h > m {
                return Err(Error::InvalidDims(format!("h = {h} exceeds m = {m}")));
            }
        }
    }
    if cfg.kinds.is_empty() {
        return Err(Error::InvalidArgument("no gain-basis kinds requested".into()));
    }
    let spec = cfg.sweep_spec();
    let sweep = run_sweep(&spec, workers)?;
    let cells = spec.cells();
    let mut summaries = Vec::new();
    for &m in &cfg.m_list {
        for &h in &cfg.h_list {
            for &kind in &cfg.kinds {
                // The bases are redrawn per trial; scan those of the column's first cell.
                let first = cells
                    .iter()
                    .position(|c| c.m == m && c.h == Some(h) && c.kind == Some(kind))
                    .expect("every column has at least one cell");
                let mut mu_max = 0.0f64;
                for t in 0..cfg.trials {
                    let seed = derive_seed(trial_seed(cfg.seed, first, t), STREAM_GAIN_BASIS, 0);
                    let b = gain_basis::<f64>(m, h, kind, seed)?;
                    mu_max = mu_max.max(b.coherence()?);
                }
                let p_transition_90 = sweep
                    .contours
                    .iter()
                    .find(|c| c.level == 0.9 && c.m == m && c.h == Some(h) && c.kind == Some(kind))
                    .and_then(|c| c.p_transition);
                summaries.push(KindSummary { kind, m, h, mu_max, p_transition_90 });
            }
        }
    }
    Ok(CoherenceResult { sweep, summaries })
}
