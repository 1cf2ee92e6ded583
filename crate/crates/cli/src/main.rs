use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use blindcal::experiments::{
    run_coherence_experiment, run_imaging_demo, run_noise_experiment, run_stepsize_experiment, run_sweep,
    CoherenceConfig, ImagingConfig, NoiseConfig, StepsizeConfig, SweepSpec,
};
use blindcal::io::{fmt_f64, save_trajectory_csv};
use blindcal::solver::rmse_max;
use blindcal::{
    solve, InstanceSpec, Mode, ProjectionMethod, SolverOptions, StepPolicy, StopCriteria, UpdateOrder,
};

#[derive(Parser)]
#[command(name = "blindcal", version, about = "Blind sensor-gain calibration solver and experiment driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance described by a JSON config.
    Solve(Common),
    /// Phase-transition sweep over a parameter grid.
    Sweep(Common),
    /// Mean error against the noise level.
    Noise(Common),
    /// Subspace phase transitions for several gain-basis families.
    Coherence(Common),
    /// Fixed steps against line search on one instance.
    Stepsize(Common),
    /// Synthetic imaging demo with a smooth gain field.
    Imaging(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; built-in desk defaults are used when omitted.
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for Monte Carlo runs.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Overrides the base seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full-size defaults instead of the desk-scale ones.
    #[arg(long)]
    full_paper_scale: bool,
}

impl Common {
    fn load<T: DeserializeOwned>(&self, desk: impl FnOnce() -> T, full: impl FnOnce() -> T) -> Result<T> {
        match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
            }
            None if self.full_paper_scale => Ok(full()),
            None => Ok(desk()),
        }
    }
}

/// An instance plus optional solver settings, all at the top level of one JSON object.
#[derive(Deserialize)]
struct SolveConfig {
    #[serde(flatten)]
    instance: InstanceSpec,
    #[serde(default)]
    policy: Option<StepPolicy>,
    #[serde(default)]
    objective_tol: Option<f64>,
    #[serde(default)]
    iterate_tol: Option<f64>,
    #[serde(default)]
    max_iters: Option<usize>,
    #[serde(default)]
    order: Option<UpdateOrder>,
    #[serde(default)]
    projection: Option<ProjectionMethod>,
    #[serde(default)]
    project_each_step: Option<bool>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Solve(c) => cmd_solve(&c),
        Command::Sweep(c) => {
            let mut spec = c.load(SweepSpec::desk_phase_transition, SweepSpec::paper_phase_transition)?;
            if let Some(s) = c.seed {
                spec.base_seed = s;
            }
            let res = run_sweep(&spec, c.workers)?;
            res.save(&c.out)?;
            println!("{} cells written to {}", res.cells.len(), c.out.display());
            Ok(())
        }
        Command::Noise(c) => {
            let mut cfg = c.load(NoiseConfig::desk, NoiseConfig::paper)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let res = run_noise_experiment(&cfg, c.workers)?;
            res.save(&c.out)?;
            for &(p, slope) in &res.slopes {
                println!("p = {p}: slope {slope:.3} dB/dB");
            }
            Ok(())
        }
        Command::Coherence(c) => {
            let mut cfg = c.load(CoherenceConfig::desk, CoherenceConfig::paper)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let res = run_coherence_experiment(&cfg, c.workers)?;
            res.save(&c.out)?;
            for s in &res.summaries {
                let p = s.p_transition_90.map(|v| format!("{v:.2}")).unwrap_or_else(|| "none".into());
                println!("{:>14} m = {:>4} h = {:>3} mu_max = {:.6} p(0.9) = {p}", s.kind.label(), s.m, s.h, s.mu_max);
            }
            Ok(())
        }
        Command::Stepsize(c) => {
            let mut cfg = c.load(StepsizeConfig::desk, StepsizeConfig::desk)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let res = run_stepsize_experiment(&cfg)?;
            res.save(&c.out)?;
            println!(
                "line search: {} iterations ({:.2} dB); fixed: {} iterations ({:.2} dB)",
                res.line_search.iterations, res.line_search_rmse_db, res.fixed.iterations, res.fixed_rmse_db
            );
            Ok(())
        }
        Command::Imaging(c) => cmd_imaging(&c),
    }
}

fn cmd_solve(c: &Common) -> Result<()> {
    let Some(path) = &c.config else { bail!("solve needs a config file") };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: SolveConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(s) = c.seed {
        cfg.instance.seed = s;
    }
    let inst = cfg.instance.build::<f64>()?;
    let mut opts = SolverOptions::for_instance(&inst);
    if let Some(policy) = cfg.policy {
        opts.policy = policy;
    }
    if cfg.objective_tol.is_some() || cfg.iterate_tol.is_some() {
        opts.stop = StopCriteria { objective_tol: cfg.objective_tol, iterate_tol: cfg.iterate_tol, ..opts.stop };
    }
    if let Some(n) = cfg.max_iters {
        opts.stop.max_iters = n;
    }
    if let Some(order) = cfg.order {
        opts.order = order;
    }
    if let Some(method) = cfg.projection {
        opts.projection = method;
    }
    if let Some(flag) = cfg.project_each_step {
        opts.project_each_step = flag;
    }
    let rep = solve(&inst, &opts)?;
    let t = inst.truth();
    let rmse = rmse_max(&rep.signal_estimate, &rep.gain_estimate, &t.x, &t.g)?;
    fs::create_dir_all(&c.out)?;
    save_trajectory_csv(&c.out.join("trajectory.csv"), &rep.trajectory)?;
    write_estimates(&c.out.join("estimate.csv"), &rep.signal_estimate, &rep.gain_estimate)?;
    let mode = match opts.mode {
        Mode::Ambient => "ambient",
        Mode::Subspace => "subspace",
    };
    let mut f = fs::File::create(c.out.join("solve_summary.csv"))?;
    writeln!(f, "key,value")?;
    writeln!(f, "mode,{mode}")?;
    writeln!(f, "stop_reason,{}", format!("{:?}", rep.stop_reason).to_lowercase())?;
    writeln!(f, "iterations,{}", rep.iterations)?;
    writeln!(f, "final_f,{}", fmt_f64(rep.final_value()))?;
    writeln!(f, "rmse_max_db,{}", fmt_f64(rmse))?;
    println!("{:?} after {} iterations, RMSE_max = {:.2} dB", rep.stop_reason, rep.iterations, rmse);
    Ok(())
}

fn write_estimates(path: &Path, x: &blindcal::ndarray::Array1<f64>, g: &blindcal::ndarray::Array1<f64>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "block,index,value")?;
    for (i, v) in x.iter().enumerate() {
        writeln!(f, "signal,{i},{}", fmt_f64(*v))?;
    }
    for (i, v) in g.iter().enumerate() {
        writeln!(f, "gain,{i},{}", fmt_f64(*v))?;
    }
    f.flush()?;
    Ok(())
}

fn cmd_imaging(c: &Common) -> Result<()> {
    let configs = match &c.config {
        Some(_) => vec![c.load(ImagingConfig::desk, ImagingConfig::paper)?],
        None if c.full_paper_scale => {
            vec![ImagingConfig::paper(), ImagingConfig { p: 1, subspace: true, ..ImagingConfig::paper() }]
        }
        None => vec![ImagingConfig::desk(), ImagingConfig::desk_subspace()],
    };
    for mut cfg in configs {
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        let res = run_imaging_demo(&cfg)?;
        let dir = c.out.join(if cfg.subspace { "subspace" } else { "ambient" });
        res.save(&dir)?;
        println!(
            "{}: least squares {:.2} dB, blind {:.2} dB after {} iterations",
            dir.display(),
            res.least_squares.rmse_db,
            res.blind.rmse_db,
            res.blind.iterations
        );
    }
    Ok(())
}
