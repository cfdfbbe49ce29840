//! Command-line front end: configuration, the `simulate`, `ensemble`,
//! `forecast` and `compare` verbs, and their output files.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 simulation
//! failure, 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::ensemble::{load_ensemble, run_ensemble, save_ensemble, Ensemble};
use crate::error::{Error, Result};
use crate::scenarios::output::{write_case_outputs, write_comparison_outputs, write_json, write_trajectory_csv};
use crate::scenarios::{run_baseline_comparison, run_case, BaselineConfig, CaseId, ScenarioSpec};
use crate::sde::{simulate_trajectory, GridParams, OuParams, SimConfig};
use crate::Variable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Number of realizations.
    pub n: usize,
    /// Ensemble file. `ensemble` writes it; `forecast` and `compare` read it
    /// when it exists and simulate in memory otherwise.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { n: 1000, path: None }
    }
}

/// Full run configuration. Omitted sections take their defaults; a section
/// that is present must list all of its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridParams,
    pub ou: OuParams,
    pub sim: SimConfig,
    pub ensemble: EnsembleConfig,
    pub scenario: ScenarioSpec,
    pub baseline: BaselineConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridParams::default(),
            ou: OuParams::default(),
            sim: SimConfig::default(),
            ensemble: EnsembleConfig::default(),
            scenario: ScenarioSpec::default(),
            baseline: BaselineConfig::default(),
            output_dir: PathBuf::from("gridcast-out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.ou.validate()?;
        self.sim.validate()?;
        if self.ensemble.n < 2 {
            return Err(Error::Config(format!(
                "ensemble.n must be at least 2, got {}",
                self.ensemble.n
            )));
        }
        Ok(())
    }

    fn ensemble_path(&self) -> PathBuf {
        self.ensemble
            .path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("ensemble.gens"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridcast", version, about = "Physics-informed GP forecasting of a wind-driven generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration file (defaults apply when omitted).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Ensemble master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Observation stride in time steps.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// Case: case1, case2, case3 or case3_extra.
    #[arg(long, global = true)]
    pub case: Option<CaseId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write one trajectory CSV.
    Simulate,
    /// Write the ensemble file and its mean/std summary.
    Ensemble,
    /// Run the configured case.
    Forecast,
    /// Physics-informed vs data-driven forecast on Case 1.
    Compare,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.sim.seed = s;
        }
        if let Some(s) = self.stride {
            cfg.scenario.obs_stride = s;
        }
        if let Some(c) = self.case {
            cfg.scenario.case_id = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse `args` (program name first), run the verb and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = cli.resolve_config().and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match command {
        Command::Simulate => cmd_simulate(cfg),
        Command::Ensemble => cmd_ensemble(cfg),
        Command::Forecast => cmd_forecast(cfg),
        Command::Compare => cmd_compare(cfg),
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    files: &'a [String],
    details: serde_json::Value,
}

fn finish(cfg: &RunConfig, command: &str, mut files: Vec<String>, details: serde_json::Value) -> Result<Vec<PathBuf>> {
    files.push("run_meta.json".into());
    let meta = RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        files: &files,
        details,
    };
    write_json(&cfg.output_dir.join("run_meta.json"), &meta)?;
    Ok(files.into_iter().map(|f| cfg.output_dir.join(f)).collect())
}

fn prepare_output(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        Error::Config(format!(
            "cannot create output directory {}: {e}",
            cfg.output_dir.display()
        ))
    })
}

/// One trajectory (stream 0 of the master seed) as `trajectory.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    prepare_output(cfg)?;
    let tr = simulate_trajectory(&cfg.grid, &cfg.ou, &cfg.sim)?;
    let mut w = BufWriter::new(fs::File::create(cfg.output_dir.join("trajectory.csv"))?);
    write_trajectory_csv(&mut w, &tr)?;
    w.flush()?;
    finish(
        cfg,
        "simulate",
        vec!["trajectory.csv".into()],
        serde_json::json!({ "seed": tr.seed_used, "stream": tr.stream, "rows": tr.len() }),
    )
}

/// Ensemble file plus `ensemble_summary.csv` with the mean and std of each
/// variable over time.
pub fn cmd_ensemble(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    prepare_output(cfg)?;
    let ens = run_ensemble(&cfg.grid, &cfg.ou, &cfg.sim, cfg.ensemble.n)?;
    let path = cfg.ensemble_path();
    save_ensemble(&ens, &path)?;
    let mut w = BufWriter::new(fs::File::create(cfg.output_dir.join("ensemble_summary.csv"))?);
    write_summary_csv(&mut w, &ens)?;
    w.flush()?;
    let mut out = finish(
        cfg,
        "ensemble",
        vec!["ensemble_summary.csv".into()],
        serde_json::json!({
            "master_seed": ens.master_seed(),
            "n_realizations": ens.n_realizations(),
            "ensemble_file": path,
        }),
    )?;
    out.push(path);
    Ok(out)
}

pub fn write_summary_csv<W: Write>(mut w: W, ens: &Ensemble) -> Result<()> {
    writeln!(
        w,
        "time_s,theta_mean,theta_std,omega_mean,omega_std,pm_prime_mean,pm_prime_std"
    )?;
    let view = ens.moments();
    for k in 0..=ens.n_steps() {
        write!(w, "{}", ens.time(k))?;
        for v in Variable::ALL {
            write!(w, ",{},{}", view.mean(v, k)?, view.std(v, k)?)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Load the configured ensemble file if it exists, else simulate.
pub fn obtain_ensemble(cfg: &RunConfig) -> Result<(Ensemble, String)> {
    if let Some(p) = cfg.ensemble.path.as_ref().filter(|p| p.exists()) {
        let ens = load_ensemble(p)?;
        if ens.grid() != &cfg.grid
            || ens.ou() != &cfg.ou
            || ens.sim() != &cfg.sim
            || ens.n_realizations() != cfg.ensemble.n
        {
            return Err(Error::Config(format!(
                "ensemble file {} was generated with a different configuration",
                p.display()
            )));
        }
        return Ok((ens, p.display().to_string()));
    }
    let ens = run_ensemble(&cfg.grid, &cfg.ou, &cfg.sim, cfg.ensemble.n)?;
    Ok((ens, "simulated".into()))
}

/// Forecast CSV, plot data per variable and metrics for the configured case.
pub fn cmd_forecast(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    prepare_output(cfg)?;
    let (ens, source) = obtain_ensemble(cfg)?;
    let out = run_case(&cfg.scenario, &ens)?;
    let files = write_case_outputs(&cfg.output_dir, &out)?;
    finish(
        cfg,
        "forecast",
        files,
        serde_json::json!({
            "case": out.spec.case_id,
            "ensemble": source,
            "ensemble_seed": ens.master_seed(),
            "truth_seed": out.spec.seed,
            "truth_realization": out.spec.truth_realization,
            "obs_stride": out.spec.obs_stride,
            "n_observations": out.observations.idx.len(),
            "nugget_used": out.forecast.nugget_used,
            "conditioning": out.spec.conditioning,
        }),
    )
}

/// Side-by-side physics-informed and baseline forecasts for Case 1.
pub fn cmd_compare(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    prepare_output(cfg)?;
    let (ens, source) = obtain_ensemble(cfg)?;
    let cmp = run_baseline_comparison(&cfg.scenario, &ens, &cfg.baseline)?;
    let mut files = write_comparison_outputs(&cfg.output_dir, &cmp)?;

    let mut summary = serde_json::Map::new();
    for var in cmp.physics.variables() {
        summary.insert(
            var.to_string(),
            serde_json::json!({
                "physics_horizon": cmp.physics.metrics.mean_horizon.get(&var),
                "baseline_horizon": cmp.baseline.metrics.mean_horizon.get(&var),
                "physics_coverage_2sigma": cmp.physics.metrics.coverage_2sigma.get(&var),
                "baseline_coverage_2sigma": cmp.baseline.metrics.coverage_2sigma.get(&var),
                "physics_rmse_0_2s": cmp.physics.metrics.rmse(var, "forecast_0_2s"),
                "baseline_rmse_0_2s": cmp.baseline.metrics.rmse(var, "forecast_0_2s"),
                "baseline_kernel": cmp.baseline.fitted.get(&var),
            }),
        );
    }
    write_json(&cfg.output_dir.join("comparison.json"), &summary)?;
    files.push("comparison.json".into());
    finish(
        cfg,
        "compare",
        files,
        serde_json::json!({
            "ensemble": source,
            "ensemble_seed": ens.master_seed(),
            "truth_seed": cmp.physics.spec.seed,
            "truth_realization": cmp.physics.spec.truth_realization,
            "obs_stride": cmp.physics.spec.obs_stride,
            "physics_nugget_used": cmp.physics.forecast.nugget_used,
            "baseline_nugget_used": cmp.baseline.forecast.nugget_used,
            "baseline_family": cmp.baseline.config.family,
            "conditioning": cmp.physics.spec.conditioning,
        }),
    )
}
