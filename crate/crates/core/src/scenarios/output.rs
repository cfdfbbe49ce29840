//! CSV and JSON emission for scenario results.
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! are byte-stable for bitwise-equal results.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{CaseOutcome, Comparison};
use crate::error::Result;
use crate::gpr::ForecastResult;
use crate::sde::Trajectory;
use crate::Variable;

pub const FORECAST_HEADER: &str = "variable,time_s,posterior_mean,posterior_std,is_observed_period";
pub const PLOT_HEADER: &str = "time_s,truth,mean,lower,upper";

/// One row per target, in target order.
pub fn write_forecast_csv<W: Write>(mut w: W, forecast: &ForecastResult, dt: f64, cutoff: f64) -> Result<()> {
    writeln!(w, "{FORECAST_HEADER}")?;
    for (i, &(v, k)) in forecast.target_idx.iter().enumerate() {
        let t = k as f64 * dt;
        writeln!(
            w,
            "{v},{t},{},{},{}",
            forecast.posterior_mean[i],
            forecast.posterior_std[i],
            t < cutoff - 1e-9
        )?;
    }
    Ok(())
}

/// Truth, mean and the `+-2 sigma` band of one variable over time.
pub fn write_plot_csv<W: Write>(mut w: W, forecast: &ForecastResult, truth: &Trajectory, var: Variable) -> Result<()> {
    writeln!(w, "{PLOT_HEADER}")?;
    let mut rows: Vec<(usize, f64, f64)> = forecast
        .target_idx
        .iter()
        .enumerate()
        .filter(|(_, &(v, _))| v == var)
        .map(|(i, &(_, k))| (k, forecast.posterior_mean[i], forecast.posterior_std[i]))
        .collect();
    rows.sort_by_key(|r| r.0);
    for (k, m, s) in rows {
        writeln!(
            w,
            "{},{},{m},{},{}",
            truth.times[k],
            truth.value(var, k),
            m - 2.0 * s,
            m + 2.0 * s
        )?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(mut w: W, tr: &Trajectory) -> Result<()> {
    writeln!(w, "time_s,theta,omega,pm_prime")?;
    for (t, s) in tr.times.iter().zip(&tr.states) {
        writeln!(w, "{t},{},{},{}", s.theta, s.omega, s.pm_prime)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `{prefix}forecast.csv`, `{prefix}metrics.json` and one
/// `{prefix}plot_{variable}.csv` per forecast variable into `dir`, and
/// returns the file names.
pub fn write_forecast_files(
    dir: &Path,
    prefix: &str,
    forecast: &ForecastResult,
    truth: &Trajectory,
    cutoff: f64,
    metrics: &impl Serialize,
) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let name = format!("{prefix}forecast.csv");
    let mut w = create(&dir.join(&name))?;
    write_forecast_csv(&mut w, forecast, truth.dt(), cutoff)?;
    w.flush()?;
    names.push(name);

    for var in Variable::ALL {
        if forecast.target_idx.iter().any(|&(v, _)| v == var) {
            let name = format!("{prefix}plot_{var}.csv");
            let mut w = create(&dir.join(&name))?;
            write_plot_csv(&mut w, forecast, truth, var)?;
            w.flush()?;
            names.push(name);
        }
    }

    let name = format!("{prefix}metrics.json");
    write_json(&dir.join(&name), metrics)?;
    names.push(name);
    Ok(names)
}

pub fn write_case_outputs(dir: &Path, outcome: &CaseOutcome) -> Result<Vec<String>> {
    write_forecast_files(
        dir,
        "",
        &outcome.forecast,
        &outcome.truth,
        outcome.spec.cutoff_time,
        &outcome.metrics,
    )
}

pub fn write_comparison_outputs(dir: &Path, cmp: &Comparison) -> Result<Vec<String>> {
    let c = cmp.physics.spec.cutoff_time;
    let mut names = write_forecast_files(
        dir,
        "physics_",
        &cmp.physics.forecast,
        &cmp.physics.truth,
        c,
        &cmp.physics.metrics,
    )?;
    names.extend(write_forecast_files(
        dir,
        "baseline_",
        &cmp.baseline.forecast,
        &cmp.physics.truth,
        c,
        &cmp.baseline.metrics,
    )?);
    Ok(names)
}
