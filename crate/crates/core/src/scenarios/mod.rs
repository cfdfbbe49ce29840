//! Forecasting and reconstruction case studies on a held-out truth.
//!
//! | case         | observed (t < cutoff) | targets                                      |
//! |--------------|-----------------------|----------------------------------------------|
//! | `Case1`      | theta, omega          | theta, omega after the cutoff                |
//! | `Case2`      | theta                 | theta after the cutoff; omega, pm' on [0, h] |
//! | `Case3`      | omega                 | omega after the cutoff; theta, pm' on [0, h] |
//! | `Case3Extra` | omega                 | as `Case3`, plus omega samples after cutoff  |
//!
//! The truth trajectory is simulated from `spec.seed`, which must differ from
//! the ensemble's master seed, so it never enters the prior moments.

pub mod metrics;
pub mod output;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Ensemble, IndexSet, MomentView};
use crate::error::{Error, Result};
use crate::gpr::{
    baseline_forecast, condition_global, condition_localized, fit_hyperparameters, FitOptions, FittedKernel,
    ForecastResult, KernelFamily, Localization, Observations, TimeSeries,
};
use crate::sde::{simulate_realization, SimConfig, Trajectory};
use crate::Variable;

pub use metrics::{compute_metrics, MeanHorizon, MetricWindows, MetricsReport, WindowStat};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    Case1,
    Case2,
    Case3,
    Case3Extra,
}

impl CaseId {
    pub fn name(self) -> &'static str {
        match self {
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case3 => "case3",
            CaseId::Case3Extra => "case3_extra",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "case1" | "1" => Ok(CaseId::Case1),
            "case2" | "2" => Ok(CaseId::Case2),
            "case3" | "3" => Ok(CaseId::Case3),
            "case3extra" | "3extra" => Ok(CaseId::Case3Extra),
            _ => Err(Error::Config(format!("unknown case '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub case_id: CaseId,
    pub cutoff_time: f64,
    pub horizon_end: f64,
    /// Observations and targets sit on every `obs_stride`-th time step.
    pub obs_stride: usize,
    /// Stream index of the truth trajectory under `seed`.
    pub truth_realization: u64,
    /// Extra post-cutoff omega observations (`Case3Extra` only).
    pub extra_obs_count: usize,
    /// Master seed of the truth trajectories.
    pub seed: u64,
    #[serde(default)]
    pub conditioning: Conditioning,
}

/// How targets are conditioned on the observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Conditioning {
    /// Every target on all observations at once.
    Global,
    /// Block by block on nearby observations, see [`condition_localized`].
    Localized(Localization),
}

impl Default for Conditioning {
    fn default() -> Self {
        Conditioning::Localized(Localization::default())
    }
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            case_id: CaseId::Case1,
            cutoff_time: 8.3375,
            horizon_end: 12.5,
            obs_stride: 5,
            truth_realization: 0,
            extra_obs_count: 333,
            seed: 4_242_001,
            conditioning: Conditioning::default(),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self, ens: &Ensemble) -> Result<()> {
        if self.obs_stride == 0 {
            return Err(Error::InvalidParams("obs_stride must be at least 1".into()));
        }
        if !(self.cutoff_time.is_finite() && self.cutoff_time >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "cutoff_time must be finite and non-negative, got {}",
                self.cutoff_time
            )));
        }
        if self.horizon_end.is_nan() || self.horizon_end < self.cutoff_time {
            return Err(Error::InvalidParams(format!(
                "horizon_end {} precedes cutoff_time {}",
                self.horizon_end, self.cutoff_time
            )));
        }
        let t_end = ens.n_steps() as f64 * ens.dt();
        if self.horizon_end > t_end + TIME_EPS {
            return Err(Error::InvalidParams(format!(
                "horizon_end {} is beyond the ensemble end time {t_end}",
                self.horizon_end
            )));
        }
        if let Conditioning::Localized(loc) = &self.conditioning {
            loc.validate()?;
        }
        if self.seed == ens.master_seed() {
            return Err(Error::TruthLeak(format!(
                "truth seed {} equals the ensemble master seed",
                self.seed
            )));
        }
        Ok(())
    }
}

/// Observation and target index sets of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub observations: IndexSet,
    pub targets: IndexSet,
}

/// Time-index grids implied by a spec on a step of `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dt: f64,
    pub stride: usize,
    pub cutoff: f64,
    /// Last index at or before the horizon.
    pub k_end: usize,
}

impl Grid {
    pub fn new(spec: &ScenarioSpec, dt: f64) -> Self {
        Self {
            dt,
            stride: spec.obs_stride,
            cutoff: spec.cutoff_time,
            k_end: (spec.horizon_end / dt + TIME_EPS).floor() as usize,
        }
    }

    /// Stride points with `t < cutoff`.
    pub fn before(&self) -> Vec<usize> {
        self.full()
            .into_iter()
            .take_while(|&k| (k as f64) * self.dt < self.cutoff - TIME_EPS)
            .collect()
    }

    /// Stride points with `cutoff < t <= horizon_end`.
    pub fn after(&self) -> Vec<usize> {
        self.full()
            .into_iter()
            .filter(|&k| (k as f64) * self.dt > self.cutoff + TIME_EPS)
            .collect()
    }

    /// Stride points on `[0, horizon_end]`.
    pub fn full(&self) -> Vec<usize> {
        (0..=self.k_end).step_by(self.stride).collect()
    }
}

/// Observation layout and targets for `spec.case_id`.
pub fn case_layout(spec: &ScenarioSpec, dt: f64) -> Result<Layout> {
    let g = Grid::new(spec, dt);
    let grid_on = |var, ks: Vec<usize>| IndexSet::for_variable(var, ks);
    let (observed, forecast, reconstructed) = match spec.case_id {
        CaseId::Case1 => (
            vec![Variable::Theta, Variable::Omega],
            vec![Variable::Theta, Variable::Omega],
            vec![],
        ),
        CaseId::Case2 => (
            vec![Variable::Theta],
            vec![Variable::Theta],
            vec![Variable::Omega, Variable::PmPrime],
        ),
        CaseId::Case3 | CaseId::Case3Extra => (
            vec![Variable::Omega],
            vec![Variable::Omega],
            vec![Variable::Theta, Variable::PmPrime],
        ),
    };
    let mut obs = IndexSet::empty();
    for v in observed {
        obs = obs.concat(&grid_on(v, g.before())?)?;
    }
    if spec.case_id == CaseId::Case3Extra {
        obs = obs.concat(&grid_on(Variable::Omega, extra_indices(spec, dt))?)?;
    }
    let mut targets = IndexSet::empty();
    for v in forecast {
        targets = targets.concat(&grid_on(v, g.after())?)?;
    }
    for v in reconstructed {
        targets = targets.concat(&grid_on(v, g.full())?)?;
    }
    Ok(Layout {
        observations: obs,
        targets,
    })
}

/// `extra_obs_count` points spread uniformly over `(cutoff, horizon_end]`,
/// snapped to the time grid.
pub fn extra_indices(spec: &ScenarioSpec, dt: f64) -> Vec<usize> {
    let c = spec.cutoff_time;
    let span = spec.horizon_end - c;
    let n = spec.extra_obs_count;
    let set: BTreeSet<usize> = (0..n)
        .map(|i| ((c + (i + 1) as f64 * span / n as f64) / dt).round() as usize)
        .filter(|&k| k as f64 * dt > c + TIME_EPS)
        .collect();
    set.into_iter().collect()
}

/// One scenario run against its truth.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub spec: ScenarioSpec,
    pub truth: Trajectory,
    pub observations: Observations,
    pub forecast: ForecastResult,
    pub prior_mean: Vec<f64>,
    pub prior_std: Vec<f64>,
    pub metrics: MetricsReport,
}

impl CaseOutcome {
    pub fn variables(&self) -> Vec<Variable> {
        let set: BTreeSet<Variable> = self.forecast.target_idx.iter().map(|&(v, _)| v).collect();
        set.into_iter().collect()
    }

    /// Positions of `var` within the joint target list.
    pub fn positions(&self, var: Variable) -> Vec<usize> {
        self.forecast
            .target_idx
            .iter()
            .enumerate()
            .filter(|(_, &(v, _))| v == var)
            .map(|(i, _)| i)
            .collect()
    }

    /// The forecast restricted to one variable.
    pub fn forecast_for(&self, var: Variable) -> Result<ForecastResult> {
        sub_forecast(&self.forecast, &self.positions(var))
    }

    /// RMS of the prior std over the targets of `var` inside `window`.
    pub fn prior_std_rms(&self, var: Variable, window: &metrics::Window) -> Option<f64> {
        let vals: Vec<f64> = self
            .positions(var)
            .into_iter()
            .filter(|&i| window.contains(self.forecast.target_idx.entries()[i].1 as f64 * self.truth.dt()))
            .map(|i| self.prior_std[i])
            .collect();
        (!vals.is_empty()).then(|| (vals.iter().map(|s| s * s).sum::<f64>() / vals.len() as f64).sqrt())
    }
}

fn sub_forecast(f: &ForecastResult, pos: &[usize]) -> Result<ForecastResult> {
    Ok(ForecastResult {
        target_idx: IndexSet::new(pos.iter().map(|&i| f.target_idx.entries()[i]).collect())?,
        posterior_mean: pos.iter().map(|&i| f.posterior_mean[i]).collect(),
        posterior_cov: f.posterior_cov.select_rows(pos).select_columns(pos),
        posterior_std: pos.iter().map(|&i| f.posterior_std[i]).collect(),
        nugget_used: f.nugget_used,
    })
}

/// The held-out truth trajectory of `spec`.
pub fn truth_trajectory(spec: &ScenarioSpec, ens: &Ensemble) -> Result<Trajectory> {
    let cfg = SimConfig {
        seed: spec.seed,
        ..*ens.sim()
    };
    simulate_realization(ens.grid(), ens.ou(), &cfg, spec.truth_realization)
}

/// Condition `layout.targets` on the truth values at `layout.observations`.
pub fn run_layout(spec: &ScenarioSpec, ens: &Ensemble, layout: &Layout) -> Result<CaseOutcome> {
    spec.validate(ens)?;
    let truth = truth_trajectory(spec, ens)?;
    run_with_truth(spec, &ens.moments(), layout, truth)
}

/// As [`run_layout`] with a caller-supplied truth and a shared moment cache.
pub fn run_with_truth(
    spec: &ScenarioSpec,
    view: &MomentView<'_>,
    layout: &Layout,
    truth: Trajectory,
) -> Result<CaseOutcome> {
    let max = view.ensemble().n_steps();
    layout.observations.check_range(max)?;
    layout.targets.check_range(max)?;
    let values = layout
        .observations
        .iter()
        .map(|&(v, k)| truth_value(&truth, v, k))
        .collect::<Result<Vec<_>>>()?;
    let observations = Observations::new(layout.observations.clone(), values)?;
    let forecast = match &spec.conditioning {
        Conditioning::Localized(loc) => condition_localized(view, &observations, &layout.targets, loc)?,
        Conditioning::Global => condition_global(view, &observations, &layout.targets)?,
    };
    let prior_mean = layout
        .targets
        .iter()
        .map(|&(v, k)| view.mean(v, k))
        .collect::<Result<Vec<_>>>()?;
    let prior_std = layout
        .targets
        .iter()
        .map(|&(v, k)| view.std(v, k))
        .collect::<Result<Vec<_>>>()?;
    let metrics = compute_metrics(
        &forecast,
        &truth,
        &MetricWindows::standard(spec.cutoff_time, spec.horizon_end),
    )?;
    Ok(CaseOutcome {
        spec: spec.clone(),
        truth,
        observations,
        forecast,
        prior_mean,
        prior_std,
        metrics,
    })
}

fn truth_value(truth: &Trajectory, v: Variable, k: usize) -> Result<f64> {
    if k >= truth.len() {
        return Err(Error::AlignmentError(format!(
            "observation {v} at index {k} is beyond the truth record"
        )));
    }
    Ok(truth.value(v, k))
}

fn expect_case(spec: &ScenarioSpec, allowed: &[CaseId]) -> Result<()> {
    if allowed.contains(&spec.case_id) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!(
            "{} cannot be run as {allowed:?}",
            spec.case_id
        )))
    }
}

pub fn run_case1(spec: &ScenarioSpec, ens: &Ensemble) -> Result<CaseOutcome> {
    expect_case(spec, &[CaseId::Case1])?;
    run_case(spec, ens)
}

pub fn run_case2(spec: &ScenarioSpec, ens: &Ensemble) -> Result<CaseOutcome> {
    expect_case(spec, &[CaseId::Case2])?;
    run_case(spec, ens)
}

pub fn run_case3(spec: &ScenarioSpec, ens: &Ensemble) -> Result<CaseOutcome> {
    expect_case(spec, &[CaseId::Case3, CaseId::Case3Extra])?;
    run_case(spec, ens)
}

/// Run whichever case `spec.case_id` names.
pub fn run_case(spec: &ScenarioSpec, ens: &Ensemble) -> Result<CaseOutcome> {
    spec.validate(ens)?;
    run_layout(spec, ens, &case_layout(spec, ens.dt())?)
}

/// Run `spec` against several truth realizations, sharing one moment cache.
pub fn run_case_many(spec: &ScenarioSpec, ens: &Ensemble, truths: &[u64]) -> Result<Vec<CaseOutcome>> {
    spec.validate(ens)?;
    let view = ens.moments();
    let layout = case_layout(spec, ens.dt())?;
    truths
        .iter()
        .map(|&r| {
            let s = ScenarioSpec {
                truth_realization: r,
                ..spec.clone()
            };
            let truth = truth_trajectory(&s, ens)?;
            run_with_truth(&s, &view, &layout, truth)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub family: KernelFamily,
    #[serde(default)]
    pub fit: FitOptions,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            family: KernelFamily::Exponential,
            fit: FitOptions::default(),
        }
    }
}

/// Data-driven forecast with a kernel fitted per variable.
#[derive(Debug, Clone)]
pub struct BaselineOutcome {
    pub config: BaselineConfig,
    pub fitted: BTreeMap<Variable, FittedKernel>,
    pub forecast: ForecastResult,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub physics: CaseOutcome,
    pub baseline: BaselineOutcome,
}

/// Physics-informed and kernel-baseline forecasts from the same Case 1
/// observations.
pub fn run_baseline_comparison(spec: &ScenarioSpec, ens: &Ensemble, cfg: &BaselineConfig) -> Result<Comparison> {
    expect_case(spec, &[CaseId::Case1])?;
    let physics = run_case(spec, ens)?;
    let baseline = run_baseline(&physics, cfg)?;
    Ok(Comparison { physics, baseline })
}

/// Fit the baseline on the history observed in `physics` and forecast the
/// same targets.
pub fn run_baseline(physics: &CaseOutcome, cfg: &BaselineConfig) -> Result<BaselineOutcome> {
    let dt = physics.truth.dt();
    let vars = physics.variables();
    let per_var: Vec<(Variable, FittedKernel, ForecastResult)> = vars
        .par_iter()
        .map(|&var| {
            let mut hist: Vec<(usize, f64)> = physics
                .observations
                .idx
                .iter()
                .zip(physics.observations.values.iter())
                .filter(|(&(v, _), _)| v == var)
                .map(|(&(_, k), &x)| (k, x))
                .collect();
            hist.sort_by_key(|&(k, _)| k);
            let (ks, xs): (Vec<usize>, Vec<f64>) = hist.into_iter().unzip();
            let series = TimeSeries::new(var, dt, ks, xs)?;
            let fitted = fit_hyperparameters(&series, cfg.family, &cfg.fit)?;
            let targets: Vec<usize> = physics
                .positions(var)
                .into_iter()
                .map(|i| physics.forecast.target_idx.entries()[i].1)
                .collect();
            let fc = baseline_forecast(&series, &fitted, &targets)?;
            Ok((var, fitted, fc))
        })
        .collect::<Result<_>>()?;

    let n = physics.forecast.len();
    let mut mean = vec![0.0; n];
    let mut std = vec![0.0; n];
    let mut cov = nalgebra::DMatrix::zeros(n, n);
    let mut nugget: f64 = 0.0;
    let mut fitted = BTreeMap::new();
    for (var, fk, fc) in per_var {
        let pos = physics.positions(var);
        for (a, &pa) in pos.iter().enumerate() {
            mean[pa] = fc.posterior_mean[a];
            std[pa] = fc.posterior_std[a];
            for (b, &pb) in pos.iter().enumerate() {
                cov[(pa, pb)] = fc.posterior_cov[(a, b)];
            }
        }
        nugget = nugget.max(fc.nugget_used);
        fitted.insert(var, fk);
    }
    let forecast = ForecastResult {
        target_idx: physics.forecast.target_idx.clone(),
        posterior_mean: mean,
        posterior_cov: cov,
        posterior_std: std,
        nugget_used: nugget,
    };
    let metrics = compute_metrics(
        &forecast,
        &physics.truth,
        &MetricWindows::standard(physics.spec.cutoff_time, physics.spec.horizon_end),
    )?;
    Ok(BaselineOutcome {
        config: *cfg,
        fitted,
        forecast,
        metrics,
    })
}
