//! Data-driven baseline: a stationary kernel whose amplitude, length scale
//! and noise floor are fitted to a single observed series by minimizing the
//! negative log marginal likelihood.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{condition, ForecastResult, JointPrior, Observations};
use crate::ensemble::IndexSet;
use crate::error::{Error, Result};
use crate::Variable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `a exp(-|t - s| / l)`
    Exponential,
    /// `a exp(-(t - s)^2 / (2 l^2))`
    SquaredExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanModel {
    Zero,
    /// Constant mean equal to the sample mean of the observations.
    ConstantFitted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub length_scale: f64,
    pub noise_floor: f64,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.length_scale > 0.0 && self.noise_floor >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "kernel needs amplitude > 0, length_scale > 0, noise_floor >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let d = (t - s).abs();
        match self.family {
            KernelFamily::Exponential => self.amplitude * (-d / self.length_scale).exp(),
            KernelFamily::SquaredExponential => {
                let r = d / self.length_scale;
                self.amplitude * (-0.5 * r * r).exp()
            }
        }
    }

    fn gram(&self, a: &[f64], b: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(a[i], b[j]))
    }
}

/// Samples of one variable on the simulation time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub variable: Variable,
    pub dt: f64,
    pub time_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(variable: Variable, dt: f64, time_indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if time_indices.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times but {} values",
                time_indices.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("series values must be finite".into()));
        }
        Ok(Self {
            variable,
            dt,
            time_indices,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.time_indices.iter().map(|&k| k as f64 * self.dt).collect()
    }

    pub fn sample_mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    fn centered(&self, mean_model: MeanModel) -> (f64, Vec<f64>) {
        let mean = match mean_model {
            MeanModel::Zero => 0.0,
            MeanModel::ConstantFitted => self.sample_mean(),
        };
        (mean, self.values.iter().map(|v| v - mean).collect())
    }
}

/// Negative log marginal likelihood
/// `1/2 y^T K^{-1} y + 1/2 log det K + n/2 log(2 pi)` with `K` the kernel
/// Gram matrix plus `noise_floor` on the diagonal.
///
/// Exponential kernels are evaluated with an exact O(n) Kalman recursion
/// (the kernel is the covariance of a Markov process); other families use a
/// dense Cholesky factorization, see [`nlml_dense`].
pub fn nlml(series: &TimeSeries, kernel: &KernelSpec, mean_model: MeanModel) -> Result<f64> {
    kernel.validate()?;
    let (_, y) = series.centered(mean_model);
    match kernel.family {
        KernelFamily::Exponential => nlml_markov(&series.times(), &y, kernel),
        KernelFamily::SquaredExponential => nlml_from_gram(&series.times(), &y, kernel),
    }
}

/// Dense-Cholesky evaluation of [`nlml`] for any kernel family.
pub fn nlml_dense(series: &TimeSeries, kernel: &KernelSpec, mean_model: MeanModel) -> Result<f64> {
    kernel.validate()?;
    let (_, y) = series.centered(mean_model);
    nlml_from_gram(&series.times(), &y, kernel)
}

fn nlml_from_gram(times: &[f64], y: &[f64], kernel: &KernelSpec) -> Result<f64> {
    let n = y.len();
    let mut k = kernel.gram(times, times);
    for i in 0..n {
        k[(i, i)] += kernel.noise_floor;
    }
    let chol = nalgebra::Cholesky::new(k).ok_or(Error::SingularPrior { max_nugget: 0.0 })?;
    let l = chol.l_dirty();
    let log_det: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let quad: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(0.5 * quad + 0.5 * log_det + 0.5 * n as f64 * (2.0 * PI).ln())
}

fn nlml_markov(times: &[f64], y: &[f64], kernel: &KernelSpec) -> Result<f64> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let a = kernel.amplitude;
    let r = kernel.noise_floor;
    let mut total = 0.0;
    let mut mean = 0.0;
    let mut var = a;
    let mut prev_t: Option<f64> = None;
    for &i in &order {
        if let Some(tp) = prev_t {
            let phi = (-(times[i] - tp) / kernel.length_scale).exp();
            mean *= phi;
            var = phi * phi * var + a * (1.0 - phi * phi);
        }
        let s = var + r;
        if s.is_nan() || s <= 0.0 {
            return Err(Error::SingularPrior { max_nugget: 0.0 });
        }
        let e = y[i] - mean;
        total += 0.5 * ((2.0 * PI * s).ln() + e * e / s);
        let gain = var / s;
        mean += gain * e;
        var *= r / s;
        prev_t = Some(times[i]);
    }
    Ok(total)
}

/// Search box and start grid for [`fit_hyperparameters`].
///
/// Bounds are absolute, in log10 units. Start points are placed relative to
/// the sample variance `s2` and time span of the series: amplitudes at
/// `s2 * 10^{-2..2}`, length scales at `span * 10^{-3..1}`, noise floors at
/// `s2 * 10^{-8, -5, -2}` (a 5 x 5 x 3 grid).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    pub mean_model: MeanModel,
    pub log10_amplitude_bounds: (f64, f64),
    pub log10_length_bounds: (f64, f64),
    pub log10_noise_bounds: (f64, f64),
    /// Number of best grid points refined by pattern search.
    pub refine_starts: usize,
    /// Pattern search stops once its step (natural-log units) is below this.
    pub min_step: f64,
    pub max_evals_per_start: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mean_model: MeanModel::ConstantFitted,
            log10_amplitude_bounds: (-14.0, 4.0),
            log10_length_bounds: (-4.0, 3.0),
            log10_noise_bounds: (-16.0, 0.0),
            refine_starts: 8,
            min_step: 1e-4,
            max_evals_per_start: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedKernel {
    pub kernel: KernelSpec,
    pub mean_model: MeanModel,
    /// Constant prior mean used for forecasting.
    pub mean: f64,
    pub nlml: f64,
}

struct Objective<'a> {
    series: &'a TimeSeries,
    family: KernelFamily,
    mean_model: MeanModel,
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Objective<'_> {
    fn spec(&self, p: &[f64; 3]) -> KernelSpec {
        KernelSpec {
            family: self.family,
            amplitude: p[0].exp(),
            length_scale: p[1].exp(),
            noise_floor: p[2].exp(),
        }
    }

    fn clamp(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|i| p[i].clamp(self.lo[i], self.hi[i]))
    }

    fn eval(&self, p: &[f64; 3]) -> f64 {
        match nlml(self.series, &self.spec(p), self.mean_model) {
            Ok(v) if v.is_finite() => v,
            _ => f64::INFINITY,
        }
    }

    /// Compass search in log space. Only strictly improving moves are
    /// accepted, so the objective is non-increasing along the path.
    fn refine(&self, start: [f64; 3], mut best: f64, min_step: f64, max_evals: usize) -> ([f64; 3], f64, Vec<f64>) {
        let mut p = start;
        let mut step = 0.5 * std::f64::consts::LN_10;
        let mut evals = 0;
        let mut path = vec![best];
        while step >= min_step && evals < max_evals {
            let mut improved = false;
            for dim in 0..3 {
                for sign in [1.0, -1.0] {
                    let mut q = p;
                    q[dim] += sign * step;
                    let q = self.clamp(q);
                    if q == p {
                        continue;
                    }
                    let v = self.eval(&q);
                    evals += 1;
                    if v < best {
                        best = v;
                        p = q;
                        path.push(v);
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (p, best, path)
    }
}

/// Result of a fit together with the objective values accepted along the
/// winning search path.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub fitted: FittedKernel,
    pub accepted_path: Vec<f64>,
}

/// Fit amplitude, length scale and noise floor by minimizing [`nlml`].
pub fn fit_hyperparameters(series: &TimeSeries, family: KernelFamily, opts: &FitOptions) -> Result<FittedKernel> {
    fit_with_trace(series, family, opts).map(|t| t.fitted)
}

pub fn fit_with_trace(series: &TimeSeries, family: KernelFamily, opts: &FitOptions) -> Result<FitTrace> {
    if series.len() < 8 {
        return Err(Error::FitFailed(format!(
            "need at least 8 observations, got {}",
            series.len()
        )));
    }
    let ln10 = std::f64::consts::LN_10;
    let obj = Objective {
        series,
        family,
        mean_model: opts.mean_model,
        lo: [
            opts.log10_amplitude_bounds.0 * ln10,
            opts.log10_length_bounds.0 * ln10,
            opts.log10_noise_bounds.0 * ln10,
        ],
        hi: [
            opts.log10_amplitude_bounds.1 * ln10,
            opts.log10_length_bounds.1 * ln10,
            opts.log10_noise_bounds.1 * ln10,
        ],
    };

    let (_, y) = series.centered(opts.mean_model);
    let s2 = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(f64::MIN_POSITIVE);
    let times = series.times();
    let (t_min, t_max) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let span = (t_max - t_min).max(series.dt.max(f64::MIN_POSITIVE));

    let mut starts = Vec::with_capacity(75);
    for ea in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        for el in [-3.0, -2.0, -1.0, 0.0, 1.0] {
            for en in [-8.0, -5.0, -2.0] {
                let p = obj.clamp([
                    (s2 * 10f64.powf(ea)).ln(),
                    (span * 10f64.powf(el)).ln(),
                    (s2 * 10f64.powf(en)).ln(),
                ]);
                starts.push((p, obj.eval(&p)));
            }
        }
    }
    starts.sort_by(|a, b| a.1.total_cmp(&b.1));
    if !starts[0].1.is_finite() {
        return Err(Error::FitFailed("every start point failed to factorize".into()));
    }

    let mut candidates: Vec<([f64; 3], f64, Vec<f64>)> = starts
        .iter()
        .take(opts.refine_starts.max(1))
        .filter(|s| s.1.is_finite())
        .map(|&(p, v)| obj.refine(p, v, opts.min_step, opts.max_evals_per_start))
        .collect();
    // best objective, then shortest length scale, then smallest amplitude
    candidates.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0[1].total_cmp(&b.0[1]))
            .then(a.0[0].total_cmp(&b.0[0]))
    });
    let (p, best, path) = candidates.swap_remove(0);
    let (mean, _) = series.centered(opts.mean_model);
    Ok(FitTrace {
        fitted: FittedKernel {
            kernel: obj.spec(&p),
            mean_model: opts.mean_model,
            mean,
            nlml: best,
        },
        accepted_path: path,
    })
}

/// Kernel-generated joint prior for the series and the target time indices.
/// Observations carry the kernel's noise floor; targets are noise-free.
pub fn kernel_prior(series: &TimeSeries, fitted: &FittedKernel, target_indices: &[usize]) -> Result<JointPrior> {
    fitted.kernel.validate()?;
    let t_o = series.times();
    let t_f: Vec<f64> = target_indices.iter().map(|&k| k as f64 * series.dt).collect();
    let mut c_oo = fitted.kernel.gram(&t_o, &t_o);
    for i in 0..t_o.len() {
        c_oo[(i, i)] += fitted.kernel.noise_floor;
    }
    Ok(JointPrior {
        obs_idx: IndexSet::for_variable(series.variable, series.time_indices.iter().copied())?,
        target_idx: IndexSet::for_variable(series.variable, target_indices.iter().copied())?,
        mean_o: DVector::from_element(t_o.len(), fitted.mean),
        mean_f: DVector::from_element(t_f.len(), fitted.mean),
        c_of: fitted.kernel.gram(&t_o, &t_f),
        c_ff: fitted.kernel.gram(&t_f, &t_f),
        c_oo,
    })
}

/// Forecast the same variable at `target_indices` with the fitted kernel.
pub fn baseline_forecast(series: &TimeSeries, fitted: &FittedKernel, target_indices: &[usize]) -> Result<ForecastResult> {
    let prior = kernel_prior(series, fitted, target_indices)?;
    let obs = Observations::new(prior.obs_idx.clone(), series.values.clone())?;
    condition(&prior, &obs)
}
