//! Forecast-quality metrics against a known truth trajectory.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::ForecastResult;
use crate::sde::Trajectory;
use crate::Variable;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bounds {
    /// `[start, end)`
    ClosedOpen,
    /// `(start, end]`
    OpenClosed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub label: String,
    pub start: f64,
    pub end: f64,
    pub bounds: Bounds,
}

impl Window {
    pub fn contains(&self, t: f64) -> bool {
        match self.bounds {
            Bounds::ClosedOpen => t >= self.start - TIME_EPS && t < self.end - TIME_EPS,
            Bounds::OpenClosed => t > self.start + TIME_EPS && t <= self.end + TIME_EPS,
        }
    }
}

/// Reporting windows relative to the observation cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindows {
    pub cutoff: f64,
    pub horizon_end: f64,
    /// An error run must last this long to end the mean-forecast horizon (s).
    pub sustain: f64,
    pub windows: Vec<Window>,
}

impl MetricWindows {
    /// Non-overlapping windows `[0, cutoff)`, `(cutoff, cutoff + 2]`,
    /// `(cutoff + 2, cutoff + 4]` and `(cutoff + 4, horizon_end]`.
    pub fn standard(cutoff: f64, horizon_end: f64) -> Self {
        let w = |label: &str, start, end, bounds| Window {
            label: label.into(),
            start,
            end,
            bounds,
        };
        Self {
            cutoff,
            horizon_end,
            sustain: 0.1,
            windows: vec![
                w("observed", 0.0, cutoff, Bounds::ClosedOpen),
                w("forecast_0_2s", cutoff, cutoff + 2.0, Bounds::OpenClosed),
                w("forecast_2_4s", cutoff + 2.0, cutoff + 4.0, Bounds::OpenClosed),
                w("forecast_beyond_4s", cutoff + 4.0, horizon_end.max(cutoff + 4.0), Bounds::OpenClosed),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    pub variable: Variable,
    pub window: String,
    pub n: usize,
    pub rmse: Option<f64>,
    pub coverage_2sigma: Option<f64>,
    pub mean_posterior_std: Option<f64>,
}

/// Time after the cutoff until the error first stays above two posterior
/// standard deviations for the sustain period. `censored` means that never
/// happened and `seconds` is the length of the forecast record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanHorizon {
    pub seconds: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub windows: Vec<WindowStat>,
    /// Coverage of the truth by the `+-2 sigma` band over the forecast window.
    pub coverage_2sigma: BTreeMap<Variable, f64>,
    pub mean_horizon: BTreeMap<Variable, MeanHorizon>,
}

impl MetricsReport {
    pub fn window(&self, var: Variable, label: &str) -> Option<&WindowStat> {
        self.windows
            .iter()
            .find(|w| w.variable == var && w.window == label)
    }

    pub fn rmse(&self, var: Variable, label: &str) -> Option<f64> {
        self.window(var, label).and_then(|w| w.rmse)
    }

    /// RMSE and coverage over the union of several windows.
    pub fn pooled(&self, var: Variable, labels: &[&str]) -> Option<(f64, f64)> {
        let (mut n, mut sq, mut cov) = (0usize, 0.0, 0.0);
        for w in labels.iter().filter_map(|l| self.window(var, l)) {
            if let (Some(r), Some(c)) = (w.rmse, w.coverage_2sigma) {
                n += w.n;
                sq += r * r * w.n as f64;
                cov += c * w.n as f64;
            }
        }
        (n > 0).then(|| ((sq / n as f64).sqrt(), cov / n as f64))
    }

    pub fn merge(&mut self, other: MetricsReport) {
        self.windows.extend(other.windows);
        self.coverage_2sigma.extend(other.coverage_2sigma);
        self.mean_horizon.extend(other.mean_horizon);
    }
}

struct Point {
    t: f64,
    err: f64,
    std: f64,
}

impl Point {
    fn covered(&self) -> bool {
        self.err.abs() <= 2.0 * self.std
    }
}

/// RMSE, `+-2 sigma` coverage and mean-forecast horizon of `forecast`
/// against `truth`, per variable and window.
pub fn compute_metrics(forecast: &ForecastResult, truth: &Trajectory, windows: &MetricWindows) -> Result<MetricsReport> {
    let mut by_var: BTreeMap<Variable, Vec<Point>> = BTreeMap::new();
    for (j, &(var, k)) in forecast.target_idx.iter().enumerate() {
        if k >= truth.len() {
            return Err(Error::AlignmentError(format!(
                "target {var} at index {k} is beyond the truth record of {} states",
                truth.len()
            )));
        }
        by_var.entry(var).or_default().push(Point {
            t: truth.times[k],
            err: forecast.posterior_mean[j] - truth.value(var, k),
            std: forecast.posterior_std[j],
        });
    }

    let mut report = MetricsReport::default();
    for (var, mut points) in by_var {
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        for w in &windows.windows {
            let inside: Vec<&Point> = points.iter().filter(|p| w.contains(p.t)).collect();
            let n = inside.len();
            let stat = |f: &dyn Fn(&Point) -> f64| {
                (n > 0).then(|| inside.iter().map(|p| f(p)).sum::<f64>() / n as f64)
            };
            report.windows.push(WindowStat {
                variable: var,
                window: w.label.clone(),
                n,
                rmse: stat(&|p| p.err * p.err).map(f64::sqrt),
                coverage_2sigma: stat(&|p| if p.covered() { 1.0 } else { 0.0 }),
                mean_posterior_std: stat(&|p| p.std),
            });
        }

        let after: Vec<&Point> = points
            .iter()
            .filter(|p| p.t > windows.cutoff + TIME_EPS && p.t <= windows.horizon_end + TIME_EPS)
            .collect();
        if let Some(last) = after.last() {
            let covered = after.iter().filter(|p| p.covered()).count();
            report
                .coverage_2sigma
                .insert(var, covered as f64 / after.len() as f64);
            report
                .mean_horizon
                .insert(var, mean_horizon(&after, windows.cutoff, windows.sustain, last.t));
        }
    }
    Ok(report)
}

fn mean_horizon(points: &[&Point], cutoff: f64, sustain: f64, last_t: f64) -> MeanHorizon {
    for (i, p) in points.iter().enumerate() {
        if p.covered() || p.t + sustain > last_t + TIME_EPS {
            continue;
        }
        let run_holds = points[i..]
            .iter()
            .take_while(|q| q.t <= p.t + sustain + TIME_EPS)
            .all(|q| !q.covered());
        if run_holds {
            return MeanHorizon {
                seconds: p.t - cutoff,
                censored: false,
            };
        }
    }
    MeanHorizon {
        seconds: last_t - cutoff,
        censored: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::IndexSet;
    use crate::sde::StateVec;
    use nalgebra::DMatrix;

    fn truth(theta: &[f64], dt: f64) -> Trajectory {
        Trajectory {
            times: (0..theta.len()).map(|k| k as f64 * dt).collect(),
            states: theta.iter().map(|&t| StateVec::new(t, 1.0, 0.0)).collect(),
            seed_used: 0,
            stream: 0,
        }
    }

    fn forecast(ks: Vec<usize>, mean: Vec<f64>, std: Vec<f64>) -> ForecastResult {
        let n = ks.len();
        ForecastResult {
            target_idx: IndexSet::for_variable(Variable::Theta, ks).unwrap(),
            posterior_mean: mean,
            posterior_cov: DMatrix::zeros(n, n),
            posterior_std: std,
            nugget_used: 0.0,
        }
    }

    #[test]
    fn hand_window() {
        let tr = truth(&[0.0; 5], 0.5);
        // cutoff 0: window (0, 2] holds indices 1..=4
        let f = forecast(vec![1, 2, 3, 4], vec![0.0, 1.0, 0.0, 1.0], vec![1.0; 4]);
        let r = compute_metrics(&f, &tr, &MetricWindows::standard(0.0, 2.0)).unwrap();
        let w = r.window(Variable::Theta, "forecast_0_2s").unwrap();
        assert_eq!(w.n, 4);
        assert!((w.rmse.unwrap() - 0.5_f64.sqrt()).abs() < 1e-15);
        assert_eq!(w.coverage_2sigma, Some(1.0));
        assert_eq!(r.coverage_2sigma[&Variable::Theta], 1.0);
    }

    #[test]
    fn perfect_and_shifted_forecasts() {
        let vals: Vec<f64> = (0..41).map(|k| (k as f64 * 0.3).sin()).collect();
        let tr = truth(&vals, 0.1);
        let ks: Vec<usize> = (0..41).collect();
        let exact = forecast(ks.clone(), vals.clone(), vec![0.2; 41]);
        let r = compute_metrics(&exact, &tr, &MetricWindows::standard(1.0, 4.0)).unwrap();
        assert_eq!(r.pooled(Variable::Theta, &["forecast_0_2s", "forecast_2_4s"]), Some((0.0, 1.0)));
        assert_eq!(r.coverage_2sigma[&Variable::Theta], 1.0);
        assert!(r.mean_horizon[&Variable::Theta].censored);
        assert!((r.mean_horizon[&Variable::Theta].seconds - 3.0).abs() < 1e-9);

        let shifted = forecast(ks, vals.iter().map(|v| v + 0.6).collect(), vec![0.2; 41]);
        let r = compute_metrics(&shifted, &tr, &MetricWindows::standard(1.0, 4.0)).unwrap();
        assert_eq!(r.coverage_2sigma[&Variable::Theta], 0.0);
        let h = r.mean_horizon[&Variable::Theta];
        assert!(!h.censored);
        assert!((h.seconds - 0.1).abs() < 1e-9);
    }

    #[test]
    fn short_excursions_do_not_end_horizon() {
        let tr = truth(&[0.0; 101], 0.01);
        let mut mean = vec![0.0; 101];
        // 0.05 s excursion, then a sustained one from t = 0.6
        for m in mean.iter_mut().take(26).skip(21) {
            *m = 5.0;
        }
        for m in mean.iter_mut().skip(60) {
            *m = 5.0;
        }
        let f = forecast((0..101).collect(), mean, vec![1.0; 101]);
        let r = compute_metrics(&f, &tr, &MetricWindows::standard(0.0, 1.0)).unwrap();
        let h = r.mean_horizon[&Variable::Theta];
        assert!(!h.censored);
        assert!((h.seconds - 0.6).abs() < 1e-9);
    }

    #[test]
    fn empty_forecast_gives_empty_report() {
        let tr = truth(&[0.0; 3], 0.1);
        let f = forecast(vec![], vec![], vec![]);
        let r = compute_metrics(&f, &tr, &MetricWindows::standard(0.1, 0.1)).unwrap();
        assert!(r.windows.is_empty());
        assert!(r.mean_horizon.is_empty());
    }

    #[test]
    fn misaligned_forecast_rejected() {
        let tr = truth(&[0.0; 3], 0.1);
        let f = forecast(vec![5], vec![0.0], vec![1.0]);
        assert!(matches!(
            compute_metrics(&f, &tr, &MetricWindows::standard(0.0, 1.0)),
            Err(Error::AlignmentError(_))
        ));
    }
}
