//! Windowed conditioning on Monte Carlo priors.
//!
//! A sample covariance built from `N` realizations has rank at most `N - 1`,
//! and conditioning on a number of observations comparable to `N` fits the
//! sampling noise of the ensemble instead of the signal: the posterior mean
//! degrades and the posterior variance collapses. Because the swing
//! dynamics are Markov in `(theta, omega, pm_prime)`, the observations far
//! from a target add almost nothing once the nearby ones are known.
//!
//! [`condition_localized`] therefore splits the targets into blocks on a
//! fixed time grid and conditions each block on the observations inside it,
//! within `context` seconds of it, and within `context` of the nearest
//! observation on either side when the block falls in an observation gap
//! (e.g. a forecast window). Cross-block posterior covariances are not
//! computed and are reported as zero.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_prior, condition, ForecastResult, Observations};
use crate::ensemble::{IndexSet, MomentView};
use crate::error::{Error, Result};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Localization {
    /// Observation margin around each block (s).
    pub context: f64,
    /// Width of the target blocks (s), aligned to multiples of `block` from t = 0.
    pub block: f64,
}

impl Default for Localization {
    fn default() -> Self {
        Self {
            context: 0.25,
            block: 0.25,
        }
    }
}

impl Localization {
    pub fn validate(&self) -> Result<()> {
        if !(self.context >= 0.0 && self.block > 0.0) {
            return Err(Error::InvalidParams(
                "localization needs context >= 0 and block > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Observations reordered by `(time index, variable)`.
pub(crate) fn canonical_order(obs: &Observations) -> Result<Observations> {
    let mut pairs: Vec<_> = obs
        .idx
        .iter()
        .copied()
        .zip(obs.values.iter().copied())
        .collect();
    pairs.sort_by_key(|&((v, k), _)| (k, v));
    let (idx, values): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Observations::new(IndexSet::new(idx)?, values)
}

/// Condition every target on all observations at once.
pub fn condition_global(view: &MomentView<'_>, obs: &Observations, targets: &IndexSet) -> Result<ForecastResult> {
    let obs = canonical_order(obs)?;
    let prior = build_prior(view, &obs.idx, targets)?;
    condition(&prior, &obs)
}

/// Condition targets block by block on nearby observations.
pub fn condition_localized(
    view: &MomentView<'_>,
    obs: &Observations,
    targets: &IndexSet,
    loc: &Localization,
) -> Result<ForecastResult> {
    loc.validate()?;
    let dt = view.ensemble().dt();
    let obs = canonical_order(obs)?;
    let obs_times: Vec<f64> = obs.idx.iter().map(|&(_, k)| k as f64 * dt).collect();

    let mut blocks: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (pos, &(_, k)) in targets.iter().enumerate() {
        let b = ((k as f64 * dt) / loc.block + TIME_EPS).floor() as i64;
        blocks.entry(b).or_default().push(pos);
    }

    let solved: Vec<(Vec<usize>, ForecastResult)> = blocks
        .into_par_iter()
        .map(|(b, positions)| {
            let start = b as f64 * loc.block;
            let end = start + loc.block;
            let prev = obs_times
                .iter()
                .copied()
                .filter(|&t| t < start - TIME_EPS)
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
            let next = obs_times
                .iter()
                .copied()
                .filter(|&t| t > end + TIME_EPS)
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
            let lo = prev.unwrap_or(start).min(start) - loc.context - TIME_EPS;
            let hi = next.unwrap_or(end).max(end) + loc.context + TIME_EPS;

            let chosen: Vec<usize> = (0..obs_times.len())
                .filter(|&i| obs_times[i] >= lo && obs_times[i] <= hi)
                .collect();
            let sub_obs = Observations::new(
                IndexSet::new(chosen.iter().map(|&i| obs.idx.entries()[i]).collect())?,
                chosen.iter().map(|&i| obs.values[i]).collect(),
            )?;
            let sub_targets =
                IndexSet::new(positions.iter().map(|&p| targets.entries()[p]).collect())?;
            let prior = build_prior(view, &sub_obs.idx, &sub_targets)?;
            Ok((positions, condition(&prior, &sub_obs)?))
        })
        .collect::<Result<_>>()?;

    let n = targets.len();
    let mut mean = vec![0.0; n];
    let mut std = vec![0.0; n];
    let mut cov = DMatrix::zeros(n, n);
    let mut nugget: f64 = 0.0;
    for (positions, res) in solved {
        nugget = nugget.max(res.nugget_used);
        for (a, &pa) in positions.iter().enumerate() {
            mean[pa] = res.posterior_mean[a];
            std[pa] = res.posterior_std[a];
            for (b, &pb) in positions.iter().enumerate() {
                cov[(pa, pb)] = res.posterior_cov[(a, b)];
            }
        }
    }
    Ok(ForecastResult {
        target_idx: targets.clone(),
        posterior_mean: mean,
        posterior_cov: cov,
        posterior_std: std,
        nugget_used: nugget,
    })
}
