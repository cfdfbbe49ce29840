//! Gaussian-process conditioning.
//!
//! A [`JointPrior`] holds the prior mean and covariance blocks of an
//! observed vector `x_o` and a target vector `x_f`. [`condition`] returns the
//! Gaussian posterior of `x_f` given `x_o`:
//!
//! ```text
//! mean = m_f + C_fo C_oo^{-1} (x_o - m_o)
//! cov  = C_ff - C_fo C_oo^{-1} C_of
//! ```
//!
//! The prior may come from Monte Carlo moments ([`build_prior`]) or from a
//! parametric kernel ([`kernel::baseline_forecast`]); both share the same
//! solve.

pub mod kernel;
pub mod local;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::ensemble::{IndexSet, MomentView};
use crate::error::{Error, Result};

pub use kernel::{
    baseline_forecast, fit_hyperparameters, nlml, nlml_dense, FitOptions, FittedKernel,
    KernelFamily, KernelSpec, MeanModel, TimeSeries,
};
pub use local::{condition_global, condition_localized, Localization};

/// Relative nuggets tried in order, scaled by the largest prior variance of
/// the observed entries.
pub const NUGGET_LADDER: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// Posterior variances below `-NEGATIVE_VARIANCE_TOL * scale` are an error;
/// smaller negative values are round-off and clamp to zero.
pub const NEGATIVE_VARIANCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct JointPrior {
    pub obs_idx: IndexSet,
    pub target_idx: IndexSet,
    pub mean_o: DVector<f64>,
    pub mean_f: DVector<f64>,
    pub c_oo: DMatrix<f64>,
    /// Observed rows, target columns. `C_fo` is its transpose.
    pub c_of: DMatrix<f64>,
    pub c_ff: DMatrix<f64>,
}

impl JointPrior {
    pub fn check_dims(&self) -> Result<()> {
        let (no, nf) = (self.obs_idx.len(), self.target_idx.len());
        let ok = self.mean_o.len() == no
            && self.mean_f.len() == nf
            && self.c_oo.shape() == (no, no)
            && self.c_of.shape() == (no, nf)
            && self.c_ff.shape() == (nf, nf);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "prior blocks do not match {no} observed / {nf} target entries"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub idx: IndexSet,
    pub values: DVector<f64>,
}

impl Observations {
    pub fn new(idx: IndexSet, values: Vec<f64>) -> Result<Self> {
        if idx.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} observation indices but {} values",
                idx.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("observations must be finite".into()));
        }
        Ok(Self {
            idx,
            values: DVector::from_vec(values),
        })
    }

    pub fn empty() -> Self {
        Self {
            idx: IndexSet::empty(),
            values: DVector::zeros(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    #[serde(skip)]
    pub target_idx: IndexSet,
    pub posterior_mean: Vec<f64>,
    #[serde(skip)]
    pub posterior_cov: DMatrix<f64>,
    pub posterior_std: Vec<f64>,
    /// Absolute diagonal nugget that made `C_oo` factorizable.
    pub nugget_used: f64,
}

impl ForecastResult {
    pub fn len(&self) -> usize {
        self.posterior_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posterior_mean.is_empty()
    }
}

/// Mean and covariance blocks from the ensemble moments.
pub fn build_prior(view: &MomentView<'_>, obs_idx: &IndexSet, target_idx: &IndexSet) -> Result<JointPrior> {
    Ok(JointPrior {
        mean_o: view.mean_vector(obs_idx)?,
        mean_f: view.mean_vector(target_idx)?,
        c_oo: view.cov_block(obs_idx, obs_idx)?,
        c_of: view.cov_block(obs_idx, target_idx)?,
        c_ff: view.cov_block(target_idx, target_idx)?,
        obs_idx: obs_idx.clone(),
        target_idx: target_idx.clone(),
    })
}

/// Cholesky factor of `c + nugget I`, walking up [`NUGGET_LADDER`].
///
/// A factor whose smallest pivot is at round-off level relative to `scale`
/// counts as a failure, since it only means the matrix is singular to
/// working precision.
pub(crate) fn factor_with_nugget(c: &DMatrix<f64>, scale: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = c.nrows();
    let pivot_floor = (n.max(1) as f64) * f64::EPSILON * scale;
    for rel in NUGGET_LADDER {
        let nugget = rel * scale;
        let mut m = c.clone();
        for i in 0..n {
            m[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(m) {
            let l = chol.l_dirty();
            if (0..n).all(|i| l[(i, i)] * l[(i, i)] > pivot_floor) {
                return Ok((chol, nugget));
            }
        }
    }
    Err(Error::SingularPrior {
        max_nugget: NUGGET_LADDER[NUGGET_LADDER.len() - 1] * scale,
    })
}

fn max_diag(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b))
}

fn posterior_std(cov: &DMatrix<f64>, tol: f64) -> Result<Vec<f64>> {
    cov.diagonal()
        .iter()
        .map(|&v| {
            if v < -tol {
                Err(Error::NegativePosteriorVariance {
                    value: v,
                    tolerance: tol,
                })
            } else {
                Ok(v.max(0.0).sqrt())
            }
        })
        .collect()
}

/// Gaussian posterior of the targets given exact observations.
pub fn condition(prior: &JointPrior, obs: &Observations) -> Result<ForecastResult> {
    prior.check_dims()?;
    if obs.idx != prior.obs_idx {
        return Err(Error::DimensionMismatch(
            "observation index set differs from the prior's".into(),
        ));
    }
    if obs.values.len() != obs.idx.len() {
        return Err(Error::DimensionMismatch("observation values".into()));
    }

    let tau = max_diag(&prior.c_oo);
    let var_tol = NEGATIVE_VARIANCE_TOL * tau.max(max_diag(&prior.c_ff));

    // No observations, or observations the prior says are deterministic:
    // nothing to learn.
    if prior.obs_idx.is_empty() || tau <= 0.0 {
        return Ok(ForecastResult {
            target_idx: prior.target_idx.clone(),
            posterior_mean: prior.mean_f.iter().copied().collect(),
            posterior_std: posterior_std(&prior.c_ff, var_tol)?,
            posterior_cov: prior.c_ff.clone(),
            nugget_used: 0.0,
        });
    }

    let (chol, nugget) = factor_with_nugget(&prior.c_oo, tau)?;
    let l = chol.l();
    let resid = &obs.values - &prior.mean_o;
    let w = l
        .solve_lower_triangular(&resid)
        .ok_or(Error::SingularPrior { max_nugget: nugget })?;
    let v = l
        .solve_lower_triangular(&prior.c_of)
        .ok_or(Error::SingularPrior { max_nugget: nugget })?;

    let mean = &prior.mean_f + v.tr_mul(&w);
    let mut cov = &prior.c_ff - v.tr_mul(&v);
    let nf = cov.nrows();
    for i in 0..nf {
        for j in (i + 1)..nf {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }

    Ok(ForecastResult {
        target_idx: prior.target_idx.clone(),
        posterior_mean: mean.iter().copied().collect(),
        posterior_std: posterior_std(&cov, var_tol)?,
        posterior_cov: cov,
        nugget_used: nugget,
    })
}
