//! Monte Carlo ensembles of the swing-equation model and the prior moments
//! derived from them.
//!
//! Full joint covariances over every (variable, time) pair would be far too
//! large at realistic grid sizes, so only the raw realizations are stored and
//! covariance blocks are assembled on demand for the index sets a caller
//! asks for.

mod file;

use std::collections::HashSet;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::NoiseStream;
use crate::sde::{self, GridParams, OuParams, SimConfig, StateVec, Trajectory};
use crate::Variable;

pub use file::{load_ensemble, save_ensemble, FORMAT_MAJOR, FORMAT_MINOR};

/// `N` realizations of `K + 1` states each.
///
/// Values are stored realization-major: realization, then time index, then
/// variable in the order `(theta, omega, pm_prime)`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    n_realizations: usize,
    n_steps: usize,
    grid: GridParams,
    ou: OuParams,
    sim: SimConfig,
    data: Vec<f64>,
}

impl Ensemble {
    pub(crate) fn from_parts(
        grid: GridParams,
        ou: OuParams,
        sim: SimConfig,
        n_realizations: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        let n_steps = sim.n_steps();
        if n_realizations < 2 {
            return Err(Error::InvalidParams(
                "an ensemble needs at least two realizations".into(),
            ));
        }
        if data.len() != n_realizations * (n_steps + 1) * 3 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                n_realizations * (n_steps + 1) * 3,
                data.len()
            )));
        }
        Ok(Self {
            n_realizations,
            n_steps,
            grid,
            ou,
            sim,
            data,
        })
    }

    pub fn n_realizations(&self) -> usize {
        self.n_realizations
    }

    /// Number of steps `K`; time indices run over `0..=K`.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.sim.dt
    }

    pub fn master_seed(&self) -> u64 {
        self.sim.seed
    }

    pub fn grid(&self) -> &GridParams {
        &self.grid
    }

    pub fn ou(&self) -> &OuParams {
        &self.ou
    }

    pub fn sim(&self) -> &SimConfig {
        &self.sim
    }

    pub fn time(&self, k: usize) -> f64 {
        self.sim.time(k)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn value(&self, realization: usize, var: Variable, k: usize) -> f64 {
        self.data[(realization * (self.n_steps + 1) + k) * 3 + var.index()]
    }

    pub fn realization(&self, realization: usize) -> Trajectory {
        let stride = 3 * (self.n_steps + 1);
        let chunk = &self.data[realization * stride..(realization + 1) * stride];
        Trajectory {
            times: self.times(),
            states: chunk
                .chunks_exact(3)
                .map(|c| StateVec::new(c[0], c[1], c[2]))
                .collect(),
            seed_used: self.sim.seed,
            stream: realization as u64,
        }
    }

    /// Bitwise equality of metadata and values.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.n_realizations == other.n_realizations
            && self.n_steps == other.n_steps
            && self.grid == other.grid
            && self.ou == other.ou
            && self.sim == other.sim
            && self.data.len() == other.data.len()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn moments(&self) -> MomentView<'_> {
        MomentView::new(self)
    }
}

/// Simulate `n` realizations, realization `i` on noise stream `i` of
/// `cfg.seed`. The result does not depend on the rayon thread count.
pub fn run_ensemble(
    params: &GridParams,
    ou: &OuParams,
    cfg: &SimConfig,
    n: usize,
) -> Result<Ensemble> {
    params.validate()?;
    ou.validate()?;
    cfg.validate()?;
    if n < 2 {
        return Err(Error::InvalidParams(
            "an ensemble needs at least two realizations".into(),
        ));
    }
    let stride = 3 * (cfg.n_steps() + 1);
    let mut data = vec![0.0; n * stride];
    let outcomes: Vec<Result<()>> = data
        .par_chunks_mut(stride)
        .enumerate()
        .map(|(i, chunk)| {
            let mut noise = NoiseStream::new(cfg.seed, i as u64);
            sde::integrate_into(params, ou, cfg, &mut noise, chunk).map_err(|e| match e {
                Error::IntegrationDiverged { step, .. } => Error::IntegrationDiverged {
                    realization: Some(i),
                    step,
                },
                other => other,
            })
        })
        .collect();
    // lowest failing realization wins so the error is scheduling-independent
    if let Some(err) = outcomes.into_iter().find_map(Result::err) {
        return Err(err);
    }
    Ensemble::from_parts(*params, *ou, *cfg, n, data)
}

/// Ordered, duplicate-free list of `(variable, time index)` pairs addressing
/// rows or columns of a covariance block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSet {
    entries: Vec<(Variable, usize)>,
}

impl IndexSet {
    pub fn new(entries: Vec<(Variable, usize)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for &(variable, time_index) in &entries {
            if !seen.insert((variable, time_index)) {
                return Err(Error::DuplicateIndex {
                    variable,
                    time_index,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One variable at the given time indices.
    pub fn for_variable(var: Variable, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(indices.into_iter().map(|k| (var, k)).collect())
    }

    /// Concatenation; fails if the two sets share an entry.
    pub fn concat(&self, other: &IndexSet) -> Result<Self> {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Self::new(entries)
    }

    pub fn entries(&self) -> &[(Variable, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Variable, usize)> {
        self.entries.iter()
    }

    pub fn check_range(&self, max_index: usize) -> Result<()> {
        match self.entries.iter().find(|(_, k)| *k > max_index) {
            Some(&(variable, time_index)) => Err(Error::IndexOutOfRange {
                variable,
                time_index,
                max_index,
            }),
            None => Ok(()),
        }
    }
}

/// Prior moments of an ensemble: sample means (cached lazily) and unbiased
/// covariance blocks computed on request.
#[derive(Debug)]
pub struct MomentView<'a> {
    ensemble: &'a Ensemble,
    means: Vec<OnceLock<f64>>,
}

impl<'a> MomentView<'a> {
    pub fn new(ensemble: &'a Ensemble) -> Self {
        let means = (0..3 * (ensemble.n_steps + 1))
            .map(|_| OnceLock::new())
            .collect();
        Self { ensemble, means }
    }

    pub fn ensemble(&self) -> &'a Ensemble {
        self.ensemble
    }

    pub fn mean(&self, var: Variable, k: usize) -> Result<f64> {
        self.check(var, k)?;
        Ok(self.mean_unchecked(var, k))
    }

    fn mean_unchecked(&self, var: Variable, k: usize) -> f64 {
        *self.means[k * 3 + var.index()].get_or_init(|| {
            // shifted by the first realization so identical samples give an exact mean
            let ens = self.ensemble;
            let x0 = ens.value(0, var, k);
            let sum: f64 = (0..ens.n_realizations).map(|n| ens.value(n, var, k) - x0).sum();
            x0 + sum / ens.n_realizations as f64
        })
    }

    /// Unbiased sample variance at a single point.
    pub fn variance(&self, var: Variable, k: usize) -> Result<f64> {
        let mean = self.mean(var, k)?;
        let ens = self.ensemble;
        let ss: f64 = (0..ens.n_realizations)
            .map(|n| {
                let d = ens.value(n, var, k) - mean;
                d * d
            })
            .sum();
        Ok(ss / (ens.n_realizations - 1) as f64)
    }

    pub fn std(&self, var: Variable, k: usize) -> Result<f64> {
        Ok(self.variance(var, k)?.sqrt())
    }

    pub fn mean_vector(&self, idx: &IndexSet) -> Result<DVector<f64>> {
        idx.check_range(self.ensemble.n_steps)?;
        Ok(DVector::from_iterator(
            idx.len(),
            idx.iter().map(|&(v, k)| self.mean_unchecked(v, k)),
        ))
    }

    /// Centered realizations for each entry, one contiguous column per entry.
    fn centered_columns(&self, idx: &IndexSet) -> Vec<Vec<f64>> {
        let ens = self.ensemble;
        idx.entries()
            .par_iter()
            .map(|&(v, k)| {
                let m = self.mean_unchecked(v, k);
                (0..ens.n_realizations)
                    .map(|n| ens.value(n, v, k) - m)
                    .collect()
            })
            .collect()
    }

    /// Sample covariance between every row entry and every column entry,
    /// normalized by `N - 1`.
    ///
    /// Each entry is a single in-order dot product over realizations, so the
    /// block for `(cols, rows)` is exactly the transpose of `(rows, cols)`.
    pub fn cov_block(&self, rows: &IndexSet, cols: &IndexSet) -> Result<DMatrix<f64>> {
        rows.check_range(self.ensemble.n_steps)?;
        cols.check_range(self.ensemble.n_steps)?;
        let norm = 1.0 / (self.ensemble.n_realizations - 1) as f64;
        let row_cols = self.centered_columns(rows);
        let same = rows == cols;
        let col_cols = if same {
            None
        } else {
            Some(self.centered_columns(cols))
        };
        let col_ref = col_cols.as_ref().unwrap_or(&row_cols);

        let n_r = rows.len();
        let n_c = cols.len();
        let mut out = DMatrix::zeros(n_r, n_c);
        let row_values: Vec<Vec<f64>> = (0..n_r)
            .into_par_iter()
            .map(|r| {
                let a = &row_cols[r];
                (0..n_c)
                    .map(|c| {
                        if same && c < r {
                            return f64::NAN;
                        }
                        dot(a, &col_ref[c]) * norm
                    })
                    .collect()
            })
            .collect();
        for r in 0..n_r {
            for c in 0..n_c {
                out[(r, c)] = if same && c < r {
                    row_values[c][r]
                } else {
                    row_values[r][c]
                };
            }
        }
        Ok(out)
    }

    fn check(&self, var: Variable, k: usize) -> Result<()> {
        if k > self.ensemble.n_steps {
            return Err(Error::IndexOutOfRange {
                variable: var,
                time_index: k,
                max_index: self.ensemble.n_steps,
            });
        }
        Ok(())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
