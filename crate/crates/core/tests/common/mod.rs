#![allow(dead_code)]

use gridcast::ensemble::IndexSet;
use gridcast::gpr::JointPrior;
use gridcast::rng::NoiseStream;
use gridcast::sde::{rk2_step, simulate_realization, GridParams, InitialPm, OuParams, SimConfig, StateVec};
use gridcast::Variable;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Stationary variance and autocovariance at lags `lambda` and `2 lambda`
/// of the wind fluctuation, pooled over `paths` independent stationary paths
/// of `steps` steps each: `(sample, theory)` pairs.
pub fn ou_fidelity(paths: usize, steps: usize, seed: u64) -> [(f64, f64); 3] {
    let ou = OuParams::default();
    let sim = SimConfig {
        t_end: steps as f64 * 0.0025,
        seed,
        init_pm: InitialPm::SampleStationary,
        ..SimConfig::default()
    };
    let lags = [0.0, 1.0, 2.0].map(|mult: f64| (mult * ou.lambda / sim.dt).round() as usize);
    // per path and lag: sums of z_i z_{i+l}, z_i, z_{i+l} and the count
    let sums: Vec<[[f64; 4]; 3]> = (0..paths as u64)
        .into_par_iter()
        .map(|p| {
            let tr = simulate_realization(&GridParams::default(), &ou, &sim, p).unwrap();
            let z: Vec<f64> = tr.states.iter().map(|s| s.pm_prime).collect();
            lags.map(|l| {
                let m = z.len() - l;
                let mut acc = [0.0; 4];
                for i in 0..m {
                    acc[0] += z[i] * z[i + l];
                    acc[1] += z[i];
                    acc[2] += z[i + l];
                }
                acc[3] = m as f64;
                acc
            })
        })
        .collect();
    let mut out = [(0.0, 0.0); 3];
    for (j, &l) in lags.iter().enumerate() {
        let tot = sums.iter().fold([0.0; 4], |mut a, s| {
            for q in 0..4 {
                a[q] += s[j][q];
            }
            a
        });
        let c = tot[0] / tot[3] - (tot[1] / tot[3]) * (tot[2] / tot[3]);
        out[j] = (c, ou.autocovariance(l as f64 * sim.dt));
    }
    out
}

fn integrate_det(grid: &GridParams, ou: &OuParams, start: StateVec, h: f64, steps: usize) -> StateVec {
    let mut s = start;
    for _ in 0..steps {
        s = rk2_step(&s, grid, ou, h, 0.0, 0.0).unwrap();
    }
    s
}

fn dist(a: &StateVec, b: &StateVec) -> f64 {
    // omega is scaled by omega_b so both angle and speed errors are in radians
    let w = GridParams::default().omega_b;
    ((a.theta - b.theta).powi(2) + (w * (a.omega - b.omega)).powi(2) + (a.pm_prime - b.pm_prime).powi(2)).sqrt()
}

/// Error ratio `e(h) / e(h / 2)` of the noise-free scheme at `t = 1` s,
/// against a `h / 256` reference.
pub fn deterministic_ratio(h: f64) -> f64 {
    let grid = GridParams::default();
    let ou = OuParams {
        sigma: 0.0,
        ..OuParams::default()
    };
    let start = StateVec::new(0.2, 1.001, 0.08);
    let n = (1.0 / h).round() as usize;
    let reference = integrate_det(&grid, &ou, start, h / 256.0, n * 256);
    let e1 = dist(&integrate_det(&grid, &ou, start, h, n), &reference);
    let e2 = dist(&integrate_det(&grid, &ou, start, h / 2.0, 2 * n), &reference);
    e1 / e2
}

/// Brownian increment and its time integral over one step, from `(xi, eta)`.
fn increments(h: f64, xi: f64, eta: f64) -> (f64, f64) {
    (xi * h.sqrt(), 0.5 * h.powf(1.5) * (xi + eta / 3f64.sqrt()))
}

/// Inverse of [`increments`].
fn normals(h: f64, dw: f64, dz: f64) -> (f64, f64) {
    let xi = dw / h.sqrt();
    (xi, 3f64.sqrt() * (2.0 * dz / h.powf(1.5) - xi))
}

/// Weak errors `|E f(X_h) - E f(X_ref)|` for `h` and `h / 2` with a
/// `h / 16` reference, `f = theta(T)^2`, all resolutions driven by the same
/// Brownian paths. Returns `(e_h, e_h2, ratio)`.
pub fn weak_errors(h: f64, t_end: f64, paths: usize, seed: u64) -> (f64, f64, f64) {
    let grid = GridParams::default();
    let ou = OuParams::default();
    let fine = 16;
    let n = (t_end / h).round() as usize;
    let hf = h / fine as f64;
    let f = |s: &StateVec| s.theta * s.theta;

    let mut sum = [0.0f64; 2];
    for p in 0..paths {
        let mut rng = NoiseStream::new(seed, p as u64);
        let start = StateVec::new(0.45, 1.0, ou.sigma * rng.normal());
        let mut x_ref = start;
        let mut x = [start, start];
        for _ in 0..n {
            // one coarse step made of `fine` reference steps; acc[0] sums all
            // of them, acc[1] each half
            let mut acc = [(0.0, 0.0); 2];
            for j in 0..fine {
                let (xi, eta) = (rng.normal(), rng.normal());
                x_ref = rk2_step(&x_ref, &grid, &ou, hf, xi, eta).unwrap();
                let (dw, dz) = increments(hf, xi, eta);
                for a in &mut acc {
                    a.1 += dz + a.0 * hf;
                    a.0 += dw;
                }
                if j % (fine / 2) == fine / 2 - 1 {
                    let (xi, eta) = normals(h / 2.0, acc[1].0, acc[1].1);
                    x[1] = rk2_step(&x[1], &grid, &ou, h / 2.0, xi, eta).unwrap();
                    acc[1] = (0.0, 0.0);
                }
            }
            let (xi, eta) = normals(h, acc[0].0, acc[0].1);
            x[0] = rk2_step(&x[0], &grid, &ou, h, xi, eta).unwrap();
        }
        sum[0] += f(&x[0]) - f(&x_ref);
        sum[1] += f(&x[1]) - f(&x_ref);
    }
    let e = sum.map(|s| (s / paths as f64).abs());
    (e[0], e[1], e[0] / e[1])
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.1
}

/// Random joint prior over `n_o` observed and `n_f` target entries.
pub fn random_prior(seed: u64, n_o: usize, n_f: usize) -> (JointPrior, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = random_spd(&mut rng, n_o + n_f);
    let m = DVector::from_fn(n_o + n_f, |_, _| rng.random_range(-2.0..2.0));
    let x = DVector::from_fn(n_o, |_, _| rng.random_range(-2.0..2.0));
    let prior = JointPrior {
        obs_idx: IndexSet::for_variable(Variable::Theta, 0..n_o).unwrap(),
        target_idx: IndexSet::for_variable(Variable::Omega, 0..n_f).unwrap(),
        mean_o: m.rows(0, n_o).into_owned(),
        mean_f: m.rows(n_o, n_f).into_owned(),
        c_oo: c.view((0, 0), (n_o, n_o)).into_owned(),
        c_of: c.view((0, n_o), (n_o, n_f)).into_owned(),
        c_ff: c.view((n_o, n_o), (n_f, n_f)).into_owned(),
    };
    (prior, x)
}

/// Posterior by explicit matrix inversion.
pub fn explicit_inverse_posterior(p: &JointPrior, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let inv = p.c_oo.clone().try_inverse().expect("invertible");
    let c_fo = p.c_of.transpose();
    let mean = &p.mean_f + &c_fo * &inv * (x - &p.mean_o);
    let cov = &p.c_ff - &c_fo * &inv * &p.c_of;
    (mean, cov)
}
