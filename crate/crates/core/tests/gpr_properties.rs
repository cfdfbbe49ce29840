mod common;

use gridcast::ensemble::IndexSet;
use gridcast::gpr::kernel::{fit_with_trace, kernel_prior};
use gridcast::gpr::{
    baseline_forecast, condition, fit_hyperparameters, nlml, nlml_dense, FitOptions, JointPrior, KernelFamily,
    KernelSpec, MeanModel, Observations, TimeSeries,
};
use gridcast::sde::{simulate_trajectory, GridParams, InitialPm, OuParams, SimConfig};
use gridcast::Variable;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn observe(prior: &JointPrior, x: &DVector<f64>) -> Observations {
    Observations::new(prior.obs_idx.clone(), x.iter().copied().collect()).unwrap()
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

#[test]
fn matches_explicit_inverse_on_random_priors() {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let n_o = 1 + (seed as usize % 8);
        let n_f = 1 + (seed as usize * 7 % 5);
        let (prior, x) = common::random_prior(seed, n_o, n_f);
        let post = condition(&prior, &observe(&prior, &x)).unwrap();
        let (mean, cov) = common::explicit_inverse_posterior(&prior, &x);
        let ms = mean.amax();
        let cs = cov.amax();
        for i in 0..n_f {
            worst = worst.max(rel_err(post.posterior_mean[i], mean[i], ms));
            for j in 0..n_f {
                worst = worst.max(rel_err(post.posterior_cov[(i, j)], cov[(i, j)], cs));
            }
        }
    }
    assert!(worst < 1e-10, "worst relative error {worst:e}");
}

#[test]
fn bands_are_calibrated_on_synthetic_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (prior, _) = common::random_prior(77, 6, 1);
    let full = {
        let n = 7;
        let mut c = DMatrix::zeros(n, n);
        c.view_mut((0, 0), (6, 6)).copy_from(&prior.c_oo);
        c.view_mut((0, 6), (6, 1)).copy_from(&prior.c_of);
        c.view_mut((6, 0), (1, 6)).copy_from(&prior.c_of.transpose());
        c.view_mut((6, 6), (1, 1)).copy_from(&prior.c_ff);
        c.cholesky().unwrap().l()
    };
    let draws = 500;
    let mut inside = 0;
    for _ in 0..draws {
        let e = DVector::from_fn(7, |_, _| StandardNormal.sample(&mut rng));
        let s = &full * e;
        let x = DVector::from_fn(6, |i, _| prior.mean_o[i] + s[i]);
        let target = prior.mean_f[0] + s[6];
        let post = condition(&prior, &observe(&prior, &x)).unwrap();
        if (post.posterior_mean[0] - target).abs() <= 2.0 * post.posterior_std[0] {
            inside += 1;
        }
    }
    let cov = inside as f64 / draws as f64;
    assert!((0.93..=0.975).contains(&cov), "coverage {cov}");
}

#[test]
fn kernel_baseline_matches_explicit_inverse() {
    let ks: Vec<usize> = (0..60).map(|i| i * 3 + (i % 2)).collect();
    let xs: Vec<f64> = ks.iter().map(|&k| (k as f64 * 0.05).sin() + 0.3).collect();
    let series = TimeSeries::new(Variable::Theta, 0.01, ks, xs.clone()).unwrap();
    let fitted = gridcast::gpr::FittedKernel {
        kernel: KernelSpec {
            family: KernelFamily::SquaredExponential,
            amplitude: 0.5,
            length_scale: 0.4,
            noise_floor: 1e-4,
        },
        mean_model: MeanModel::ConstantFitted,
        mean: 0.3,
        nlml: 0.0,
    };
    let targets: Vec<usize> = (180..260).step_by(10).collect();
    let fc = baseline_forecast(&series, &fitted, &targets).unwrap();

    let t: Vec<f64> = series.times();
    let tf: Vec<f64> = targets.iter().map(|&k| k as f64 * 0.01).collect();
    let k = |a: f64, b: f64| 0.5 * (-(a - b).powi(2) / (2.0 * 0.16)).exp();
    let c_oo = DMatrix::from_fn(t.len(), t.len(), |i, j| k(t[i], t[j]) + if i == j { 1e-4 } else { 0.0 });
    let c_fo = DMatrix::from_fn(tf.len(), t.len(), |i, j| k(tf[i], t[j]));
    let y = DVector::from_iterator(xs.len(), xs.iter().map(|x| x - 0.3));
    let mean = c_fo.clone() * c_oo.clone().try_inverse().unwrap() * y;
    for i in 0..tf.len() {
        assert!((fc.posterior_mean[i] - 0.3 - mean[i]).abs() < 1e-8, "{i}");
    }
    let prior = kernel_prior(&series, &fitted, &targets).unwrap();
    assert!((prior.c_oo - c_oo).amax() < 1e-15);
}

fn ou_series(lambda: f64, seed: u64, stride: usize) -> TimeSeries {
    let ou = OuParams { sigma: 0.1, lambda };
    let sim = SimConfig {
        t_end: 100.0,
        dt: 0.01,
        seed,
        init_pm: InitialPm::SampleStationary,
        ..SimConfig::default()
    };
    let tr = simulate_trajectory(&GridParams::default(), &ou, &sim).unwrap();
    let ks: Vec<usize> = (0..tr.len()).step_by(stride).collect();
    let xs = ks.iter().map(|&k| tr.value(Variable::PmPrime, k)).collect();
    TimeSeries::new(Variable::PmPrime, 0.01, ks, xs).unwrap()
}

#[test]
fn fit_recovers_ou_length_scale() {
    let series = ou_series(0.5, 3, 20);
    assert!(series.len() >= 500);
    let fit = fit_hyperparameters(&series, KernelFamily::Exponential, &FitOptions::default()).unwrap();
    assert!((fit.kernel.length_scale / 0.5 - 1.0).abs() < 0.2, "{fit:?}");
}

#[test]
fn fit_beats_brute_force_grid() {
    let series = ou_series(0.3, 8, 80);
    for family in [KernelFamily::Exponential, KernelFamily::SquaredExponential] {
        let fit = fit_hyperparameters(&series, family, &FitOptions::default()).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..20 {
            for j in 0..20 {
                let kernel = KernelSpec {
                    family,
                    amplitude: 1e-4 * 10f64.powf(4.0 * i as f64 / 19.0),
                    length_scale: 1e-2 * 10f64.powf(4.0 * j as f64 / 19.0),
                    noise_floor: fit.kernel.noise_floor,
                };
                if let Ok(v) = nlml(&series, &kernel, MeanModel::ConstantFitted) {
                    best = best.min(v);
                }
            }
        }
        assert!(fit.nlml <= best + 1e-9, "{family:?}: fit {} grid {best}", fit.nlml);
    }
}

#[test]
fn fit_is_scale_equivariant() {
    let series = ou_series(0.5, 4, 20);
    let c = 3.0;
    let scaled = TimeSeries::new(
        series.variable,
        series.dt,
        series.time_indices.clone(),
        series.values.iter().map(|v| v * c).collect(),
    )
    .unwrap();
    let a = fit_hyperparameters(&series, KernelFamily::Exponential, &FitOptions::default()).unwrap();
    let b = fit_hyperparameters(&scaled, KernelFamily::Exponential, &FitOptions::default()).unwrap();
    // parameters agree to the search resolution (log step 1e-4)
    assert!((b.kernel.amplitude / (a.kernel.amplitude * c * c) - 1.0).abs() < 1e-3);
    assert!((b.kernel.noise_floor / (a.kernel.noise_floor * c * c) - 1.0).abs() < 1e-3);
    assert!((b.kernel.length_scale / a.kernel.length_scale - 1.0).abs() < 1e-3);
    let shift = series.len() as f64 * c.ln();
    assert!((b.nlml - a.nlml - shift).abs() < 1e-6, "{} vs {shift}", b.nlml - a.nlml);
}

#[test]
fn accepted_path_only_descends() {
    let series = ou_series(0.2, 5, 80);
    for family in [KernelFamily::Exponential, KernelFamily::SquaredExponential] {
        let trace = fit_with_trace(&series, family, &FitOptions::default()).unwrap();
        assert!(trace.accepted_path.len() > 1);
        assert!(trace.accepted_path.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(*trace.accepted_path.last().unwrap(), trace.fitted.nlml);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conditioning_never_adds_variance(seed in 0u64..10_000, n_o in 1usize..10, n_f in 1usize..6) {
        let (prior, x) = common::random_prior(seed, n_o, n_f);
        let post = condition(&prior, &observe(&prior, &x)).unwrap();
        for i in 0..n_f {
            prop_assert!(post.posterior_cov[(i, i)] <= prior.c_ff[(i, i)] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn another_observation_never_adds_variance(seed in 0u64..10_000, n_o in 2usize..10, n_f in 1usize..6) {
        let (prior, x) = common::random_prior(seed, n_o, n_f);
        let full = condition(&prior, &observe(&prior, &x)).unwrap();
        let m = n_o - 1;
        let fewer = JointPrior {
            obs_idx: IndexSet::for_variable(Variable::Theta, 0..m).unwrap(),
            target_idx: prior.target_idx.clone(),
            mean_o: prior.mean_o.rows(0, m).into_owned(),
            mean_f: prior.mean_f.clone(),
            c_oo: prior.c_oo.view((0, 0), (m, m)).into_owned(),
            c_of: prior.c_of.rows(0, m).into_owned(),
            c_ff: prior.c_ff.clone(),
        };
        let xm = x.rows(0, m).into_owned();
        let part = condition(&fewer, &observe(&fewer, &xm)).unwrap();
        for i in 0..n_f {
            prop_assert!(full.posterior_std[i] <= part.posterior_std[i] * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn observation_order_is_irrelevant(seed in 0u64..10_000, n_o in 2usize..9) {
        let (prior, x) = common::random_prior(seed, n_o, 3);
        let post = condition(&prior, &observe(&prior, &x)).unwrap();
        let perm: Vec<usize> = (0..n_o).rev().collect();
        let shuffled = JointPrior {
            obs_idx: IndexSet::new(perm.iter().map(|&i| prior.obs_idx.entries()[i]).collect()).unwrap(),
            target_idx: prior.target_idx.clone(),
            mean_o: prior.mean_o.select_rows(&perm),
            mean_f: prior.mean_f.clone(),
            c_oo: prior.c_oo.select_rows(&perm).select_columns(&perm),
            c_of: prior.c_of.select_rows(&perm),
            c_ff: prior.c_ff.clone(),
        };
        let xs = x.select_rows(&perm);
        let post2 = condition(&shuffled, &observe(&shuffled, &xs)).unwrap();
        for i in 0..3 {
            prop_assert!((post.posterior_mean[i] - post2.posterior_mean[i]).abs() < 1e-9);
            prop_assert!((post.posterior_std[i] - post2.posterior_std[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn markov_and_dense_likelihoods_agree(
        gaps in prop::collection::vec(1usize..30, 8..60),
        amp in 1e-3f64..10.0,
        len in 0.01f64..5.0,
        noise in 0.0f64..0.1,
        seed in 0u64..1000,
    ) {
        let mut k = 0;
        let ks: Vec<usize> = gaps.iter().map(|g| { k += g; k }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = ks.iter().map(|_| StandardNormal.sample(&mut rng)).collect();
        let series = TimeSeries::new(Variable::Omega, 0.01, ks, xs).unwrap();
        let kernel = KernelSpec { family: KernelFamily::Exponential, amplitude: amp, length_scale: len, noise_floor: noise + 1e-3 * amp };
        let a = nlml(&series, &kernel, MeanModel::ConstantFitted).unwrap();
        let b = nlml_dense(&series, &kernel, MeanModel::ConstantFitted).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
    }
}
