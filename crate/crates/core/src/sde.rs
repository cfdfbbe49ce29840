//! Stochastic swing-equation model of a single wind-driven generator
//! connected to an infinite bus.
//!
//! The state is the rotor angle `theta`, the per-unit speed `omega` and the
//! wind-power fluctuation `pm_prime`, which follows an Ornstein-Uhlenbeck
//! process with stationary standard deviation `sigma` and correlation time
//! `lambda`:
//!
//! ```text
//! dtheta = omega_b (omega - omega_s) dt
//! domega = omega_s / (2 H) [p_m_mean + pm_prime - p_max sin(theta) - D (omega - omega_s)] dt
//! dpm'   = -pm' / lambda dt + sigma sqrt(2 / lambda) dW
//! ```
//!
//! Integration uses a second-order stochastic Runge-Kutta (Heun type)
//! scheme with the `h^{3/2}` correction driven by a second Gaussian
//! variable, so that the pair `(xi, eta)` reproduces the joint law of the
//! Wiener increment and its time integral over each step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseStream;

const INV_SQRT_12: f64 = 0.288_675_134_594_812_9;

/// Physical constants of the generator / infinite-bus system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// Peak electric power transfer `E V / X` (p.u.).
    pub p_max: f64,
    /// Generator inertia constant (s).
    pub h_inertia: f64,
    /// Damping coefficient (p.u.).
    pub damping: f64,
    /// Mean mechanical wind power (p.u.).
    pub p_m_mean: f64,
    /// Base speed (rad/s).
    pub omega_b: f64,
    /// Synchronous speed (p.u.).
    pub omega_s: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            p_max: 2.1,
            h_inertia: 5.0,
            damping: 5.0,
            p_m_mean: 0.9,
            omega_b: 120.0 * std::f64::consts::PI,
            omega_s: 1.0,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.p_max > 0.0, "p_max must be positive"),
            (self.h_inertia > 0.0, "h_inertia must be positive"),
            (self.damping >= 0.0, "damping must be non-negative"),
            (self.omega_b > 0.0, "omega_b must be positive"),
            (self.omega_s > 0.0, "omega_s must be positive"),
            (self.p_m_mean >= 0.0, "p_m_mean must be non-negative"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidParams(msg.into()));
            }
        }
        if self.p_m_mean >= self.p_max {
            return Err(Error::NoEquilibrium {
                p_m_mean: self.p_m_mean,
                p_max: self.p_max,
            });
        }
        Ok(())
    }

    /// `omega_s / (2 H)`, the factor in front of the power balance.
    pub fn power_gain(&self) -> f64 {
        self.omega_s / (2.0 * self.h_inertia)
    }
}

/// Wind-power fluctuation process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    /// Stationary standard deviation (p.u.).
    pub sigma: f64,
    /// Correlation time (s).
    pub lambda: f64,
}

impl Default for OuParams {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            lambda: 0.026,
        }
    }
}

impl OuParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams("sigma must be non-negative".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams("lambda must be positive".into()));
        }
        Ok(())
    }

    /// Mean-reversion rate `1 / lambda`.
    pub fn reversion_rate(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Diffusion coefficient `sigma sqrt(2 / lambda)`.
    pub fn diffusion(&self) -> f64 {
        self.sigma * (2.0 / self.lambda).sqrt()
    }

    /// Stationary autocovariance `sigma^2 exp(-|lag| / lambda)`.
    pub fn autocovariance(&self, lag: f64) -> f64 {
        self.sigma * self.sigma * (-lag.abs() / self.lambda).exp()
    }
}

/// How the initial wind fluctuation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum InitialPm {
    /// Draw from the stationary law `N(0, sigma^2)`.
    SampleStationary,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub init_theta: f64,
    pub init_omega: f64,
    pub init_pm: InitialPm,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.0025,
            t_end: 25.0,
            seed: 20_190_101,
            init_theta: 0.45,
            init_omega: 1.0,
            init_pm: InitialPm::SampleStationary,
        }
    }
}

impl SimConfig {
    /// Number of integration steps `K = round(t_end / dt)`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams("dt must be positive".into()));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return Err(Error::InvalidParams("t_end must be at least dt".into()));
        }
        if self.n_steps() < 1 {
            return Err(Error::InvalidParams("simulation needs at least one step".into()));
        }
        if !(self.init_theta.is_finite() && self.init_omega.is_finite()) {
            return Err(Error::InvalidParams("initial state must be finite".into()));
        }
        if let InitialPm::Fixed(v) = self.init_pm {
            if !v.is_finite() {
                return Err(Error::InvalidParams("initial pm_prime must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVec {
    pub theta: f64,
    pub omega: f64,
    pub pm_prime: f64,
}

impl StateVec {
    pub fn new(theta: f64, omega: f64, pm_prime: f64) -> Self {
        Self {
            theta,
            omega,
            pm_prime,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.omega.is_finite() && self.pm_prime.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.omega, self.pm_prime]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVec>,
    pub seed_used: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn value(&self, var: crate::Variable, k: usize) -> f64 {
        self.states[k].as_array()[var.index()]
    }
}

/// Deterministic drift `f(y)` of the angle/speed pair, with the wind
/// fluctuation excluded.
pub fn drift_f(state: &StateVec, params: &GridParams) -> [f64; 2] {
    let slip = state.omega - params.omega_s;
    [
        params.omega_b * slip,
        params.power_gain()
            * (params.p_m_mean - params.p_max * state.theta.sin() - params.damping * slip),
    ]
}

/// Coefficient multiplying the wind fluctuation in the angle/speed drift.
pub fn noise_coupling_g(params: &GridParams) -> [f64; 2] {
    [0.0, params.power_gain()]
}

/// Steady-state angle `arcsin(p_m_mean / p_max)` at synchronous speed.
pub fn equilibrium_angle(params: &GridParams) -> Result<f64> {
    if params.p_m_mean >= params.p_max {
        return Err(Error::NoEquilibrium {
            p_m_mean: params.p_m_mean,
            p_max: params.p_max,
        });
    }
    if params.p_m_mean < 0.0 || params.p_max <= 0.0 {
        return Err(Error::InvalidParams(
            "equilibrium needs 0 <= p_m_mean < p_max".into(),
        ));
    }
    Ok((params.p_m_mean / params.p_max).asin())
}

/// Advance the state by one step of length `dt`.
///
/// `xi` and `eta` are independent standard normal draws; `xi` scales the
/// Wiener increment and `eta` the independent part of its time integral.
pub fn rk2_step(
    state: &StateVec,
    params: &GridParams,
    ou: &OuParams,
    dt: f64,
    xi: f64,
    eta: f64,
) -> Result<StateVec> {
    let a = ou.reversion_rate();
    let b = ou.diffusion();
    let g = noise_coupling_g(params);
    let sqrt_h = dt.sqrt();
    let h32 = dt * sqrt_h;
    let z = state.pm_prime;

    let f0 = drift_f(state, params);
    let k0 = [f0[0] + g[0] * z, f0[1] + g[1] * z];

    let z_bar = z + b * xi * sqrt_h - a * z * dt;
    let y_bar = StateVec::new(state.theta + k0[0] * dt, state.omega + k0[1] * dt, z_bar);
    let f1 = drift_f(&y_bar, params);
    let k1 = [f1[0] + g[0] * z_bar, f1[1] + g[1] * z_bar];

    let integral_term = INV_SQRT_12 * b * h32 * eta;
    let next = StateVec {
        theta: state.theta + 0.5 * dt * (k0[0] + k1[0]) + g[0] * integral_term,
        omega: state.omega + 0.5 * dt * (k0[1] + k1[1]) + g[1] * integral_term,
        pm_prime: z + b * xi * sqrt_h - 0.5 * dt * a * (z + z_bar) - a * integral_term,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::IntegrationDiverged {
            realization: None,
            step: 0,
        })
    }
}

fn initial_state(ou: &OuParams, cfg: &SimConfig, noise: &mut NoiseStream) -> StateVec {
    let pm0 = match cfg.init_pm {
        InitialPm::SampleStationary => ou.sigma * noise.normal(),
        InitialPm::Fixed(v) => v,
    };
    StateVec::new(cfg.init_theta, cfg.init_omega, pm0)
}

/// Integrate one realization into `out`, laid out as `[k * 3 + variable]`
/// for `k = 0..=K`.
pub(crate) fn integrate_into(
    params: &GridParams,
    ou: &OuParams,
    cfg: &SimConfig,
    noise: &mut NoiseStream,
    out: &mut [f64],
) -> Result<()> {
    let n_steps = cfg.n_steps();
    debug_assert_eq!(out.len(), 3 * (n_steps + 1));
    let mut state = initial_state(ou, cfg, noise);
    out[..3].copy_from_slice(&state.as_array());
    for k in 0..n_steps {
        let xi = noise.normal();
        let eta = noise.normal();
        state = rk2_step(&state, params, ou, cfg.dt, xi, eta).map_err(|_| {
            Error::IntegrationDiverged {
                realization: None,
                step: k + 1,
            }
        })?;
        out[3 * (k + 1)..3 * (k + 2)].copy_from_slice(&state.as_array());
    }
    Ok(())
}

/// Simulate the realization with stream index `stream` under `cfg.seed`.
pub fn simulate_realization(
    params: &GridParams,
    ou: &OuParams,
    cfg: &SimConfig,
    stream: u64,
) -> Result<Trajectory> {
    params.validate()?;
    ou.validate()?;
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let mut buf = vec![0.0; 3 * (n_steps + 1)];
    let mut noise = NoiseStream::new(cfg.seed, stream);
    integrate_into(params, ou, cfg, &mut noise, &mut buf)?;
    Ok(Trajectory {
        times: (0..=n_steps).map(|k| cfg.time(k)).collect(),
        states: buf
            .chunks_exact(3)
            .map(|c| StateVec::new(c[0], c[1], c[2]))
            .collect(),
        seed_used: cfg.seed,
        stream,
    })
}

/// Simulate a single trajectory on stream 0 of `cfg.seed`.
pub fn simulate_trajectory(params: &GridParams, ou: &OuParams, cfg: &SimConfig) -> Result<Trajectory> {
    simulate_realization(params, ou, cfg, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
                assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
            }};
        }
        pub(crate) use assert_close;
    }

    #[test]
    fn drift_vanishes_at_equilibrium() {
        let p = GridParams::default();
        let theta = equilibrium_angle(&p).unwrap();
        assert_close!(theta, 0.442_911_4, 1e-6);
        let f = drift_f(&StateVec::new(theta, 1.0, 0.0), &p);
        assert_close!(f[0], 0.0, 1e-15);
        assert_close!(f[1], 0.0, 1e-15);
    }

    #[test]
    fn drift_hand_values() {
        let p = GridParams::default();
        let f = drift_f(&StateVec::new(0.0, 1.0, 0.0), &p);
        assert_eq!(f[0], 0.0);
        assert_close!(f[1], 0.09, 1e-15);
        let f = drift_f(&StateVec::new(1.3, 1.0, 0.0), &p);
        assert_eq!(f[0], 0.0);
    }

    #[test]
    fn coupling_values() {
        let p = GridParams::default();
        assert_eq!(noise_coupling_g(&p), [0.0, 0.1]);
        let p2 = GridParams {
            h_inertia: 0.5,
            ..p
        };
        assert_eq!(noise_coupling_g(&p2), [0.0, 1.0]);
    }

    #[test]
    fn equilibrium_angle_cases() {
        let mut p = GridParams {
            p_m_mean: 0.0,
            ..GridParams::default()
        };
        assert_eq!(equilibrium_angle(&p).unwrap(), 0.0);
        p.p_m_mean = p.p_max / 2.0;
        assert_close!(equilibrium_angle(&p).unwrap(), std::f64::consts::FRAC_PI_6, 1e-15);
        p.p_m_mean = p.p_max;
        assert!(matches!(equilibrium_angle(&p), Err(Error::NoEquilibrium { .. })));
    }

    #[test]
    fn zero_noise_step_keeps_fixed_point() {
        let p = GridParams::default();
        let ou = OuParams {
            sigma: 0.0,
            ..OuParams::default()
        };
        let s = StateVec::new(equilibrium_angle(&p).unwrap(), 1.0, 0.0);
        let next = rk2_step(&s, &p, &ou, 0.0025, 1.3, -0.7).unwrap();
        assert_close!(next.theta, s.theta, 1e-15);
        assert_close!(next.omega, s.omega, 1e-15);
        assert_eq!(next.pm_prime, 0.0);
    }

    #[test]
    fn zero_noise_step_is_heun() {
        let p = GridParams::default();
        let ou = OuParams {
            sigma: 0.0,
            ..OuParams::default()
        };
        let h = 0.0025;
        let s = StateVec::new(0.45, 1.0, 0.0);
        let next = rk2_step(&s, &p, &ou, h, 0.4, 2.0).unwrap();

        // independent Heun step on the textbook swing equation
        let rhs = |th: f64, w: f64| {
            (
                120.0 * std::f64::consts::PI * (w - 1.0),
                1.0 / 10.0 * (0.9 - 2.1 * th.sin() - 5.0 * (w - 1.0)),
            )
        };
        let (a0, b0) = rhs(0.45, 1.0);
        let (a1, b1) = rhs(0.45 + h * a0, 1.0 + h * b0);
        assert_close!(next.theta, 0.45 + 0.5 * h * (a0 + a1), 1e-15);
        assert_close!(next.omega, 1.0 + 0.5 * h * (b0 + b1), 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let p = GridParams::default();
        let ou = OuParams::default();
        let s = StateVec::new(f64::NAN, 1.0, 0.0);
        assert!(matches!(
            rk2_step(&s, &p, &ou, 0.0025, 0.0, 0.0),
            Err(Error::IntegrationDiverged { .. })
        ));

        let cfg = SimConfig {
            dt: 50.0,
            t_end: 5000.0,
            init_pm: InitialPm::Fixed(1.0),
            ..SimConfig::default()
        };
        match simulate_trajectory(&p, &ou, &cfg) {
            Err(Error::IntegrationDiverged { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn default_run_shape() {
        let traj =
            simulate_trajectory(&GridParams::default(), &OuParams::default(), &SimConfig::default())
                .unwrap();
        assert_eq!(traj.len(), 10_001);
        assert_eq!(traj.states[0].theta, 0.45);
        assert_eq!(traj.states[0].omega, 1.0);
        assert!(traj.states.iter().all(|s| s.is_finite()));
        assert!(traj.states.iter().all(|s| (s.theta - 0.44).abs() < 0.6));
        assert!(traj.states.iter().all(|s| (s.omega - 1.0).abs() < 0.02));
        assert_close!(*traj.times.last().unwrap(), 25.0, 1e-9);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SimConfig {
            dt: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            t_end: 0.001,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(OuParams { sigma: -1.0, lambda: 1.0 }.validate().is_err());
        assert!(OuParams { sigma: 1.0, lambda: 0.0 }.validate().is_err());
        let p = GridParams {
            h_inertia: 0.0,
            ..GridParams::default()
        };
        assert!(p.validate().is_err());
    }
}
