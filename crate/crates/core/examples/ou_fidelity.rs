//! Checks the simulated wind fluctuation against its stationary law:
//! variance `sigma^2` and autocovariance `sigma^2 exp(-s / lambda)`.

use gridcast::sde::{simulate_trajectory, GridParams, InitialPm, OuParams, SimConfig};

fn main() -> gridcast::Result<()> {
    let ou = OuParams::default();
    let sim = SimConfig {
        t_end: 2500.0,
        init_pm: InitialPm::SampleStationary,
        seed: 11,
        ..SimConfig::default()
    };
    let tr = simulate_trajectory(&GridParams::default(), &ou, &sim)?;
    let z: Vec<f64> = tr.states.iter().map(|s| s.pm_prime).collect();
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;

    println!("{} steps", z.len() - 1);
    println!("{:>8} {:>12} {:>12} {:>8}", "lag (s)", "sample", "theory", "rel err");
    for mult in [0.0, 0.5, 1.0, 2.0] {
        let lag = (mult * ou.lambda / sim.dt).round() as usize;
        let m = z.len() - lag;
        let c = (0..m).map(|i| (z[i] - mean) * (z[i + lag] - mean)).sum::<f64>() / m as f64;
        let theory = ou.autocovariance(lag as f64 * sim.dt);
        println!(
            "{:>8.4} {c:>12.6e} {theory:>12.6e} {:>7.2}%",
            lag as f64 * sim.dt,
            100.0 * (c - theory) / theory
        );
    }
    Ok(())
}
