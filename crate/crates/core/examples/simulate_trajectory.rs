//! One stochastic trajectory of the swing equation with the default
//! parameters, sampled once per second.

use gridcast::sde::{equilibrium_angle, simulate_trajectory, GridParams, OuParams, SimConfig};

fn main() -> gridcast::Result<()> {
    let grid = GridParams::default();
    let ou = OuParams::default();
    let sim = SimConfig::default();
    let tr = simulate_trajectory(&grid, &ou, &sim)?;

    println!("equilibrium angle {:.6} rad", equilibrium_angle(&grid)?);
    println!("{} states, dt = {} s, seed {}", tr.len(), tr.dt(), tr.seed_used);
    println!("{:>6} {:>10} {:>12} {:>10}", "t", "theta", "omega", "pm'");
    let every = (1.0 / sim.dt).round() as usize;
    for (t, s) in tr.times.iter().zip(&tr.states).step_by(every) {
        println!("{t:>6.1} {:>10.5} {:>12.8} {:>10.5}", s.theta, s.omega, s.pm_prime);
    }
    Ok(())
}
