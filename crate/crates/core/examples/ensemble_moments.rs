//! Monte Carlo ensemble: mean and standard deviation of each state variable
//! as the system settles from its initial condition.

use gridcast::ensemble::run_ensemble;
use gridcast::sde::{GridParams, OuParams, SimConfig};
use gridcast::Variable;

fn main() -> gridcast::Result<()> {
    let sim = SimConfig::default();
    let start = std::time::Instant::now();
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &sim, 1000)?;
    println!(
        "{} realizations x {} steps in {:.2?}",
        ens.n_realizations(),
        ens.n_steps(),
        start.elapsed()
    );

    let view = ens.moments();
    print!("{:>5}", "t");
    for v in Variable::ALL {
        print!(" {:>12} {:>10}", format!("mean {v}"), "std");
    }
    println!();
    for t in [0.0, 0.5, 1.0, 2.5, 5.0, 10.0, 15.0, 20.0, 25.0] {
        let k = (t / sim.dt).round() as usize;
        print!("{t:>5.1}");
        for v in Variable::ALL {
            print!(" {:>12.6} {:>10.3e}", view.mean(v, k)?, view.std(v, k)?);
        }
        println!();
    }
    Ok(())
}
