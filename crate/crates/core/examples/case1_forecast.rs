//! Forecast of angle and speed after the observations stop, from a
//! 1000-member prior, against one held-out truth.

use gridcast::ensemble::run_ensemble;
use gridcast::scenarios::{run_case1, ScenarioSpec};
use gridcast::sde::{GridParams, OuParams, SimConfig};
use gridcast::Variable;

fn main() -> gridcast::Result<()> {
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &SimConfig::default(), 1000)?;
    let spec = ScenarioSpec::default();
    let out = run_case1(&spec, &ens)?;

    println!(
        "{} observations before t = {} s, {} targets up to {} s",
        out.observations.idx.len(),
        spec.cutoff_time,
        out.forecast.len(),
        spec.horizon_end
    );
    for v in [Variable::Theta, Variable::Omega] {
        let h = out.metrics.mean_horizon[&v];
        println!("\n{v}: 2-sigma coverage {:.3}", out.metrics.coverage_2sigma[&v]);
        println!(
            "  mean-forecast horizon {:.3} s{}",
            h.seconds,
            if h.censored { " (never lost)" } else { "" }
        );
        for w in out.metrics.windows.iter().filter(|w| w.variable == v && w.n > 0) {
            println!(
                "  {:<20} n {:>4}  rmse {:.3e}  coverage {:.3}",
                w.window,
                w.n,
                w.rmse.unwrap(),
                w.coverage_2sigma.unwrap()
            );
        }
    }
    Ok(())
}
