//! Physics-informed forecast against a kernel fitted to the same history,
//! over several held-out truths.

use gridcast::ensemble::run_ensemble;
use gridcast::scenarios::{run_baseline, run_case_many, BaselineConfig, ScenarioSpec};
use gridcast::sde::{GridParams, OuParams, SimConfig};
use gridcast::Variable;

fn main() -> gridcast::Result<()> {
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &SimConfig::default(), 1000)?;
    let truths: Vec<u64> = (0..5).collect();
    let outs = run_case_many(&ScenarioSpec::default(), &ens, &truths)?;
    let cfg = BaselineConfig::default();

    println!("mean-forecast horizon (s), physics-informed vs {:?} kernel", cfg.family);
    println!("{:>5} {:>16} {:>16}", "truth", "theta", "omega");
    for out in &outs {
        let base = run_baseline(out, &cfg)?;
        print!("{:>5}", out.spec.truth_realization);
        for v in [Variable::Theta, Variable::Omega] {
            let p = out.metrics.mean_horizon[&v];
            let b = base.metrics.mean_horizon[&v];
            print!(" {:>7.3}{} {:>7.3}", p.seconds, if p.censored { "+" } else { " " }, b.seconds);
        }
        println!();
    }
    println!("(+ : error never left the 2-sigma band)");
    Ok(())
}
