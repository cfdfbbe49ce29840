//! Gaussian conditioning on a hand-built two-variable prior, then on a
//! small ensemble prior.

use gridcast::ensemble::{run_ensemble, IndexSet};
use gridcast::gpr::{build_prior, condition, JointPrior, Observations};
use gridcast::sde::{GridParams, OuParams, SimConfig};
use gridcast::Variable;
use nalgebra::{dmatrix, dvector};

fn main() -> gridcast::Result<()> {
    // unit variances, correlation 0.5, observe 2.0
    let prior = JointPrior {
        obs_idx: IndexSet::for_variable(Variable::Theta, [0])?,
        target_idx: IndexSet::for_variable(Variable::Theta, [1])?,
        mean_o: dvector![0.0],
        mean_f: dvector![0.0],
        c_oo: dmatrix![1.0],
        c_of: dmatrix![0.5],
        c_ff: dmatrix![1.0],
    };
    let obs = Observations::new(prior.obs_idx.clone(), vec![2.0])?;
    let post = condition(&prior, &obs)?;
    println!(
        "hand case: mean {} variance {}",
        post.posterior_mean[0],
        post.posterior_cov[(0, 0)]
    );

    let sim = SimConfig {
        t_end: 2.0,
        ..SimConfig::default()
    };
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &sim, 400)?;
    let truth = ens.realization(0);
    let obs_idx = IndexSet::for_variable(Variable::Omega, (0..=800).step_by(40))?;
    let targets = IndexSet::for_variable(Variable::Theta, (0..=800).step_by(80))?;
    let values = obs_idx.iter().map(|&(v, k)| truth.value(v, k)).collect();
    let obs = Observations::new(obs_idx.clone(), values)?;
    let view = ens.moments();
    let post = condition(&build_prior(&view, &obs_idx, &targets)?, &obs)?;

    println!("\ntheta from omega observations (truth is realization 0 of the prior)");
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "t", "truth", "mean", "std", "prior std");
    for (i, &(v, k)) in targets.iter().enumerate() {
        println!(
            "{:>5.2} {:>10.6} {:>10.6} {:>10.2e} {:>10.2e}",
            ens.time(k),
            truth.value(v, k),
            post.posterior_mean[i],
            post.posterior_std[i],
            view.std(v, k)?
        );
    }
    println!("nugget used: {:e}", post.nugget_used);
    Ok(())
}
