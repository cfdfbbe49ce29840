//! Reconstruction of unmeasured states: speed and wind power from angle
//! measurements, angle and wind power from speed measurements, and the
//! effect of extra speed measurements after the cutoff.

use gridcast::ensemble::run_ensemble;
use gridcast::scenarios::{run_case, CaseId, CaseOutcome, ScenarioSpec};
use gridcast::sde::{GridParams, OuParams, SimConfig};
use gridcast::Variable;

const AFTER: [&str; 3] = ["forecast_0_2s", "forecast_2_4s", "forecast_beyond_4s"];

fn report(out: &CaseOutcome) {
    println!("\n{} ({} observations)", out.spec.case_id, out.observations.idx.len());
    for v in out.variables() {
        let obs = out.metrics.window(v, "observed");
        let after = out.metrics.pooled(v, &AFTER);
        print!("  {v:<9}");
        if let Some(w) = obs.filter(|w| w.n > 0) {
            print!(
                " t < cutoff: rmse {:.3e} coverage {:.3}",
                w.rmse.unwrap(),
                w.coverage_2sigma.unwrap()
            );
        }
        if let Some((r, c)) = after {
            print!(" | t > cutoff: rmse {r:.3e} coverage {c:.3}");
        }
        println!();
    }
}

fn main() -> gridcast::Result<()> {
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &SimConfig::default(), 1000)?;
    let mut outs = Vec::new();
    for case_id in [CaseId::Case2, CaseId::Case3, CaseId::Case3Extra] {
        let out = run_case(
            &ScenarioSpec {
                case_id,
                ..ScenarioSpec::default()
            },
            &ens,
        )?;
        report(&out);
        outs.push(out);
    }
    let pm = |o: &CaseOutcome| o.metrics.rmse(Variable::PmPrime, "observed").unwrap();
    println!(
        "\npm' reconstruction rmse: from theta {:.4e}, from omega {:.4e}",
        pm(&outs[0]),
        pm(&outs[1])
    );
    Ok(())
}
