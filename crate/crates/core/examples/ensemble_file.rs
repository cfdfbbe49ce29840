//! Saves an ensemble, reads it back and checks it is bit-identical.

use gridcast::ensemble::{load_ensemble, run_ensemble, save_ensemble};
use gridcast::sde::{GridParams, OuParams, SimConfig};

fn main() -> gridcast::Result<()> {
    let sim = SimConfig {
        t_end: 5.0,
        ..SimConfig::default()
    };
    let ens = run_ensemble(&GridParams::default(), &OuParams::default(), &sim, 200)?;
    let path = std::env::temp_dir().join(format!("gridcast-example-{}.gens", std::process::id()));
    save_ensemble(&ens, &path)?;
    let size = std::fs::metadata(&path)?.len();
    let back = load_ensemble(&path)?;
    std::fs::remove_file(&path)?;
    println!(
        "{} bytes for {} x {} x 3 values; round trip identical: {}",
        size,
        ens.n_realizations(),
        ens.n_steps() + 1,
        back.bitwise_eq(&ens)
    );
    Ok(())
}
