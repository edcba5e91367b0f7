//! Bernstein–Vazirani style output with gate noise modelled as
//! depolarization. The Bayesian estimate tracks the noisy state, while
//! threshold counts mix gate and readout errors together.
//!
//!     cargo run --release --example bv_with_gate_noise

use balero::estimators::EstimatorSettings;
use balero::scenario::{depolarizing_for_counts_error, SyntheticDevice};
use balero::simulator::{apply_depolarizing, bitstring_populations, DetectorPreset, NoiseConfig};
use balero::total_population_error;

fn main() -> balero::Result<()> {
    let device = SyntheticDevice::calibrate(DetectorPreset::Register, 4, 50_000, 13)?;
    let ideal = bitstring_populations("0110")?;
    let lambda = depolarizing_for_counts_error(0.20, &ideal, &device.true_confusion()?)?;
    let noisy = apply_depolarizing(&ideal, &NoiseConfig::new(lambda, 0)?)?;
    println!("depolarizing strength {lambda:.4}");

    let shots = device.measure(&noisy, 10_000, 4)?;
    let counts = device.readout.counts(&shots)?.fractions();
    let balero = device.readout.balero(&shots, &EstimatorSettings::default())?.estimate;
    for (name, v) in [("counts", &counts), ("balero", &balero.populations)] {
        println!(
            "{name:>7}: error vs ideal {:.4}, vs noisy truth {:.4}",
            total_population_error(ideal.populations(), v)?,
            total_population_error(noisy.populations(), v)?
        );
    }
    Ok(())
}
