//! Bell-state populations from the exact two-qubit posterior.
//!
//!     cargo run --release --example bell_state

use balero::estimators::EstimatorSettings;
use balero::scenario::SyntheticDevice;
use balero::simulator::{bell_populations, DetectorPreset};
use balero::total_population_error;

fn main() -> balero::Result<()> {
    let device = SyntheticDevice::calibrate(DetectorPreset::QuitoLike, 2, 50_000, 5)?;
    let truth = bell_populations();
    let shots = device.measure(&truth, 5_000, 1)?;

    let counts = device.readout.counts(&shots)?.fractions();
    let inversion = device.readout.inversion(&device.readout.counts(&shots)?)?;
    let balero = device.readout.balero(&shots, &EstimatorSettings::default())?;

    println!("state    exact   counts  inversion   balero");
    for (s, &exact) in truth.populations().iter().enumerate() {
        println!(
            "{:>5} {:>8.4} {:>8.4} {:>10.4} {:>8.4}",
            balero::BasisIndex(s).bitstring(2),
            exact,
            counts[s],
            inversion.quasi_populations[s],
            balero.estimate.populations[s]
        );
    }
    for (name, v) in [
        ("counts", &counts),
        ("inversion", &inversion.quasi_populations),
        ("balero", &balero.estimate.populations),
    ] {
        println!("{name:>9}: total error {:.4}", total_population_error(truth.populations(), v)?);
    }
    Ok(())
}
