//! Four-qubit bitstring preparation recovered with the pairwise heuristic.
//!
//!     cargo run --release --example bitstring_pairwise

use balero::estimators::EstimatorSettings;
use balero::scenario::SyntheticDevice;
use balero::simulator::{bitstring_populations, DetectorPreset};
use balero::total_population_error;

fn main() -> balero::Result<()> {
    let device = SyntheticDevice::calibrate(DetectorPreset::Register, 4, 50_000, 9)?;
    let truth = bitstring_populations("0110")?;
    let shots = device.measure(&truth, 10_000, 2)?;

    let counts = device.readout.counts(&shots)?;
    let result = device.readout.balero(&shots, &EstimatorSettings::default())?;
    let conv = result.convergence.expect("four qubits use the pairwise path");
    println!(
        "{} of 16 states seen by threshold counting; pairwise stopped after {} sweeps ({:?})",
        counts.as_slice().iter().filter(|c| **c > 0).count(),
        conv.sweeps,
        conv.stop_reason
    );
    println!(
        "total error: counts {:.4}, balero {:.4}",
        total_population_error(truth.populations(), &counts.fractions())?,
        total_population_error(truth.populations(), &result.estimate.populations)?
    );
    let mut ranked: Vec<(usize, f64)> = result.estimate.populations.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (s, p) in ranked.into_iter().take(4) {
        println!("  {} {:.5}", balero::BasisIndex(s).bitstring(4), p);
    }
    Ok(())
}
