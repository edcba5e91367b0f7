//! Confusion-matrix inversion can leave the probability simplex; the
//! Bayesian estimate on the same shots cannot.
//!
//!     cargo run --example confusion_inversion

use balero::estimators::{EstimatorSettings, Readout};
use balero::simulator::{bitstring_populations, sample_shots, DetectorPreset};

fn main() -> balero::Result<()> {
    let readout = Readout::new(DetectorPreset::QuitoLike.models(1))?;
    println!("confusion matrix:\n{}", readout.confusion.entries());
    let ground = bitstring_populations("0")?;
    for seed in 0..8 {
        let shots = sample_shots(&ground, &readout.models, 200, seed)?;
        let counts = readout.counts(&shots)?;
        let inv = readout.inversion(&counts)?;
        let bal = readout.balero(&shots, &EstimatorSettings::default())?.estimate;
        println!(
            "seed {seed}: counts {:?}  inversion [{:+.4}, {:+.4}]  balero [{:.4}, {:.4}]{}",
            counts.as_slice(),
            inv.quasi_populations[0],
            inv.quasi_populations[1],
            bal.populations[0],
            bal.populations[1],
            if inv.quasi_populations[0] > 1.0 { "  <- outside [0, 1]" } else { "" }
        );
    }
    Ok(())
}
