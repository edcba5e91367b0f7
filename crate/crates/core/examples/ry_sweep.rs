//! Ground population after R_y(θ) over a full turn, estimated three ways.
//!
//!     cargo run --release --example ry_sweep

use balero::estimators::EstimatorSettings;
use balero::metrics::avg_ground_population_error;
use balero::scenario::SyntheticDevice;
use balero::simulator::{ry_populations, theta_grid, DetectorPreset};

fn main() -> balero::Result<()> {
    let device = SyntheticDevice::calibrate(DetectorPreset::QuitoLike, 1, 50_000, 3)?;
    let settings = EstimatorSettings::default();
    let thetas = theta_grid(21);
    let (mut counts, mut balero) = (Vec::new(), Vec::new());
    println!("{:>7} {:>8} {:>8} {:>8}", "theta", "ideal", "counts", "balero");
    for (k, &theta) in thetas.iter().enumerate() {
        let shots = device.measure(&ry_populations(theta), 5_000, k as u64)?;
        let c = device.readout.counts(&shots)?.fractions()[0];
        let b = device.readout.balero(&shots, &settings)?.estimate.populations[0];
        println!(
            "{theta:>7.3} {:>8.4} {c:>8.4} {b:>8.4}",
            ry_populations(theta).populations()[0]
        );
        counts.push(c);
        balero.push(b);
    }
    println!(
        "average |error|: counts {:.4}, balero {:.4}",
        avg_ground_population_error(&thetas, &counts)?,
        avg_ground_population_error(&thetas, &balero)?
    );
    Ok(())
}
