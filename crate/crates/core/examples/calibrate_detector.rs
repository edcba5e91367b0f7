//! Calibrates a single qubit from simulated prepared-state IQ shots and
//! prints the fitted response functions.
//!
//!     cargo run --example calibrate_detector

use balero::detector::calibrate_qubit;
use balero::simulator::{simulate_calibration, DetectorPreset};
use balero::fit_separatrix;

fn main() -> balero::Result<()> {
    let truth = DetectorPreset::QuitoLike.model(0);
    let data = simulate_calibration(&truth, 50_000, 7, DetectorPreset::QuitoLike.transverse_std())?;
    println!(
        "{} ground shots, {} excited shots",
        data.ground_shots.len(),
        data.excited_shots.len()
    );

    let model = calibrate_qubit(&data)?;
    println!(
        "projection: angle {:.4} rad (true {:.4}), offset {:.4}",
        model.projection.angle, truth.projection.angle, model.projection.offset
    );
    for (label, r) in [("P_g", &model.p_g), ("P_e", &model.p_e)] {
        println!(
            "{label}: main N({:.3}, {:.3}), leak N({:.3}, {:.3}) with weight {:.4}",
            r.main.mean, r.main.std, r.leak.mean, r.leak.std, r.leak_weight
        );
    }

    let sep = fit_separatrix(&model)?;
    let (eg, ee) = sep.misassignment(&model);
    println!("overlap integral {:.4}", model.overlap());
    println!(
        "equal-likelihood threshold {:.4}: misassigns {:.2}% of ground and {:.2}% of excited shots",
        sep.threshold,
        100.0 * eg,
        100.0 * ee
    );
    Ok(())
}
