//! Sequential Bayesian updating of the ground-state population of one qubit,
//! printing how the posterior narrows as shots arrive.
//!
//!     cargo run --example single_qubit_inference

use balero::simulator::{ry_populations, sample_shots, DetectorPreset};
use balero::{uniform_prior, update_posterior};

fn main() -> balero::Result<()> {
    let model = DetectorPreset::QuitoLike.model(0);
    let theta = 1.2_f64;
    let truth = ry_populations(theta);
    let shots = sample_shots(&truth, std::slice::from_ref(&model), 10_000, 11)?.column(0);
    println!("true rho_g = {:.5}", truth.populations()[0]);

    let mut posterior = uniform_prior(1001)?;
    let mut seen = 0;
    for batch in [10, 90, 900, 9_000] {
        posterior = update_posterior(&posterior, &model, &shots[seen..seen + batch])?;
        seen += batch;
        let est = posterior.estimate();
        println!(
            "{seen:>6} shots: rho_g = {:.5} ± {:.5} (mode {:.3})",
            est.populations[0],
            est.std_devs[0],
            posterior.mode()
        );
    }
    Ok(())
}
