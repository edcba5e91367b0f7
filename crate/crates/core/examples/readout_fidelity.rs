//! Readout error of Bayesian estimation against threshold counting and
//! confusion-matrix inversion as the number of shots grows.
//!
//!     cargo run --release --example readout_fidelity

use balero::metrics::Estimator;
use balero::scenario::{run_benchmark, BenchmarkSpec, Scenario};

fn main() -> balero::Result<()> {
    let spec = BenchmarkSpec {
        n_seeds: 5,
        ..BenchmarkSpec::new(Scenario::ReadoutFidelity)
    };
    let out = run_benchmark(&spec)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "n_shots", "balero", "counts", "inversion");
    for &n in &spec.n_shots {
        let avg = |e| {
            let v = out.values("readout_error", e, n);
            v.iter().sum::<f64>() / v.len() as f64
        };
        println!(
            "{n:>8} {:>10.5} {:>10.5} {:>10.5}",
            avg(Estimator::Balero),
            avg(Estimator::Counts),
            avg(Estimator::Inversion)
        );
    }
    Ok(())
}
