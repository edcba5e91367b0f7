//! Writes calibration and measurement CSVs, then drives the command-line
//! front end through `calibrate` and `estimate` in a temporary directory.
//!
//!     cargo run --release --example cli_roundtrip

use balero::cli;
use balero::io::{write_calibration_shots, write_shots_raw};
use balero::simulator::{ry_populations, sample_iq_shots, simulate_calibration, DetectorPreset};

fn main() -> balero::Result<()> {
    let dir = std::env::temp_dir().join(format!("balero-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temporary directory");
    let preset = DetectorPreset::QuitoLike;
    let model = preset.model(0);

    let cal = simulate_calibration(&model, 20_000, 1, preset.transverse_std())?;
    write_calibration_shots(&dir.join("cal.csv"), "example", &[cal])?;
    let (_, iq) = sample_iq_shots(&ry_populations(0.8), std::slice::from_ref(&model), 2_000, 2, preset.transverse_std())?;
    write_shots_raw(&dir.join("shots.csv"), "example", std::slice::from_ref(&model.qubit_id), &iq)?;

    let d = dir.to_str().unwrap();
    let code = cli::run(["balero", "calibrate", "--shots", &format!("{d}/cal.csv"), "--out", d]);
    assert_eq!(code, 0);
    let code = cli::run([
        "balero",
        "estimate",
        "--calibration",
        &format!("{d}/calibration.json"),
        "--shots",
        &format!("{d}/shots.csv"),
        "--out",
        d,
    ]);
    assert_eq!(code, 0);
    println!("{}", std::fs::read_to_string(dir.join("results.json")).unwrap());
    println!("true rho_g = {:.4}", ry_populations(0.8).populations()[0]);
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
