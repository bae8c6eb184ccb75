//! Hopf-Lax upper bound on a short disk run: violated fraction for each
//! dyadic C, and the weak HJB residual.

use heleshaw::config::ExperimentConfig;
use heleshaw::experiment::simulate;
use heleshaw::hopflax::{hjb_residual, verify_hopf_lax, HopfLaxParams};
use heleshaw::limit::calibrate_b;

fn main() -> heleshaw::error::Result<()> {
    let cfg = ExperimentConfig {
        cells: 48,
        tau: 0.3,
        snapshots: 20,
        ..ExperimentConfig::default()
    };
    let run = simulate(&cfg)?.remove(0);
    let b = calibrate_b(&[&run])?;
    println!("b = {b}");
    for k in 0..4 {
        let params = HopfLaxParams {
            pair_count: 2000,
            ..HopfLaxParams::new(b, 2f64.powi(k))
        };
        let out = verify_hopf_lax(&run, &params)?;
        println!("C = {:>3}: violated {:.4}, worst {:.3}", out.c, out.violated_fraction, out.max_violation);
    }
    println!("weak HJB residual {:.4}", hjb_residual(&run)?.normalized);
    Ok(())
}
