//! Hitting times of a growing disk and local Hölder fits at a few reached
//! points. The grid here is coarse, so the fitted exponents sit low;
//! configs/holder_d2.cfg runs the same setup at 128².

use heleshaw::baiocchi::holder_exponent;
use heleshaw::barrier::exponent_constants;
use heleshaw::config::{ExperimentConfig, InitialData};
use heleshaw::experiment::{hitting_field, simulate};

fn main() -> heleshaw::error::Result<()> {
    let cfg = ExperimentConfig {
        cells: 64,
        lo: -2.0,
        hi: 2.0,
        initial: InitialData::Disk {
            center: [0.0, 0.0],
            radius: 0.5,
        },
        n0: 4.0,
        tau: 0.3,
        snapshots: 30,
        ..ExperimentConfig::default()
    };
    let run = simulate(&cfg)?.remove(0);
    let hit = hitting_field(&run)?;
    let h = run.grid.h();
    let radii: Vec<f64> = [3.0, 4.0, 6.0, 8.0].iter().map(|k| k * h).collect();
    println!("alpha_2 = {:.4}", exponent_constants(2)?.alpha);
    for deg in [0.0f64, 60.0, 135.0] {
        let a = deg.to_radians();
        let x = [0.75 * a.cos(), 0.75 * a.sin()];
        match holder_exponent(&hit, x, &radii) {
            Ok(f) => println!("x = ({:+.3}, {:+.3}): T = {:.4}, fitted exponent {:.3}", x[0], x[1], hit.at(x), f.alpha),
            Err(e) => println!("x = ({:+.3}, {:+.3}): {e}", x[0], x[1]),
        }
    }
    Ok(())
}
