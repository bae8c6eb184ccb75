//! AB moments along the b-ladder for a small γ-sweep, plus the L¹ gaps
//! between consecutive densities.

use heleshaw::config::ExperimentConfig;
use heleshaw::experiment::simulate;
use heleshaw::limit::{calibrate_b, l1_to_next, ladder};

fn main() -> heleshaw::error::Result<()> {
    let cfg = ExperimentConfig {
        cells: 48,
        gammas: vec![10.0, 20.0, 40.0],
        tau: 0.2,
        snapshots: 4,
        ..ExperimentConfig::default()
    };
    let runs = simulate(&cfg)?;
    let refs: Vec<_> = runs.iter().collect();
    println!("calibrated b = {}", calibrate_b(&refs)?);
    for r in &runs {
        let m: Vec<String> = ladder()
            .take(5)
            .map(|b| r.moments.moment(b).map_or("overflow".into(), |v| format!("{v:.3e}")))
            .collect();
        println!("gamma {:>4}: max u+ {:>8.2}  M_b {m:?}", r.gamma, r.moments.max_u_plus());
    }
    println!("L1 to next gamma: {:?}", l1_to_next(&runs));
    Ok(())
}
