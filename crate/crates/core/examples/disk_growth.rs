//! Grows the standard nutrient-fed disk and prints mass, support radius and
//! peak pressure at each stored time.
//!
//!     cargo run --release --example disk_growth [gamma] [cells]

use heleshaw::config::ExperimentConfig;
use heleshaw::experiment::simulate;

fn main() -> heleshaw::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let gamma: f64 = args.next().map_or(40.0, |s| s.parse().expect("gamma"));
    let cells: usize = args.next().map_or(64, |s| s.parse().expect("cells"));
    let cfg = ExperimentConfig {
        gammas: vec![gamma],
        cells,
        snapshots: 10,
        ..ExperimentConfig::default()
    };
    let run = simulate(&cfg)?.remove(0);
    let g = run.grid;
    println!("{} steps, worst mass defect {:.2e}", run.steps, run.max_mass_defect);
    println!("{:>8} {:>10} {:>8} {:>8} {:>8}", "t", "mass", "radius", "max p", "min n");
    for s in &run.snapshots {
        let st = &s.state;
        let area = st.rho.values().iter().filter(|&&r| r > 0.5).count() as f64 * g.cell_volume();
        println!(
            "{:>8.3} {:>10.5} {:>8.4} {:>8.4} {:>8.4}",
            st.time,
            st.mass(),
            (area / std::f64::consts::PI).sqrt(),
            st.p.max(),
            st.n.min()
        );
    }
    Ok(())
}
