//! Blowup classification of a few model free boundaries.

use heleshaw::obstacle::{blowup_fn, classify};

fn main() -> heleshaw::error::Result<()> {
    let e = [0.6, 0.8];
    let cases: Vec<(&str, Box<dyn Fn([f64; 2]) -> f64>)> = vec![
        ("half-space", Box::new(move |x| 0.5 * (x[0] * e[0] + x[1] * e[1]).max(0.0).powi(2))),
        ("isotropic", Box::new(|x| 0.25 * (x[0] * x[0] + x[1] * x[1]))),
        ("strip", Box::new(|x| 0.5 * x[1] * x[1])),
        ("wedge", Box::new(|x| 0.5 * x[0].max(0.0).powi(2) * (x[1] > 0.0) as u8 as f64)),
    ];
    for (name, u) in &cases {
        let prof = blowup_fn(u, 2, [0.0; 2], &[0.4, 0.2, 0.1, 0.05], 1e-12)?;
        let c = classify(&prof, 1.0)?;
        println!(
            "{name:<11} {:<10} normal {:?} kernel {:?} densities {:.3?}",
            c.label.as_str(),
            c.normal.map(|n| [(n[0] * 1e6).round() / 1e6, (n[1] * 1e6).round() / 1e6]),
            c.kernel_dim,
            c.densities
        );
    }
    Ok(())
}
