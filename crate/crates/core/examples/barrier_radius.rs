//! Exponent constants and the shrinking barrier radius for a few constant
//! ball suprema.

use heleshaw::barrier::{exponent_constants, integrate_radius, BarrierConfig};

fn main() -> heleshaw::error::Result<()> {
    for d in [2, 3] {
        let c = exponent_constants(d)?;
        println!("d = {d}: xi = {:.6}, alpha = {:.6}, m* = {:.6}", c.xi, c.alpha, c.m_star);
    }
    let m = exponent_constants(2)?.m_star;
    println!("\n{:>6} {:>10} {:>10} {:>10}", "pbar", "r(0.1)", "r(0.2)", "r(0.4)");
    for pbar in [0.0, 0.05, 0.1, 0.2] {
        let cfg = BarrierConfig::with_constant_pbar(2, 0.9, m, 1.0, pbar);
        let tr = integrate_radius(&cfg, 0.4, 1e-4, 1e-3)?;
        let at = |t| tr.radius_at(t).map_or("-".to_string(), |r| format!("{r:.5}"));
        println!("{pbar:>6} {:>10} {:>10} {:>10}", at(0.1), at(0.2), at(0.4));
    }
    Ok(())
}
