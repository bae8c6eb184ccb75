//! Porous-medium step against the 1D Barenblatt profile with no growth,
//! over one self-similar unit, at a few resolutions.

use heleshaw::grid::{Grid, ScalarField};
use heleshaw::pme::{PmeParams, SimState, Simulation};

fn barenblatt(gamma: f64, t: f64, x: f64) -> f64 {
    // v_s = (v^m)_xx with m = γ + 1 and s = γt/(γ+1)
    let m = gamma + 1.0;
    let s = gamma / m * t;
    let a = 1.0 / (m + 1.0);
    let k = a * (m - 1.0) / (2.0 * m);
    s.powf(-a) * (1.0 - k * x * x * s.powf(-2.0 * a)).max(0.0).powf(1.0 / (m - 1.0))
}

fn main() -> heleshaw::error::Result<()> {
    let gamma = 5.0;
    let kappa = gamma / (gamma + 1.0);
    let (t0, t1) = (1.0 / kappa, 2.0 / kappa);
    println!("{:>6} {:>12} {:>8}", "cells", "rel L1", "steps");
    for cells in [64, 128, 256, 512] {
        let g = Grid::centered(1, cells, -6.0, 6.0)?;
        let rho = ScalarField::from_fn(g, |x| barenblatt(gamma, t0, x[0]));
        let mut sim = Simulation::new(SimState::new(t0, rho, ScalarField::zeros(g), gamma)?, PmeParams::new(gamma, 0.0))?;
        let (mut t, mut steps) = (t0, 0);
        while t < t1 {
            let dt = (0.9 * sim.stable_dt()).min(t1 - t);
            sim.step(dt)?;
            t += dt;
            steps += 1;
        }
        let exact = ScalarField::from_fn(g, |x| barenblatt(gamma, t1, x[0]));
        println!("{cells:>6} {:>12.3e} {steps:>8}", sim.state().rho.l1_distance(&exact) / exact.integral());
    }
    Ok(())
}
