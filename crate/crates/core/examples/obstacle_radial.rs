//! Projected SOR on the radial obstacle problem with a hole of radius 0.3.

use heleshaw::grid::{Grid, ScalarField};
use heleshaw::obstacle::{complementarity_residual, solve_obstacle, ObstacleProblem};

fn exact(r: f64, a: f64) -> f64 {
    if r <= a {
        0.0
    } else {
        (r * r - a * a) / 4.0 - a * a / 2.0 * (r / a).ln()
    }
}

fn main() -> heleshaw::error::Result<()> {
    println!("{:>6} {:>12} {:>12}", "cells", "sup error", "compl.");
    for cells in [33, 65, 129] {
        let g = Grid::centered(2, cells, -1.0, 1.0)?;
        let u_exact = ScalarField::from_fn(g, |x| exact(x[0].hypot(x[1]), 0.3));
        let prob = ObstacleProblem::new(ScalarField::constant(g, 1.0), u_exact.clone())?;
        let u = solve_obstacle(&prob)?;
        println!(
            "{cells:>6} {:>12.3e} {:>12.3e}",
            u.linf_distance(&u_exact),
            complementarity_residual(&u, &prob.source)?
        );
    }
    Ok(())
}
