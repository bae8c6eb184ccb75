//! Absorbing heat equation `∂t n = Δn − ρ n` and the exponential lower bound
//! on its minimum.

use crate::cg;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::report::Entry;

/// How the absorption factor over one step is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Absorption {
    /// `n ← n · exp(−dt ρ)`: exact for the pointwise ODE.
    #[default]
    Exponential,
    /// `n ← n / (1 + dt ρ)`: backward Euler.
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitOrder {
    #[default]
    DiffuseThenAbsorb,
    AbsorbThenDiffuse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutrientParams {
    pub dt: f64,
    /// 0 explicit, 0.5 Crank–Nicolson, 1 backward Euler.
    pub theta: f64,
    pub absorption: Absorption,
    pub order: SplitOrder,
}

impl NutrientParams {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            theta: 0.5,
            absorption: Absorption::default(),
            order: SplitOrder::default(),
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.dt > 0.0) || !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidInput(format!(
                "nutrient step needs dt > 0 and theta in [0, 1], got dt = {}, theta = {}",
                self.dt, self.theta
            )));
        }
        if self.theta < 0.5 {
            let limit = grid.h() * grid.h() / (2.0 * grid.dim() as f64);
            if self.dt > limit {
                return Err(Error::Stability { dt: self.dt, limit });
            }
        }
        Ok(())
    }
}

pub const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 5000;

/// Buffers reused across nutrient steps.
#[derive(Debug, Clone, Default)]
pub struct NutrientWorkspace {
    lap: Vec<f64>,
    rhs: Vec<f64>,
    diag: Vec<f64>,
    cg: cg::Workspace,
}

/// One θ-step of the heat equation with reflecting box edges, in place.
pub fn diffuse_in_place(n: &mut ScalarField, dt: f64, theta: f64, ws: &mut NutrientWorkspace) -> Result<()> {
    let grid = *n.grid();
    grid.require_stencil()?;
    let len = grid.len();
    ws.lap.resize(len, 0.0);
    crate::grid::apply_laplacian(&grid, n.values(), &mut ws.lap);
    let explicit = (1.0 - theta) * dt;
    ws.rhs.clear();
    ws.rhs.extend(n.values().iter().zip(&ws.lap).map(|(u, l)| u + explicit * l));
    if theta == 0.0 {
        n.values_mut().copy_from_slice(&ws.rhs);
        return Ok(());
    }
    let a = theta * dt;
    // Jacobi scaling with the interior diagonal; edge rows differ slightly,
    // which only affects the preconditioner.
    ws.diag.clear();
    ws.diag.resize(len, 1.0 + a * 2.0 * grid.dim() as f64 / (grid.h() * grid.h()));
    let op = |v: &[f64], out: &mut [f64]| {
        crate::grid::apply_laplacian(&grid, v, out);
        for k in 0..v.len() {
            out[k] = v[k] - a * out[k];
        }
    };
    let x = n.values_mut();
    x.copy_from_slice(&ws.rhs);
    cg::solve_with(&mut ws.cg, op, &ws.rhs, x, Some(&ws.diag), CG_TOL, CG_MAX_ITER)?;
    Ok(())
}

/// One θ-step of the heat equation with reflecting box edges.
pub fn diffuse(n: &ScalarField, dt: f64, theta: f64) -> Result<ScalarField> {
    let mut out = n.clone();
    diffuse_in_place(&mut out, dt, theta, &mut NutrientWorkspace::default())?;
    Ok(out)
}

fn absorb(n: &mut ScalarField, rho: &ScalarField, dt: f64, kind: Absorption) {
    let r = rho.values();
    for (k, v) in n.values_mut().iter_mut().enumerate() {
        if r[k] == 0.0 {
            continue;
        }
        *v *= match kind {
            Absorption::Exponential => 1.0 + crate::stats::expm1_small(-dt * r[k]),
            Absorption::Implicit => 1.0 / (1.0 + dt * r[k]),
        };
    }
}

/// In-place form of [`step_nutrient`].
pub fn step_nutrient_in_place(
    n: &mut ScalarField,
    rho: &ScalarField,
    params: &NutrientParams,
    ws: &mut NutrientWorkspace,
) -> Result<()> {
    params.validate(n.grid())?;
    if let Some(k) = n.values().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidInput(format!("negative nutrient at cell {k}")));
    }
    match params.order {
        SplitOrder::DiffuseThenAbsorb => {
            diffuse_in_place(n, params.dt, params.theta, ws)?;
            absorb(n, rho, params.dt, params.absorption);
        }
        SplitOrder::AbsorbThenDiffuse => {
            absorb(n, rho, params.dt, params.absorption);
            diffuse_in_place(n, params.dt, params.theta, ws)?;
        }
    }
    Ok(())
}

/// Advances `n` by one step of `∂t n = Δn − ρ n`.
pub fn step_nutrient(n: &ScalarField, rho: &ScalarField, params: &NutrientParams) -> Result<ScalarField> {
    let mut out = n.clone();
    step_nutrient_in_place(&mut out, rho, params, &mut NutrientWorkspace::default())?;
    Ok(out)
}

/// Largest amount by which `min n(t)` falls below `e^{−t} n0_min` over the
/// stored history.
pub fn lower_bound_violation<'a>(history: impl IntoIterator<Item = (f64, &'a ScalarField)>, n0_min: f64) -> f64 {
    history
        .into_iter()
        .map(|(t, n)| ((-t).exp() * n0_min - n.min()).max(0.0))
        .fold(0.0, f64::max)
}

pub fn check_lower_bound<'a>(
    history: impl IntoIterator<Item = (f64, &'a ScalarField)>,
    n0_min: f64,
    tol: f64,
) -> Entry {
    let v = lower_bound_violation(history, n0_min);
    Entry::new("nutrient_lower_bound", v, tol, v <= tol, "min n(t) >= exp(-t) min n(0)")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2(n: usize) -> Grid {
        Grid::centered(2, n, -1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_state_is_steady_without_absorption() {
        let g = grid2(16);
        let n = ScalarField::constant(g, 0.7);
        let rho = ScalarField::zeros(g);
        let out = step_nutrient(&n, &rho, &NutrientParams::new(0.1)).unwrap();
        assert!(out.linf_distance(&n) < 1e-12);
    }

    #[test]
    fn full_absorption_matches_scalar_ode() {
        let g = grid2(8);
        let rho = ScalarField::constant(g, 1.0);
        let dt = 0.05;
        let mut n = ScalarField::constant(g, 2.0);
        for _ in 0..20 {
            n = step_nutrient(&n, &rho, &NutrientParams::new(dt)).unwrap();
        }
        let exact = 2.0 * (-1.0f64).exp();
        assert!((n.max() - exact).abs() < 20.0 * dt.powi(3));
        assert!((n.min() - exact).abs() < 20.0 * dt.powi(3));
    }

    #[test]
    fn implicit_absorption_is_first_order() {
        let g = grid2(8);
        let rho = ScalarField::constant(g, 1.0);
        let mut p = NutrientParams::new(0.1);
        p.absorption = Absorption::Implicit;
        let n = step_nutrient(&ScalarField::constant(g, 1.0), &rho, &p).unwrap();
        assert!((n[0] - 1.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn explicit_cfl_is_enforced() {
        let g = grid2(16);
        let h2 = g.h() * g.h();
        let n = ScalarField::constant(g, 1.0);
        let rho = ScalarField::zeros(g);
        let p = NutrientParams::new(h2).with_theta(0.0);
        assert!(matches!(step_nutrient(&n, &rho, &p), Err(Error::Stability { .. })));
        let p = NutrientParams::new(0.2 * h2).with_theta(0.0);
        assert!(step_nutrient(&n, &rho, &p).is_ok());
    }

    #[test]
    fn heat_kernel_widening_1d() {
        let g = Grid::centered(1, 400, -4.0, 4.0).unwrap();
        let s0 = 0.2f64;
        let mut n = ScalarField::from_fn(g, |x| (-x[0] * x[0] / (2.0 * s0 * s0)).exp());
        let rho = ScalarField::zeros(g);
        let dt = 2e-4;
        for _ in 0..1000 {
            n = step_nutrient(&n, &rho, &NutrientParams::new(dt)).unwrap();
        }
        let s2 = s0 * s0 + 2.0 * 0.2;
        let exact = ScalarField::from_fn(g, |x| (s0 * s0 / s2).sqrt() * (-x[0] * x[0] / (2.0 * s2)).exp());
        assert!(n.linf_distance(&exact) / exact.max() < 0.01);
    }

    #[test]
    fn lower_bound_saturates_under_full_absorption() {
        let g = grid2(8);
        let rho = ScalarField::constant(g, 1.0);
        let dt = 0.01;
        let mut n = ScalarField::constant(g, 1.0);
        let mut hist = vec![(0.0, n.clone())];
        for k in 1..=100 {
            n = step_nutrient(&n, &rho, &NutrientParams::new(dt)).unwrap();
            hist.push((k as f64 * dt, n.clone()));
        }
        let v = lower_bound_violation(hist.iter().map(|(t, f)| (*t, f)), 1.0);
        assert!(v < 1e-12, "violation {v}");
    }

    #[test]
    fn maximum_does_not_grow() {
        let g = grid2(32);
        let mut n = ScalarField::from_fn(g, |x| 1.0 + (4.0 * x[0]).cos() * x[1]);
        let rho = ScalarField::from_fn(g, |x| if x[0] * x[0] + x[1] * x[1] < 0.25 { 1.0 } else { 0.0 });
        let mut prev = n.max();
        for _ in 0..20 {
            n = step_nutrient(&n, &rho, &NutrientParams::new(1e-3).with_theta(1.0)).unwrap();
            assert!(n.max() <= prev + 1e-12);
            assert!(n.min() >= 0.0);
            prev = n.max();
        }
    }
}
