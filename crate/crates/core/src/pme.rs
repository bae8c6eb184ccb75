//! Relaxed density `∂t ρ = ∇·(ρ ∇p) + ρ n` with `p = ρ^γ`, coupled to the
//! nutrient, plus the pressure diagnostics built on top of it.
//!
//! Transport is a conservative finite-volume update whose face density is
//! taken from the higher-pressure side. Growth is applied as the exact factor
//! `exp(dt n)`. Only the bounding box of the support (plus one cell) is swept.

use rayon::prelude::*;

use crate::cg;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::nutrient::{self, Absorption, NutrientParams, NutrientWorkspace, SplitOrder};
use crate::report::Entry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxLimiter {
    #[default]
    None,
    Minmod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmeParams {
    pub gamma: f64,
    pub dt: f64,
    pub limiter: FluxLimiter,
    pub nutrient_theta: f64,
    pub absorption: Absorption,
    pub split: SplitOrder,
}

impl PmeParams {
    pub fn new(gamma: f64, dt: f64) -> Self {
        Self {
            gamma,
            dt,
            limiter: FluxLimiter::None,
            nutrient_theta: 0.5,
            absorption: Absorption::default(),
            split: SplitOrder::default(),
        }
    }

    fn nutrient(&self, dt: f64) -> NutrientParams {
        NutrientParams {
            dt,
            theta: self.nutrient_theta,
            absorption: self.absorption,
            order: self.split,
        }
    }
}

/// `ρ^γ`, with an integer power when `γ` is integral.
#[inline]
pub fn pressure_of(rho: f64, gamma: f64) -> f64 {
    if gamma.fract() == 0.0 && gamma.abs() < 2048.0 {
        rho.powi(gamma as i32)
    } else {
        rho.powf(gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub rho: ScalarField,
    pub p: ScalarField,
    pub n: ScalarField,
}

impl SimState {
    pub fn new(time: f64, rho: ScalarField, n: ScalarField, gamma: f64) -> Result<Self> {
        if rho.grid() != n.grid() {
            return Err(Error::InvalidInput("density and nutrient grids differ".into()));
        }
        if let Some(k) = rho.values().iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeDensity { cell: k, value: rho[k] });
        }
        let p = rho.map(|r| pressure_of(r, gamma));
        Ok(Self { time, rho, p, n })
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        self.rho.integral()
    }
}

/// Largest stable step `h² / (2 d γ max p + ε)`, further capped so that the
/// explicit part of the nutrient step keeps positive coefficients.
pub fn cfl_limit(state: &SimState, params: &PmeParams) -> f64 {
    let g = state.grid();
    let h2 = g.h() * g.h();
    let two_d = 2.0 * g.dim() as f64;
    let mut limit = h2 / (two_d * params.gamma * state.p.max() + 1e-300);
    if params.limiter == FluxLimiter::Minmod {
        limit /= 1.5;
    }
    if params.nutrient_theta < 1.0 {
        limit = limit.min(h2 / (two_d * (1.0 - params.nutrient_theta)));
    }
    limit
}

/// Inclusive index box `[i0, i1] × [j0, j1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Bbox {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Bbox {
    fn of_support(rho: &ScalarField) -> Option<Self> {
        let g = rho.grid();
        let mut b: Option<Bbox> = None;
        for k in 0..g.len() {
            if rho[k] > 0.0 {
                let (i, j) = g.ij(k);
                b = Some(match b {
                    None => Bbox { i0: i, i1: i, j0: j, j1: j },
                    Some(b) => Bbox {
                        i0: b.i0.min(i),
                        i1: b.i1.max(i),
                        j0: b.j0.min(j),
                        j1: b.j1.max(j),
                    },
                });
            }
        }
        b
    }

    fn grown(&self, g: &Grid) -> Self {
        let last = g.cells_per_axis() - 1;
        let (j0, j1) = if g.dim() == 1 {
            (0, 0)
        } else {
            (self.j0.saturating_sub(1), (self.j1 + 1).min(last))
        };
        Bbox {
            i0: self.i0.saturating_sub(1),
            i1: (self.i1 + 1).min(last),
            j0,
            j1,
        }
    }
}

/// Face density between `up` (higher pressure) and its neighbour in
/// direction `dir` (0 west, 1 east, 2 south, 3 north).
#[inline]
fn face_rho(g: &Grid, rho: &[f64], up: usize, down: usize, dir: usize, limiter: FluxLimiter) -> f64 {
    let ru = rho[up];
    match limiter {
        FluxLimiter::None => ru,
        FluxLimiter::Minmod => {
            let back = g.neighbours(up)[dir ^ 1];
            let a = ru - rho[back];
            let b = rho[down] - ru;
            let m = if a * b <= 0.0 {
                0.0
            } else if a.abs() < b.abs() {
                a
            } else {
                b
            };
            (ru + 0.5 * m).max(0.0)
        }
    }
}

/// Per-step bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub dt: f64,
    pub mass_before: f64,
    /// `∫ ρ (e^{dt n} − 1)` over the post-transport density.
    pub growth: f64,
    pub mass_after: f64,
}

impl StepStats {
    /// Relative defect of `mass_after = mass_before + growth`.
    pub fn mass_defect(&self) -> f64 {
        (self.mass_after - self.mass_before - self.growth).abs() / self.mass_after.abs().max(1e-300)
    }
}

/// Time stepper owning the current state and the active support box.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: PmeParams,
    state: SimState,
    bbox: Option<Bbox>,
    scratch: Vec<f64>,
    nutrient_ws: NutrientWorkspace,
}

impl Simulation {
    pub fn new(state: SimState, params: PmeParams) -> Result<Self> {
        state.grid().require_stencil()?;
        if !(params.gamma > 1.0) {
            return Err(Error::InvalidInput(format!("gamma must exceed 1, got {}", params.gamma)));
        }
        let bbox = Bbox::of_support(&state.rho);
        let scratch = vec![0.0; state.grid().len()];
        Ok(Self {
            params,
            state,
            bbox,
            scratch,
            nutrient_ws: NutrientWorkspace::default(),
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn into_state(self) -> SimState {
        self.state
    }

    /// Overrides the clock, used to land exactly on requested times.
    pub fn set_time(&mut self, t: f64) {
        self.state.time = t;
    }

    pub fn params(&self) -> &PmeParams {
        &self.params
    }

    pub fn stable_dt(&self) -> f64 {
        cfl_limit(&self.state, &self.params)
    }

    /// Advances by `dt`: transport, growth, pressure update, nutrient step.
    pub fn step(&mut self, dt: f64) -> Result<StepStats> {
        let limit = self.stable_dt();
        if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
            return Err(Error::Stability { dt, limit });
        }
        let g = *self.state.grid();
        let mass_before = self.support_mass();
        let mut growth = 0.0;
        let mut transported = 0.0;
        if let Some(bbox) = self.bbox {
            let region = bbox.grown(&g);
            let (new_box, tr, gr) = self.transport_and_grow(&g, region, dt)?;
            let rows = &self.scratch;
            transported = tr;
            growth = gr;
            let n = g.cells_per_axis();
            let gamma = self.params.gamma;
            let rho = self.state.rho.values_mut();
            let p = self.state.p.values_mut();
            for j in region.j0..=region.j1 {
                for i in region.i0..=region.i1 {
                    let k = j * n + i;
                    rho[k] = rows[k];
                    p[k] = pressure_of(rho[k], gamma);
                }
            }
            self.bbox = new_box;
        }
        let _ = transported;
        nutrient::step_nutrient_in_place(
            &mut self.state.n,
            &self.state.rho,
            &self.params.nutrient(dt),
            &mut self.nutrient_ws,
        )?;
        self.state.time += dt;
        Ok(StepStats {
            dt,
            mass_before,
            growth,
            mass_after: self.support_mass(),
        })
    }

    /// `∫ρ`, summing only the rows of the support box. Skipped cells are
    /// zero, so the result equals the full-grid sum.
    fn support_mass(&self) -> f64 {
        let g = self.state.grid();
        let n = g.cells_per_axis();
        let rho = self.state.rho.values();
        let sum: f64 = match self.bbox {
            None => 0.0,
            Some(b) => rho[b.j0 * n..(b.j1 + 1) * n].iter().sum(),
        };
        sum * g.cell_volume()
    }

    /// Rows `j0..=j1` outside which density, pressure and `ρn` vanish.
    pub fn active_rows(&self) -> Option<(usize, usize)> {
        self.bbox.map(|b| (b.j0, b.j1))
    }

    /// Writes the new density on `region` into the scratch buffer.
    fn transport_and_grow(&mut self, g: &Grid, region: Bbox, dt: f64) -> Result<(Option<Bbox>, f64, f64)> {
        let n = g.cells_per_axis();
        let vol = g.cell_volume();
        let rate = dt / (g.h() * g.h());
        let dims = 2 * g.dim();
        let limiter = self.params.limiter;
        let rho = self.state.rho.values();
        let p = self.state.p.values();
        let nut = self.state.n.values();
        let mut out = std::mem::take(&mut self.scratch);
        // (row support range, transported mass, growth, first negative)
        type RowSummary = (Option<(usize, usize)>, f64, f64, Option<(usize, f64)>);
        let summaries: Vec<(usize, RowSummary)> = out
            .par_chunks_mut(n)
            .enumerate()
            .filter(|(j, _)| *j >= region.j0 && *j <= region.j1)
            .map(|(j, row)| {
                let mut support: Option<(usize, usize)> = None;
                let mut tr = 0.0;
                let mut gr = 0.0;
                let mut neg = None;
                for i in region.i0..=region.i1 {
                    let k = j * n + i;
                    let nb = g.neighbours_at(i, j);
                    let mut flux = 0.0;
                    if limiter == FluxLimiter::None {
                        let (pk, rk) = (p[k], rho[k]);
                        for &m in &nb[..dims] {
                            let dp = p[m] - pk;
                            flux += if dp > 0.0 { rho[m] } else { rk } * dp;
                        }
                    } else {
                        for (dir, &m) in nb.iter().enumerate().take(dims) {
                            let dp = p[m] - p[k];
                            if dp == 0.0 {
                                continue;
                            }
                            let rf = if dp > 0.0 {
                                face_rho(g, rho, m, k, dir ^ 1, limiter)
                            } else {
                                face_rho(g, rho, k, m, dir, limiter)
                            };
                            flux += rf * dp;
                        }
                    }
                    let mut r = rho[k] + rate * flux;
                    if r < 0.0 {
                        if r < -1e-12 {
                            neg.get_or_insert((k, r));
                        }
                        r = 0.0;
                    }
                    tr += r;
                    let inc = r * crate::stats::expm1_small(dt * nut[k]);
                    gr += inc;
                    r += inc;
                    row[i] = r;
                    if r > 0.0 {
                        support = Some(match support {
                            None => (i, i),
                            Some((a, _)) => (a, i),
                        });
                    }
                }
                (j, (support, tr, gr, neg))
            })
            .collect();
        let mut new_box: Option<Bbox> = None;
        let (mut tr, mut gr) = (0.0, 0.0);
        for (j, (support, t, gg, neg)) in &summaries {
            if let Some((cell, value)) = neg {
                self.scratch = out;
                return Err(Error::NegativeDensity { cell: *cell, value: *value });
            }
            tr += t;
            gr += gg;
            if let Some((a, b)) = support {
                new_box = Some(match new_box {
                    None => Bbox { i0: *a, i1: *b, j0: *j, j1: *j },
                    Some(bx) => Bbox {
                        i0: bx.i0.min(*a),
                        i1: bx.i1.max(*b),
                        j0: bx.j0.min(*j),
                        j1: bx.j1.max(*j),
                    },
                });
            }
        }
        self.scratch = out;
        Ok((new_box, tr * vol, gr * vol))
    }

    /// Number of cells between the support and the nearest box face.
    pub fn support_margin(&self) -> usize {
        let n = self.state.grid().cells_per_axis();
        match self.bbox {
            None => n,
            Some(b) => {
                let mut m = b.i0.min(n - 1 - b.i1);
                if self.state.grid().dim() == 2 {
                    m = m.min(b.j0).min(n - 1 - b.j1);
                }
                m
            }
        }
    }
}

/// One step of fixed size `params.dt`.
pub fn step_density(state: &SimState, params: &PmeParams) -> Result<SimState> {
    let mut sim = Simulation::new(state.clone(), *params)?;
    sim.step(params.dt)?;
    Ok(sim.into_state())
}

/// `u_γ = −γ (Δp + n)`.
pub fn compute_u_gamma(state: &SimState, gamma: f64) -> Result<ScalarField> {
    let lap = state.p.laplacian()?;
    Ok(lap.zip_map(&state.n, |l, n| -gamma * (l + n)))
}

/// Solves `−Δq = rhs` on the cells where `mask` holds, with `q = 0` on the
/// others and reflecting box edges.
pub fn masked_poisson(grid: &Grid, mask: &[bool], rhs: &[f64]) -> Result<ScalarField> {
    grid.require_stencil()?;
    let cells: Vec<usize> = (0..grid.len()).filter(|&k| mask[k]).collect();
    if cells.is_empty() {
        return Err(Error::EmptySaturatedSet);
    }
    let mut slot = vec![usize::MAX; grid.len()];
    for (s, &k) in cells.iter().enumerate() {
        slot[k] = s;
    }
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let dims = 2 * grid.dim();
    let diag: Vec<f64> = cells
        .iter()
        .map(|&k| grid.neighbours(k)[..dims].iter().filter(|&&m| m != k).count() as f64 * inv_h2)
        .collect();
    let op = |v: &[f64], out: &mut [f64]| {
        for (s, &k) in cells.iter().enumerate() {
            let mut acc = diag[s] * v[s];
            for &m in &grid.neighbours(k)[..dims] {
                if m != k && slot[m] != usize::MAX {
                    acc -= v[slot[m]] * inv_h2;
                }
            }
            out[s] = acc;
        }
    };
    let b: Vec<f64> = cells.iter().map(|&k| rhs[k]).collect();
    let mut x = vec![0.0; cells.len()];
    cg::solve(op, &b, &mut x, Some(&diag), 1e-12, 20 * cells.len() + 1000)?;
    let mut q = ScalarField::zeros(*grid);
    for (s, &k) in cells.iter().enumerate() {
        q[k] = x[s];
    }
    Ok(q)
}

/// Default saturation threshold `1 − 2/γ`.
pub fn saturation_threshold(gamma: f64) -> f64 {
    1.0 - 2.0 / gamma
}

/// Relative sup distance between the simulated pressure and the solution of
/// `−Δq = n` on `{ρ > threshold}`, measured on that set.
pub fn pressure_consistency_value(state: &SimState, threshold: f64) -> Result<f64> {
    let mask: Vec<bool> = state.rho.values().iter().map(|&r| r > threshold).collect();
    let q = masked_poisson(state.grid(), &mask, state.n.values())?;
    let mut diff: f64 = 0.0;
    for k in 0..mask.len() {
        if mask[k] {
            diff = diff.max((state.p[k] - q[k]).abs());
        }
    }
    Ok(diff / q.linf().max(1e-300))
}

pub fn pressure_consistency(state: &SimState, threshold: f64, tol: f64) -> Result<Entry> {
    let v = pressure_consistency_value(state, threshold)?;
    Ok(Entry::at_most(
        "pressure_consistency",
        v,
        tol,
        "-Δp = n on {ρ > threshold}, p = 0 outside",
    ))
}

/// Initial density whose pressure already solves `−Δp = n` on the patch,
/// so that `u_γ` vanishes on the patch at time zero.
pub fn prepared_state(patch: &[bool], n0: ScalarField, gamma: f64) -> Result<SimState> {
    let grid = *n0.grid();
    let p0 = masked_poisson(&grid, patch, n0.values())?;
    if p0.max() > 1.0 {
        return Err(Error::InvalidInput(format!(
            "prepared pressure peaks at {} > 1; shrink the patch or the nutrient",
            p0.max()
        )));
    }
    let rho = p0.map(|p| if p > 0.0 { p.powf(1.0 / gamma) } else { 0.0 });
    SimState::new(0.0, rho, n0, gamma)
}

/// Indicator of the patch smoothed by a cosine bump of the given radius in
/// cells, as an alternative initial density.
pub fn mollified_state(patch: &[bool], n0: ScalarField, gamma: f64, radius_cells: f64) -> Result<SimState> {
    let g = *n0.grid();
    let n = g.cells_per_axis() as isize;
    let r = radius_cells.ceil() as isize;
    let mut weights = Vec::new();
    let (jlo, jhi) = if g.dim() == 1 { (0, 0) } else { (-r, r) };
    for dj in jlo..=jhi {
        for di in -r..=r {
            let d = ((di * di + dj * dj) as f64).sqrt();
            if d < radius_cells {
                weights.push((di, dj, 0.5 * (1.0 + (std::f64::consts::PI * d / radius_cells).cos())));
            }
        }
    }
    let total: f64 = weights.iter().map(|w| w.2).sum();
    let rho = ScalarField::from_values(
        g,
        (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                let mut acc = 0.0;
                for &(di, dj, w) in &weights {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a >= 0 && a < n && b >= 0 && b < n.max(1) && (g.dim() == 2 || b == 0) {
                        if patch[g.index(a as usize, b as usize)] {
                            acc += w;
                        }
                    }
                }
                acc / total
            })
            .collect(),
    )?;
    SimState::new(0.0, rho, n0, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_mask(g: &Grid, r: f64) -> Vec<bool> {
        (0..g.len())
            .map(|k| {
                let c = g.center(k);
                c[0] * c[0] + c[1] * c[1] < r * r
            })
            .collect()
    }

    #[test]
    fn zero_density_is_fixed() {
        let g = Grid::centered(2, 16, -1.0, 1.0).unwrap();
        let s = SimState::new(0.0, ScalarField::zeros(g), ScalarField::constant(g, 1.0), 10.0).unwrap();
        let out = step_density(&s, &PmeParams::new(10.0, 1e-3)).unwrap();
        assert_eq!(out.rho.max(), 0.0);
        assert_eq!(out.p.max(), 0.0);
    }

    #[test]
    fn u_gamma_of_empty_state() {
        let g = Grid::centered(2, 16, -1.0, 1.0).unwrap();
        let s = SimState::new(0.0, ScalarField::zeros(g), ScalarField::constant(g, 0.5), 20.0).unwrap();
        let u = compute_u_gamma(&s, 20.0).unwrap();
        assert!(u.values().iter().all(|&v| (v + 10.0).abs() < 1e-12));
    }

    #[test]
    fn masked_poisson_matches_disk_profile() {
        let g = Grid::centered(2, 96, -1.0, 1.0).unwrap();
        let a = 0.7;
        let mask = disk_mask(&g, a);
        let q = masked_poisson(&g, &mask, &vec![1.0; g.len()]).unwrap();
        let exact = ScalarField::from_fn(g, |x| ((a * a - x[0] * x[0] - x[1] * x[1]) / 4.0).max(0.0));
        assert!(q.linf_distance(&exact) / exact.max() < 0.05);
    }

    #[test]
    fn masked_poisson_matches_interval_profile() {
        let g = Grid::centered(1, 200, -1.0, 1.0).unwrap();
        let a = 0.5;
        let mask: Vec<bool> = (0..g.len()).map(|k| g.center(k)[0].abs() < a).collect();
        let q = masked_poisson(&g, &mask, &vec![1.0; g.len()]).unwrap();
        let exact = ScalarField::from_fn(g, |x| ((a * a - x[0] * x[0]) / 2.0).max(0.0));
        assert!(q.linf_distance(&exact) / exact.max() < 0.05);
    }

    #[test]
    fn empty_saturated_set_is_an_error() {
        let g = Grid::centered(2, 8, -1.0, 1.0).unwrap();
        let s = SimState::new(0.0, ScalarField::zeros(g), ScalarField::constant(g, 1.0), 10.0).unwrap();
        assert!(matches!(pressure_consistency_value(&s, 0.5), Err(Error::EmptySaturatedSet)));
    }

    #[test]
    fn prepared_state_has_no_positive_u() {
        let g = Grid::centered(2, 64, -2.0, 2.0).unwrap();
        let s = prepared_state(&disk_mask(&g, 1.0), ScalarField::constant(g, 1.0), 40.0).unwrap();
        let u = compute_u_gamma(&s, 40.0).unwrap();
        assert!(u.max() < 1e-6, "max u {}", u.max());
        assert!((s.p.max() - 0.25).abs() < 0.02);
    }

    #[test]
    fn steps_conserve_mass_up_to_growth() {
        let g = Grid::centered(2, 48, -2.0, 2.0).unwrap();
        let s = prepared_state(&disk_mask(&g, 0.8), ScalarField::constant(g, 1.0), 20.0).unwrap();
        let mut sim = Simulation::new(s, PmeParams::new(20.0, 0.0)).unwrap();
        for _ in 0..50 {
            let dt = 0.9 * sim.stable_dt();
            let st = sim.step(dt).unwrap();
            assert!(st.mass_defect() < 1e-12, "{}", st.mass_defect());
        }
        let st = sim.state();
        assert!(st.p.values().iter().zip(st.rho.values()).all(|(&p, &r)| p == pressure_of(r, 20.0)));
    }

    #[test]
    fn oversized_step_is_rejected() {
        let g = Grid::centered(2, 32, -2.0, 2.0).unwrap();
        let s = prepared_state(&disk_mask(&g, 0.8), ScalarField::constant(g, 1.0), 20.0).unwrap();
        let mut sim = Simulation::new(s, PmeParams::new(20.0, 0.0)).unwrap();
        let dt = 2.0 * sim.stable_dt();
        assert!(matches!(sim.step(dt), Err(Error::Stability { .. })));
    }
}
