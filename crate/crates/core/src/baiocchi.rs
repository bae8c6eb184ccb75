//! Time-integrated pressure `w = ∫ p`, source history `η = ∫ ρ n`, hitting
//! times, and the checks that tie them together.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::report::Entry;

/// `w` and `η` at a single time.
#[derive(Debug, Clone, PartialEq)]
pub struct BaiocchiField {
    pub t: f64,
    pub w: ScalarField,
    pub eta: ScalarField,
}

/// Trapezoidal accumulation of `w` and `η` over a stream of states.
#[derive(Debug, Clone)]
pub struct Accumulator {
    t: Option<f64>,
    w: ScalarField,
    eta: ScalarField,
    prev_p: Vec<f64>,
    prev_src: Vec<f64>,
    rows: Option<(usize, usize)>,
}

impl Accumulator {
    pub fn new(grid: Grid) -> Self {
        Self {
            t: None,
            w: ScalarField::zeros(grid),
            eta: ScalarField::zeros(grid),
            prev_p: vec![0.0; grid.len()],
            prev_src: vec![0.0; grid.len()],
            rows: None,
        }
    }

    /// Adds the state at time `t` with pressure `p` and source `ρ n`. The
    /// first call fixes the time origin.
    pub fn push(&mut self, t: f64, p: &ScalarField, rho: &ScalarField, n: &ScalarField) -> Result<()> {
        self.push_rows(t, p, rho, n, None)
    }

    /// As [`Accumulator::push`], where `rows = Some((j0, j1))` promises that
    /// `p` and `ρ` vanish outside rows `j0..=j1`.
    pub fn push_rows(
        &mut self,
        t: f64,
        p: &ScalarField,
        rho: &ScalarField,
        n: &ScalarField,
        rows: Option<(usize, usize)>,
    ) -> Result<()> {
        let grid = *p.grid();
        let width = grid.cells_per_axis();
        let all = (0, grid.rows() - 1);
        let now = rows.unwrap_or(all);
        let span = match self.rows {
            Some(prev) => (prev.0.min(now.0), prev.1.max(now.1)),
            None => all,
        };
        let range = span.0 * width..(span.1 + 1) * width;
        let (p, r, nn) = (&p.values()[range.clone()], &rho.values()[range.clone()], &n.values()[range.clone()]);
        match self.t {
            None => {}
            Some(prev) if !(t > prev) => return Err(Error::TimeOrdering { previous: prev, next: t }),
            Some(prev) => {
                let half = 0.5 * (t - prev);
                let w = &mut self.w.values_mut()[range.clone()];
                for (k, wk) in w.iter_mut().enumerate() {
                    *wk += half * (self.prev_p[range.start + k] + p[k]);
                }
                let eta = &mut self.eta.values_mut()[range.clone()];
                for (k, ek) in eta.iter_mut().enumerate() {
                    *ek += half * (self.prev_src[range.start + k] + r[k] * nn[k]);
                }
            }
        }
        self.prev_p[range.clone()].copy_from_slice(p);
        for (k, s) in self.prev_src[range.clone()].iter_mut().enumerate() {
            *s = r[k] * nn[k];
        }
        self.t = Some(t);
        self.rows = Some(now);
        Ok(())
    }

    pub fn time(&self) -> Option<f64> {
        self.t
    }

    pub fn snapshot(&self) -> BaiocchiField {
        BaiocchiField {
            t: self.t.unwrap_or(0.0),
            w: self.w.clone(),
            eta: self.eta.clone(),
        }
    }
}

/// Accumulates a whole stream of `(t, p, ρ, n)` states and returns the field
/// after each one.
pub fn accumulate<'a>(
    grid: Grid,
    states: impl IntoIterator<Item = (f64, &'a ScalarField, &'a ScalarField, &'a ScalarField)>,
) -> Result<Vec<BaiocchiField>> {
    let mut acc = Accumulator::new(grid);
    let mut out = Vec::new();
    for (t, p, rho, n) in states {
        acc.push(t, p, rho, n)?;
        out.push(acc.snapshot());
    }
    Ok(out)
}

/// Cells whose membership in `set` agrees with every cell within
/// `radius_cells` (Euclidean, in cell units).
pub fn deep_cells(grid: &Grid, set: &[bool], radius_cells: f64) -> Vec<bool> {
    let n = grid.cells_per_axis() as isize;
    let r = radius_cells.floor() as isize;
    let two_d = grid.dim() == 2;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dj| (-r..=r).map(move |di| (di, dj)))
        .filter(|&(di, dj)| {
            (di * di + dj * dj) as f64 <= radius_cells * radius_cells && (two_d || dj == 0) && (di, dj) != (0, 0)
        })
        .collect();
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.ij(k);
            offsets.iter().all(|&(di, dj)| {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || a >= n || b < 0 || (two_d && b >= n) {
                    return true;
                }
                set[grid.index(a as usize, b as usize)] == set[k]
            })
        })
        .collect()
}

/// Default positivity threshold `10 ε max w`.
pub fn default_w_min(w: &ScalarField) -> f64 {
    10.0 * f64::EPSILON * w.max().max(f64::MIN_POSITIVE)
}

/// Residual of `Δw = ρ_t − ρ_0 − η`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleResidual {
    /// Sup over cells farther than `2h` from `∂{w > w_min}`.
    pub interior: f64,
    /// Sup over all cells.
    pub all: f64,
    /// Sup over cells never reached and untouched by the data.
    pub far_field: f64,
}

pub fn obstacle_residual_value(bf: &BaiocchiField, rho0: &ScalarField, rho_t: &ScalarField) -> Result<ObstacleResidual> {
    let grid = *bf.w.grid();
    let lap = bf.w.laplacian()?;
    let w_min = default_w_min(&bf.w);
    let positive: Vec<bool> = bf.w.values().iter().map(|&v| v > w_min).collect();
    let deep = deep_cells(&grid, &positive, 2.5);
    let mut out = ObstacleResidual {
        interior: 0.0,
        all: 0.0,
        far_field: 0.0,
    };
    for k in 0..grid.len() {
        let r = (lap[k] - (rho_t[k] - rho0[k] - bf.eta[k])).abs();
        out.all = out.all.max(r);
        if deep[k] {
            out.interior = out.interior.max(r);
        }
        if deep[k] && !positive[k] && rho0[k] == 0.0 && rho_t[k] == 0.0 && bf.eta[k] == 0.0 {
            out.far_field = out.far_field.max(r);
        }
    }
    Ok(out)
}

pub fn obstacle_residual(bf: &BaiocchiField, rho0: &ScalarField, rho_t: &ScalarField, tol: f64) -> Result<Entry> {
    let r = obstacle_residual_value(bf, rho0, rho_t)?;
    Ok(Entry::at_most(
        "obstacle_identity",
        r.interior,
        tol,
        "Δw = ρ(t) − ρ(0) − ∫ρn away from ∂{w > 0}",
    ))
}

/// First time each cell's `w` exceeds a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingField {
    pub grid: Grid,
    /// `+∞` where the threshold is never crossed.
    pub t: Vec<f64>,
    pub w_min: f64,
}

impl HittingField {
    pub fn finite(&self, k: usize) -> bool {
        self.t[k].is_finite()
    }

    pub fn at(&self, x: [f64; 2]) -> f64 {
        self.t[self.grid.locate(x)]
    }

    /// Set `{T ≤ t}`.
    pub fn reached_by(&self, t: f64) -> Vec<bool> {
        self.t.iter().map(|&v| v <= t).collect()
    }
}

/// Crossing times of `w_min` with linear interpolation between stored
/// times. `history` must be in increasing time order.
pub fn hitting_time(history: &[(f64, &ScalarField)], w_min: f64) -> Result<HittingField> {
    let first = history.first().ok_or(Error::EmptyInput("w history"))?;
    if !(w_min > 0.0) {
        return Err(Error::InvalidInput(format!("w_min must be positive, got {w_min}")));
    }
    for pair in history.windows(2) {
        if !(pair[1].0 > pair[0].0) {
            return Err(Error::TimeOrdering {
                previous: pair[0].0,
                next: pair[1].0,
            });
        }
    }
    let grid = *first.1.grid();
    let t = (0..grid.len())
        .map(|k| {
            if first.1[k] > w_min {
                return first.0;
            }
            for pair in history.windows(2) {
                let (t0, w0) = (pair[0].0, pair[0].1[k]);
                let (t1, w1) = (pair[1].0, pair[1].1[k]);
                if w1 > w_min {
                    let th = ((w_min - w0) / (w1 - w0)).clamp(0.0, 1.0);
                    return t0 + th * (t1 - t0);
                }
            }
            f64::INFINITY
        })
        .collect();
    Ok(HittingField { grid, t, w_min })
}

/// `η(x, t) = ∫_{T(x)}^t n(x, s) ds` for `T(x) < t`, zero otherwise, by the
/// trapezoid rule on the stored nutrient history.
pub fn eta_from_t(hit: &HittingField, n_history: &[(f64, &ScalarField)], t: f64) -> Result<ScalarField> {
    let grid = hit.grid;
    let t_min = hit.t.iter().copied().filter(|v| *v < t).fold(f64::INFINITY, f64::min);
    let mut eta = ScalarField::zeros(grid);
    if !t_min.is_finite() {
        return Ok(eta);
    }
    let (start, end) = match (n_history.first(), n_history.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::EmptyInput("nutrient history")),
    };
    let slack = 1e-12 * t.abs().max(1.0);
    if start > t_min + slack || end < t - slack {
        return Err(Error::Coverage {
            start,
            end,
            needed_start: t_min,
            needed_end: t,
        });
    }
    for k in 0..grid.len() {
        let tk = hit.t[k];
        if !(tk < t) {
            continue;
        }
        let mut acc = 0.0;
        for pair in n_history.windows(2) {
            let (s0, s1) = (pair[0].0, pair[1].0);
            let lo = s0.max(tk);
            let hi = s1.min(t);
            if hi <= lo {
                continue;
            }
            let at = |s: f64| {
                let th = (s - s0) / (s1 - s0);
                (1.0 - th) * pair[0].1[k] + th * pair[1].1[k]
            };
            acc += 0.5 * (at(lo) + at(hi)) * (hi - lo);
        }
        eta[k] = acc;
    }
    Ok(eta)
}

/// Least-squares slope of `log S(R)` against `log R`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    pub alpha: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    /// `(R, S(R))` pairs used.
    pub samples: Vec<(f64, f64)>,
}

/// `S(R) = max_{y ∈ B_R(x1)} (T(x1) − T(y))₊` over each radius, then the
/// log-log slope.
pub fn holder_exponent(hit: &HittingField, x1: [f64; 2], radii: &[f64]) -> Result<HolderFit> {
    let grid = hit.grid;
    let k1 = grid.locate(x1);
    let t1 = hit.t[k1];
    if !t1.is_finite() {
        return Err(Error::InvalidInput(format!("T is infinite at {x1:?}")));
    }
    let c1 = grid.center(k1);
    let mut samples = Vec::new();
    for &r in radii {
        if r < 3.0 * grid.h() * (1.0 - 1e-12) {
            return Err(Error::RadiusResolution {
                radius: r,
                floor: 3.0 * grid.h(),
            });
        }
        if grid.distance_to_edge(c1) < r {
            return Err(Error::OutOfDomain { center: c1, radius: r });
        }
        let mut s: f64 = 0.0;
        for k in 0..grid.len() {
            let c = grid.center(k);
            let d2 = (c[0] - c1[0]).powi(2) + (c[1] - c1[1]).powi(2);
            if d2 <= r * r * (1.0 + 1e-12) && hit.t[k].is_finite() {
                s = s.max(t1 - hit.t[k]);
            }
        }
        samples.push((r, s));
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|&(r, s)| (r.ln(), s.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {} of {} radii have a positive increment",
            pts.len(),
            samples.len()
        )));
    }
    let (alpha, residual) = crate::stats::line_fit(&pts);
    Ok(HolderFit {
        alpha,
        residual,
        samples,
    })
}

/// Cells in exactly one of the two sets, divided by the number of cells on
/// the boundary of the first. Boundary cells are members with a non-member
/// neighbour.
pub fn patch_disagreement(grid: &Grid, a: &[bool], b: &[bool]) -> f64 {
    let sym = a.iter().zip(b).filter(|(x, y)| x != y).count();
    let dims = 2 * grid.dim();
    let boundary = (0..grid.len())
        .filter(|&k| a[k] && grid.neighbours(k)[..dims].iter().any(|&m| !a[m]))
        .count();
    sym as f64 / boundary.max(1) as f64
}
