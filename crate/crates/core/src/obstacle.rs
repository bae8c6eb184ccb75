//! Obstacle problem `u ≥ 0, Δu = f on {u > 0}`: projected SOR solver,
//! quadratic blowups, regular/singular classification, Monneau functional
//! and nondegeneracy.

use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::report::Entry;

/// Lattice points per axis for rescaled profiles.
pub const LATTICE: usize = 33;
/// Directions tried by the half-space fit.
pub const DIRECTIONS: usize = 720;
pub const REGULAR_DENSITY: f64 = 1.0 / 8.0;
pub const SINGULAR_DENSITY: f64 = 1.0 / 16.0;
/// Eigenvalues of `Q` below this fraction of `tr Q` count as kernel.
pub const KERNEL_CUTOFF: f64 = 0.05;
pub const PSOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleProblem {
    pub source: ScalarField,
    /// Only the values on the outermost ring of cells are used.
    pub boundary: ScalarField,
    pub max_sweeps: usize,
}

impl ObstacleProblem {
    pub fn new(source: ScalarField, boundary: ScalarField) -> Result<Self> {
        if source.grid() != boundary.grid() {
            return Err(Error::InvalidGrid("source and boundary grids differ".into()));
        }
        source.grid().require_stencil()?;
        let lambda = source.min();
        if !(lambda > 0.5) {
            return Err(Error::InvalidInput(format!("source must stay above 1/2, min is {lambda}")));
        }
        let g = *source.grid();
        if let Some(k) = (0..g.len()).find(|&k| on_ring(&g, k) && !(boundary[k] >= 0.0)) {
            return Err(Error::InvalidInput(format!("boundary value {} at cell {k} is negative", boundary[k])));
        }
        Ok(Self {
            source,
            boundary,
            max_sweeps: 200_000,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.source.grid()
    }
}

fn on_ring(g: &Grid, k: usize) -> bool {
    let (i, j) = g.ij(k);
    let last = g.cells_per_axis() - 1;
    i == 0 || i == last || (g.dim() == 2 && (j == 0 || j == last))
}

/// Largest `|min(u, f − Δu)|` over interior cells.
pub fn complementarity_residual(u: &ScalarField, f: &ScalarField) -> Result<f64> {
    let lap = u.laplacian()?;
    let g = *u.grid();
    Ok((0..g.len())
        .filter(|&k| !on_ring(&g, k))
        .map(|k| u[k].min(f[k] - lap[k]).abs())
        .fold(0.0, f64::max))
}

/// Projected SOR in lexicographic order, Dirichlet data on the outer ring,
/// zero initial guess inside.
pub fn solve_obstacle(prob: &ObstacleProblem) -> Result<ScalarField> {
    let g = *prob.grid();
    let n = g.cells_per_axis();
    let d = g.dim();
    let h2 = g.h() * g.h();
    let diag = 2.0 * d as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (n - 1) as f64).sin());
    let mut u = ScalarField::zeros(g);
    let interior: Vec<usize> = (0..g.len()).filter(|&k| !on_ring(&g, k)).collect();
    for k in 0..g.len() {
        if on_ring(&g, k) {
            u[k] = prob.boundary[k];
        }
    }
    let f = prob.source.values();
    let width = n;
    let mut residual = f64::INFINITY;
    for sweep in 1..=prob.max_sweeps {
        let v = u.values_mut();
        for &k in &interior {
            let nb = if d == 2 {
                v[k - 1] + v[k + 1] + v[k - width] + v[k + width]
            } else {
                v[k - 1] + v[k + 1]
            };
            let gs = (nb - h2 * f[k]) / diag;
            v[k] = (v[k] + omega * (gs - v[k])).max(0.0);
        }
        if sweep % 16 == 0 {
            residual = complementarity_residual(&u, &prob.source)?;
            if residual <= PSOR_TOL {
                return Ok(u);
            }
        }
    }
    Err(Error::NonConvergence {
        sweeps: prob.max_sweeps,
        residual,
    })
}

/// `u_r(x) = r^{−2} u(c + r x)` on the lattice of the unit ball, with the
/// quadratic fit `½ xᵀQx`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupProfile {
    pub center: [f64; 2],
    pub radius: f64,
    pub dim: usize,
    /// Lattice points inside the closed unit ball.
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    /// Values at or below this count as zero, already rescaled.
    pub zero_tol: f64,
    /// Projected onto the positive semidefinite cone.
    pub q: [[f64; 2]; 2],
    /// RMS of `u_r − ½ xᵀQx`.
    pub quad_residual: f64,
}

fn lattice(dim: usize) -> Vec<[f64; 2]> {
    let step = 2.0 / (LATTICE - 1) as f64;
    let coord = |i: usize| -1.0 + step * i as f64;
    let mut pts = Vec::new();
    if dim == 1 {
        for i in 0..LATTICE {
            pts.push([coord(i), 0.0]);
        }
    } else {
        for j in 0..LATTICE {
            for i in 0..LATTICE {
                let x = [coord(i), coord(j)];
                if x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-12 {
                    pts.push(x);
                }
            }
        }
    }
    pts
}

fn quad(q: &[[f64; 2]; 2], x: [f64; 2]) -> f64 {
    0.5 * (q[0][0] * x[0] * x[0] + 2.0 * q[0][1] * x[0] * x[1] + q[1][1] * x[1] * x[1])
}

fn rms(points: &[[f64; 2]], values: &[f64], model: impl Fn([f64; 2]) -> f64) -> f64 {
    let s: f64 = points.iter().zip(values).map(|(&x, &v)| (v - model(x)).powi(2)).sum();
    (s / points.len() as f64).sqrt()
}

fn fit_quadratic(dim: usize, points: &[[f64; 2]], values: &[f64]) -> Result<[[f64; 2]; 2]> {
    if dim == 1 {
        let num: f64 = points.iter().zip(values).map(|(x, v)| 0.5 * x[0] * x[0] * v).sum();
        let den: f64 = points.iter().map(|x| 0.25 * x[0].powi(4)).sum();
        return Ok([[(num / den).max(0.0), 0.0], [0.0, 0.0]]);
    }
    let mut a = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for (x, &v) in points.iter().zip(values) {
        let phi = Vector3::new(0.5 * x[0] * x[0], x[0] * x[1], 0.5 * x[1] * x[1]);
        a += phi * phi.transpose();
        rhs += phi * v;
    }
    let c = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegenerateFit("quadratic normal equations are singular".into()))?;
    let m = Matrix2::new(c[0], c[1], c[1], c[2]);
    let eig = m.symmetric_eigen();
    let mut p = Matrix2::zeros();
    for k in 0..2 {
        let lam = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        p += v * v.transpose() * lam;
    }
    Ok([[p[(0, 0)], p[(0, 1)]], [p[(1, 0)], p[(1, 1)]]])
}

/// Blowups of a function given pointwise, with no resolution floor.
pub fn blowup_fn(
    u: impl Fn([f64; 2]) -> f64,
    dim: usize,
    center: [f64; 2],
    radii: &[f64],
    zero_tol: f64,
) -> Result<Vec<BlowupProfile>> {
    if !(dim == 1 || dim == 2) {
        return Err(Error::UnsupportedDimension(dim));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive and strictly decreasing".into()));
    }
    let points = lattice(dim);
    radii
        .iter()
        .map(|&r| {
            let values: Vec<f64> = points
                .iter()
                .map(|x| u([center[0] + r * x[0], center[1] + r * x[1]]) / (r * r))
                .collect();
            let q = fit_quadratic(dim, &points, &values)?;
            let quad_residual = rms(&points, &values, |x| quad(&q, x));
            Ok(BlowupProfile {
                center,
                radius: r,
                dim,
                points: points.clone(),
                values,
                zero_tol: zero_tol / (r * r),
                q,
                quad_residual,
            })
        })
        .collect()
}

/// True when `u(c) ≤ zero_tol` and some cell within two cells is positive.
pub fn is_free_boundary_cell(u: &ScalarField, k: usize, zero_tol: f64) -> bool {
    let g = u.grid();
    if u[k] > zero_tol {
        return false;
    }
    let (i, j) = g.ij(k);
    let n = g.cells_per_axis() as isize;
    let span = if g.dim() == 2 { 2 } else { 0 };
    for dj in -span..=span {
        for di in -2isize..=2 {
            let (a, b) = (i as isize + di, j as isize + dj);
            if a >= 0 && a < n && b >= 0 && b < g.rows() as isize && u[g.index(a as usize, b as usize)] > zero_tol {
                return true;
            }
        }
    }
    false
}

/// Blowups of a grid field at a free-boundary cell, by bilinear
/// interpolation. Radii below `4h` are rejected.
pub fn blowup(u: &ScalarField, center: [f64; 2], radii: &[f64], zero_tol: f64) -> Result<Vec<BlowupProfile>> {
    let g = *u.grid();
    let floor = 4.0 * g.h();
    if let Some(&r) = radii.iter().find(|&&r| r < floor * (1.0 - 1e-12)) {
        return Err(Error::RadiusResolution { radius: r, floor });
    }
    let k = g.locate(center);
    if !is_free_boundary_cell(u, k, zero_tol) {
        return Err(Error::NotFreeBoundary(format!("cell at {:?}", g.center(k))));
    }
    blowup_fn(|x| u.interpolate(x), g.dim(), center, radii, zero_tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Regular,
    Singular,
    Unresolved,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Regular => "regular",
            Label::Singular => "singular",
            Label::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: Label,
    /// `−e` of the best half-space fit; set for regular points.
    pub normal: Option<[f64; 2]>,
    /// Set for singular points.
    pub kernel_dim: Option<usize>,
    pub densities: Vec<f64>,
    pub half_residual: f64,
    pub quad_residual: f64,
    /// Best half-space direction `e` at the smallest radius.
    pub direction: [f64; 2],
}

impl Classification {
    pub fn density_at_min_r(&self) -> f64 {
        *self.densities.last().unwrap_or(&f64::NAN)
    }
}

pub fn zero_density(p: &BlowupProfile) -> f64 {
    let zeros = p.values.iter().filter(|&&v| v <= p.zero_tol).count();
    zeros as f64 / p.values.len() as f64
}

fn directions(dim: usize) -> Vec<[f64; 2]> {
    if dim == 1 {
        return vec![[1.0, 0.0], [-1.0, 0.0]];
    }
    (0..DIRECTIONS)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / DIRECTIONS as f64;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// Best `e` and the RMS of `u_r − ½ f (x·e)₊²`.
pub fn half_space_fit(p: &BlowupProfile, f_at_center: f64) -> ([f64; 2], f64) {
    let mut best = ([1.0, 0.0], f64::INFINITY);
    for e in directions(p.dim) {
        let r = rms(&p.points, &p.values, |x| {
            let s = (x[0] * e[0] + x[1] * e[1]).max(0.0);
            0.5 * f_at_center * s * s
        });
        if r < best.1 {
            best = (e, r);
        }
    }
    best
}

fn eigenvalues(q: &[[f64; 2]; 2], dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![q[0][0]];
    }
    let m = Matrix2::new(q[0][0], q[0][1], q[1][0], q[1][1]);
    m.symmetric_eigen().eigenvalues.iter().copied().collect()
}

/// Ladder rule on zero-set densities and fit residuals; `profiles` must be
/// ordered by decreasing radius.
pub fn classify(profiles: &[BlowupProfile], f_at_center: f64) -> Result<Classification> {
    if profiles.len() < 3 {
        return Err(Error::InvalidInput(format!("classify needs 3 or more radii, got {}", profiles.len())));
    }
    let densities: Vec<f64> = profiles.iter().map(zero_density).collect();
    let last = &profiles[profiles.len() - 1];
    let (e, half_residual) = half_space_fit(last, f_at_center);
    let quad_residual = last.quad_residual;
    let n = densities.len();
    let regular = densities.iter().any(|&d| d >= REGULAR_DENSITY) && half_residual < quad_residual;
    let singular = densities[n - 1] <= SINGULAR_DENSITY
        && densities[n - 2] <= SINGULAR_DENSITY
        && quad_residual < half_residual;
    let mut out = Classification {
        label: Label::Unresolved,
        normal: None,
        kernel_dim: None,
        densities,
        half_residual,
        quad_residual,
        direction: e,
    };
    if regular {
        out.label = Label::Regular;
        out.normal = Some([-e[0], -e[1]]);
    } else if singular {
        let eig = eigenvalues(&last.q, last.dim);
        let tr: f64 = eig.iter().sum();
        let k = eig.iter().filter(|&&l| l < KERNEL_CUTOFF * tr).count();
        out.label = Label::Singular;
        out.kernel_dim = Some(k.min(last.dim - 1));
    }
    Ok(out)
}

/// `Ξ(r) = r^{−(d+3)} ∫_{∂B_r} (u − q)²` with `q = ½ xᵀQx` about `center`.
/// The sphere integral uses 256 equally spaced angles in 2D and the two
/// endpoints in 1D.
pub fn monneau_fn(
    u: impl Fn([f64; 2]) -> f64,
    dim: usize,
    center: [f64; 2],
    q: &[[f64; 2]; 2],
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    radii
        .iter()
        .map(|&r| {
            if !(r > 0.0) {
                return Err(Error::InvalidInput(format!("radius must be positive, got {r}")));
            }
            let dirs: Vec<[f64; 2]> = if dim == 1 {
                vec![[1.0, 0.0], [-1.0, 0.0]]
            } else if dim == 2 {
                (0..256)
                    .map(|k| {
                        let a = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
                        [a.cos(), a.sin()]
                    })
                    .collect()
            } else {
                return Err(Error::UnsupportedDimension(dim));
            };
            let sq: Vec<f64> = dirs
                .iter()
                .map(|e| {
                    let x = [r * e[0], r * e[1]];
                    (u([center[0] + x[0], center[1] + x[1]]) - quad(q, x)).powi(2)
                })
                .collect();
            let integral = if dim == 1 {
                sq.iter().sum::<f64>()
            } else {
                2.0 * std::f64::consts::PI * r * sq.iter().sum::<f64>() / sq.len() as f64
            };
            Ok((r, integral / r.powi(dim as i32 + 3)))
        })
        .collect()
}

/// [`monneau_fn`] on a grid field; radii below `4h` are rejected.
pub fn monneau(u: &ScalarField, center: [f64; 2], q: &[[f64; 2]; 2], radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let g = u.grid();
    let floor = 4.0 * g.h();
    if let Some(&r) = radii.iter().find(|&&r| r < floor * (1.0 - 1e-12)) {
        return Err(Error::RadiusResolution { radius: r, floor });
    }
    for &r in radii {
        if g.distance_to_edge(center) < r {
            return Err(Error::OutOfDomain { center, radius: r });
        }
    }
    // interpolate u − q rather than u, so the bilinear error does not see
    // the curvature of q
    let d = ScalarField::from_fn(*g, |x| quad(q, [x[0] - center[0], x[1] - center[1]]));
    let diff = u.zip_map(&d, |a, b| a - b);
    monneau_fn(|x| diff.interpolate(x), g.dim(), center, &[[0.0; 2]; 2], radii)
}

/// `min_k (Ξ(r_k) − Ξ(r_{k+1}) + C r_k^α (r_k − r_{k+1}))` over a decreasing
/// ladder; nonnegative for an exactly monotone functional.
pub fn monneau_drift(values: &[(f64, f64)], c: f64, alpha: f64) -> f64 {
    values
        .windows(2)
        .map(|w| {
            let (r0, x0) = w[0];
            let (r1, x1) = w[1];
            x0 - x1 + c * r0.powf(alpha) * (r0 - r1)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn monneau_entry(drift: f64, tol: f64) -> Entry {
    Entry::at_least(
        "monneau_monotone",
        drift,
        -tol,
        "Ξ(r_k) − Ξ(r_{k+1}) + C r_k^α Δr ≥ 0, Ξ(r) = r^{−(d+3)} ∫_{∂B_r} (u − q)²",
    )
}

fn sup_ball(u: &ScalarField, center: [f64; 2], r: f64) -> f64 {
    let g = u.grid();
    (0..g.len())
        .filter(|&k| {
            let c = g.center(k);
            (c[0] - center[0]).powi(2) + (c[1] - center[1]).powi(2) <= r * r
        })
        .map(|k| u[k])
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nondegeneracy {
    /// `(r, sup_{B_r} u / ((λ/2d) r²))` per radius.
    pub ratios: Vec<(f64, f64)>,
    /// Smallest ratio, or `None` when the centre is not in the closure of
    /// the positivity set.
    pub min_ratio: Option<f64>,
}

impl Nondegeneracy {
    pub fn passes(&self) -> bool {
        self.min_ratio.is_none_or(|m| m >= 1.0 - ND_SLACK)
    }
}

pub const ND_SLACK: f64 = 0.1;

/// `sup_{B_r} u ≥ (λ/2d) r²` along the ladder. Skipped (no ratios) when no
/// cell within one cell of the centre is positive.
pub fn nondegeneracy_check(u: &ScalarField, center: [f64; 2], radii: &[f64], lambda: f64) -> Nondegeneracy {
    let g = u.grid();
    if sup_ball(u, center, 1.5 * g.h()) <= 0.0 {
        return Nondegeneracy {
            ratios: Vec::new(),
            min_ratio: None,
        };
    }
    let d = g.dim() as f64;
    let ratios: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| (r, sup_ball(u, center, r) / (lambda / (2.0 * d) * r * r)))
        .collect();
    let min_ratio = ratios.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Nondegeneracy {
        ratios,
        min_ratio: Some(min_ratio),
    }
}

/// `max_r sup_{B_r} u / (μ r²)`, the constant in the quadratic growth bound.
pub fn quadratic_growth(u: &ScalarField, center: [f64; 2], radii: &[f64], mu: f64) -> f64 {
    radii
        .iter()
        .map(|&r| sup_ball(u, center, r) / (mu * r * r))
        .fold(0.0, f64::max)
}

/// Zero cells with a positive neighbour.
pub fn boundary_cells(u: &ScalarField, zero_tol: f64) -> Vec<usize> {
    let g = u.grid();
    let dirs = 2 * g.dim();
    (0..g.len())
        .filter(|&k| u[k] <= zero_tol && g.neighbours(k)[..dirs].iter().any(|&m| u[m] > zero_tol))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalEntry {
    pub point: [f64; 2],
    pub classification: Classification,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub entries: Vec<NormalEntry>,
    /// `max |ν(x) − ν(y)| / |x − y|^{α/(1+α)}` over regular pairs closer
    /// than the pair radius.
    pub seminorm: f64,
}

impl NormalMap {
    pub fn normals(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        self.entries
            .iter()
            .filter_map(|e| e.classification.normal.map(|n| (e.point, n)))
    }
}

/// Classifies each point of `u` and reports the Hölder quotient of the
/// normal over nearby regular pairs. Points where the blowup cannot be
/// formed are left out.
pub fn normal_map(
    u: &ScalarField,
    points: &[[f64; 2]],
    radii: &[f64],
    f_at_center: f64,
    zero_tol: f64,
    alpha: f64,
    pair_radius: f64,
) -> Result<NormalMap> {
    let entries: Vec<NormalEntry> = points
        .par_iter()
        .filter_map(|&x| {
            let g = u.grid();
            if radii.iter().any(|&r| g.distance_to_edge(x) < r) {
                return None;
            }
            let profiles = blowup(u, x, radii, zero_tol).ok()?;
            Some(classify(&profiles, f_at_center).map(|c| NormalEntry {
                point: x,
                classification: c,
            }))
        })
        .collect::<Result<_>>()?;
    let regular: Vec<([f64; 2], [f64; 2])> = entries
        .iter()
        .filter_map(|e| e.classification.normal.map(|n| (e.point, n)))
        .collect();
    let expo = alpha / (1.0 + alpha);
    let mut seminorm: f64 = 0.0;
    for (i, a) in regular.iter().enumerate() {
        for b in &regular[i + 1..] {
            let dist = (a.0[0] - b.0[0]).hypot(a.0[1] - b.0[1]);
            if dist > 0.0 && dist <= pair_radius {
                let dn = (a.1[0] - b.1[0]).hypot(a.1[1] - b.1[1]);
                seminorm = seminorm.max(dn / dist.powf(expo));
            }
        }
    }
    Ok(NormalMap { entries, seminorm })
}

pub const CLASSIFICATION_HEADER: [&str; 9] = [
    "x",
    "y",
    "T",
    "label",
    "nu_x",
    "nu_y",
    "kernel_dim",
    "density_at_min_r",
    "monneau_drift",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_space_in_one_dimension() {
        let g = Grid::centered(1, 201, -1.0, 1.0).unwrap();
        let exact = ScalarField::from_fn(g, |x| 0.5 * x[0].max(0.0).powi(2));
        let prob = ObstacleProblem::new(ScalarField::constant(g, 1.0), exact.clone()).unwrap();
        let u = solve_obstacle(&prob).unwrap();
        assert!(u.linf_distance(&exact) < 1e-6, "{}", u.linf_distance(&exact));
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = Grid::centered(2, 33, -1.0, 1.0).unwrap();
        let prob = ObstacleProblem::new(ScalarField::constant(g, 1.0), ScalarField::zeros(g)).unwrap();
        assert_eq!(solve_obstacle(&prob).unwrap().max(), 0.0);
        assert!(ObstacleProblem::new(ScalarField::constant(g, 0.4), ScalarField::zeros(g)).is_err());
    }

    fn radial(r: f64, big_r: f64) -> f64 {
        if r <= big_r {
            0.0
        } else {
            (r * r - big_r * big_r) / 4.0 - big_r * big_r / 2.0 * (r / big_r).ln()
        }
    }

    #[test]
    fn radial_solution() {
        let g = Grid::centered(2, 129, -1.0, 1.0).unwrap();
        let exact = ScalarField::from_fn(g, |x| radial(x[0].hypot(x[1]), 0.3));
        let prob = ObstacleProblem::new(ScalarField::constant(g, 1.0), exact.clone()).unwrap();
        let u = solve_obstacle(&prob).unwrap();
        assert!(u.min() >= 0.0);
        assert!(complementarity_residual(&u, &prob.source).unwrap() <= 1e-8);
        assert!(u.linf_distance(&exact) < 1e-4, "{}", u.linf_distance(&exact));
    }

    #[test]
    fn quadratic_fit_recovers_q() {
        let q = [[0.3, 0.0], [0.0, 0.7]];
        let p = blowup_fn(|x| quad(&q, x), 2, [0.0, 0.0], &[1.0, 0.5, 0.25], 0.0).unwrap();
        for prof in &p {
            for a in 0..2 {
                for b in 0..2 {
                    assert!((prof.q[a][b] - q[a][b]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn half_space_is_scale_invariant() {
        let e = [0.6f64, 0.8];
        let u = |x: [f64; 2]| 0.5 * (x[0] * e[0] + x[1] * e[1]).max(0.0).powi(2);
        let p = blowup_fn(u, 2, [0.0, 0.0], &[1.0, 0.3, 0.01], 0.0).unwrap();
        for prof in &p[1..] {
            for (a, b) in prof.values.iter().zip(&p[0].values) {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
        }
        let c = classify(&p, 1.0).unwrap();
        assert_eq!(c.label, Label::Regular);
        let nu = c.normal.unwrap();
        assert!((nu[0] + e[0]).hypot(nu[1] + e[1]) < 0.01);
        assert!((c.density_at_min_r() - 0.5).abs() < 0.05);
    }

    #[test]
    fn singular_profiles() {
        let iso = blowup_fn(|x| 0.25 * (x[0] * x[0] + x[1] * x[1]), 2, [0.0; 2], &[1.0, 0.5, 0.25], 0.0).unwrap();
        let c = classify(&iso, 1.0).unwrap();
        assert_eq!((c.label, c.kernel_dim), (Label::Singular, Some(0)));
        let strip = blowup_fn(|x| 0.5 * x[0] * x[0], 2, [0.0; 2], &[1.0, 0.5, 0.25], 0.0).unwrap();
        let c = classify(&strip, 1.0).unwrap();
        assert_eq!((c.label, c.kernel_dim), (Label::Singular, Some(1)));
    }

    #[test]
    fn monneau_of_exact_and_quartic() {
        let q = [[0.5, 0.0], [0.0, 0.5]];
        let radii = [0.8, 0.4, 0.2];
        let v = monneau_fn(|x| quad(&q, x), 2, [0.0; 2], &q, &radii).unwrap();
        assert!(v.iter().all(|&(_, xi)| xi == 0.0));
        let eps = 0.1;
        let v = monneau_fn(|x| quad(&q, x) + eps * (x[0] * x[0] + x[1] * x[1]).powi(2), 2, [0.0; 2], &q, &radii).unwrap();
        for (r, xi) in v {
            let oracle = 2.0 * std::f64::consts::PI * eps * eps * r.powi(4);
            assert!((xi - oracle).abs() < 1e-12 * oracle.max(1e-300), "{xi} {oracle}");
        }
    }

    #[test]
    fn nondegeneracy_cases() {
        let g = Grid::centered(1, 201, -1.0, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| 0.5 * x[0].max(0.0).powi(2));
        let nd = nondegeneracy_check(&u, [0.0, 0.0], &[0.5, 0.25, 0.1], 1.0);
        assert!(nd.passes());
        assert!(nd.min_ratio.unwrap() <= 1.0 + 1e-12);
        let z = ScalarField::zeros(g);
        let nd = nondegeneracy_check(&z, [0.0, 0.0], &[0.5], 1.0);
        assert!(nd.min_ratio.is_none());
    }
}
