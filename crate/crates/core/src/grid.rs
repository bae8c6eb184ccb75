//! Uniform cell-centred lattices in one or two dimensions and the scalar
//! fields that live on them.
//!
//! Cell `i` along an axis has centre `origin + (i + 1/2) h`. In 2D the flat
//! index is `j * n + i` with `i` running along x. Box edges are closed by
//! reflecting ghost cells, so no flux crosses them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    h: f64,
    origin: [f64; 2],
}

impl Grid {
    /// Square box `[origin, origin + extent]^dim` split into `n` cells per axis.
    pub fn new(dim: usize, n: usize, origin: [f64; 2], extent: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n == 0 || !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need positive cell count and extent, got n = {n}, extent = {extent}"
            )));
        }
        Ok(Self {
            dim,
            n,
            h: extent / n as f64,
            origin,
        })
    }

    /// Box `[lo, hi]^dim`.
    pub fn centered(dim: usize, n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(dim, n, [lo, lo], hi - lo)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn extent(&self) -> f64 {
        self.h * self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn rows(&self) -> usize {
        if self.dim == 1 {
            1
        } else {
            self.n
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin[0] + (i as f64 + 0.5) * self.h
    }

    pub fn coord_y(&self, j: usize) -> f64 {
        self.origin[1] + (j as f64 + 0.5) * self.h
    }

    /// Centre of cell `idx`; the second component is 0 in 1D.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.ij(idx);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord_y(j)]
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let hi0 = self.origin[0] + self.extent();
        let ok_x = x[0] >= self.origin[0] && x[0] <= hi0;
        if self.dim == 1 {
            ok_x
        } else {
            let hi1 = self.origin[1] + self.extent();
            ok_x && x[1] >= self.origin[1] && x[1] <= hi1
        }
    }

    /// Cell containing `x`, clamped to the box.
    pub fn locate(&self, x: [f64; 2]) -> usize {
        let clamp = |v: f64, o: f64| -> usize {
            let k = ((v - o) / self.h).floor();
            k.clamp(0.0, (self.n - 1) as f64) as usize
        };
        let i = clamp(x[0], self.origin[0]);
        if self.dim == 1 {
            i
        } else {
            self.index(i, clamp(x[1], self.origin[1]))
        }
    }

    /// Distance from `x` to the nearest box face.
    pub fn distance_to_edge(&self, x: [f64; 2]) -> f64 {
        let e = self.extent();
        let mut d = (x[0] - self.origin[0]).min(self.origin[0] + e - x[0]);
        if self.dim == 2 {
            d = d.min((x[1] - self.origin[1]).min(self.origin[1] + e - x[1]));
        }
        d
    }

    /// Same box with twice as many cells per axis.
    pub fn refined(&self) -> Self {
        Self {
            n: 2 * self.n,
            h: self.h / 2.0,
            ..*self
        }
    }

    pub(crate) fn require_stencil(&self) -> Result<()> {
        if self.n < 3 {
            Err(Error::GridTooSmall { cells: self.n })
        } else {
            Ok(())
        }
    }

    /// Neighbour indices (west, east, south, north) with reflecting ghosts:
    /// a missing neighbour maps back onto the cell itself.
    #[inline]
    pub fn neighbours(&self, idx: usize) -> [usize; 4] {
        let (i, j) = self.ij(idx);
        self.neighbours_at(i, j)
    }

    /// As [`Grid::neighbours`] for the cell at `(i, j)`.
    #[inline]
    pub fn neighbours_at(&self, i: usize, j: usize) -> [usize; 4] {
        let n = self.n;
        let idx = j * n + i;
        let w = if i > 0 { idx - 1 } else { idx };
        let e = if i + 1 < n { idx + 1 } else { idx };
        if self.dim == 1 {
            return [w, e, idx, idx];
        }
        let s = if j > 0 { idx - n } else { idx };
        let no = if j + 1 < n { idx + n } else { idx };
        [w, e, s, no]
    }
}

/// Writes the reflecting-ghost Laplacian of `u` into `out`.
pub fn apply_laplacian(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let n = grid.cells_per_axis();
    let rows = grid.rows();
    for j in 0..rows {
        let row = j * n;
        let c = &u[row..row + n];
        let o = &mut out[row..row + n];
        o[0] = c[1] - c[0];
        o[n - 1] = c[n - 2] - c[n - 1];
        for i in 1..n - 1 {
            o[i] = c[i - 1] + c[i + 1] - 2.0 * c[i];
        }
        if rows > 1 {
            let s = if j > 0 { &u[row - n..row] } else { c };
            let nn = if j + 1 < rows { &u[row + n..row + 2 * n] } else { c };
            for i in 0..n {
                o[i] += s[i] + nn[i] - 2.0 * c[i];
            }
        }
        for v in o.iter_mut() {
            *v *= inv_h2;
        }
    }
}

/// One real value per cell of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at cell {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Five-point (2D) or three-point (1D) Laplacian with reflecting ghosts.
    pub fn laplacian(&self) -> Result<Self> {
        self.grid.require_stencil()?;
        let mut values = vec![0.0; self.values.len()];
        apply_laplacian(&self.grid, &self.values, &mut values);
        Ok(Self {
            grid: self.grid,
            values,
        })
    }

    /// `|∇f|²` from central differences; at the box edge the ghost mirrors the
    /// edge cell, which halves the one-sided difference.
    pub fn grad_sq(&self) -> Result<Self> {
        self.grid.require_stencil()?;
        let g = &self.grid;
        let inv_2h = 0.5 / g.h;
        let u = &self.values;
        let values = (0..u.len())
            .map(|k| {
                let [w, e, s, n] = g.neighbours(k);
                let gx = (u[e] - u[w]) * inv_2h;
                let gy = (u[n] - u[s]) * inv_2h;
                gx * gx + gy * gy
            })
            .collect();
        Ok(Self {
            grid: *g,
            values,
        })
    }

    /// Linear (1D) or bilinear (2D) interpolation between cell centres.
    /// Points beyond the outermost centres take the edge value.
    pub fn interpolate(&self, x: [f64; 2]) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let axis = |v: f64, o: f64| -> (usize, f64) {
            let s = ((v - o) / g.h - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (s.floor() as usize).min(n.saturating_sub(2));
            (i0, s - i0 as f64)
        };
        if n == 1 {
            return self.values[0];
        }
        let (i0, tx) = axis(x[0], g.origin[0]);
        if g.dim == 1 {
            return self.values[i0] * (1.0 - tx) + self.values[i0 + 1] * tx;
        }
        let (j0, ty) = axis(x[1], g.origin[1]);
        let v = |i: usize, j: usize| self.values[j * n + i];
        let bottom = v(i0, j0) * (1.0 - tx) + v(i0 + 1, j0) * tx;
        let top = v(i0, j0 + 1) * (1.0 - tx) + v(i0 + 1, j0 + 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Interpolated values on the sphere `∂B_radius(center)`: `n_angles`
    /// equispaced points in 2D starting at angle 0, the two points
    /// `center ± radius` in 1D.
    pub fn radial_sample(&self, center: [f64; 2], radius: f64, n_angles: usize) -> Result<Vec<f64>> {
        let g = &self.grid;
        if n_angles < 8 && g.dim == 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 8 angles, got {n_angles}"
            )));
        }
        if !(radius >= 0.0) || g.distance_to_edge(center) < radius {
            return Err(Error::OutOfDomain { center, radius });
        }
        if g.dim == 1 {
            return Ok(vec![
                self.interpolate([center[0] - radius, 0.0]),
                self.interpolate([center[0] + radius, 0.0]),
            ]);
        }
        Ok((0..n_angles)
            .map(|k| {
                let th = std::f64::consts::TAU * k as f64 / n_angles as f64;
                self.interpolate([center[0] + radius * th.cos(), center[1] + radius * th.sin()])
            })
            .collect())
    }

    /// Sum of values in index order.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `∫ f` over the box.
    pub fn integral(&self) -> f64 {
        self.sum() * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫ |f - g|`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume()
    }

    pub fn linf_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl std::ops::IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2(n: usize) -> Grid {
        Grid::centered(2, n, -1.0, 1.0).unwrap()
    }

    fn interior(g: &Grid, k: usize, margin: usize) -> bool {
        let (i, j) = g.ij(k);
        let n = g.cells_per_axis();
        let ok = |a: usize| a >= margin && a + margin < n;
        ok(i) && (g.dim() == 1 || ok(j))
    }

    #[test]
    fn constant_is_annihilated() {
        let f = ScalarField::constant(g2(16), 3.5);
        assert!(f.laplacian().unwrap().linf() < 1e-12);
        assert!(f.grad_sq().unwrap().linf() < 1e-12);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let f = ScalarField::zeros(Grid::centered(2, 2, 0.0, 1.0).unwrap());
        assert!(matches!(f.laplacian(), Err(Error::GridTooSmall { cells: 2 })));
        assert!(matches!(f.grad_sq(), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn laplacian_of_parabola() {
        let g1 = Grid::centered(1, 64, -1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g1, |x| x[0] * x[0]);
        let l = f.laplacian().unwrap();
        for k in 1..63 {
            assert!((l[k] - 2.0).abs() < 1e-9);
        }
        let g = g2(32);
        let l = ScalarField::from_fn(g, |x| x[0] * x[0] + x[1] * x[1]).laplacian().unwrap();
        for k in 0..g.len() {
            if interior(&g, k, 1) {
                assert!((l[k] - 4.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_of_affine_fields() {
        let g1 = Grid::centered(1, 40, -1.0, 1.0).unwrap();
        let gs = ScalarField::from_fn(g1, |x| 3.0 * x[0]).grad_sq().unwrap();
        for k in 1..39 {
            assert!((gs[k] - 9.0).abs() < 1e-9);
        }
        let g = g2(24);
        let gs = ScalarField::from_fn(g, |x| x[0] + 2.0 * x[1]).grad_sq().unwrap();
        for k in 0..g.len() {
            if interior(&g, k, 1) {
                assert!((gs[k] - 5.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn neumann_laplacian_sums_to_zero() {
        let g = g2(33);
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() * (x[1] * x[1] + 0.3 * x[0]).exp());
        let l = f.laplacian().unwrap();
        let scale: f64 = l.values().iter().map(|v| v.abs()).sum();
        assert!(l.sum().abs() <= 1e-10 * scale);
    }

    #[test]
    fn stencil_converges_at_second_order() {
        let exact = |x: [f64; 2]| -2.0 * (x[0].sin() * x[1].cos());
        let err = |n: usize| {
            let g = g2(n);
            let l = ScalarField::from_fn(g, |x| x[0].sin() * x[1].cos()).laplacian().unwrap();
            let mut e: f64 = 0.0;
            for k in 0..g.len() {
                let c = g.center(k);
                if c[0].abs() < 0.5 && c[1].abs() < 0.5 {
                    e = e.max((l[k] - exact(c)).abs());
                }
            }
            e
        };
        let (a, b) = (err(32), err(64));
        assert!(a / b >= 3.5, "ratio {}", a / b);
    }

    #[test]
    fn radial_sampling() {
        let g = g2(64);
        let one = ScalarField::constant(g, 1.0);
        assert!(one.radial_sample([0.0, 0.0], 0.5, 16).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-15));

        let x = ScalarField::from_fn(g, |p| p[0]);
        let s = x.radial_sample([0.0, 0.0], 0.6, 32).unwrap();
        for (k, v) in s.iter().enumerate() {
            let th = std::f64::consts::TAU * k as f64 / 32.0;
            assert!((v - 0.6 * th.cos()).abs() < 1e-12);
        }

        let q = ScalarField::from_fn(g, |p| p[0] * p[0] + p[1] * p[1]);
        let s = q.radial_sample([0.0, 0.0], 0.5, 64).unwrap();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((mean - 0.25).abs() < 2.0 * g.h() * g.h());

        assert!(matches!(
            x.radial_sample([0.8, 0.0], 0.5, 16),
            Err(Error::OutOfDomain { .. })
        ));

        let g1 = Grid::centered(1, 32, -1.0, 1.0).unwrap();
        let f = ScalarField::from_fn(g1, |p| p[0]);
        let s = f.radial_sample([0.1, 0.0], 0.3, 8).unwrap();
        assert!((s[0] + 0.2).abs() < 1e-12 && (s[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn locate_round_trips() {
        let g = g2(10);
        for k in 0..g.len() {
            assert_eq!(g.locate(g.center(k)), k);
        }
    }
}
