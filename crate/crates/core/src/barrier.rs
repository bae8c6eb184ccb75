//! Radial supersolution on a shrinking annulus around an exterior point,
//! the front-radius ODE, and the comparison `p ≤ ψ`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pme::saturation_threshold;
use crate::report::Entry;
use crate::run::Run;

/// `ξ_d`, `α_d = 2/ξ_d` and the optimal annulus ratio `m*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentConstants {
    pub xi: f64,
    pub alpha: f64,
    pub m_star: f64,
}

/// `ξ_d = (d/2)^{d/(d−2)}`, taken as its limit `e` when `d = 2`.
pub fn exponent_constants(d: usize) -> Result<ExponentConstants> {
    let (xi, m_star) = match d {
        2 => (std::f64::consts::E, std::f64::consts::E.sqrt()),
        3 => (1.5f64.powi(3), 1.5),
        _ => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(ExponentConstants {
        xi,
        alpha: 2.0 / xi,
        m_star,
    })
}

/// Radial fundamental solution with `Γ'(r) = r^{1−d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FundamentalSolution {
    pub dim: usize,
}

impl FundamentalSolution {
    pub fn new(dim: usize) -> Result<Self> {
        match dim {
            2 | 3 => Ok(Self { dim }),
            _ => Err(Error::UnsupportedDimension(dim)),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        if self.dim == 2 {
            r.ln()
        } else {
            -1.0 / r
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        r.powi(1 - self.dim as i32)
    }

    /// `ξ_d(m) = r Γ'(r) / (Γ(mr) − Γ(r))`, independent of `r`.
    pub fn xi_of_m(&self, m: f64) -> f64 {
        if self.dim == 2 {
            1.0 / m.ln()
        } else {
            m / (m - 1.0)
        }
    }
}

/// `p̄(t, R)`: supremum of the pressure over `B_R(x0)` at time `t0 + t`.
pub type BallSup = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct BarrierConfig {
    pub center: [f64; 2],
    pub r0: f64,
    /// Outer over inner radius.
    pub m: f64,
    /// Nutrient bound `n̄(0)`.
    pub nbar0: f64,
    pub dim: usize,
    pub pbar: BallSup,
}

impl fmt::Debug for BarrierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierConfig")
            .field("center", &self.center)
            .field("r0", &self.r0)
            .field("m", &self.m)
            .field("nbar0", &self.nbar0)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl BarrierConfig {
    /// Constant `p̄`, mostly for tests.
    pub fn with_constant_pbar(dim: usize, r0: f64, m: f64, nbar0: f64, pbar: f64) -> Self {
        Self {
            center: [0.0, 0.0],
            r0,
            m,
            nbar0,
            dim,
            pbar: Arc::new(move |_, _| pbar),
        }
    }

    fn validate(&self) -> Result<FundamentalSolution> {
        let gamma = FundamentalSolution::new(self.dim)?;
        if !(self.r0 > 0.0 && self.m > 1.0 && self.nbar0 >= 0.0) {
            return Err(Error::Domain(format!(
                "barrier needs r0 > 0, m > 1, nbar0 >= 0; got r0 = {}, m = {}, nbar0 = {}",
                self.r0, self.m, self.nbar0
            )));
        }
        Ok(gamma)
    }

    /// Linear decay rate `K = n̄/d + n̄(m²−1)ξ_d(m)/(2d)` of the ODE when
    /// `p̄ = 0`.
    pub fn decay_rate(&self) -> Result<f64> {
        let g = self.validate()?;
        let d = self.dim as f64;
        Ok(self.nbar0 / d + self.nbar0 * (self.m * self.m - 1.0) * g.xi_of_m(self.m) / (2.0 * d))
    }
}

/// `ψ(ρ) = hΓ(ρ) − n̄ρ²/(2d) + g` on `r ≤ ρ ≤ m r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialProfile {
    pub gamma: FundamentalSolution,
    pub r: f64,
    pub m: f64,
    pub h: f64,
    pub g: f64,
    pub nbar0: f64,
    pub pbar: f64,
}

impl RadialProfile {
    /// Zero inside, `p̄` beyond the outer radius.
    pub fn eval(&self, rho: f64) -> f64 {
        if rho <= self.r {
            0.0
        } else if rho >= self.m * self.r {
            self.pbar
        } else {
            self.annulus(rho)
        }
    }

    /// The closed form, without the piecewise cut.
    pub fn annulus(&self, rho: f64) -> f64 {
        let d = self.gamma.dim as f64;
        self.h * self.gamma.value(rho) - self.nbar0 * rho * rho / (2.0 * d) + self.g
    }
}

pub fn psi_profile(cfg: &BarrierConfig, t: f64, r: f64) -> Result<RadialProfile> {
    let gamma = cfg.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("inner radius must be positive, got {r}")));
    }
    let pbar = (cfg.pbar)(t, cfg.m * r);
    if !(pbar >= 0.0) {
        return Err(Error::Domain(format!("p̄ must be nonnegative, got {pbar}")));
    }
    Ok(profile(gamma, cfg, r, pbar))
}

fn profile(gamma: FundamentalSolution, cfg: &BarrierConfig, r: f64, pbar: f64) -> RadialProfile {
    let d = cfg.dim as f64;
    let m = cfg.m;
    let h = (pbar + cfg.nbar0 * (m * m - 1.0) * r * r / (2.0 * d)) / (gamma.value(m * r) - gamma.value(r));
    let g = cfg.nbar0 * r * r / (2.0 * d) - h * gamma.value(r);
    RadialProfile {
        gamma,
        r,
        m,
        h,
        g,
        nbar0: cfg.nbar0,
        pbar,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub r: f64,
    pub h: f64,
    pub pbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Stopped at the resolution floor before the end of the span.
    pub truncated: bool,
}

impl Trajectory {
    pub fn end(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }

    /// Linear interpolation; `None` past the last point.
    pub fn radius_at(&self, t: f64) -> Option<f64> {
        let pts = &self.points;
        let last = pts.last()?;
        if t > last.t + 1e-12 * last.t.abs().max(1.0) || t < pts[0].t {
            return None;
        }
        let k = pts.partition_point(|p| p.t <= t);
        if k == 0 {
            return Some(pts[0].r);
        }
        if k >= pts.len() {
            return Some(last.r);
        }
        let (a, b) = (pts[k - 1], pts[k]);
        let th = (t - a.t) / (b.t - a.t);
        Some(a.r + th * (b.r - a.r))
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.points.iter().map(|p| vec![p.t, p.r, p.h, p.pbar])
    }
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "r", "h_of_t", "pbar"];

/// RK4 on `r' = −|h|Γ'(r) − (n̄/d) r` over `[0, t_end]`, stopping once
/// `r ≤ floor`.
pub fn integrate_radius(cfg: &BarrierConfig, t_end: f64, dt: f64, floor: f64) -> Result<Trajectory> {
    let gamma = cfg.validate()?;
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::Domain(format!("need dt > 0 and t_end >= 0, got {dt}, {t_end}")));
    }
    let d = cfg.dim as f64;
    let eval = |t: f64, r: f64| -> Result<(f64, RadialProfile)> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius left (0, ∞) inside an RK4 stage at dt = {dt}")));
        }
        let pbar = (cfg.pbar)(t, cfg.m * r);
        let prof = profile(gamma, cfg, r, pbar.max(0.0));
        Ok((-prof.h.abs() * gamma.slope(r) - cfg.nbar0 / d * r, prof))
    };
    let mut t = 0.0;
    let mut r = cfg.r0;
    let (_, p0) = eval(t, r)?;
    let mut points = vec![TrajectoryPoint {
        t,
        r,
        h: p0.h,
        pbar: p0.pbar,
    }];
    let mut truncated = false;
    while t < t_end * (1.0 - 1e-14) {
        if r <= floor {
            truncated = true;
            break;
        }
        let step = dt.min(t_end - t);
        let (k1, _) = eval(t, r)?;
        let (k2, _) = eval(t + step / 2.0, r + step / 2.0 * k1)?;
        let (k3, _) = eval(t + step / 2.0, r + step / 2.0 * k2)?;
        let (k4, _) = eval(t + step, r + step * k3)?;
        let next = r + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !(next > 0.0) {
            return Err(Error::Domain(format!("radius left (0, ∞) at dt = {step}")));
        }
        t += step;
        r = next;
        let (_, p) = eval(t, r)?;
        points.push(TrajectoryPoint { t, r, h: p.h, pbar: p.pbar });
    }
    Ok(Trajectory { points, truncated })
}

/// Per-snapshot radial running maximum of the pressure about a centre,
/// linear in time between snapshots.
pub fn ball_sup_from_run(run: &Run, center: [f64; 2]) -> BallSup {
    let grid = run.grid;
    let mut order: Vec<(f64, usize)> = (0..grid.len())
        .map(|k| {
            let c = grid.center(k);
            ((c[0] - center[0]).hypot(c[1] - center[1]), k)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dist: Vec<f64> = order.iter().map(|o| o.0).collect();
    let t0 = run.first().time();
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.time() - t0).collect();
    let sups: Vec<Vec<f64>> = run
        .snapshots
        .iter()
        .map(|s| {
            let mut m: f64 = 0.0;
            order
                .iter()
                .map(|&(_, k)| {
                    m = m.max(s.state.p[k]);
                    m
                })
                .collect()
        })
        .collect();
    Arc::new(move |t: f64, radius: f64| {
        let idx = dist.partition_point(|&d| d <= radius);
        if idx == 0 {
            return 0.0;
        }
        let at = |s: &Vec<f64>| s[idx - 1];
        let k = times.partition_point(|&x| x <= t).clamp(1, times.len().max(2) - 1);
        if times.len() == 1 {
            return at(&sups[0]);
        }
        let th = ((t - times[k - 1]) / (times[k] - times[k - 1])).clamp(0.0, 1.0);
        // the sup of a convex combination is below the combination of sups
        (1.0 - th) * at(&sups[k - 1]) + th * at(&sups[k])
    })
}

impl BarrierConfig {
    /// Configuration fed from a stored run: `n̄(0)` is the initial nutrient
    /// maximum and `p̄` the ball supremum of the stored pressures.
    pub fn from_run(run: &Run, center: [f64; 2], r0: f64, m: f64) -> Self {
        Self {
            center,
            r0,
            m,
            nbar0: run.first().state.n.max(),
            dim: run.grid.dim(),
            pbar: ball_sup_from_run(run, center),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `max (p − ψ)₊` over the tracked annulus and snapshots.
    pub max_violation: f64,
    pub max_p: f64,
    pub snapshots_checked: usize,
    pub trajectory: Trajectory,
}

impl Comparison {
    pub fn relative(&self) -> f64 {
        if self.max_p > 0.0 {
            self.max_violation / self.max_p
        } else {
            0.0
        }
    }

    pub fn entry(&self, tol: f64) -> Entry {
        Entry::at_most(
            "barrier_comparison",
            self.relative(),
            tol,
            "max (p(t0+t) − ψ(t))₊ / max p over r(t) ≤ |x−x0| ≤ m r(t)",
        )
    }
}

/// Checks `p(t0 + t) ≤ ψ(t)` on the annulus at every stored snapshot until
/// the radius reaches `4h`. The run's first snapshot is `t0`.
pub fn verify_comparison(run: &Run, cfg: &BarrierConfig) -> Result<Comparison> {
    let grid = run.grid;
    if cfg.dim != 2 || grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let gamma_fs = cfg.validate()?;
    let first = &run.first().state;
    let thr = saturation_threshold(run.gamma);
    let dist = |k: usize| {
        let c = grid.center(k);
        (c[0] - cfg.center[0]).hypot(c[1] - cfg.center[1])
    };
    if let Some(k) = (0..grid.len()).find(|&k| first.rho[k] > thr && dist(k) <= cfg.r0) {
        return Err(Error::HypothesisViolated(format!(
            "cell {k} at distance {:.4} from the centre is saturated at t0 but r0 = {}",
            dist(k),
            cfg.r0
        )));
    }
    let t0 = run.first().time();
    let times: Vec<f64> = run.snapshots.iter().map(|s| s.time() - t0).collect();
    let span = *times.last().unwrap_or(&0.0);
    let spacing = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let dt = if spacing.is_finite() { spacing / 32.0 } else { 1e-3 };
    let traj = integrate_radius(cfg, span, dt, 4.0 * grid.h())?;
    let mut max_violation: f64 = 0.0;
    let mut max_p: f64 = 0.0;
    let mut checked = 0;
    for (snap, &t) in run.snapshots.iter().zip(&times) {
        max_p = max_p.max(snap.state.p.max());
        let Some(r) = traj.radius_at(t) else { break };
        if r <= 4.0 * grid.h() {
            break;
        }
        let pbar = (cfg.pbar)(t, cfg.m * r).max(0.0);
        let prof = profile(gamma_fs, cfg, r, pbar);
        checked += 1;
        for k in 0..grid.len() {
            let rho = dist(k);
            if rho >= r && rho <= cfg.m * r {
                max_violation = max_violation.max(snap.state.p[k] - prof.annulus(rho));
            }
        }
    }
    Ok(Comparison {
        max_violation,
        max_p,
        snapshots_checked: checked,
        trajectory: traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, ScalarField};

    #[test]
    fn constants() {
        let c2 = exponent_constants(2).unwrap();
        assert!((c2.alpha - 0.735_758_882_342_884_6).abs() < 1e-12);
        let c3 = exponent_constants(3).unwrap();
        assert_eq!(c3.xi, 3.375);
        assert!((c3.alpha - 16.0 / 27.0).abs() < 1e-14);
        for c in [c2, c3] {
            assert!((c.alpha - 2.0 / c.xi).abs() < 1e-14);
        }
        assert!(matches!(exponent_constants(4), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn m_star_minimises_half_m_squared_xi() {
        for d in [2, 3] {
            let c = exponent_constants(d).unwrap();
            let g = FundamentalSolution::new(d).unwrap();
            let f = |m: f64| m * m / 2.0 * g.xi_of_m(m);
            assert!((f(c.m_star) - c.xi).abs() < 1e-12);
            assert!(f(c.m_star * 1.01) > c.xi && f(c.m_star * 0.99) > c.xi);
        }
    }

    #[test]
    fn h_and_boundary_values() {
        let cfg = BarrierConfig::with_constant_pbar(2, 1.0, 2.0, 1.0, 0.5);
        let p = psi_profile(&cfg, 0.0, 1.0).unwrap();
        assert!((p.h - 1.25 / 2f64.ln()).abs() < 1e-12);
        assert!((p.h - 1.8034).abs() < 1e-4);
        assert!(p.annulus(1.0).abs() < 1e-12);
        assert!((p.annulus(2.0) - 0.5).abs() < 1e-12);
        let cfg3 = BarrierConfig::with_constant_pbar(3, 0.7, 1.5, 2.0, 0.3);
        let p3 = psi_profile(&cfg3, 0.0, 0.7).unwrap();
        assert!(p3.annulus(0.7).abs() < 1e-12);
        assert!((p3.annulus(1.05) - 0.3).abs() < 1e-12);
        assert!(psi_profile(&cfg, 0.0, 0.0).is_err());
    }

    #[test]
    fn discrete_laplacian_of_profile() {
        let cfg = BarrierConfig::with_constant_pbar(2, 0.5, 2.0, 1.0, 0.4);
        let p = psi_profile(&cfg, 0.0, 0.5).unwrap();
        let mut errs = Vec::new();
        for n in [64, 128] {
            let g = Grid::centered(2, n, -1.2, 1.2).unwrap();
            let f = ScalarField::from_fn(g, |x| p.annulus(x[0].hypot(x[1])));
            let lap = f.laplacian().unwrap();
            let mut e: f64 = 0.0;
            for k in 0..g.len() {
                let c = g.center(k);
                let r = c[0].hypot(c[1]);
                if r > 0.6 && r < 0.9 {
                    e = e.max((lap[k] + 1.0).abs());
                }
            }
            errs.push(e);
        }
        assert!(errs[0] < 1e-2, "{errs:?}");
        assert!(errs[1] < errs[0] / 3.5, "{errs:?}");
    }

    #[test]
    fn constant_radius_without_forcing() {
        let cfg = BarrierConfig::with_constant_pbar(2, 0.8, 1.5, 0.0, 0.0);
        let tr = integrate_radius(&cfg, 1.0, 0.01, 0.0).unwrap();
        assert!(tr.points.iter().all(|p| p.r == 0.8));
    }

    #[test]
    fn linear_decay_without_pressure() {
        let cfg = BarrierConfig::with_constant_pbar(2, 0.8, 1.5, 2.0, 0.0);
        let k = cfg.decay_rate().unwrap();
        let tr = integrate_radius(&cfg, 1.0, 0.01, 0.0).unwrap();
        for p in &tr.points {
            assert!((p.r - 0.8 * (-k * p.t).exp()).abs() < 1e-8 * 0.8);
        }
        let strictly = tr.points.windows(2).all(|w| w[1].r < w[0].r);
        assert!(strictly);
    }

    #[test]
    fn step_refinement() {
        let cfg = BarrierConfig::with_constant_pbar(2, 1.0, 1.6, 1.0, 0.3);
        let coarse = integrate_radius(&cfg, 0.2, 1e-3, 0.0).unwrap();
        let fine = integrate_radius(&cfg, 0.2, 1e-4, 0.0).unwrap();
        let a = coarse.points.last().unwrap().r;
        let b = fine.points.last().unwrap().r;
        assert!(((a - b) / b).abs() < 1e-6, "{a} {b}");
        let floored = integrate_radius(&cfg, 10.0, 1e-3, 0.5).unwrap();
        assert!(floored.truncated);
    }

    #[test]
    fn gronwall_bound_along_trajectory() {
        for d in [2, 3] {
            let c = exponent_constants(d).unwrap();
            let m = c.m_star;
            let hfun = |t: f64| 0.2 + 0.1 * (3.0 * t).sin();
            let mut cfg = BarrierConfig::with_constant_pbar(d, 1.0, m, 1.0, 0.0);
            cfg.pbar = Arc::new(move |t, radius| radius * radius * hfun(t));
            let k = cfg.decay_rate().unwrap();
            let tr = integrate_radius(&cfg, 1.0, 1e-3, 0.0).unwrap();
            let mut hbar = 0.0;
            for w in tr.points.windows(2) {
                let (t0, t1) = (w[0].t, w[1].t);
                hbar += 4.0 * (t1 - t0) / 6.0 * (hfun(t0) + 4.0 * hfun((t0 + t1) / 2.0) + hfun(t1));
                let bound = (-2.0 * k * t1 - c.xi * hbar).exp();
                let z = w[1].r * w[1].r;
                assert!((z / bound - 1.0).abs() < 1e-2, "d={d} t={t1}: {z} vs {bound}");
            }
        }
    }
}
