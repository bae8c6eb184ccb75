//! Hopf-Lax upper bound for the pressure and the weak HJB residual.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pme::compute_u_gamma;
use crate::report::Entry;
use crate::run::Run;

/// Relative slack before a pair counts as violating.
pub const REL_SLACK: f64 = 0.05;
/// Largest dyadic exponent tried for `C`.
pub const C_SCAN_MAX: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfLaxParams {
    pub b: f64,
    pub c: f64,
    pub theta: f64,
    pub pair_count: usize,
    pub seed: u64,
}

impl HopfLaxParams {
    pub fn new(b: f64, c: f64) -> Self {
        Self {
            b,
            c,
            theta: 0.0,
            pair_count: 10_000,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.c > 0.0 && self.theta >= 0.0) || self.pair_count < 100 {
            return Err(Error::InvalidInput(format!(
                "hopf-lax needs b > 0, C > 0, theta >= 0, pair_count >= 100; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// `λ(s) = θ + s^{−1/2}`.
pub fn lambda_schedule(theta: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("λ(s) needs s > 0, got {s}")));
    }
    Ok(theta + 1.0 / s.sqrt())
}

/// `Λ(t) = (5/4b)(θt + 2√t) + (t/b) ln(1 + C/t)`.
pub fn big_lambda(params: &HopfLaxParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Λ(t) needs t > 0, got {t}")));
    }
    Ok(lambda_unchecked(params, t))
}

fn lambda_unchecked(params: &HopfLaxParams, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let b = params.b;
    5.0 / (4.0 * b) * (params.theta * t + 2.0 * t.sqrt()) + t / b * (params.c / t).ln_1p()
}

/// `∫_0^t e^{Λ(s)} ds`, adaptive Simpson to absolute tolerance `tol`.
pub fn integral_exp_lambda(params: &HopfLaxParams, t: f64, tol: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    // s = u² removes the √s kink at the origin
    let f = |u: f64| 2.0 * u * lambda_unchecked(params, u * u).exp();
    let hi = t.sqrt();
    let (fa, fm, fb) = (f(0.0), f(hi / 2.0), f(hi));
    let whole = hi / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, 0.0, hi, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Right-hand side of the bound for a time gap `dt`, later pressure `p1`
/// and squared distance `dx2`.
pub fn hopf_lax_rhs(params: &HopfLaxParams, dt: f64, p1: f64, dx2: f64) -> Result<f64> {
    let lam = big_lambda(params, dt)?;
    let int = integral_exp_lambda(params, dt, 1e-8);
    let decay = (-lambda_schedule(params.theta, dt)?).exp();
    Ok(lam.exp() * (p1 + dx2 / (4.0 * int) + params.c * dt.powf(0.7) * decay))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRow {
    pub t0: f64,
    pub t1: f64,
    pub dist: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(lhs − rhs)₊ / rhs`, infinite when `rhs = 0 < lhs`.
    pub violation: f64,
}

pub const PAIR_HEADER: [&str; 6] = ["t0", "t1", "dist", "lhs", "rhs", "violation"];

impl PairRow {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.t0, self.t1, self.dist, self.lhs, self.rhs, self.violation]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfLaxOutcome {
    pub c: f64,
    pub violated_fraction: f64,
    pub max_violation: f64,
    pub rows: Vec<PairRow>,
}

struct Pair {
    i: usize,
    j: usize,
    x0: [f64; 2],
    x1: [f64; 2],
}

fn support_box(run: &Run) -> ([f64; 2], [f64; 2]) {
    let s = &run.last().state;
    let g = run.grid;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for k in 0..g.len() {
        if s.rho[k] > 0.0 {
            let c = g.center(k);
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
    }
    if g.dim() == 1 {
        lo[1] = 0.0;
        hi[1] = 0.0;
    }
    (lo, hi)
}

fn draw_pairs(run: &Run, params: &HopfLaxParams) -> Vec<Pair> {
    let (lo, hi) = support_box(run);
    let ns = run.snapshots.len();
    (0..params.pair_count)
        .into_par_iter()
        .map(|idx| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(idx as u64);
            let a = rng.gen_range(0..ns);
            let mut b = rng.gen_range(0..ns - 1);
            if b >= a {
                b += 1;
            }
            let point = |rng: &mut ChaCha8Rng| {
                let mut x = [0.0; 2];
                for k in 0..2 {
                    x[k] = if hi[k] > lo[k] { rng.gen_range(lo[k]..=hi[k]) } else { lo[k] };
                }
                x
            };
            let x0 = point(&mut rng);
            let x1 = point(&mut rng);
            Pair {
                i: a.min(b),
                j: a.max(b),
                x0,
                x1,
            }
        })
        .collect()
}

/// Samples `pair_count` space-time pairs from the stored snapshots and
/// evaluates both sides of the bound at the given `C`.
pub fn verify_hopf_lax(run: &Run, params: &HopfLaxParams) -> Result<HopfLaxOutcome> {
    params.validate()?;
    if run.snapshots.len() < 2 {
        return Err(Error::InvalidInput("hopf-lax needs at least two stored snapshots".into()));
    }
    evaluate(run, params, &draw_pairs(run, params))
}

fn evaluate(run: &Run, params: &HopfLaxParams, pairs: &[Pair]) -> Result<HopfLaxOutcome> {
    let times = run.times();
    let rows: Vec<PairRow> = pairs
        .par_iter()
        .map(|pr| {
            let (t0, t1) = (times[pr.i], times[pr.j]);
            let lhs = run.snapshots[pr.i].state.p.interpolate(pr.x0);
            let p1 = run.snapshots[pr.j].state.p.interpolate(pr.x1);
            let dx2 = (pr.x1[0] - pr.x0[0]).powi(2) + (pr.x1[1] - pr.x0[1]).powi(2);
            let rhs = hopf_lax_rhs(params, t1 - t0, p1, dx2)?;
            let violation = if lhs <= rhs {
                0.0
            } else if rhs > 0.0 {
                (lhs - rhs) / rhs
            } else {
                f64::INFINITY
            };
            Ok(PairRow {
                t0,
                t1,
                dist: dx2.sqrt(),
                lhs,
                rhs,
                violation,
            })
        })
        .collect::<Result<_>>()?;
    let bad = rows.iter().filter(|r| r.violation > REL_SLACK).count();
    Ok(HopfLaxOutcome {
        c: params.c,
        violated_fraction: bad as f64 / rows.len() as f64,
        max_violation: rows.iter().map(|r| r.violation).fold(0.0, f64::max),
        rows,
    })
}

/// Smallest `C ∈ {1, 2, …, 2^10}` whose violated fraction is at most
/// `max_fraction`, with the same pairs for every `C`. `None` if none passes.
pub fn scan_c(run: &Run, base: &HopfLaxParams, max_fraction: f64) -> Result<Option<HopfLaxOutcome>> {
    base.validate()?;
    if run.snapshots.len() < 2 {
        return Err(Error::InvalidInput("hopf-lax needs at least two stored snapshots".into()));
    }
    let pairs = draw_pairs(run, base);
    for k in 0..=C_SCAN_MAX {
        let p = HopfLaxParams {
            c: 2f64.powi(k),
            ..*base
        };
        let out = evaluate(run, &p, &pairs)?;
        if out.violated_fraction <= max_fraction {
            return Ok(Some(out));
        }
    }
    Ok(None)
}

pub fn hopf_lax_entry(out: &HopfLaxOutcome, max_fraction: f64) -> Entry {
    Entry::at_most(
        "hopf_lax",
        out.violated_fraction,
        max_fraction,
        "p(x0,t0) ≤ e^{Λ(Δt)}(p(x1,t1) + |Δx|²/(4∫_0^{Δt} e^Λ) + C Δt^{7/10} e^{−λ(Δt)})",
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbResidual {
    /// `∫∫ φ r₋` over `∫∫ φ (|∂t p| + |∇p|² + u₊ p)`.
    pub normalized: f64,
    pub negative_part: f64,
    pub scale: f64,
}

/// Weighted negative part of `r = ∂t p − |∇p|² + u₊ p` with the weight
/// `sin²(π t/τ)·(1 − |x − c|²/R²)₊³`, `c` the box centre and `R` 90% of its
/// half width.
pub fn hjb_residual(run: &Run) -> Result<HjbResidual> {
    let g = run.grid;
    let times = run.times();
    let (t_first, t_last) = (times[0], *times.last().unwrap_or(&times[0]));
    let span = t_last - t_first;
    let half = g.extent() / 2.0;
    let origin = g.origin();
    let c = [origin[0] + half, if g.dim() == 2 { origin[1] + half } else { 0.0 }];
    let radius = 0.9 * half;
    let space: Vec<f64> = (0..g.len())
        .map(|k| {
            let x = g.center(k);
            let s = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (radius * radius);
            (1.0 - s).max(0.0).powi(3)
        })
        .collect();
    let mut neg = 0.0;
    let mut scale = 0.0;
    for (idx, snap) in run.snapshots.iter().enumerate() {
        if span <= 0.0 || snap.dt <= 0.0 {
            continue;
        }
        let wt = (std::f64::consts::PI * (snap.time() - t_first) / span).sin().powi(2);
        if wt == 0.0 {
            continue;
        }
        // trapezoid weights in time
        let lo = if idx > 0 { times[idx - 1] } else { times[idx] };
        let hi = if idx + 1 < times.len() { times[idx + 1] } else { times[idx] };
        let dtw = 0.5 * (hi - lo);
        let p = &snap.state.p;
        let grad = p.grad_sq()?;
        let u = compute_u_gamma(&snap.state, run.gamma)?;
        for k in 0..g.len() {
            let w = wt * space[k] * dtw * g.cell_volume();
            if w == 0.0 {
                continue;
            }
            let up = u[k].max(0.0) * p[k];
            let r = snap.dp_dt[k] - grad[k] + up;
            neg += w * (-r).max(0.0);
            scale += w * (snap.dp_dt[k].abs() + grad[k] + up);
        }
    }
    Ok(HjbResidual {
        normalized: if scale > 0.0 { neg / scale } else { 0.0 },
        negative_part: neg,
        scale,
    })
}

pub fn hjb_entry(r: &HjbResidual, tol: f64) -> Entry {
    Entry::at_most("hjb_weak", r.normalized, tol, "∫∫ φ (∂t p − |∇p|² + u₊ p)₋ / ∫∫ φ (|∂t p| + |∇p|² + u₊ p)")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        assert_eq!(lambda_schedule(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(lambda_schedule(0.0, 4.0).unwrap(), 0.5);
        assert_eq!(lambda_schedule(2.0, 0.25).unwrap(), 4.0);
        assert!(lambda_schedule(0.0, 0.0).is_err());
        for theta in [0.0, 0.5, 3.0] {
            let v: Vec<f64> = (1..=1000).map(|k| lambda_schedule(theta, k as f64 * 1e-3).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn big_lambda_values() {
        let p = HopfLaxParams::new(1.0, 1.0);
        assert!((big_lambda(&p, 1.0).unwrap() - (2.5 + 2f64.ln())).abs() < 1e-14);
        assert!((big_lambda(&p, 1.0).unwrap() - 3.1931).abs() < 1e-4);
        assert!(big_lambda(&p, 1e-8).unwrap() <= 1e-3);
        assert!(big_lambda(&p, 0.0).is_err());
        let p2 = HopfLaxParams { b: 2.0, ..p };
        let first = |q: &HopfLaxParams| 5.0 / (4.0 * q.b) * (q.theta + 2.0);
        assert_eq!(first(&p2) * 2.0, first(&p));
        let v: Vec<f64> = (1..=1000).map(|k| big_lambda(&p, k as f64 * 5e-4).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn quadrature_against_fine_midpoint() {
        let p = HopfLaxParams { theta: 0.7, ..HopfLaxParams::new(0.5, 4.0) };
        let t = 0.3;
        let n = 2_000_000;
        let h = t / n as f64;
        let mid: f64 = (0..n).map(|k| lambda_unchecked(&p, (k as f64 + 0.5) * h).exp() * h).sum();
        let q = integral_exp_lambda(&p, t, 1e-10);
        assert!((q - mid).abs() < 1e-6 * mid, "{q} {mid}");
    }

    #[test]
    fn zero_lhs_holds_trivially() {
        let p = HopfLaxParams::new(1.0, 1.0);
        let rhs = hopf_lax_rhs(&p, 0.1, 0.0, 0.0).unwrap();
        assert!(rhs >= 0.0);
        assert!(hopf_lax_rhs(&p, 0.1, 0.2, 0.0).unwrap() >= 0.2);
    }
}
