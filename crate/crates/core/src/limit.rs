//! γ-sweeps toward the incompressible limit and the exponential moment of
//! the positive part of `u_γ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::io;
use crate::pme::SimState;
use crate::run::{self, Run, RunSpec};

/// Ladder exponent range: `b = 2^{-k}` for `k = 0..=LADDER_MAX`.
pub const LADDER_MAX: usize = 20;
/// Largest allowed `b u₊` before the integrand is declared to overflow.
pub const OVERFLOW_ARG: f64 = 700.0;

pub fn ladder() -> impl Iterator<Item = f64> {
    (0..=LADDER_MAX).map(|k| 0.5f64.powi(k as i32))
}

fn ladder_slot(b: f64) -> Option<usize> {
    ladder().position(|v| v == b)
}

/// `(s − 1) e^s + 1`, accurate near `s = 0`.
pub fn ab_integrand(s: f64) -> f64 {
    if s < 0.1 {
        // Σ_{k=2}^{11} (k − 1) s^k / k!, Horner form.
        const C: [f64; 10] = [
            1.0 / 2.0,
            2.0 / 6.0,
            3.0 / 24.0,
            4.0 / 120.0,
            5.0 / 720.0,
            6.0 / 5040.0,
            7.0 / 40320.0,
            8.0 / 362880.0,
            9.0 / 3628800.0,
            10.0 / 39916800.0,
        ];
        let mut acc = 0.0;
        for c in C.iter().rev() {
            acc = acc * s + c;
        }
        acc * s * s
    } else {
        s * s.exp() - s.exp_m1()
    }
}

/// Space-time moments `Σ f(b u₊) h^d dt` for every ladder `b`, built from
/// samples of `u₊` with midpoint weights.
#[derive(Debug, Clone, Default)]
pub struct MomentAccumulator {
    samples: Vec<(f64, Vec<f64>, f64)>,
    overflow: Vec<bool>,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
            overflow: vec![false; LADDER_MAX + 1],
        }
    }

    /// Records `u` (the full `u_γ` field) at time `t`.
    pub fn sample(&mut self, t: f64, u: &ScalarField) -> Result<()> {
        if let Some(&(prev, _, _)) = self.samples.last() {
            if !(t > prev) {
                return Err(Error::TimeOrdering { previous: prev, next: t });
            }
        }
        let vol = u.grid().cell_volume();
        let umax = u.max().max(0.0);
        let mut per_b = vec![0.0; LADDER_MAX + 1];
        for (slot, b) in ladder().enumerate() {
            if b * umax > OVERFLOW_ARG {
                self.overflow[slot] = true;
                per_b[slot] = f64::INFINITY;
            }
        }
        for &v in u.values() {
            if v <= 0.0 {
                continue;
            }
            // e^{b v} for b = 1, 1/2, 1/4, ... by repeated square roots.
            let mut e = if v <= OVERFLOW_ARG { v.exp() } else { f64::NAN };
            let mut s = v;
            for slot in 0..=LADDER_MAX {
                if slot > 0 {
                    s *= 0.5;
                    e = if s <= OVERFLOW_ARG && e.is_nan() { s.exp() } else { e.sqrt() };
                }
                if self.overflow[slot] {
                    continue;
                }
                per_b[slot] += if s < 0.1 { ab_integrand(s) } else { s * e - (e - 1.0) };
            }
        }
        for slot in 0..=LADDER_MAX {
            if !self.overflow[slot] {
                per_b[slot] *= vol;
            }
        }
        self.samples.push((t, per_b, umax));
        Ok(())
    }

    pub fn sample_times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    /// Largest `u₊` seen in any sample.
    pub fn max_u_plus(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.2))
    }

    pub fn overflowed(&self, b: f64) -> bool {
        ladder_slot(b).map(|s| self.overflow[s]).unwrap_or(true)
    }

    /// Time integral of the sampled spatial integrals; each sample covers
    /// the half-intervals to its neighbours.
    pub fn moment(&self, b: f64) -> Result<f64> {
        let slot = ladder_slot(b)
            .ok_or_else(|| Error::InvalidInput(format!("b = {b} is not a power 2^-k with k <= {LADDER_MAX}")))?;
        if self.overflow[slot] {
            return Err(Error::Overflow {
                value: b * self.max_u_plus(),
            });
        }
        let s = &self.samples;
        let mut total = 0.0;
        for i in 0..s.len() {
            let lo = if i == 0 { s[0].0 } else { 0.5 * (s[i - 1].0 + s[i].0) };
            let hi = if i + 1 == s.len() { s[i].0 } else { 0.5 * (s[i].0 + s[i + 1].0) };
            total += s[i].1[slot] * (hi - lo);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbMoment {
    pub b: f64,
    pub value: f64,
}

pub fn ab_moment(run: &Run, b: f64) -> Result<AbMoment> {
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("b must be positive, got {b}")));
    }
    Ok(AbMoment {
        b,
        value: run.moments.moment(b)?,
    })
}

/// Largest ladder `b` with no overflow and a finite moment on every run.
pub fn calibrate_b(runs: &[&Run]) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("run list"));
    }
    for b in ladder() {
        if runs.iter().all(|r| r.moments.moment(b).map(f64::is_finite).unwrap_or(false)) {
            return Ok(b);
        }
    }
    Ok(0.5f64.powi(LADDER_MAX as i32))
}

/// Several relaxation exponents run from the same initial data.
#[derive(Debug, Clone)]
pub struct GammaSweep {
    pub gammas: Vec<f64>,
    pub spec: RunSpec,
}

impl GammaSweep {
    pub fn new(gammas: Vec<f64>, spec: RunSpec) -> Result<Self> {
        if gammas.len() < 3 {
            return Err(Error::InvalidInput(format!("a sweep needs at least 3 gammas, got {}", gammas.len())));
        }
        if gammas.iter().any(|&g| g < 2.0) || gammas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "sweep gammas must be >= 2 and strictly increasing".into(),
            ));
        }
        Ok(Self { gammas, spec })
    }
}

/// Runs every member of the sweep concurrently. `initial` builds the
/// starting state for a given γ.
pub fn run_sweep<F>(sweep: &GammaSweep, initial: F) -> Result<Vec<Run>>
where
    F: Fn(f64) -> Result<SimState> + Sync,
{
    sweep
        .gammas
        .par_iter()
        .map(|&gamma| {
            let tag = |e: Error| Error::Sweep {
                gamma,
                source: Box::new(e),
            };
            let s0 = initial(gamma).map_err(tag)?;
            run::run(s0, &RunSpec { gamma, ..sweep.spec.clone() }).map_err(tag)
        })
        .collect()
}

/// `‖ρ_γ(τ) − ρ_γ'(τ)‖_{L¹}` between consecutive members.
pub fn l1_to_next(runs: &[Run]) -> Vec<Option<f64>> {
    (0..runs.len())
        .map(|i| {
            runs.get(i + 1)
                .map(|next| runs[i].last().state.rho.l1_distance(&next.last().state.rho))
        })
        .collect()
}

/// Rows `(gamma, tau, b, M_b, l1_to_next_gamma)`; the last member has an
/// empty distance.
pub fn write_sweep_csv(path: &std::path::Path, runs: &[Run], b: f64) -> Result<()> {
    let mut w = io::writer(path)?;
    let err = |e| io::csv_err(path, e);
    w.write_record(["gamma", "tau", "b", "M_b", "l1_to_next_gamma"]).map_err(err)?;
    for (run, l1) in runs.iter().zip(l1_to_next(runs)) {
        let m = run.moments.moment(b).unwrap_or(f64::INFINITY);
        w.write_record([
            io::fmt(run.gamma),
            io::fmt(run.last().state.time),
            io::fmt(b),
            io::fmt(m),
            l1.map(io::fmt).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
