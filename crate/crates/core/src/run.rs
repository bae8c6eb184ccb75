//! Adaptive time integration of one relaxed system with stored snapshots,
//! running `w`/`η` accumulation and `u₊` moment sampling.

use crate::baiocchi::Accumulator;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::limit::MomentAccumulator;
use crate::pme::{compute_u_gamma, FluxLimiter, PmeParams, SimState, Simulation};
use crate::nutrient::{Absorption, SplitOrder};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub gamma: f64,
    /// Horizon τ.
    pub tau: f64,
    /// Number of equal intervals between stored snapshots.
    pub snapshots: usize,
    /// Sample `u₊` every this many steps.
    pub moment_every: usize,
    /// Fraction of the stability bound used as step size.
    pub safety: f64,
    pub limiter: FluxLimiter,
    pub nutrient_theta: f64,
    pub absorption: Absorption,
    pub split: SplitOrder,
}

impl RunSpec {
    pub fn new(gamma: f64, tau: f64, snapshots: usize) -> Self {
        Self {
            gamma,
            tau,
            snapshots,
            moment_every: 8,
            safety: 0.9,
            limiter: FluxLimiter::None,
            nutrient_theta: 0.5,
            absorption: Absorption::default(),
            split: SplitOrder::default(),
        }
    }

    pub fn params(&self) -> PmeParams {
        PmeParams {
            gamma: self.gamma,
            dt: 0.0,
            limiter: self.limiter,
            nutrient_theta: self.nutrient_theta,
            absorption: self.absorption,
            split: self.split,
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        (0..=self.snapshots)
            .map(|k| self.tau * k as f64 / self.snapshots as f64)
            .collect()
    }
}

/// State at a stored time, with the accumulated fields and the forward
/// difference of the pressure over the following step.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: SimState,
    pub w: ScalarField,
    pub eta: ScalarField,
    pub dp_dt: ScalarField,
    /// Size of the step used for `dp_dt`.
    pub dt: f64,
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        self.state.time
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub gamma: f64,
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
    pub moments: MomentAccumulator,
    pub steps: usize,
    pub max_mass_defect: f64,
    pub n0_min: f64,
    /// Smallest distance in cells between the support and the box edge.
    pub min_margin: usize,
}

impl Run {
    pub fn first(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("a run always stores its initial snapshot")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::time).collect()
    }

    /// Nutrient history over the stored snapshots.
    pub fn nutrient_history(&self) -> impl Iterator<Item = (f64, &ScalarField)> {
        self.snapshots.iter().map(|s| (s.time(), &s.state.n))
    }

    /// Pressure at an arbitrary time in `[0, τ]`, linear between snapshots.
    pub fn pressure_at(&self, t: f64) -> ScalarField {
        let s = &self.snapshots;
        let k = s.partition_point(|x| x.time() <= t).clamp(1, s.len().max(2) - 1);
        if s.len() == 1 {
            return s[0].state.p.clone();
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let th = ((t - a.time()) / (b.time() - a.time())).clamp(0.0, 1.0);
        a.state.p.zip_map(&b.state.p, |x, y| (1.0 - th) * x + th * y)
    }
}

/// Integrates from `initial` to `spec.tau`, landing exactly on the snapshot
/// times. One extra step past the final time supplies its `dp_dt`.
pub fn run(initial: SimState, spec: &RunSpec) -> Result<Run> {
    if !(spec.tau > 0.0) || spec.snapshots == 0 || spec.moment_every == 0 {
        return Err(Error::InvalidInput(
            "run needs tau > 0, at least one snapshot interval and moment_every >= 1".into(),
        ));
    }
    if !(spec.safety > 0.0 && spec.safety <= 1.0) {
        return Err(Error::InvalidInput(format!("safety must lie in (0, 1], got {}", spec.safety)));
    }
    let grid = *initial.grid();
    let gamma = spec.gamma;
    let t_start = initial.time;
    let n0_min = initial.n.min();
    let mut sim = Simulation::new(initial, spec.params())?;
    let mut acc = Accumulator::new(grid);
    let mut moments = MomentAccumulator::new();
    {
        let s = sim.state();
        acc.push(s.time, &s.p, &s.rho, &s.n)?;
        moments.sample(s.time, &compute_u_gamma(s, gamma)?)?;
    }
    let targets: Vec<f64> = spec.snapshot_times().into_iter().map(|t| t + t_start).collect();
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(targets.len());
    let mut pending: Option<Snapshot> = Some(snapshot_of(&sim, &acc));
    let mut next = 1;
    let mut steps = 0usize;
    let mut max_defect: f64 = 0.0;
    let mut min_margin = sim.support_margin();
    let t_end = *targets.last().unwrap_or(&t_start);
    loop {
        let now = sim.state().time;
        let mut dt = spec.safety * sim.stable_dt();
        let landing = next < targets.len() && now + dt >= targets[next] - 1e-12 * t_end.abs().max(1.0);
        if landing {
            dt = targets[next] - now;
        }
        let p_before = pending.as_ref().map(|_| sim.state().p.clone());
        let stats = sim.step(dt)?;
        if landing {
            sim.set_time(targets[next]);
        }
        steps += 1;
        max_defect = max_defect.max(stats.mass_defect());
        min_margin = min_margin.min(sim.support_margin());
        let s = sim.state();
        acc.push_rows(s.time, &s.p, &s.rho, &s.n, sim.active_rows())?;
        if let (Some(mut snap), Some(pb)) = (pending.take(), p_before) {
            snap.dp_dt = s.p.zip_map(&pb, |a, b| (a - b) / dt);
            snap.dt = dt;
            snapshots.push(snap);
        }
        if next >= targets.len() {
            break;
        }
        if landing {
            let s = sim.state();
            moments.sample(s.time, &compute_u_gamma(s, gamma)?)?;
            pending = Some(snapshot_of(&sim, &acc));
            next += 1;
        } else if steps % spec.moment_every == 0 {
            let s = sim.state();
            moments.sample(s.time, &compute_u_gamma(s, gamma)?)?;
        }
    }
    Ok(Run {
        gamma,
        grid,
        snapshots,
        moments,
        steps,
        max_mass_defect: max_defect,
        n0_min,
        min_margin,
    })
}

fn snapshot_of(sim: &Simulation, acc: &Accumulator) -> Snapshot {
    let b = acc.snapshot();
    let s = sim.state().clone();
    let grid = *s.grid();
    Snapshot {
        state: s,
        w: b.w,
        eta: b.eta,
        dp_dt: ScalarField::zeros(grid),
        dt: 0.0,
    }
}
