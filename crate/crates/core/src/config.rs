//! Flat `key = value` experiment files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted
//! lowercase words. Lists are comma separated. Every key is optional and
//! unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nutrient::Absorption;
use crate::pme::FluxLimiter;

/// Every check the pipeline knows, in report order.
pub const CHECKS: [&str; 14] = [
    "constants",
    "nutrient_lower_bound",
    "mass_balance",
    "pressure_consistency",
    "ab_moment",
    "ab_monotone",
    "obstacle_identity",
    "hopf_lax",
    "hjb_weak",
    "barrier_comparison",
    "holder_exponent",
    "normal_map",
    "nondegeneracy",
    "sweep_cauchy",
];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Disk { center: [f64; 2], radius: f64 },
    TwoDisks { a: ([f64; 2], f64), b: ([f64; 2], f64) },
    Annulus { center: [f64; 2], inner: f64, outer: f64 },
    /// Patch read from a field CSV: cells with value above one half.
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub dim: usize,
    pub cells: usize,
    pub lo: f64,
    pub hi: f64,
    pub initial: InitialData,
    pub n0: f64,
    pub gammas: Vec<f64>,
    pub tau: f64,
    pub snapshots: usize,
    pub moment_every: usize,
    pub safety: f64,
    pub nutrient_theta: f64,
    pub limiter: FluxLimiter,
    pub absorption: Absorption,
    pub checks: Vec<String>,
    pub tolerances: BTreeMap<String, f64>,
    /// Density level for the saturated set; `1 − 2/γ` when unset.
    pub pressure_threshold: Option<f64>,
    pub hopflax_pairs: usize,
    pub hopflax_theta: f64,
    pub barrier_center: Option<[f64; 2]>,
    pub barrier_r0: Option<f64>,
    pub barrier_m: Option<f64>,
    /// Hitting-time window, as fractions of τ, for Hölder points.
    pub holder_window: [f64; 2],
    pub holder_points: usize,
    /// Blowup ladder in cells, decreasing.
    pub classify_radii: Vec<f64>,
    pub classify_alpha: f64,
    /// Pair radius for the normal seminorm, in cells.
    pub classify_pair_cells: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            dim: 2,
            cells: 64,
            lo: -4.0,
            hi: 4.0,
            initial: InitialData::Disk {
                center: [0.0, 0.0],
                radius: 1.5,
            },
            n0: 1.0,
            gammas: vec![40.0],
            tau: 0.5,
            snapshots: 50,
            moment_every: 8,
            safety: 0.9,
            nutrient_theta: 0.5,
            limiter: FluxLimiter::None,
            absorption: Absorption::Exponential,
            checks: CHECKS.iter().map(|s| s.to_string()).collect(),
            tolerances: BTreeMap::new(),
            pressure_threshold: None,
            hopflax_pairs: 10_000,
            hopflax_theta: 0.0,
            barrier_center: None,
            barrier_r0: None,
            barrier_m: None,
            holder_window: [0.6, 0.9],
            holder_points: 8,
            classify_radii: vec![12.0, 9.0, 6.0, 4.0],
            classify_alpha: 1.0,
            classify_pair_cells: 8.0,
        }
    }
}

/// Default tolerance per check.
pub fn default_tolerance(check: &str) -> f64 {
    match check {
        "constants" => 1e-12,
        "nutrient_lower_bound" => 1e-3,
        "mass_balance" => 1e-8,
        "pressure_consistency" => 0.05,
        "ab_moment" => 2.0,
        "ab_monotone" => 0.0,
        "obstacle_identity" => 0.05,
        "hopf_lax" => 0.01,
        "hjb_weak" => 0.05,
        "barrier_comparison" => 0.02,
        "holder_exponent" => 0.1,
        "normal_map" => 5.0,
        "nondegeneracy" => 0.1,
        "sweep_cauchy" => 0.0,
        _ => f64::NAN,
    }
}

impl ExperimentConfig {
    pub fn tolerance(&self, check: &str) -> f64 {
        self.tolerances.get(check).copied().unwrap_or_else(|| default_tolerance(check))
    }

    pub fn enabled(&self, check: &str) -> bool {
        self.checks.iter().any(|c| c == check)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let InitialData::Csv(p) = &mut cfg.initial {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut initial: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Config {
                    line,
                    key: body.to_string(),
                    message: "expected `key = value`".into(),
                });
            };
            let (key, value) = (k.trim(), v.trim());
            let err = |message: String| Error::Config {
                line,
                key: key.to_string(),
                message,
            };
            if key.is_empty() || !key.split('.').all(|w| !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')) {
                return Err(err("malformed key".into()));
            }
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(err(format!("repeated, first set on line {prev}")));
            }
            let num = || value.parse::<f64>().map_err(|_| err(format!("`{value}` is not a number")));
            let int = || value.parse::<usize>().map_err(|_| err(format!("`{value}` is not a nonnegative integer")));
            let list = || -> Result<Vec<f64>> {
                value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| err(format!("`{s}` is not a number"))))
                    .collect()
            };
            let point = || -> Result<[f64; 2]> {
                match list()?.as_slice() {
                    [x] => Ok([*x, 0.0]),
                    [x, y] => Ok([*x, *y]),
                    _ => Err(err("expected one or two coordinates".into())),
                }
            };
            match key {
                "name" => cfg.name = value.to_string(),
                "seed" => cfg.seed = value.parse().map_err(|_| err(format!("`{value}` is not a seed")))?,
                "grid.dim" => cfg.dim = int()?,
                "grid.n" => cfg.cells = int()?,
                "grid.lo" => cfg.lo = num()?,
                "grid.hi" => cfg.hi = num()?,
                "initial.kind" | "initial.center" | "initial.radius" | "initial.center2" | "initial.radius2"
                | "initial.inner_radius" | "initial.path" => {
                    initial.insert(key.to_string(), (line, value.to_string()));
                }
                "nutrient.n0" => cfg.n0 = num()?,
                "nutrient.theta" => cfg.nutrient_theta = num()?,
                "nutrient.absorption" => {
                    cfg.absorption = match value {
                        "exponential" => Absorption::Exponential,
                        "implicit" => Absorption::Implicit,
                        _ => return Err(err(format!("unknown absorption `{value}`"))),
                    }
                }
                "run.gammas" => cfg.gammas = list()?,
                "run.tau" => cfg.tau = num()?,
                "run.snapshots" => cfg.snapshots = int()?,
                "run.moment_every" => cfg.moment_every = int()?,
                "run.safety" => cfg.safety = num()?,
                "run.limiter" => {
                    cfg.limiter = match value {
                        "none" => FluxLimiter::None,
                        "minmod" => FluxLimiter::Minmod,
                        _ => return Err(err(format!("unknown limiter `{value}`"))),
                    }
                }
                "checks" => {
                    cfg.checks = match value {
                        "all" => CHECKS.iter().map(|s| s.to_string()).collect(),
                        "none" | "" => Vec::new(),
                        _ => {
                            let names: Vec<String> = value.split(',').map(|s| s.trim().to_string()).collect();
                            if let Some(bad) = names.iter().find(|n| !CHECKS.contains(&n.as_str())) {
                                return Err(err(format!("unknown check `{bad}`")));
                            }
                            names
                        }
                    }
                }
                "pressure.threshold" => {
                    let v = num()?;
                    if !(v > 0.0 && v < 1.0) {
                        return Err(err("must lie in (0, 1)".into()));
                    }
                    cfg.pressure_threshold = Some(v);
                }
                "hopflax.pairs" => cfg.hopflax_pairs = int()?,
                "hopflax.theta" => cfg.hopflax_theta = num()?,
                "barrier.center" => cfg.barrier_center = Some(point()?),
                "barrier.r0" => cfg.barrier_r0 = Some(num()?),
                "barrier.m" => cfg.barrier_m = Some(num()?),
                "holder.window" => match list()?.as_slice() {
                    [a, b] if a < b => cfg.holder_window = [*a, *b],
                    _ => return Err(err("expected two increasing fractions".into())),
                },
                "holder.points" => cfg.holder_points = int()?,
                "classify.radii" => cfg.classify_radii = list()?,
                "classify.alpha" => cfg.classify_alpha = num()?,
                "classify.pair_cells" => cfg.classify_pair_cells = num()?,
                _ => match key.strip_prefix("tol.") {
                    Some(check) if CHECKS.contains(&check) => {
                        let v = num()?;
                        if !(v.is_finite() && (v > 0.0 || check == "ab_monotone" || check == "sweep_cauchy")) {
                            return Err(err("tolerance must be positive".into()));
                        }
                        cfg.tolerances.insert(check.to_string(), v);
                    }
                    _ => return Err(err("unknown key".into())),
                },
            }
        }
        cfg.initial = parse_initial(&initial)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                line: 0,
                key: key.to_string(),
                message,
            })
        };
        if !(self.dim == 1 || self.dim == 2) {
            return bad("grid.dim", format!("must be 1 or 2, got {}", self.dim));
        }
        if self.cells < 3 {
            return bad("grid.n", "needs at least 3 cells".into());
        }
        if !(self.hi > self.lo) {
            return bad("grid.hi", "must exceed grid.lo".into());
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|&g| !(g >= 2.0)) || self.gammas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("run.gammas", "need one or more increasing values >= 2".into());
        }
        if !(self.tau > 0.0) || self.snapshots == 0 {
            return bad("run.tau", "need tau > 0 and at least one snapshot".into());
        }
        if !(self.n0 >= 0.0) {
            return bad("nutrient.n0", "must be nonnegative".into());
        }
        if self.classify_radii.len() < 3 || self.classify_radii.windows(2).any(|w| w[1] >= w[0]) || self.classify_radii.iter().any(|&r| r < 4.0) {
            return bad("classify.radii", "need 3 or more decreasing radii of at least 4 cells".into());
        }
        Ok(())
    }
}

fn parse_initial(keys: &BTreeMap<String, (usize, String)>) -> Result<InitialData> {
    let get = |k: &str| keys.get(k);
    let err = |k: &str, message: String| Error::Config {
        line: keys.get(k).map_or(0, |v| v.0),
        key: k.to_string(),
        message,
    };
    let num = |k: &str, default: f64| -> Result<f64> {
        match get(k) {
            None => Ok(default),
            Some((_, v)) => v.parse().map_err(|_| err(k, format!("`{v}` is not a number"))),
        }
    };
    let point = |k: &str, default: [f64; 2]| -> Result<[f64; 2]> {
        let Some((_, v)) = get(k) else { return Ok(default) };
        let xs: Vec<f64> = v
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| err(k, format!("`{s}` is not a number"))))
            .collect::<Result<_>>()?;
        match xs.as_slice() {
            [x] => Ok([*x, 0.0]),
            [x, y] => Ok([*x, *y]),
            _ => Err(err(k, "expected one or two coordinates".into())),
        }
    };
    let kind = get("initial.kind").map_or("disk", |v| v.1.as_str());
    let center = point("initial.center", [0.0, 0.0])?;
    let radius = num("initial.radius", 1.5)?;
    let data = match kind {
        "disk" => InitialData::Disk { center, radius },
        "two_disks" => InitialData::TwoDisks {
            a: (center, radius),
            b: (point("initial.center2", [2.0 * radius + 1.0, 0.0])?, num("initial.radius2", radius)?),
        },
        "annulus" => InitialData::Annulus {
            center,
            inner: num("initial.inner_radius", radius / 2.0)?,
            outer: radius,
        },
        "csv" => match get("initial.path") {
            Some((_, p)) => InitialData::Csv(PathBuf::from(p)),
            None => return Err(err("initial.path", "csv initial data needs a path".into())),
        },
        other => return Err(err("initial.kind", format!("unknown kind `{other}`"))),
    };
    Ok(data)
}
