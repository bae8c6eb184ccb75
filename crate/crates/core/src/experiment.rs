//! Config-driven pipeline: simulate, accumulate, run the enabled checks and
//! write the artifact directory.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::baiocchi::{self, BaiocchiField, HittingField};
use crate::barrier::{self, BarrierConfig};
use crate::config::{ExperimentConfig, InitialData, CHECKS};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::hopflax::{self, HopfLaxParams};
use crate::io;
use crate::limit;
use crate::nutrient;
use crate::obstacle::{self, Label};
use crate::pme::{self, SimState};
use crate::report::{Entry, VerificationReport};
use crate::run::{self, Run, RunSpec};

pub fn build_grid(cfg: &ExperimentConfig) -> Result<Grid> {
    Grid::centered(cfg.dim, cfg.cells, cfg.lo, cfg.hi)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Cells inside the initial tumour.
pub fn initial_patch(cfg: &ExperimentConfig, grid: &Grid) -> Result<Vec<bool>> {
    let inside = |x: [f64; 2]| match &cfg.initial {
        InitialData::Disk { center, radius } => dist(x, *center) < *radius,
        InitialData::TwoDisks { a, b } => dist(x, a.0) < a.1 || dist(x, b.0) < b.1,
        InitialData::Annulus { center, inner, outer } => {
            let r = dist(x, *center);
            r >= *inner && r < *outer
        }
        InitialData::Csv(_) => false,
    };
    let patch: Vec<bool> = match &cfg.initial {
        InitialData::Csv(path) => {
            let f = io::read_field(path)?;
            if f.grid().dim() != grid.dim() || f.grid().cells_per_axis() != grid.cells_per_axis() {
                return Err(Error::InvalidGrid(format!(
                    "{} does not match the configured grid",
                    path.display()
                )));
            }
            f.values().iter().map(|&v| v > 0.5).collect()
        }
        _ => (0..grid.len()).map(|k| inside(grid.center(k))).collect(),
    };
    if !patch.iter().any(|&b| b) {
        return Err(Error::EmptySaturatedSet);
    }
    Ok(patch)
}

pub fn run_spec(cfg: &ExperimentConfig, gamma: f64) -> RunSpec {
    RunSpec {
        moment_every: cfg.moment_every,
        safety: cfg.safety,
        limiter: cfg.limiter,
        nutrient_theta: cfg.nutrient_theta,
        absorption: cfg.absorption,
        ..RunSpec::new(gamma, cfg.tau, cfg.snapshots)
    }
}

/// One run per configured γ, in increasing γ.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<Run>> {
    let grid = build_grid(cfg)?;
    let patch = initial_patch(cfg, &grid)?;
    cfg.gammas
        .par_iter()
        .map(|&gamma| {
            let tag = |e: Error| Error::Sweep {
                gamma,
                source: Box::new(e),
            };
            let s0 = pme::prepared_state(&patch, ScalarField::constant(grid, cfg.n0), gamma).map_err(tag)?;
            run::run(s0, &run_spec(cfg, gamma)).map_err(tag)
        })
        .collect()
}

/// Checks each subcommand owns.
pub fn checks_for(command: &str) -> &'static [&'static str] {
    match command {
        "simulate" => &["nutrient_lower_bound", "mass_balance", "pressure_consistency", "obstacle_identity"],
        "sweep" => &["ab_moment", "ab_monotone", "sweep_cauchy", "nutrient_lower_bound"],
        "hopflax" => &["hopf_lax", "hjb_weak"],
        "barrier" => &["constants", "barrier_comparison", "holder_exponent"],
        "classify" => &["normal_map", "nondegeneracy"],
        _ => &CHECKS,
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: VerificationReport,
    pub warnings: Vec<String>,
}

fn check<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Check {
        check: name.to_string(),
        source: Box::new(e),
    })
}

/// Runs the simulation and every enabled check, writing artifacts under
/// `out` when given.
pub fn execute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome> {
    let needs_runs = cfg.checks.iter().any(|c| c != "constants");
    let runs = if needs_runs { simulate(cfg)? } else { Vec::new() };
    evaluate(cfg, &runs, out)
}

pub fn evaluate(cfg: &ExperimentConfig, runs: &[Run], out: Option<&Path>) -> Result<Outcome> {
    let mut report = VerificationReport::new();
    let mut warnings = Vec::new();
    for r in runs {
        if r.min_margin < 5 {
            warnings.push(format!(
                "gamma = {}: support came within {} cells of the box edge",
                r.gamma, r.min_margin
            ));
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_run_fields(runs, dir)?;
    }
    let top = runs.last();
    for &name in CHECKS.iter() {
        if !cfg.enabled(name) {
            continue;
        }
        let tol = cfg.tolerance(name);
        let entry = match (name, top) {
            ("constants", _) => Some(constants_entry(tol)?),
            ("nutrient_lower_bound", Some(_)) => {
                let v = runs
                    .iter()
                    .map(|r| nutrient::lower_bound_violation(r.nutrient_history(), r.n0_min))
                    .fold(0.0, f64::max);
                Some(Entry::at_most(name, v, tol, "min n(t) ≥ e^{−t} min n(0)"))
            }
            ("mass_balance", Some(_)) => {
                let v = runs.iter().map(|r| r.max_mass_defect).fold(0.0, f64::max);
                Some(Entry::at_most(name, v, tol, "|Δ∫ρ − ∫ρn dt| / ∫ρ per step"))
            }
            ("pressure_consistency", Some(r)) => {
                let s = &r.last().state;
                let e = check(name, pme::pressure_consistency(s, cfg.pressure_threshold.unwrap_or(pme::saturation_threshold(r.gamma)), tol))?;
                Some(e)
            }
            ("ab_moment", Some(_)) if runs.len() >= 2 => Some(check(name, ab_entry(runs, tol, out))?),
            ("ab_monotone", Some(_)) => Some(ab_monotone_entry(runs, tol)),
            ("sweep_cauchy", Some(_)) if runs.len() >= 3 => {
                let d: Vec<f64> = limit::l1_to_next(runs).into_iter().flatten().collect();
                let ups = d.windows(2).filter(|w| w[1] > w[0]).count();
                Some(Entry::at_most(name, ups as f64, tol, "‖ρ_γ(τ) − ρ_γ'(τ)‖₁ decreasing along the sweep"))
            }
            ("obstacle_identity", Some(r)) => {
                let last = r.last();
                let bf = BaiocchiField {
                    t: last.time(),
                    w: last.w.clone(),
                    eta: last.eta.clone(),
                };
                Some(check(name, baiocchi::obstacle_residual(&bf, &r.first().state.rho, &last.state.rho, tol))?)
            }
            ("hopf_lax", Some(r)) => Some(check(name, hopf_lax_entry(cfg, runs, r, tol, out))?),
            ("hjb_weak", Some(r)) => Some(hopflax::hjb_entry(&check(name, hopflax::hjb_residual(r))?, tol)),
            ("barrier_comparison", Some(r)) if r.grid.dim() == 2 => {
                Some(check(name, barrier_entry(cfg, r, tol, out))?)
            }
            ("holder_exponent", Some(r)) if r.grid.dim() == 2 => Some(check(name, holder_entry(cfg, r, tol))?),
            ("normal_map", Some(r)) | ("nondegeneracy", Some(r)) if r.grid.dim() == 2 => {
                if report.get(name).is_none() {
                    let hit = hitting_field(r)?;
                    let (a, b) = check(name, classify_field(cfg, &r.last().w, Some(&hit), flat_source(r), out))?;
                    if cfg.enabled("normal_map") {
                        report.push(a);
                    }
                    if cfg.enabled("nondegeneracy") {
                        report.push(b);
                    }
                }
                None
            }
            _ => {
                warnings.push(format!("check `{name}` skipped: not applicable to this experiment"));
                None
            }
        };
        if let Some(e) = entry {
            report.push(e);
        }
    }
    if let Some(dir) = out {
        report.write_csv(&dir.join("report.csv"))?;
    }
    Ok(Outcome { report, warnings })
}

fn write_run_fields(runs: &[Run], dir: &Path) -> Result<()> {
    let Some(top) = runs.last() else { return Ok(()) };
    let fields = dir.join("fields");
    let s = top.last();
    io::write_field(&fields.join("rho_final.csv"), "rho", &s.state.rho)?;
    io::write_field(&fields.join("p_final.csv"), "p", &s.state.p)?;
    io::write_field(&fields.join("n_final.csv"), "n", &s.state.n)?;
    io::write_field(&fields.join("w_final.csv"), "w", &s.w)?;
    io::write_field(&fields.join("eta_final.csv"), "eta", &s.eta)?;
    let hit = hitting_field(top)?;
    let t = ScalarField::from_values(top.grid, hit.t.iter().map(|&v| if v.is_finite() { v } else { -1.0 }).collect())?;
    io::write_field(&fields.join("hitting_time.csv"), "T", &t)?;
    if runs.len() > 1 {
        for r in runs {
            let sub = dir.join(format!("gamma_{}", r.gamma)).join("fields");
            io::write_field(&sub.join("rho_final.csv"), "rho", &r.last().state.rho)?;
            io::write_field(&sub.join("p_final.csv"), "p", &r.last().state.p)?;
        }
    }
    Ok(())
}

fn constants_entry(tol: f64) -> Result<Entry> {
    let c2 = barrier::exponent_constants(2)?;
    let c3 = barrier::exponent_constants(3)?;
    let err = [
        (c2.alpha - 2.0 / std::f64::consts::E).abs(),
        (c3.alpha - 16.0 / 27.0).abs(),
        (c2.alpha - 2.0 / c2.xi).abs(),
        (c3.alpha - 2.0 / c3.xi).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(Entry::at_most("constants", err, tol, "α_d = 2/ξ_d, ξ_d = (d/2)^{d/(d−2)}, α₂ = 2/e, α₃ = 16/27"))
}

fn ab_entry(runs: &[Run], tol: f64, out: Option<&Path>) -> Result<Entry> {
    let refs: Vec<&Run> = runs.iter().collect();
    let b = limit::calibrate_b(&refs)?;
    let m: Vec<f64> = runs.iter().map(|r| limit::ab_moment(r, b).map(|a| a.value)).collect::<Result<_>>()?;
    let hi = m.iter().copied().fold(0.0, f64::max);
    let lo = m.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(dir) = out {
        limit::write_sweep_csv(&dir.join("sweep.csv"), runs, b)?;
    }
    let ratio = if lo > 0.0 { hi / lo } else if hi == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(Entry::at_most(
        "ab_moment",
        ratio,
        tol,
        "max_γ M_b / min_γ M_b, M_b = ∫∫ (b u₊ − 1) e^{b u₊} + 1",
    ))
}

fn ab_monotone_entry(runs: &[Run], tol: f64) -> Entry {
    let mut breaks = 0usize;
    for r in runs {
        let vals: Vec<f64> = limit::ladder().filter_map(|b| r.moments.moment(b).ok()).collect();
        // ladder runs from large to small b
        breaks += vals.windows(2).filter(|w| w[1] > w[0]).count();
    }
    Entry::at_most("ab_monotone", breaks as f64, tol, "b ↦ M_b nondecreasing")
}

fn hopf_lax_entry(cfg: &ExperimentConfig, runs: &[Run], top: &Run, tol: f64, out: Option<&Path>) -> Result<Entry> {
    let refs: Vec<&Run> = runs.iter().collect();
    let b = limit::calibrate_b(&refs)?;
    let base = HopfLaxParams {
        b,
        c: 1.0,
        theta: cfg.hopflax_theta,
        pair_count: cfg.hopflax_pairs,
        seed: cfg.seed,
    };
    let found = hopflax::scan_c(top, &base, tol)?;
    let outcome = match found {
        Some(o) => o,
        None => hopflax::verify_hopf_lax(
            top,
            &HopfLaxParams {
                c: 2f64.powi(hopflax::C_SCAN_MAX),
                ..base
            },
        )?,
    };
    if let Some(dir) = out {
        io::write_table(
            &dir.join("hopflax_pairs.csv"),
            &hopflax::PAIR_HEADER,
            outcome.rows.iter().map(|r| r.to_vec()),
        )?;
    }
    let mut e = hopflax::hopf_lax_entry(&outcome, tol);
    e.anchor = format!("{} at C = {}", e.anchor, outcome.c);
    Ok(e)
}

fn patch_centroid(grid: &Grid, rho: &ScalarField) -> [f64; 2] {
    let (mut sx, mut sy, mut m) = (0.0, 0.0, 0.0);
    for k in 0..grid.len() {
        let c = grid.center(k);
        sx += rho[k] * c[0];
        sy += rho[k] * c[1];
        m += rho[k];
    }
    [sx / m, sy / m]
}

/// Default barrier centre: one unit beyond the rightmost occupied cell, on
/// the row of the centroid.
pub fn default_barrier(cfg: &ExperimentConfig, run: &Run) -> Result<BarrierConfig> {
    let grid = run.grid;
    let rho0 = &run.first().state.rho;
    let centroid = patch_centroid(&grid, rho0);
    let right = (0..grid.len())
        .filter(|&k| rho0[k] > 0.0)
        .map(|k| grid.center(k)[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let center = cfg.barrier_center.unwrap_or([right + 1.0, centroid[1]]);
    let m = match cfg.barrier_m {
        Some(m) => m,
        None => barrier::exponent_constants(grid.dim())?.m_star,
    };
    Ok(BarrierConfig::from_run(run, center, cfg.barrier_r0.unwrap_or(0.9), m))
}

fn barrier_entry(cfg: &ExperimentConfig, run: &Run, tol: f64, out: Option<&Path>) -> Result<Entry> {
    let bc = default_barrier(cfg, run)?;
    let cmp = barrier::verify_comparison(run, &bc)?;
    if let Some(dir) = out {
        io::write_table(&dir.join("trajectory.csv"), &barrier::TRAJECTORY_HEADER, cmp.trajectory.rows())?;
    }
    Ok(cmp.entry(tol))
}

pub fn hitting_field(run: &Run) -> Result<HittingField> {
    let ws: Vec<(f64, &ScalarField)> = run.snapshots.iter().map(|s| (s.time(), &s.w)).collect();
    baiocchi::hitting_time(&ws, baiocchi::default_w_min(&run.last().w))
}

/// Hölder fits at up to `holder_points` cells reached inside the window,
/// spread by angle about the initial centroid. Returns the fits.
pub fn holder_fits(cfg: &ExperimentConfig, run: &Run) -> Result<Vec<([f64; 2], f64)>> {
    let grid = run.grid;
    let hit = hitting_field(run)?;
    let t0 = run.first().time();
    let span = run.last().time() - t0;
    let (lo, hi) = (t0 + cfg.holder_window[0] * span, t0 + cfg.holder_window[1] * span);
    let centroid = patch_centroid(&grid, &run.first().state.rho);
    let mut cands: Vec<(f64, usize)> = (0..grid.len())
        .filter(|&k| hit.t[k] >= lo && hit.t[k] <= hi)
        .map(|k| {
            let c = grid.center(k);
            ((c[1] - centroid[1]).atan2(c[0] - centroid[0]), k)
        })
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if cands.is_empty() {
        return Err(Error::EmptyInput("cells reached inside the holder window"));
    }
    let count = cfg.holder_points.max(1).min(cands.len());
    let radii: Vec<f64> = [3.0, 4.0, 6.0, 8.0].iter().map(|m| m * grid.h()).collect();
    let mut fits = Vec::new();
    for i in 0..count {
        let k = cands[i * cands.len() / count].1;
        let x = grid.center(k);
        if let Ok(f) = baiocchi::holder_exponent(&hit, x, &radii) {
            fits.push((x, f.alpha));
        }
    }
    if fits.is_empty() {
        return Err(Error::DegenerateFit("no holder point produced a fit".into()));
    }
    Ok(fits)
}

fn holder_entry(cfg: &ExperimentConfig, run: &Run, tol: f64) -> Result<Entry> {
    let alpha2 = barrier::exponent_constants(2)?.alpha;
    let fits = holder_fits(cfg, run)?;
    let worst = fits.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    Ok(Entry::at_least(
        "holder_exponent",
        worst,
        alpha2 - tol,
        "min over points of the log-log slope of sup_{B_R(x1)} (T(x1) − T)₊, against α₂ − tol",
    ))
}

/// `Δw` on newly invaded cells is `1 − η`; its minimum over the reached
/// cells outside the initial patch.
fn flat_source(run: &Run) -> f64 {
    let last = run.last();
    let thr = pme::saturation_threshold(run.gamma);
    let w_min = baiocchi::default_w_min(&last.w);
    let rho0 = &run.first().state.rho;
    let eta_max = (0..run.grid.len())
        .filter(|&k| rho0[k] <= thr && last.w[k] > w_min)
        .map(|k| last.eta[k])
        .fold(0.0, f64::max);
    1.0 - eta_max
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedPoint {
    pub point: [f64; 2],
    pub t: f64,
    pub classification: obstacle::Classification,
    pub monneau_drift: Option<f64>,
    pub nondegeneracy: Option<f64>,
}

/// Classifies every free-boundary cell of `w`.
pub fn classify_points(
    cfg: &ExperimentConfig,
    w: &ScalarField,
    points: &[[f64; 2]],
    lambda: f64,
) -> Result<(Vec<ClassifiedPoint>, f64)> {
    let g = *w.grid();
    let zero_tol = baiocchi::default_w_min(w);
    let radii: Vec<f64> = cfg.classify_radii.iter().map(|r| r * g.h()).collect();
    let map = obstacle::normal_map(
        w,
        points,
        &radii,
        1.0,
        zero_tol,
        cfg.classify_alpha,
        cfg.classify_pair_cells * g.h(),
    )?;
    let pts = map
        .entries
        .into_par_iter()
        .map(|e| {
            let nd = obstacle::nondegeneracy_check(w, e.point, &radii, lambda);
            let drift = if e.classification.label == Label::Singular {
                let prof = obstacle::blowup(w, e.point, &radii, zero_tol)?;
                let q = prof.last().map(|p| p.q).unwrap_or([[0.0; 2]; 2]);
                let vals = obstacle::monneau(w, e.point, &q, &radii)?;
                Some(obstacle::monneau_drift(&vals, 0.0, 1.0))
            } else {
                None
            };
            Ok(ClassifiedPoint {
                point: e.point,
                t: f64::NAN,
                classification: e.classification,
                monneau_drift: drift,
                nondegeneracy: nd.min_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((pts, map.seminorm))
}

pub fn write_classification(path: &Path, pts: &[ClassifiedPoint]) -> Result<()> {
    let mut w = io::writer(path)?;
    let err = |e| io::csv_err(path, e);
    w.write_record(obstacle::CLASSIFICATION_HEADER).map_err(err)?;
    for p in pts {
        let c = &p.classification;
        let nu = c.normal.unwrap_or([f64::NAN; 2]);
        w.write_record([
            io::fmt(p.point[0]),
            io::fmt(p.point[1]),
            io::fmt(p.t),
            c.label.as_str().to_string(),
            io::fmt(nu[0]),
            io::fmt(nu[1]),
            c.kernel_dim.map(|k| k.to_string()).unwrap_or_default(),
            io::fmt(c.density_at_min_r()),
            p.monneau_drift.map(io::fmt).unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Classification of all boundary cells of `w`, returning the normal
/// seminorm and nondegeneracy entries.
pub fn classify_field(
    cfg: &ExperimentConfig,
    w: &ScalarField,
    hit: Option<&HittingField>,
    lambda: f64,
    out: Option<&Path>,
) -> Result<(Entry, Entry)> {
    let g = *w.grid();
    let zero_tol = baiocchi::default_w_min(w);
    let points: Vec<[f64; 2]> = obstacle::boundary_cells(w, zero_tol).into_iter().map(|k| g.center(k)).collect();
    let (mut pts, seminorm) = classify_points(cfg, w, &points, lambda)?;
    if let Some(hit) = hit {
        for p in &mut pts {
            // boundary cells sit just outside the reached set
            let k = g.locate(p.point);
            p.t = g
                .neighbours(k)
                .iter()
                .map(|&m| hit.t[m])
                .fold(hit.t[k], f64::min);
        }
    }
    if let Some(dir) = out {
        write_classification(&dir.join("classification.csv"), &pts)?;
    }
    let regular = pts.iter().filter(|p| p.classification.label == Label::Regular).count();
    let worst = pts.iter().filter_map(|p| p.nondegeneracy).fold(f64::INFINITY, f64::min);
    let normal = Entry::at_most(
        "normal_map",
        if regular >= 2 { seminorm } else { f64::INFINITY },
        cfg.tolerance("normal_map"),
        "max |ν(x) − ν(y)| / |x − y|^{α/(1+α)} over nearby regular points",
    );
    let tol = cfg.tolerance("nondegeneracy");
    let nd = Entry::at_least(
        "nondegeneracy",
        worst,
        1.0 - tol,
        "sup_{B_r} w ≥ (1 − ε)(λ/2d) r², ratio to (λ/2d) r²",
    );
    Ok((normal, nd))
}

/// Union of several `report.csv` files, one per directory.
pub fn merge_reports(dirs: &[PathBuf]) -> Result<VerificationReport> {
    let reports = dirs
        .iter()
        .map(|d| VerificationReport::read_csv(&d.join("report.csv")))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationReport::merge(reports))
}

/// Initial state for a configured experiment at one γ.
pub fn initial_state(cfg: &ExperimentConfig, gamma: f64) -> Result<SimState> {
    let grid = build_grid(cfg)?;
    let patch = initial_patch(cfg, &grid)?;
    pme::prepared_state(&patch, ScalarField::constant(grid, cfg.n0), gamma)
}
