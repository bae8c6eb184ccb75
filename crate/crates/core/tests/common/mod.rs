#![allow(dead_code)]

use heleshaw::grid::{Grid, ScalarField};
use heleshaw::nutrient;
use heleshaw::pme::{PmeParams, SimState, Simulation};

/// Barenblatt profile for `ρ_t = ∇·(ρ∇ρ^γ)` in 1D, written through the
/// standard form `v_s = Δ(v^m)` with `m = γ + 1` and `s = γ t / (γ + 1)`.
pub fn barenblatt(gamma: f64, c: f64, t: f64, x: f64) -> f64 {
    let m = gamma + 1.0;
    let s = gamma / m * t;
    let alpha = 1.0 / (m + 1.0);
    let k = alpha * (m - 1.0) / (2.0 * m);
    let inner = c - k * x * x * s.powf(-2.0 * alpha);
    s.powf(-alpha) * inner.max(0.0).powf(1.0 / (m - 1.0))
}

/// Relative L¹ error of the PME stepper against the Barenblatt profile,
/// started at `s = 1` and compared at `s = 2`.
pub fn barenblatt_error(gamma: f64, cells: usize) -> f64 {
    let g = Grid::centered(1, cells, -6.0, 6.0).unwrap();
    let kappa = gamma / (gamma + 1.0);
    let (t0, t1) = (1.0 / kappa, 2.0 / kappa);
    let rho = ScalarField::from_fn(g, |x| barenblatt(gamma, 1.0, t0, x[0]));
    let state = SimState::new(t0, rho, ScalarField::zeros(g), gamma).unwrap();
    let mut sim = Simulation::new(state, PmeParams::new(gamma, 0.0)).unwrap();
    let mut t = t0;
    while t < t1 {
        let dt = (0.9 * sim.stable_dt()).min(t1 - t);
        sim.step(dt).unwrap();
        t += dt;
    }
    let exact = ScalarField::from_fn(g, |x| barenblatt(gamma, 1.0, t1, x[0]));
    sim.state().rho.l1_distance(&exact) / exact.integral()
}

pub fn heat_kernel(t: f64, x: [f64; 2]) -> f64 {
    (-(x[0] * x[0] + x[1] * x[1]) / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t)
}

/// Relative sup error of the nutrient step with `ρ ≡ 0` against the heat
/// kernel, from `t = 0.1` to `t = 0.3`.
pub fn heat_kernel_error(cells: usize) -> f64 {
    let g = Grid::centered(2, cells, -4.0, 4.0).unwrap();
    let (t0, t1, steps) = (0.1, 0.3, 200);
    let dt = (t1 - t0) / steps as f64;
    let rho = ScalarField::zeros(g);
    let params = nutrient::NutrientParams::new(dt);
    let mut n = ScalarField::from_fn(g, |x| heat_kernel(t0, x));
    let mut ws = nutrient::NutrientWorkspace::default();
    for _ in 0..steps {
        nutrient::step_nutrient_in_place(&mut n, &rho, &params, &mut ws).unwrap();
    }
    let exact = ScalarField::from_fn(g, |x| heat_kernel(t1, x));
    n.linf_distance(&exact) / exact.linf()
}

pub type Profile = Box<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

pub enum Expect {
    Regular { normal: [f64; 2] },
    Singular { kernel_dim: usize },
}

pub struct Synthetic {
    pub name: &'static str,
    pub u: Profile,
    pub expect: Expect,
}

fn unit(deg: f64) -> [f64; 2] {
    let a = deg.to_radians();
    [a.cos(), a.sin()]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Six profiles with known blowups, all with source `f = 1` at the origin.
pub fn corpus() -> Vec<Synthetic> {
    let e0 = [1.0, 0.0];
    let e1 = unit(37.0);
    let e2 = unit(-118.0);
    let e3 = unit(212.0);
    vec![
        Synthetic {
            name: "half_space",
            u: Box::new(move |x| 0.5 * dot(x, e0).max(0.0).powi(2)),
            expect: Expect::Regular { normal: [-1.0, 0.0] },
        },
        Synthetic {
            name: "rotated_half_space",
            u: Box::new(move |x| 0.5 * dot(x, e1).max(0.0).powi(2)),
            expect: Expect::Regular { normal: [-e1[0], -e1[1]] },
        },
        Synthetic {
            name: "isotropic",
            u: Box::new(|x| 0.25 * dot(x, x)),
            expect: Expect::Singular { kernel_dim: 0 },
        },
        Synthetic {
            name: "strip",
            u: Box::new(|x| 0.5 * x[0] * x[0]),
            expect: Expect::Singular { kernel_dim: 1 },
        },
        Synthetic {
            name: "rotated_strip",
            u: Box::new(move |x| 0.5 * dot(x, e2).powi(2)),
            expect: Expect::Singular { kernel_dim: 1 },
        },
        Synthetic {
            name: "perturbed_half_space",
            u: Box::new(move |x| {
                let s = dot(x, e3).max(0.0);
                0.5 * s * s + 0.3 * s * s * s + 0.2 * s * s * x[0] * x[1]
            }),
            expect: Expect::Regular { normal: [-e3[0], -e3[1]] },
        },
    ]
}

pub const LADDER: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

pub fn angle_deg(a: [f64; 2], b: [f64; 2]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Label and normal/kernel mismatch of one corpus entry; `None` when the
/// classification matches.
pub fn corpus_mismatch(s: &Synthetic) -> Option<String> {
    use heleshaw::obstacle::{blowup_fn, classify, Label};
    let prof = blowup_fn(&s.u, 2, [0.0; 2], &LADDER, 0.0).unwrap();
    let c = classify(&prof, 1.0).unwrap();
    match s.expect {
        Expect::Regular { normal } => {
            if c.label != Label::Regular {
                return Some(format!("{}: expected regular, got {:?}", s.name, c.label));
            }
            let err = angle_deg(c.normal.unwrap(), normal);
            (err > 2.0).then(|| format!("{}: normal off by {err:.3} degrees", s.name))
        }
        Expect::Singular { kernel_dim } => {
            if c.label != Label::Singular || c.kernel_dim != Some(kernel_dim) {
                Some(format!("{}: expected singular/{kernel_dim}, got {:?}/{:?}", s.name, c.label, c.kernel_dim))
            } else {
                None
            }
        }
    }
}

/// Samples `u` on a grid whose box is `[−s, s]²` and returns the field of
/// `s² u(x/s)`.
pub fn scaled_field(u: &Profile, cells: usize, s: f64) -> ScalarField {
    let g = Grid::centered(2, cells, -s, s).unwrap();
    ScalarField::from_fn(g, |x| s * s * u([x[0] / s, x[1] / s]))
}

/// Singular obstacle problems with a Hölder source and a closed-form
/// solution: `(name, f, u, q, seminorm, exponent)`, singular at the origin.
pub struct SolvedSingular {
    pub name: &'static str,
    pub f: fn([f64; 2]) -> f64,
    pub u: fn([f64; 2]) -> f64,
    pub q: [[f64; 2]; 2],
    pub seminorm: f64,
    pub alpha: f64,
}

pub fn solved_singular() -> Vec<SolvedSingular> {
    vec![
        SolvedSingular {
            name: "strip",
            f: |x| 1.0 + 0.2 * x[0].abs().sqrt(),
            u: |x| 0.5 * x[0] * x[0] + 0.2 * x[0].abs().powf(2.5) / 3.75,
            q: [[1.0, 0.0], [0.0, 0.0]],
            seminorm: 0.2,
            alpha: 0.5,
        },
        SolvedSingular {
            name: "isotropic",
            f: |x| 1.0 + 0.2 * x[0].hypot(x[1]).sqrt(),
            u: |x| 0.25 * (x[0] * x[0] + x[1] * x[1]) + 0.032 * x[0].hypot(x[1]).powf(2.5),
            q: [[0.5, 0.0], [0.0, 0.5]],
            seminorm: 0.2,
            alpha: 0.5,
        },
        SolvedSingular {
            name: "rotated_strip",
            f: |x| 1.0 + 0.1 * (0.6 * x[0] + 0.8 * x[1]).abs().sqrt(),
            u: |x| {
                let s = 0.6 * x[0] + 0.8 * x[1];
                0.5 * s * s + 0.1 * s.abs().powf(2.5) / 3.75
            },
            q: [[0.36, 0.48], [0.48, 0.64]],
            seminorm: 0.1,
            alpha: 0.5,
        },
    ]
}

/// Solves the obstacle problem of `case` on `[−1, 1]²` with exact boundary
/// data.
pub fn solve_singular(case: &SolvedSingular, cells: usize) -> ScalarField {
    use heleshaw::obstacle::{solve_obstacle, ObstacleProblem};
    let g = Grid::centered(2, cells, -1.0, 1.0).unwrap();
    let prob = ObstacleProblem::new(ScalarField::from_fn(g, case.f), ScalarField::from_fn(g, case.u)).unwrap();
    solve_obstacle(&prob).unwrap()
}

pub const MONNEAU_LADDER: [f64; 6] = [0.5, 0.4, 0.3, 0.25, 0.2, 0.15];

/// Monneau ladder drift for each solved singular case.
pub fn monneau_drifts(cells: usize) -> Vec<(&'static str, f64)> {
    use heleshaw::obstacle::{monneau, monneau_drift};
    solved_singular()
        .iter()
        .map(|c| {
            let u = solve_singular(c, cells);
            let v = monneau(&u, [0.0; 2], &c.q, &MONNEAU_LADDER).unwrap();
            (c.name, monneau_drift(&v, c.seminorm, c.alpha))
        })
        .collect()
}
