use heleshaw::barrier::{exponent_constants, integrate_radius, psi_profile, BarrierConfig};
use heleshaw::baiocchi::Accumulator;
use heleshaw::config::ExperimentConfig;
use heleshaw::experiment;
use heleshaw::hopflax::{big_lambda, lambda_schedule, HopfLaxParams};
use heleshaw::limit::{ladder, MomentAccumulator};
use heleshaw::nutrient::{step_nutrient, NutrientParams};
use heleshaw::obstacle::quadratic_growth;
use heleshaw::pme::{prepared_state, pressure_of, PmeParams, SimState, Simulation};
use heleshaw::run::{run, RunSpec};
use heleshaw::{Grid, ScalarField};
use proptest::prelude::*;
use std::sync::Arc;

mod common;

fn grid(n: usize) -> Grid {
    Grid::centered(2, n, -2.0, 2.0).unwrap()
}

fn field(n: usize, vals: Vec<f64>) -> ScalarField {
    ScalarField::from_values(grid(n), vals).unwrap()
}

fn disk(g: &Grid, r: f64) -> Vec<bool> {
    (0..g.len())
        .map(|k| {
            let x = g.center(k);
            x[0] * x[0] + x[1] * x[1] < r * r
        })
        .collect()
}

fn sim(n: usize, r: f64, n0: f64, gamma: f64) -> Simulation {
    let g = grid(n);
    let st = prepared_state(&disk(&g, r), ScalarField::constant(g, n0), gamma).unwrap();
    Simulation::new(st, PmeParams::new(gamma, 1.0)).unwrap()
}

const N: usize = 16;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, N * N),
        b in prop::collection::vec(-1.0f64..1.0, N * N),
        s in -3.0f64..3.0,
    ) {
        let (fa, fb) = (field(N, a), field(N, b));
        let comb = fa.zip_map(&fb, |x, y| x + s * y);
        let lhs = comb.laplacian().unwrap();
        let (la, lb) = (fa.laplacian().unwrap(), fb.laplacian().unwrap());
        let rhs = la.zip_map(&lb, |x, y| x + s * y);
        prop_assert!(lhs.linf_distance(&rhs) <= 1e-9 * (1.0 + rhs.linf()));
    }

    #[test]
    fn grad_sq_scales_quadratically(a in prop::collection::vec(-1.0f64..1.0, N * N), s in -4.0f64..4.0) {
        let f = field(N, a);
        let g1 = f.grad_sq().unwrap();
        let g2 = f.map(|v| s * v).grad_sq().unwrap();
        let scaled = g1.map(|v| s * s * v);
        prop_assert!(g2.linf_distance(&scaled) <= 1e-9 * (1.0 + scaled.linf()));
    }

    #[test]
    fn laplacian_sums_to_boundary_flux_only(a in prop::collection::vec(0.0f64..1.0, N * N)) {
        // compactly supported data: zero the outer two rings
        let g = grid(N);
        let mut f = field(N, a);
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            if i < 2 || j < 2 || i + 2 >= N || j + 2 >= N {
                f[k] = 0.0;
            }
        }
        let l = f.laplacian().unwrap();
        let abs: f64 = l.values().iter().map(|v| v.abs()).sum();
        prop_assert!(l.sum().abs() <= 1e-10 * abs.max(1.0));
    }

    #[test]
    fn nutrient_stays_positive_and_below_its_max(
        n in prop::collection::vec(0.01f64..2.0, N * N),
        rho in prop::collection::vec(0.0f64..1.0, N * N),
        dt in 1e-4f64..0.2,
        implicit in any::<bool>(),
    ) {
        // Crank-Nicolson keeps positivity only under h² / d
        let h = grid(N).h();
        let (theta, dt) = if implicit { (1.0, dt) } else { (0.5, dt.min(h * h / 2.0)) };
        let params = NutrientParams::new(dt).with_theta(theta);
        let (mut nf, rf) = (field(N, n), field(N, rho));
        let top = nf.max();
        for _ in 0..8 {
            nf = step_nutrient(&nf, &rf, &params).unwrap();
            prop_assert!(nf.min() >= 0.0);
            prop_assert!(nf.max() <= top * (1.0 + 1e-12));
        }
    }

    #[test]
    fn moments_grow_with_b(
        fields in prop::collection::vec(prop::collection::vec(-2.0f64..6.0, 64), 2..5),
    ) {
        let g = Grid::centered(2, 8, -1.0, 1.0).unwrap();
        let mut acc = MomentAccumulator::new();
        for (i, v) in fields.into_iter().enumerate() {
            acc.sample(0.1 * (i + 1) as f64, &ScalarField::from_values(g, v).unwrap()).unwrap();
        }
        let vals: Vec<f64> = ladder().map(|b| acc.moment(b).unwrap()).collect();
        for w in vals.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300, "{vals:?}");
        }
    }

    #[test]
    fn schedules_are_monotone(theta in 0.0f64..2.0, b in 0.05f64..1.0, c in 0.0f64..5.0, s in 1e-3f64..10.0, ds in 1e-3f64..5.0) {
        prop_assert!(lambda_schedule(theta, s + ds).unwrap() < lambda_schedule(theta, s).unwrap());
        let mut p = HopfLaxParams::new(b, c);
        p.theta = theta;
        prop_assert!(big_lambda(&p, s + ds).unwrap() > big_lambda(&p, s).unwrap());
    }

    #[test]
    fn barrier_profile_meets_its_boundary_values(
        d in 2usize..4,
        m in 1.2f64..4.0,
        r in 0.05f64..2.0,
        nbar0 in 0.0f64..3.0,
        pbar in 0.0f64..2.0,
    ) {
        let cfg = BarrierConfig::with_constant_pbar(d, r, m, nbar0, pbar);
        let prof = psi_profile(&cfg, 0.0, r).unwrap();
        let scale = 1.0 + pbar + nbar0 * m * m * r * r;
        prop_assert!(prof.annulus(r).abs() <= 1e-10 * scale);
        prop_assert!((prof.annulus(m * r) - pbar).abs() <= 1e-10 * scale);
        prop_assert_eq!(prof.eval(0.5 * r), 0.0);
        prop_assert_eq!(prof.eval(2.0 * m * r), pbar);
    }

    #[test]
    fn barrier_radius_decreases(d in 2usize..4, m in 1.2f64..4.0, nbar0 in 0.0f64..3.0, pbar in 0.0f64..1.0) {
        prop_assume!(nbar0 + pbar > 1e-3);
        let cfg = BarrierConfig::with_constant_pbar(d, 1.0, m, nbar0, pbar);
        let tr = integrate_radius(&cfg, 0.5, 1e-4, 0.05).unwrap();
        for w in tr.points.windows(2) {
            prop_assert!(w[1].r <= w[0].r);
        }
    }

    #[test]
    fn gronwall_bound_with_random_h(d in 2usize..4, h0 in 0.05f64..0.5, amp in 0.0f64..0.04, freq in 0.5f64..6.0) {
        let c = exponent_constants(d).unwrap();
        let hfun = move |t: f64| h0 + amp * (freq * t).sin();
        let mut cfg = BarrierConfig::with_constant_pbar(d, 1.0, c.m_star, 1.0, 0.0);
        cfg.pbar = Arc::new(move |t, radius| radius * radius * hfun(t));
        let k = cfg.decay_rate().unwrap();
        let tr = integrate_radius(&cfg, 0.5, 1e-3, 0.0).unwrap();
        let mut hbar = 0.0;
        for w in tr.points.windows(2) {
            let (t0, t1) = (w[0].t, w[1].t);
            hbar += 4.0 * (t1 - t0) / 6.0 * (hfun(t0) + 4.0 * hfun((t0 + t1) / 2.0) + hfun(t1));
            let bound = (-2.0 * k * t1 - c.xi * hbar).exp();
            let z = w[1].r * w[1].r;
            prop_assert!((z / bound - 1.0).abs() < 1e-2, "t={t1}: {z} vs {bound}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn pme_steps_balance_mass_and_keep_pressure(r in 0.4f64..0.8, n0 in 0.5f64..2.0, gamma in 5.0f64..60.0) {
        let mut s = sim(24, r, n0, gamma);
        for _ in 0..20 {
            let before = s.state().rho.clone();
            let dt = s.stable_dt();
            let stats = s.step(dt).unwrap();
            prop_assert!(stats.mass_defect() <= 1e-8, "{}", stats.mass_defect());
            let st = s.state();
            for k in 0..st.rho.values().len() {
                prop_assert_eq!(st.p[k], pressure_of(st.rho[k], gamma));
                if before[k] >= 1.0 - 1.0 / gamma {
                    prop_assert!(st.rho[k] >= 1.0 - 1.0 / gamma, "cell {k} left saturation");
                }
            }
        }
    }

    #[test]
    fn more_nutrient_never_shrinks_density(r in 0.4f64..0.7, n0 in 0.5f64..1.5, gamma in 5.0f64..40.0) {
        let g = grid(24);
        let base = prepared_state(&disk(&g, r), ScalarField::constant(g, n0), gamma).unwrap();
        let rich = SimState::new(0.0, base.rho.clone(), ScalarField::constant(g, 2.0 * n0), gamma).unwrap();
        let mut a = Simulation::new(base, PmeParams::new(gamma, 1.0)).unwrap();
        let mut b = Simulation::new(rich, PmeParams::new(gamma, 1.0)).unwrap();
        for _ in 0..20 {
            let dt = a.stable_dt().min(b.stable_dt());
            a.step(dt).unwrap();
            b.step(dt).unwrap();
            let (ra, rb) = (&a.state().rho, &b.state().rho);
            for k in 0..ra.values().len() {
                prop_assert!(rb[k] >= ra[k] - 1e-10, "cell {k}: {} < {}", rb[k], ra[k]);
            }
        }
    }

    #[test]
    fn baiocchi_positivity_set_only_grows(r in 0.4f64..0.8, n0 in 0.5f64..2.0, gamma in 5.0f64..60.0) {
        let s = sim(24, r, n0, gamma);
        let out = run(s.into_state(), &RunSpec::new(gamma, 0.05, 4)).unwrap();
        for w in out.snapshots.windows(2) {
            let (a, b) = (&w[0].w, &w[1].w);
            for k in 0..a.values().len() {
                prop_assert!(b[k] >= a[k]);
                if a[k] > 0.0 {
                    prop_assert!(b[k] > 0.0);
                }
            }
        }
        // the streaming accumulator agrees on containment too
        let mut acc = Accumulator::new(out.grid);
        let mut prev: Option<ScalarField> = None;
        for snap in &out.snapshots {
            let st = &snap.state;
            acc.push(st.time, &st.p, &st.rho, &st.n).unwrap();
            let w = acc.snapshot().w;
            if let Some(p) = &prev {
                for k in 0..w.values().len() {
                    prop_assert!(p[k] <= 0.0 || w[k] > 0.0);
                }
            }
            prev = Some(w);
        }
    }

    #[test]
    fn quadratic_growth_is_scale_invariant(idx in 0usize..6, s in 0.25f64..4.0) {
        let corpus = common::corpus();
        let u = &corpus[idx].u;
        // half-integer cell radii keep ties off the ball edge
        let h = 2.0 / 65.0;
        let radii = [6.5 * h, 12.5 * h, 18.5 * h];
        let base = quadratic_growth(&common::scaled_field(u, 65, 1.0), [0.0, 0.0], &radii, 1.0);
        let scaled = common::scaled_field(u, 65, s);
        let sr: Vec<f64> = radii.iter().map(|r| r * s).collect();
        let c = quadratic_growth(&scaled, [0.0, 0.0], &sr, 1.0);
        prop_assert!((c / base - 1.0).abs() < 1e-9, "{c} vs {base}");
    }

    #[test]
    fn report_lists_each_enabled_check_once(mask in 1u32..256) {
        let pool = [
            "constants",
            "nutrient_lower_bound",
            "mass_balance",
            "pressure_consistency",
            "ab_moment",
            "ab_monotone",
            "obstacle_identity",
            "sweep_cauchy",
        ];
        let chosen: Vec<&str> = pool.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| *c).collect();
        let text = format!(
            "grid.n = 24\nrun.tau = 0.02\nrun.snapshots = 3\nrun.gammas = 5, 10, 20\nchecks = {}\n",
            chosen.join(", ")
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let out = experiment::execute(&cfg, None).unwrap();
        for c in &chosen {
            let hits = out.report.entries.iter().filter(|e| e.check == *c).count();
            prop_assert_eq!(hits, 1, "{}", c);
        }
        prop_assert_eq!(out.report.entries.len(), chosen.len());
    }
}

#[test]
fn laplacian_converges_at_second_order() {
    let err = |n: usize| {
        let g = grid(n);
        let f = ScalarField::from_fn(g, |x| x[0].sin() * (2.0 * x[1]).cos());
        let l = f.laplacian().unwrap();
        let mut e: f64 = 0.0;
        for k in 0..g.len() {
            let x = g.center(k);
            if x[0].abs() < 1.0 && x[1].abs() < 1.0 {
                e = e.max((l[k] + 5.0 * x[0].sin() * (2.0 * x[1]).cos()).abs());
            }
        }
        e
    };
    let ratio = err(32) / err(64);
    assert!(ratio > 3.5, "ratio {ratio}");
}

#[test]
fn half_space_growth_constant() {
    let corpus = common::corpus();
    let u = common::scaled_field(&corpus[0].u, 129, 1.0);
    let c = quadratic_growth(&u, [0.0, 0.0], &[0.2, 0.4, 0.6], 1.0);
    // sup over B_r of x₊²/2 is r²/2
    assert!((c - 0.5).abs() < 0.02, "{c}");
}

#[test]
fn growth_constants_on_the_corpus() {
    let expected = [0.5, 0.5, 0.25, 0.5, 0.5];
    let corpus = common::corpus();
    for (s, want) in corpus.iter().zip(expected) {
        let u = common::scaled_field(&s.u, 129, 1.0);
        let c = quadratic_growth(&u, [0.0, 0.0], &[0.2, 0.4, 0.6], 1.0);
        assert!((c - want).abs() < 0.02, "{}: {c}", s.name);
    }
}
