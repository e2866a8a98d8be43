use std::sync::OnceLock;

use probe_tomo::family::{transpose_params, ParamVector};
use probe_tomo::learn::{orbit_distance, sweep_instance, CenterSpec};
use probe_tomo::pauli::Rational;
use probe_tomo::polysys::{canonical_system, Poly, PolySet, PolynomialSystem};
use probe_tomo::solve::*;
use probe_tomo::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn d1() -> &'static PolynomialSystem {
    static SYS: OnceLock<PolynomialSystem> = OnceLock::new();
    SYS.get_or_init(|| canonical_system(1).unwrap())
}

fn polys(srcs: &[&str], names: &[&str]) -> PolySet {
    PolySet::with_vars(srcs.iter().map(|s| Poly::parse_expr(s, names, &[]).unwrap()).collect(), names.len())
}

fn instance(seed: u64) -> ParamVector {
    sweep_instance(&CenterSpec::Uniform { half_width: 0.5 }, 0.1, seed).unwrap()
}

fn exact_search() -> SearchConfig {
    SearchConfig {
        box_radius: 3.0,
        residual_tol_f: 1e-6,
        residual_tol_g: 1e-6,
        strategy: Strategy::Multistart { count: 20_000, seed: 5 },
        ..Default::default()
    }
}

#[test]
fn scalar_newton() {
    let f = polys(&["x^2"], &["x"]);
    let cfg = NewtonConfig {
        box_radius: 10.0,
        max_iters: 6,
        ..Default::default()
    };
    let r = newton_refine(&f, &[4.0], &[3.0], &cfg);
    assert!((r.x[0] - 2.0).abs() <= 1e-10, "{:?}", r.x);
    assert!(r.iterates.len() <= 7);
}

#[test]
fn linear_system_in_one_step() {
    let f = polys(&["2*x + y", "x - 3*y"], &["x", "y"]);
    let r = newton_refine(&f, &[5.0, -8.0], &[0.3, -0.7], &NewtonConfig::default());
    assert!((r.iterates[1][0] - 1.0).abs() < 1e-14 && (r.iterates[1][1] - 3.0).abs() < 1e-14);
    assert_eq!(r.status, NewtonStatus::Converged);
}

#[test]
fn singular_jacobian_stops() {
    let f = polys(&["x^2"], &["x"]);
    let r = newton_refine(&f, &[1.0], &[0.0], &NewtonConfig::default());
    assert!(matches!(r.status, NewtonStatus::Singular { iteration: 0, .. }));
    assert_eq!(r.x, vec![0.0]);
}

#[test]
fn iterates_stay_in_the_box() {
    let f = polys(&["x^3"], &["x"]);
    let cfg = NewtonConfig {
        box_radius: 1.5,
        max_iters: 10,
        ..Default::default()
    };
    let r = newton_refine(&f, &[1000.0], &[1.0], &cfg);
    assert!(r.iterates.iter().all(|x| x[0].abs() <= 1.5));
}

#[test]
fn canonical_newton_contracts_quadratically() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for seed in 0..3 {
        let truth = instance(seed);
        let dir: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x0: Vec<f64> = truth.0.iter().zip(&dir).map(|(t, d)| t + 0.02 * d / norm).collect();
        let c = d1().evaluate_f64(&truth.0);
        let r = newton_refine(d1().all(), &c, &x0, &NewtonConfig::default());
        let errs: Vec<f64> = r.iterates.iter().map(|x| ParamVector::from_slice(x).dist_inf(&truth)).collect();
        assert!(errs.iter().any(|e| *e <= 1e-10), "seed {seed}: {errs:?}");
        // e_{t+1} ≤ α + β e_t²: β from the steps well above the floor, α from the rest.
        let pairs: Vec<(f64, f64)> = errs.windows(2).map(|w| (w[0], w[1])).collect();
        let beta = pairs.iter().filter(|(e, _)| *e > 1e-5).map(|(e, n)| n / (e * e)).fold(0.0, f64::max);
        let alpha = pairs.iter().map(|(e, n)| (n - beta * e * e).max(0.0)).fold(0.0, f64::max);
        assert!(alpha < 1e-9, "seed {seed}: alpha {alpha}");
        assert!(beta < 1e3, "seed {seed}: beta {beta}");
        // Residuals fall monotonically after the first step until the floor.
        for w in r.residuals[1..].windows(2) {
            assert!(w[1] <= w[0] || w[0] < 1e-12, "{:?}", r.residuals);
        }
    }
}

#[test]
fn toy_find_root_recovers_the_swap_orbit() {
    let names = ["x", "y"];
    let (f, g) = (polys(&["x + y", "x*y"], &names), polys(&["x^2*y + x*y^2"], &names));
    for strategy in [Strategy::Grid { step: 0.05 }, Strategy::Multistart { count: 100, seed: 2 }] {
        let cfg = SearchConfig {
            box_radius: 4.0,
            residual_tol_f: 0.2,
            residual_tol_g: 1.0,
            strategy,
            ..Default::default()
        };
        let r = find_root(&f, &g, &[4.0, 3.0], &[12.0], &cfg).unwrap();
        let d = |a: f64, b: f64| (r.x[0] - a).abs().max((r.x[1] - b).abs());
        assert!(d(1.0, 3.0).min(d(3.0, 1.0)) <= 1e-8, "{strategy:?}: {:?}", r.x);
    }
}

#[test]
fn exact_data_recovers_the_orbit() {
    for seed in 0..3 {
        let truth = instance(seed);
        let c = d1().evaluate_f64(&truth.0);
        let r = find_root_system(d1(), &c, &exact_search()).unwrap();
        let x = ParamVector::from_slice(&r.x);
        assert!(orbit_distance(&x, &truth) <= 1e-6, "seed {seed}: {}", orbit_distance(&x, &truth));
        // Logged residuals are the residuals of the returned point.
        let v = d1().evaluate_f64(&r.x);
        let rf = v[1..].iter().zip(&c[1..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert_eq!(rf, r.residual_f);
        assert_eq!((v[0] - c[0]).abs(), r.residual_g);
        assert!(!r.coverage_note.is_empty());
    }
}

#[test]
fn perturbed_data_degrades_gracefully() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for seed in 0..3 {
        let truth = instance(seed);
        let c: Vec<f64> = d1()
            .evaluate_f64(&truth.0)
            .iter()
            .map(|v| v + rng.random_range(-1e-4..1e-4))
            .collect();
        let cfg = SearchConfig {
            residual_tol_f: 1e-3,
            residual_tol_g: 1e-3,
            ..exact_search()
        };
        let r = find_root_system(d1(), &c, &cfg).unwrap();
        let d = orbit_distance(&ParamVector::from_slice(&r.x), &truth);
        assert!(d <= 1e-2, "seed {seed}: {d}");
    }
}

#[test]
fn search_is_deterministic() {
    let c = d1().evaluate_f64(&instance(4).0);
    let a = find_root_system(d1(), &c, &exact_search()).unwrap();
    let b = find_root_system(d1(), &c, &exact_search()).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.candidate_index, b.candidate_index);
}

#[test]
fn search_config_guards() {
    let c = d1().evaluate_f64(&instance(0).0);
    let grid = SearchConfig {
        strategy: Strategy::Grid { step: 0.5 },
        ..exact_search()
    };
    assert!(matches!(find_root_system(d1(), &c, &grid), Err(Error::Config(_))));
    let zero = SearchConfig {
        residual_tol_f: 0.0,
        ..exact_search()
    };
    assert!(matches!(find_root_system(d1(), &c, &zero), Err(Error::Config(_))));
    assert!(find_root_system(d1(), &c[..12], &exact_search()).is_err());
    // Unreachable right-hand side.
    let far: Vec<f64> = c.iter().map(|v| v + 50.0).collect();
    let few = SearchConfig {
        strategy: Strategy::Multistart { count: 50, seed: 0 },
        ..exact_search()
    };
    assert!(matches!(find_root_system(d1(), &far, &few), Err(Error::NoCandidate { tried: 50, .. })));
}

fn rational_point(rng: &mut ChaCha8Rng) -> Vec<Rational> {
    (0..12).map(|_| Rational::new(rng.random_range(-20..=20), 20)).collect()
}

#[test]
fn canonical_fiber_has_two_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x0 = rational_point(&mut rng);
    let r = certify_fiber(d1(), &x0, &CertifyConfig::default()).unwrap();
    assert_eq!(r.count, 2, "{r:?}");
    assert_eq!(r.counts_per_seed, vec![2, 2, 2]);
    assert!(r.contains_x0 && r.contains_transpose && r.closed_under_symmetry);
    assert!(r.sigma_mins.iter().all(|s| *s > 1e-8));
    assert_eq!(r.verdict, FiberVerdict::Certified);
    let xf: Vec<f64> = x0.iter().map(|q| *q.numer() as f64 / *q.denom() as f64).collect();
    let xt = transpose_params(&ParamVector::from_slice(&xf));
    for target in [xf.clone(), xt.0.to_vec()] {
        let hit = r.solutions.iter().any(|s| {
            s.iter().zip(&target).all(|(z, t)| (z[0] - t).abs() <= 1e-8 && z[1].abs() <= 1e-8)
        });
        assert!(hit, "{target:?} missing");
    }
}

#[test]
fn symmetric_point_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let mut x0 = rational_point(&mut rng);
    for (mu, nu) in [(0, 1), (0, 2), (1, 2)] {
        x0[3 + 3 * nu + mu] = x0[3 + 3 * mu + nu];
    }
    let cfg = CertifyConfig {
        starts: 1000,
        ..Default::default()
    };
    let r = certify_fiber(d1(), &x0, &cfg).unwrap();
    assert_eq!(r.count, 1, "{r:?}");
    assert_eq!(r.verdict, FiberVerdict::SymmetryFixedPoint);
}

#[test]
fn toy_fiber_counts_the_swap_pair() {
    let names = ["x", "y"];
    let (f, g) = (polys(&["x + y", "x*y"], &names), polys(&["x^2*y + x*y^2"], &names));
    let cfg = CertifyConfig {
        starts: 200,
        box_radius: 4.0,
        ..Default::default()
    };
    let x0 = [Rational::from_integer(1), Rational::from_integer(3)];
    let r = certify_fiber_sets(&f, &g, &x0, &[1, 0], &cfg).unwrap();
    assert_eq!(r.count, 2);
    assert!(r.closed_under_symmetry);
}
