use std::sync::OnceLock;

use num_traits::{One, Zero};
use proptest::prelude::*;
use probe_tomo::family::{transpose_params, LatticeSpec, PARAM_NAMES, TRANSPOSE_PERMUTATION};
use probe_tomo::pauli::{Channel, Letter, Rational};
use probe_tomo::polysys::system::{hessian, jacobian};
use probe_tomo::polysys::*;
use probe_tomo::Error;

fn d1() -> &'static PolynomialSystem {
    static SYS: OnceLock<PolynomialSystem> = OnceLock::new();
    SYS.get_or_init(|| canonical_system(1).unwrap())
}

fn parse(src: &str, d: i128) -> Poly {
    Poly::parse_expr(src, &PARAM_NAMES, &[("D", d)]).unwrap()
}

/// Naive evaluation: every monomial as an explicit product of powers.
fn brute_eval(p: &Poly, x: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (m, c) in p.terms() {
        let mut term = *c;
        for (v, xv) in x.iter().enumerate() {
            for _ in 0..m.exponent(v) {
                term *= *xv;
            }
        }
        acc += term;
    }
    acc
}

fn rational_point() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((-12i128..=12).prop_map(|n| Rational::new(n, 6)), 12)
}

#[test]
fn golden_files_match_derivation() {
    for d in 1..=3 {
        let path = format!("{}/golden/system_d{d}.txt", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap();
        let stored = PolynomialSystem::from_text(&text).unwrap();
        let derived = if d == 1 { d1().clone() } else { canonical_system(d).unwrap() };
        assert_eq!(stored, derived, "dimension {d}");
        assert_eq!(derived.to_text(), text, "dimension {d}");
    }
}

#[test]
fn base_coefficients() {
    let ctx = SeriesContext::new(LatticeSpec::new(1, 2).unwrap(), RadiusPolicy::TranslationInvariant).unwrap();
    let x = Letter::X;
    assert_eq!(ctx.coefficient(0, 1, x, Channel::IDENTITY).unwrap(), parse("-h1", 1));
    assert!(ctx.coefficient(0, 0, x, Channel::IDENTITY).unwrap().is_zero());
    // Channel X leaves X invariant and flips the other two.
    let y = ctx.coefficient(0, 1, Letter::Y, Channel::new(1).unwrap()).unwrap();
    assert_eq!(y, parse("h2", 1));
}

#[test]
fn printed_closed_forms() {
    let sys = d1();
    assert_eq!(sys.get("p1").unwrap(), &parse("h1", 1));
    assert_eq!(sys.get("p3").unwrap(), &parse("h3", 1));
    assert_eq!(sys.get("p10").unwrap(), &parse("h1^2 + D*(2*J11^2 + J12^2 + J21^2 + J13^2 + J31^2)", 1));
    let q = sys.g();
    let m = probe_tomo::polysys::Monomial::from_exponents(&[1, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    assert_eq!(q.coeff(m), Rational::one());
}

#[test]
fn second_order_rows_scale_with_dimension() {
    let d3 = canonical_system(3).unwrap();
    for name in ["p4", "p5", "p6", "p10", "p11", "p12"] {
        let field_part = |p: &Poly| {
            Poly::from_terms(p.terms().iter().filter(|(m, _)| (3..12).any(|v| m.exponent(v) > 0)).cloned())
        };
        let (a, b) = (field_part(d1().get(name).unwrap()), field_part(d3.get(name).unwrap()));
        assert_eq!(b, a.scale(Rational::from_integer(3)), "{name}");
    }
    assert_eq!(d3.get("p4").unwrap(), &d1().get("p4").unwrap().scale(Rational::from_integer(3)));
}

#[test]
fn every_row_is_inversion_invariant() {
    for (name, p) in SYSTEM_NAMES.iter().zip(d1().polys()) {
        assert_eq!(&p.permute(&TRANSPOSE_PERMUTATION), p, "{name}");
    }
}

#[test]
fn system_uses_all_twelve_variables_and_has_no_constants() {
    assert_eq!(d1().variables(), (0..12).collect::<Vec<_>>());
    assert!(d1().evaluate_f64(&[0.0; 12]).iter().all(|v| *v == 0.0));
}

#[test]
fn rows_are_homogeneous_of_total_order() {
    for (spec, p) in canonical_specs().iter().zip(d1().polys()) {
        assert!(p.is_homogeneous(spec.total_order() as u32), "{}", spec.name);
    }
}

#[test]
fn p1_partials() {
    let j = jacobian(&d1().polys()[1..2], &[0.4; 12]);
    for v in 0..12 {
        assert_eq!(j[(0, v)], if v == 0 { 1.0 } else { 0.0 });
    }
}

#[test]
fn square_jacobian_matches_central_differences() {
    let x: Vec<f64> = (0..12).map(|i| 0.1 * i as f64 - 0.55).collect();
    let f = d1().square();
    let jac = f.jacobian_f64(&x);
    assert_eq!(jac.shape(), (12, 12));
    let h = 1e-5;
    for v in 0..12 {
        let (mut xp, mut xm) = (x.clone(), x.clone());
        xp[v] += h;
        xm[v] -= h;
        let fd = (f.eval_f64(&xp) - f.eval_f64(&xm)) / (2.0 * h);
        for r in 0..12 {
            let scale = jac[(r, v)].abs().max(1.0);
            assert!((fd[r] - jac[(r, v)]).abs() <= 1e-6 * scale, "row {r} var {v}");
        }
    }
}

#[test]
fn p10_hessian_is_constant_diagonal() {
    let p10 = d1().get("p10").unwrap();
    for x in [[0.0; 12], [0.7; 12]] {
        let h = hessian(p10, &x);
        for r in 0..12 {
            for c in 0..12 {
                let want = match (r == c, PARAM_NAMES[r]) {
                    (true, "h1") => 2.0,
                    (true, "J11") => 4.0,
                    (true, "J12" | "J21" | "J13" | "J31") => 2.0,
                    _ => 0.0,
                };
                assert_eq!(h[(r, c)], want, "({r},{c})");
            }
        }
    }
}

#[test]
fn truncated_series_reduces_to_base_coefficient() {
    let ctx = SeriesContext::new(LatticeSpec::new(1, 4).unwrap(), RadiusPolicy::TranslationInvariant).unwrap();
    for spec in canonical_specs().iter().filter(|s| s.total_order() <= 2) {
        let base = spec.derive(&ctx).unwrap();
        assert_eq!(spec.derive_truncated(&ctx, spec.k, Rational::new(1, 20)).unwrap(), base, "{}", spec.name);
        assert_eq!(spec.derive_truncated(&ctx, spec.k + 1, Rational::zero()).unwrap(), base, "{}", spec.name);
    }
}

#[test]
fn truncated_series_matches_tanh_for_decoupled_field() {
    // With only h3 the sites decouple and <Z_0> = -tanh(β h3), so the
    // β-slope is -h3 sech²(β h3) = -h3 + β² h3³ + O(β⁴).
    let ctx = SeriesContext::new(LatticeSpec::new(1, 1).unwrap(), RadiusPolicy::FiniteLattice).unwrap();
    let (beta, h3) = (Rational::new(1, 10), Rational::new(3, 4));
    let mut x = vec![Rational::zero(); 12];
    x[2] = h3;
    let slope = |k_bar| {
        ctx.truncated_series_poly(0, 1, k_bar, Letter::Z, Channel::IDENTITY, beta)
            .unwrap()
            .eval_rational(&x)
    };
    assert_eq!(slope(1), -h3);
    assert_eq!(slope(2), -h3);
    assert_eq!(slope(3), -h3 + beta * beta * h3 * h3 * h3);
}

#[test]
fn finite_lattice_is_radius_stable() {
    for r in [3, 4, 5] {
        let sys = derive_system(&LatticeSpec::new(1, r).unwrap(), RadiusPolicy::FiniteLattice).unwrap();
        assert_eq!(&sys, d1(), "radius {r}");
    }
}

#[test]
fn derivation_guards() {
    let small = SeriesContext::new(LatticeSpec::new(1, 2).unwrap(), RadiusPolicy::TranslationInvariant).unwrap();
    assert!(matches!(
        small.coefficient(2, 1, Letter::X, Channel::IDENTITY),
        Err(Error::RadiusTooSmall { required: 4, .. })
    ));
    let big = SeriesContext::new(LatticeSpec::new(1, 1).unwrap(), RadiusPolicy::FiniteLattice).unwrap();
    assert!(matches!(
        big.coefficient(4, 3, Letter::X, Channel::IDENTITY),
        Err(Error::OrderTooLarge { .. })
    ));
}

#[test]
fn system_text_round_trip() {
    let text = d1().to_text();
    assert_eq!(&PolynomialSystem::from_text(&text).unwrap(), d1());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evaluation_matches_brute_force(x in rational_point()) {
        let exact = d1().all().eval_rational(&x);
        for (p, v) in d1().polys().iter().zip(&exact) {
            prop_assert_eq!(brute_eval(p, &x), *v);
        }
        let xf: Vec<f64> = x.iter().map(|r| *r.numer() as f64 / *r.denom() as f64).collect();
        for (v, f) in exact.iter().zip(d1().evaluate_f64(&xf)) {
            let v = *v.numer() as f64 / *v.denom() as f64;
            prop_assert!((v - f).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn values_agree_on_the_inversion_orbit(x in prop::array::uniform12(-1.0f64..1.0)) {
        let xt = transpose_params(&probe_tomo::family::ParamVector(x));
        for (a, b) in d1().evaluate_f64(&x).iter().zip(d1().evaluate_f64(&xt.0)) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
