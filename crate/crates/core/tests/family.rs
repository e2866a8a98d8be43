use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use probe_tomo::family::*;
use probe_tomo::sim::to_matrix;

fn params() -> impl Strategy<Value = ParamVector> {
    prop::array::uniform12(-1.0f64..1.0).prop_map(ParamVector)
}

/// Permutation matrix reversing the qubit order of an `n`-qubit register.
fn reversal(n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << n;
    let mut p = DMatrix::zeros(dim, dim);
    for x in 0..dim {
        let y = (0..n).fold(0, |acc, q| acc | (((x >> q) & 1) << (n - 1 - q)));
        p[(y, x)] = Complex64::new(1.0, 0.0);
    }
    p
}

#[test]
fn lattice_shapes() {
    let l = LatticeSpec::new(1, 3).unwrap();
    assert_eq!(l.num_sites(), 7);
    assert_eq!(l.edges().len(), 6);
    let l = LatticeSpec::new(2, 1).unwrap();
    assert_eq!(l.num_sites(), 9);
    assert_eq!(l.edges().len(), 12);
    assert!(LatticeSpec::new(4, 1).is_err());
    assert!(LatticeSpec::new(0, 1).is_err());
}

#[test]
fn symbolic_term_count_on_three_sites() {
    // 3 sites × 3 fields + 2 edges × 9 couplings.
    let h = build_symbolic_hamiltonian(&LatticeSpec::new(1, 1).unwrap());
    assert_eq!(h.len(), 27);
    // 7 sites × 3 + 6 edges × 9.
    let h = build_symbolic_hamiltonian(&LatticeSpec::new(1, 3).unwrap());
    assert_eq!(h.len(), 75);
}

#[test]
fn transpose_is_an_involution_fixing_fields() {
    let x = ParamVector(std::array::from_fn(|i| i as f64));
    let t = transpose_params(&x);
    assert_eq!(&t.0[..3], &x.0[..3]);
    assert_eq!(t.j(0, 1), x.j(1, 0));
    assert_eq!(t.j(2, 0), x.j(0, 2));
    assert_eq!(t.j(1, 1), x.j(1, 1));
    assert_eq!(transpose_params(&t), x);
    for (i, &p) in TRANSPOSE_PERMUTATION.iter().enumerate() {
        assert_eq!(t.0[i], x.0[p]);
    }
}

#[test]
fn param_json_uses_named_keys() {
    let x = ParamVector(std::array::from_fn(|i| i as f64 / 4.0));
    let s = serde_json::to_string(&x).unwrap();
    assert!(s.contains("\"J31\":2.25"), "{s}");
    let back: ParamVector = serde_json::from_str(&s).unwrap();
    assert_eq!(back, x);
    let bad = s.replace("J31", "J41");
    assert!(serde_json::from_str::<ParamVector>(&bad).is_err());
}

#[test]
fn smoothed_samples_have_the_requested_spread() {
    let mu = ParamVector([0.3; NUM_PARAMS]);
    let s = SmoothedSampler::new(mu, 0.1, 7).unwrap();
    let draws = s.sample_many(4000);
    let n = (draws.len() * NUM_PARAMS) as f64;
    let devs: Vec<f64> = draws.iter().flat_map(|d| d.0.iter().map(|v| v - 0.3)).collect();
    let mean = devs.iter().sum::<f64>() / n;
    let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 3e-3, "mean {mean}");
    assert!((var.sqrt() - 0.1).abs() < 3e-3, "std {}", var.sqrt());
    assert_eq!(sample_smoothed(&s), draws[0]);
    assert!(SmoothedSampler::new(mu, -1.0, 0).is_err());
    let zero = SmoothedSampler::new(mu, 0.0, 3).unwrap();
    assert_eq!(sample_smoothed(&zero), mu);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_linear(a in params(), b in params(), s in -2.0f64..2.0) {
        let lat = LatticeSpec::new(1, 2).unwrap();
        let mix = ParamVector(std::array::from_fn(|i| a.0[i] + s * b.0[i]));
        let lhs = build_hamiltonian(&lat, &mix);
        let rhs = build_hamiltonian(&lat, &a).add(&build_hamiltonian(&lat, &b).scale(&Complex64::new(s, 0.0)));
        for (p, c) in lhs.sub(&rhs).iter() {
            prop_assert!(c.norm() < 1e-12, "{p}");
        }
    }

    #[test]
    fn symbolic_hamiltonian_evaluates_to_numeric(a in params()) {
        let lat = LatticeSpec::new(2, 1).unwrap();
        let diff = build_symbolic_hamiltonian(&lat).evaluate(&a.0).sub(&build_hamiltonian(&lat, &a));
        prop_assert!(diff.iter().all(|(_, c)| c.norm() < 1e-12));
    }

    #[test]
    fn reflection_realizes_the_transpose(a in params()) {
        let lat = LatticeSpec::new(1, 2).unwrap();
        let h = to_matrix(&build_hamiltonian(&lat, &a), &lat).unwrap();
        let ht = to_matrix(&build_hamiltonian(&lat, &transpose_params(&a)), &lat).unwrap();
        let p = reversal(5);
        let reflected = &p * h * p.transpose();
        prop_assert!((reflected - ht).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn hamiltonian_is_traceless(a in params()) {
        let lat = LatticeSpec::new(1, 3).unwrap();
        prop_assert_eq!(build_hamiltonian(&lat, &a).normalized_trace(), Complex64::new(0.0, 0.0));
    }
}
