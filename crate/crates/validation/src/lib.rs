//! Helpers shared by the acceptance suite.

use probe_tomo::family::PARAM_NAMES;
use probe_tomo::polysys::Poly;

/// The closed forms of the canonical system exactly as published, in
/// `Poly::parse_expr` syntax with the lattice dimension left as `D`.
pub const PRINTED_FORMS: [(&str, &str); 13] = [
    (
        "q",
        "h1*h3^2 + D*(3*h2*(-J23*J31 - J13*J32 + (J12 + J21)*J33) \
         + h1*(J13^2 + J23^2 + J31^2 + J32^2 + 6*J23*J32 + 2*J33*(J33 - 3*J22)) \
         + h3*(J21*(2*J23 - 3*J32) + J12*(2*J32 - 3*J23) + (J13 + J31)*(2*J11 + 3*J22 + 2*J33)))",
    ),
    ("p1", "h1"),
    ("p2", "h2"),
    ("p3", "h3"),
    ("p4", "D*h1*(2*J11 + J12 + J13 + J21 + J31)"),
    ("p5", "D*h2*(J12 + J21 + 2*J22 + J23 + J32)"),
    ("p6", "D*h3*(J13 + J23 + J31 + J32 + 2*J33)"),
    ("p7", "h2*h3 + D*(J12*J13 + J22*J23 + J21*J31 + J22*J32 + J23*J33 + J32*J33)"),
    ("p8", "h1*h3 + D*(J11*J13 + J21*J23 + J11*J31 + J12*J32 + J13*J33 + J31*J33)"),
    ("p9", "h1*h2 + D*(J11*J12 + J11*J21 + J12*J22 + J21*J22 + J13*J23 + J31*J32)"),
    ("p10", "h1^2 + D*(2*J11^2 + J12^2 + J21^2 + J13^2 + J31^2)"),
    ("p11", "h2^2 + D*(J21^2 + J12^2 + 2*J22^2 + J23^2 + J32^2)"),
    ("p12", "h3^2 + D*(J31^2 + J13^2 + J23^2 + J32^2 + 2*J33^2)"),
];

pub fn printed_poly(src: &str, dimension: usize) -> Poly {
    Poly::parse_expr(src, &PARAM_NAMES, &[("D", dimension as i128)]).expect("printed form parses")
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Fit `e_{t+1} ≤ α + β e_t²` to an error sequence. `β` comes from the
/// steps with `e_t` above `floor`, `α` is the largest excess left over.
pub fn fit_contraction(errs: &[f64], floor: f64) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = errs.windows(2).map(|w| (w[0], w[1])).collect();
    let beta = pairs
        .iter()
        .filter(|(e, _)| *e > floor)
        .map(|(e, n)| n / (e * e))
        .fold(0.0, f64::max);
    let alpha = pairs.iter().map(|(e, n)| (n - beta * e * e).max(0.0)).fold(0.0, f64::max);
    (alpha, beta)
}
