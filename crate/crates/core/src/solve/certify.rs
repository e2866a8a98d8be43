use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::TRANSPOSE_PERMUTATION;
use crate::pauli::{coef::rational_to_f64, Rational};
use crate::polysys::{PolySet, PolynomialSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// Random complex starts per seed.
    pub starts: usize,
    pub seed: u64,
    /// Independent reruns with seeds `seed, seed + 1, ...`.
    #[serde(default = "default_reseeds")]
    pub reseeds: usize,
    /// Real parts of starts are uniform in `[-box_radius, box_radius]`.
    #[serde(default = "default_box")]
    pub box_radius: f64,
    /// Standard deviation of the imaginary parts of starts.
    #[serde(default = "default_imag")]
    pub imag_scale: f64,
    #[serde(default = "default_iters")]
    pub newton_iters: usize,
    #[serde(default = "default_dedupe")]
    pub dedupe_tol: f64,
    #[serde(default = "default_sigma")]
    pub sigma_min_tol: f64,
    /// Acceptance threshold on `|G(x) - G(x0)|` after polishing.
    #[serde(default = "default_g_tol")]
    pub g_tol: f64,
}

fn default_reseeds() -> usize {
    3
}
fn default_box() -> f64 {
    2.0
}
fn default_imag() -> f64 {
    0.5
}
fn default_iters() -> usize {
    80
}
fn default_dedupe() -> f64 {
    1e-6
}
fn default_sigma() -> f64 {
    1e-8
}
fn default_g_tol() -> f64 {
    1e-8
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            starts: 4000,
            seed: 0,
            reseeds: default_reseeds(),
            box_radius: default_box(),
            imag_scale: default_imag(),
            newton_iters: default_iters(),
            dedupe_tol: default_dedupe(),
            sigma_min_tol: default_sigma(),
            g_tol: default_g_tol(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberVerdict {
    /// Stable count, all solutions nonsingular, closed under the symmetry.
    Certified,
    /// `x0` is fixed by the coupling transpose (a measure-zero instance).
    SymmetryFixedPoint,
    /// Some solution has a rank-deficient square Jacobian.
    Degenerate,
    /// Reseeded runs disagree.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberReport {
    /// Solutions as `[re, im]` pairs per coordinate.
    pub solutions: Vec<Vec<[f64; 2]>>,
    /// Smallest singular value of the square-subsystem Jacobian at each
    /// solution.
    pub sigma_mins: Vec<f64>,
    pub closed_under_symmetry: bool,
    pub count: usize,
    pub counts_per_seed: Vec<usize>,
    pub contains_x0: bool,
    pub contains_transpose: bool,
    pub verdict: FiberVerdict,
}

type CVec = Vec<Complex64>;

fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn permute_point<T: Copy + Default>(x: &[T], perm: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); x.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = x[i];
    }
    out
}

fn complex_residual(set: &PolySet, x: &[Complex64], c: &DVector<Complex64>) -> DVector<Complex64> {
    set.eval_complex(x) - c
}

/// Newton (square `F`) from one start; `None` if it does not converge.
fn square_newton(f: &PolySet, c: &DVector<Complex64>, start: CVec, iters: usize) -> Option<CVec> {
    let mut x = start;
    for _ in 0..iters {
        let r = complex_residual(f, &x, c);
        if r.norm() < 1e-13 {
            return Some(x);
        }
        let step = f.jacobian_complex(&x).lu().solve(&r)?;
        for (v, s) in x.iter_mut().zip(step.iter()) {
            *v -= s;
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite() || v.norm() > 1e4) {
            return None;
        }
    }
    (complex_residual(f, &x, c).norm() < 1e-9).then_some(x)
}

/// Gauss-Newton polish on the stacked system.
fn polish(all: &PolySet, c: &DVector<Complex64>, mut x: CVec) -> CVec {
    for _ in 0..5 {
        let r = complex_residual(all, &x, c);
        let svd = all.jacobian_complex(&x).svd(true, true);
        let Ok(step) = svd.solve(&r, 1e-12) else {
            break;
        };
        for (v, s) in x.iter_mut().zip(step.iter()) {
            *v -= s;
        }
    }
    x
}

fn sigma_min_complex(j: DMatrix<Complex64>) -> f64 {
    j.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `all` stacks the `g_rows` filter rows above the square system `f`.
fn solve_once(f: &PolySet, all: &PolySet, g_rows: usize, c: &DVector<Complex64>, cfg: &CertifyConfig, seed: u64) -> Vec<CVec> {
    let n = f.nvars();
    let c_f = c.rows(g_rows, f.len()).into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, cfg.imag_scale).expect("finite scale");
    let starts: Vec<CVec> = (0..cfg.starts)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re = rng.random_range(-cfg.box_radius..=cfg.box_radius);
                    Complex64::new(re, normal.sample(&mut rng))
                })
                .collect()
        })
        .collect();
    let found: Vec<Option<CVec>> = starts
        .into_par_iter()
        .map(|s| {
            let x = square_newton(f, &c_f, s, cfg.newton_iters)?;
            let x = polish(all, c, x);
            let r = complex_residual(all, &x, c);
            let rg = r.rows(0, g_rows).norm();
            (rg <= cfg.g_tol && r.norm() <= 1e-9).then_some(x)
        })
        .collect();
    let mut sols: Vec<CVec> = Vec::new();
    for x in found.into_iter().flatten() {
        if !sols.iter().any(|s| dist(s, &x) <= cfg.dedupe_tol) {
            sols.push(x);
        }
    }
    // Canonical order so reseeded runs compare directly.
    sols.sort_by(|a, b| {
        a.iter()
            .flat_map(|z| [z.re, z.im])
            .zip(b.iter().flat_map(|z| [z.re, z.im]))
            .map(|(u, v)| u.total_cmp(&v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sols
}

fn same_set(a: &[CVec], b: &[CVec], tol: f64) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.iter().any(|y| dist(x, y) <= tol))
}

/// Solve `P(x) = P(x0)` over the complex numbers by multistart Newton and
/// check the solution set: count, nonsingularity, closure under the
/// coupling transpose, and stability across reseeds.
pub fn certify_fiber(p: &PolynomialSystem, x0: &[Rational], cfg: &CertifyConfig) -> Result<FiberReport> {
    certify_fiber_sets(&p.square(), &p.all().rows(&[0]), x0, &TRANSPOSE_PERMUTATION, cfg)
}

/// [`certify_fiber`] for a square system `f` with filter rows `g` and a
/// variable permutation `symmetry` under which both are invariant.
pub fn certify_fiber_sets(f: &PolySet, g: &PolySet, x0: &[Rational], symmetry: &[usize], cfg: &CertifyConfig) -> Result<FiberReport> {
    let n = f.nvars();
    if x0.len() != n || symmetry.len() != n || f.len() != n {
        return Err(Error::Config(format!("need a square system and a point with {n} coordinates")));
    }
    if cfg.starts == 0 || cfg.reseeds == 0 {
        return Err(Error::Config("starts and reseeds must be positive".into()));
    }
    let mut rows = g.polys().to_vec();
    rows.extend_from_slice(f.polys());
    let all = PolySet::with_vars(rows, n);
    let c: DVector<Complex64> = DVector::from_iterator(
        all.len(),
        all.eval_rational(x0).iter().map(|v| Complex64::new(rational_to_f64(v), 0.0)),
    );
    let runs: Vec<Vec<CVec>> = (0..cfg.reseeds)
        .map(|s| solve_once(f, &all, g.len(), &c, cfg, cfg.seed.wrapping_add(s as u64)))
        .collect();
    let sols = runs[0].clone();
    let stable = runs.iter().all(|r| same_set(r, &sols, 1e3 * cfg.dedupe_tol));
    let sigma_mins: Vec<f64> = sols.iter().map(|x| sigma_min_complex(f.jacobian_complex(x))).collect();
    let closed = sols
        .iter()
        .all(|x| sols.iter().any(|y| dist(&permute_point(x, symmetry), y) <= cfg.dedupe_tol));
    let x0c: CVec = x0.iter().map(|v| Complex64::new(rational_to_f64(v), 0.0)).collect();
    let tx0 = permute_point(&x0c, symmetry);
    let contains_x0 = sols.iter().any(|x| dist(x, &x0c) <= cfg.dedupe_tol);
    let contains_transpose = sols.iter().any(|x| dist(x, &tx0) <= cfg.dedupe_tol);
    let verdict = if permute_point(x0, symmetry) == x0 {
        FiberVerdict::SymmetryFixedPoint
    } else if !stable {
        FiberVerdict::Inconclusive
    } else if sigma_mins.iter().any(|&s| s <= cfg.sigma_min_tol) {
        FiberVerdict::Degenerate
    } else {
        FiberVerdict::Certified
    };
    Ok(FiberReport {
        solutions: sols.iter().map(|x| x.iter().map(|z| [z.re, z.im]).collect()).collect(),
        sigma_mins,
        closed_under_symmetry: closed,
        count: sols.len(),
        counts_per_seed: runs.iter().map(|r| r.len()).collect(),
        contains_x0,
        contains_transpose,
        verdict,
    })
}
