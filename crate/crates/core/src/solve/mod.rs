//! Root finding on polynomial systems: projected Gauss-Newton refinement,
//! filtered candidate search, and fiber certification.

mod certify;
mod findroot;

pub use certify::{certify_fiber, certify_fiber_sets, CertifyConfig, FiberReport, FiberVerdict};
pub use findroot::{find_root, find_root_system, FindRootReport, SearchConfig, Strategy};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::polysys::PolySet;

/// Default singular-value cutoff of the pseudo-inverse.
pub const SV_THRESHOLD: f64 = 1e-12;

/// A smooth map `R^n -> R^m` with its Jacobian.
pub trait DifferentiableMap: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64>;
}

impl DifferentiableMap for PolySet {
    fn dim_in(&self) -> usize {
        self.nvars()
    }
    fn dim_out(&self) -> usize {
        self.len()
    }
    fn eval(&self, x: &[f64]) -> DVector<f64> {
        self.eval_f64(x)
    }
    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        self.jacobian_f64(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    /// Iterates are clamped to `[-box_radius, box_radius]` per coordinate.
    pub box_radius: f64,
    pub max_iters: usize,
    /// Stop once `‖P(x) - c‖₂` is at or below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sv")]
    pub sv_threshold: f64,
}

fn default_tol() -> f64 {
    1e-14
}

fn default_sv() -> f64 {
    SV_THRESHOLD
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            box_radius: 10.0,
            max_iters: 50,
            tol: default_tol(),
            sv_threshold: SV_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    MaxIters,
    /// The step no longer moves the projected iterate.
    Stalled,
    /// Residual grew on three consecutive steps.
    Diverged,
    /// Jacobian rank loss; iteration stopped at the previous iterate.
    Singular { iteration: usize, sigma_min: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    /// `‖P(x_t) - c‖₂` for every iterate including the start.
    pub residuals: Vec<f64>,
    /// All iterates including the start.
    pub iterates: Vec<Vec<f64>>,
    pub status: NewtonStatus,
}

impl NewtonResult {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().expect("at least the start residual")
    }
}

/// Pseudo-inverse solve `J⁺ r` via SVD, or the smallest singular value if
/// it is below `threshold`.
pub fn pinv_solve(j: &DMatrix<f64>, r: &DVector<f64>, threshold: f64) -> std::result::Result<DVector<f64>, f64> {
    let svd = j.clone().svd(true, true);
    let rank_needed = j.nrows().min(j.ncols());
    let sigma_min = svd.singular_values.iter().take(rank_needed).cloned().fold(f64::INFINITY, f64::min);
    if sigma_min < threshold {
        return Err(sigma_min);
    }
    Ok(svd.solve(r, threshold).expect("SVD computed with both factors"))
}

/// Smallest singular value.
pub fn sigma_min(j: &DMatrix<f64>) -> f64 {
    j.singular_values().iter().cloned().fold(f64::INFINITY, f64::min)
}

fn project(x: &mut [f64], radius: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(-radius, radius);
    }
}

/// `x ← proj(x - J(x)⁺ (P(x) - c))` until the residual reaches `tol`,
/// `max_iters` steps pass, the Jacobian loses rank, or the residual grows
/// three times in a row.
pub fn newton_refine(map: &dyn DifferentiableMap, target: &[f64], x0: &[f64], cfg: &NewtonConfig) -> NewtonResult {
    let c = DVector::from_column_slice(target);
    let mut x = x0.to_vec();
    project(&mut x, cfg.box_radius);
    let mut r = map.eval(&x) - &c;
    let mut residuals = vec![r.norm()];
    let mut iterates = vec![x.clone()];
    let mut growth = 0;
    let mut status = NewtonStatus::MaxIters;
    for it in 0..cfg.max_iters {
        if r.norm() <= cfg.tol {
            status = NewtonStatus::Converged;
            break;
        }
        let step = match pinv_solve(&map.jacobian(&x), &r, cfg.sv_threshold) {
            Ok(s) => s,
            Err(sigma_min) => {
                status = NewtonStatus::Singular { iteration: it, sigma_min };
                break;
            }
        };
        let mut next: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        project(&mut next, cfg.box_radius);
        let r_next = map.eval(&next) - &c;
        let prev = r.norm();
        let stalled = next == x;
        x = next;
        r = r_next;
        residuals.push(r.norm());
        iterates.push(x.clone());
        if stalled {
            status = if r.norm() <= cfg.tol {
                NewtonStatus::Converged
            } else {
                NewtonStatus::Stalled
            };
            break;
        }
        growth = if r.norm() > prev { growth + 1 } else { 0 };
        if growth >= 3 {
            status = NewtonStatus::Diverged;
            break;
        }
    }
    if status == NewtonStatus::MaxIters && r.norm() <= cfg.tol {
        status = NewtonStatus::Converged;
    }
    NewtonResult {
        x,
        residuals,
        iterates,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::Poly;

    fn parse(src: &str) -> Poly {
        Poly::parse_expr(src, &["x", "y"], &[]).unwrap()
    }

    #[test]
    fn scalar_newton() {
        let f = PolySet::with_vars(vec![parse("x^2")], 1);
        let cfg = NewtonConfig {
            box_radius: 10.0,
            max_iters: 6,
            ..Default::default()
        };
        let res = newton_refine(&f, &[4.0], &[3.0], &cfg);
        assert!((res.x[0] - 2.0).abs() < 1e-10, "{:?}", res.x);
        assert!(res.iterates.len() <= 7);
    }

    #[test]
    fn linear_system_one_step() {
        let f = PolySet::with_vars(vec![parse("x + 2*y"), parse("3*x - y")], 2);
        let res = newton_refine(&f, &[5.0, 1.0], &[0.0, 0.0], &NewtonConfig::default());
        assert!((res.iterates[1][0] - 1.0).abs() < 1e-14);
        assert!((res.iterates[1][1] - 2.0).abs() < 1e-14);
        assert_eq!(res.status, NewtonStatus::Converged);
    }

    #[test]
    fn singular_jacobian_reported() {
        let f = PolySet::with_vars(vec![parse("x^2")], 1);
        let res = newton_refine(&f, &[1.0], &[0.0], &NewtonConfig::default());
        assert!(matches!(res.status, NewtonStatus::Singular { iteration: 0, .. }));
    }

    #[test]
    fn projection_keeps_box() {
        let f = PolySet::with_vars(vec![parse("x")], 1);
        let cfg = NewtonConfig {
            box_radius: 1.0,
            max_iters: 3,
            ..Default::default()
        };
        let res = newton_refine(&f, &[5.0], &[0.0], &cfg);
        assert_eq!(res.x, vec![1.0]);
    }
}
