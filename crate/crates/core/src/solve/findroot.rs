use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{newton_refine, NewtonConfig, NewtonResult};
use crate::error::{Error, Result};
use crate::polysys::{PolySet, PolynomialSystem};

const GRID_MAX_VARS: usize = 4;
const BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Exhaustive net of spacing `step` over the box; at most 4 variables.
    Grid { step: f64 },
    /// Box-uniform random starts, each polished by Gauss-Newton on `F`.
    Multistart { count: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Half-width `Λ` of the search box.
    pub box_radius: f64,
    /// Candidate filter on `‖F(x) - c'‖₂`.
    pub residual_tol_f: f64,
    /// Candidate filter on `‖G(x) - c₀‖₂`.
    pub residual_tol_g: f64,
    /// Newton steps on the full rectangular system after selection.
    pub max_newton_iters: usize,
    /// Gauss-Newton steps on `F` per multistart candidate.
    #[serde(default = "default_square_iters")]
    pub square_iters: usize,
    #[serde(default = "default_dedupe")]
    pub dedupe_tol: f64,
    #[serde(default = "default_sigma")]
    pub sigma_min_tol: f64,
    pub strategy: Strategy,
}

fn default_square_iters() -> usize {
    40
}

fn default_dedupe() -> f64 {
    1e-6
}

fn default_sigma() -> f64 {
    1e-8
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            box_radius: 2.0,
            residual_tol_f: 1e-8,
            residual_tol_g: 1e-3,
            max_newton_iters: 30,
            square_iters: default_square_iters(),
            dedupe_tol: default_dedupe(),
            sigma_min_tol: default_sigma(),
            strategy: Strategy::Multistart {
                count: 100_000,
                seed: 0,
            },
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, nvars: usize) -> Result<()> {
        for (v, name) in [
            (self.box_radius, "box_radius"),
            (self.residual_tol_f, "residual_tol_f"),
            (self.residual_tol_g, "residual_tol_g"),
            (self.dedupe_tol, "dedupe_tol"),
            (self.sigma_min_tol, "sigma_min_tol"),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        match self.strategy {
            Strategy::Grid { step } => {
                if nvars > GRID_MAX_VARS {
                    return Err(Error::Config(format!(
                        "grid search over {nvars} variables refused (limit {GRID_MAX_VARS}); use multistart"
                    )));
                }
                if !(step > 0.0) {
                    return Err(Error::Config(format!("grid step must be positive, got {step}")));
                }
            }
            Strategy::Multistart { count, .. } => {
                if count == 0 {
                    return Err(Error::Config("multistart count must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FindRootReport {
    pub x: Vec<f64>,
    /// `‖F(x̂) - c'‖₂`
    pub residual_f: f64,
    /// `‖G(x̂) - c₀‖₂`
    pub residual_g: f64,
    /// Index of the accepted candidate in generation order.
    pub candidate_index: usize,
    pub candidates_tried: usize,
    pub candidate: Vec<f64>,
    pub refinement: NewtonResult,
    pub coverage_note: String,
}

struct Filtered {
    x: Vec<f64>,
    rf: f64,
    rg: f64,
}

fn residual(set: &PolySet, x: &[f64], c: &[f64]) -> f64 {
    (set.eval_f64(x) - DVector::from_column_slice(c)).norm()
}

fn grid_points(nvars: usize, radius: f64, step: f64) -> Vec<Vec<f64>> {
    let per_axis = (2.0 * radius / step).floor() as usize + 1;
    let total = per_axis.pow(nvars as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; nvars];
            for v in p.iter_mut().rev() {
                *v = -radius + (idx % per_axis) as f64 * step;
                idx /= per_axis;
            }
            p
        })
        .collect()
}

/// Filter-then-refine search for `F(x) = c'`, `G(x) = c₀`.
///
/// Candidates come from the grid or from Gauss-Newton-polished random
/// starts; the lowest-index candidate passing both residual filters is
/// refined by Newton on the stacked system `(G; F)`.
pub fn find_root(f: &PolySet, g: &PolySet, c_f: &[f64], c_g: &[f64], cfg: &SearchConfig) -> Result<FindRootReport> {
    let nvars = f.nvars();
    cfg.validate(nvars)?;
    if c_f.len() != f.len() || c_g.len() != g.len() {
        return Err(Error::Config("right-hand side length does not match the system".into()));
    }
    let square_cfg = NewtonConfig {
        box_radius: cfg.box_radius,
        max_iters: cfg.square_iters,
        tol: 1e-13,
        ..Default::default()
    };
    let evaluate = |x: Vec<f64>| Filtered {
        rf: residual(f, &x, c_f),
        rg: residual(g, &x, c_g),
        x,
    };
    let passes = |c: &Filtered| c.rf <= cfg.residual_tol_f && c.rg <= cfg.residual_tol_g;

    let (mut best_f, mut best_g) = (f64::INFINITY, f64::INFINITY);
    let mut found: Option<(usize, Filtered)> = None;
    let mut tried = 0usize;
    let coverage_note;
    match cfg.strategy {
        Strategy::Grid { step } => {
            let points = grid_points(nvars, cfg.box_radius, step);
            coverage_note = format!("grid of {} points, spacing {step}", points.len());
            for (i, p) in points.into_iter().enumerate() {
                tried += 1;
                let c = evaluate(p);
                best_f = best_f.min(c.rf);
                best_g = best_g.min(c.rg);
                if passes(&c) {
                    found = Some((i, c));
                    break;
                }
            }
        }
        Strategy::Multistart { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let starts: Vec<Vec<f64>> = (0..count)
                .map(|_| (0..nvars).map(|_| rng.random_range(-cfg.box_radius..=cfg.box_radius)).collect())
                .collect();
            coverage_note = format!(
                "multistart with {count} box-uniform starts replaces the exhaustive net; roots outside every start's basin are missed"
            );
            for (b, chunk) in starts.chunks(BATCH).enumerate() {
                let polished: Vec<Filtered> = chunk
                    .par_iter()
                    .map(|s| evaluate(newton_refine(f, c_f, s, &square_cfg).x))
                    .collect();
                tried += chunk.len();
                for c in &polished {
                    best_f = best_f.min(c.rf);
                    best_g = best_g.min(c.rg);
                }
                if let Some(pos) = polished.iter().position(passes) {
                    let c = polished.into_iter().nth(pos).expect("position in range");
                    found = Some((b * BATCH + pos, c));
                    break;
                }
            }
        }
    }
    let (candidate_index, cand) = found.ok_or(Error::NoCandidate { tried, best_f, best_g })?;

    let mut rows = g.polys().to_vec();
    rows.extend_from_slice(f.polys());
    let stacked = PolySet::with_vars(rows, nvars);
    let mut target = c_g.to_vec();
    target.extend_from_slice(c_f);
    let refine_cfg = NewtonConfig {
        box_radius: cfg.box_radius,
        max_iters: cfg.max_newton_iters,
        ..Default::default()
    };
    let refinement = newton_refine(&stacked, &target, &cand.x, &refine_cfg);
    let x = refinement.x.clone();
    Ok(FindRootReport {
        residual_f: residual(f, &x, c_f),
        residual_g: residual(g, &x, c_g),
        x,
        candidate_index,
        candidates_tried: tried,
        candidate: cand.x,
        refinement,
        coverage_note,
    })
}

/// [`find_root`] on `P = (G | F)` with `c̃ = (c̃₀ | c̃')`.
pub fn find_root_system(p: &PolynomialSystem, c: &[f64], cfg: &SearchConfig) -> Result<FindRootReport> {
    if c.len() != 13 {
        return Err(Error::Config(format!("right-hand side needs 13 values, got {}", c.len())));
    }
    find_root(&p.square(), &p.all().rows(&[0]), &c[1..], &c[..1], cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::Poly;

    fn toy() -> (PolySet, PolySet) {
        let p = |s: &str| Poly::parse_expr(s, &["x", "y"], &[]).unwrap();
        (
            PolySet::with_vars(vec![p("x + y"), p("x*y")], 2),
            PolySet::with_vars(vec![p("x^2*y + x*y^2")], 2),
        )
    }

    fn near_orbit(x: &[f64]) -> bool {
        let d = |a: f64, b: f64| (x[0] - a).abs().max((x[1] - b).abs());
        d(1.0, 3.0).min(d(3.0, 1.0)) < 1e-8
    }

    #[test]
    fn toy_grid() {
        let (f, g) = toy();
        let cfg = SearchConfig {
            box_radius: 4.0,
            residual_tol_f: 0.5,
            residual_tol_g: 2.0,
            strategy: Strategy::Grid { step: 0.1 },
            ..Default::default()
        };
        let rep = find_root(&f, &g, &[4.0, 3.0], &[12.0], &cfg).unwrap();
        assert!(near_orbit(&rep.x), "{:?}", rep.x);
    }

    #[test]
    fn toy_multistart() {
        let (f, g) = toy();
        let cfg = SearchConfig {
            box_radius: 4.0,
            strategy: Strategy::Multistart { count: 200, seed: 3 },
            ..Default::default()
        };
        let rep = find_root(&f, &g, &[4.0, 3.0], &[12.0], &cfg).unwrap();
        assert!(near_orbit(&rep.x), "{:?}", rep.x);
        assert!(rep.residual_f <= 1e-12);
    }

    #[test]
    fn grid_refused_above_four_vars() {
        let f = PolySet::with_vars(vec![], 5);
        let cfg = SearchConfig {
            strategy: Strategy::Grid { step: 0.5 },
            ..Default::default()
        };
        assert!(matches!(find_root(&f, &f, &[], &[], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn no_candidate_is_an_error() {
        let (f, g) = toy();
        let cfg = SearchConfig {
            box_radius: 4.0,
            strategy: Strategy::Multistart { count: 20, seed: 1 },
            ..Default::default()
        };
        // x + y = 4, xy = 3 forces G = 12.
        let err = find_root(&f, &g, &[4.0, 3.0], &[50.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::NoCandidate { tried: 20, .. }));
    }
}
