//! ProbeLearn orchestration: estimate the right-hand side, find a crude root
//! of the canonical system, refine it on the truncated higher-order system
//! of the physical lattice, and report the distance to the symmetry orbit.

use std::collections::HashSet;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_spec_truncated, estimate_system_rhs, EstimatorConfig};
use crate::family::{transpose_params, LatticeSpec, ParamVector, SmoothedSampler, NUM_PARAMS};
use crate::pauli::Rational;
use crate::polysys::{canonical_specs, canonical_system, PolySet, RadiusPolicy, SeriesContext};
use crate::sim::{ProbeInterface, SimulatedProbe};
use crate::solve::{find_root_system, newton_refine, NewtonConfig, NewtonStatus, SearchConfig, Strategy};

pub const SCHEMA_VERSION: u32 = 1;

/// Truncated polynomials are capped at `j + k̄ ≤ MAX_REFINE_ORDER`.
pub const MAX_REFINE_ORDER: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    /// Target accuracy; sets `k̄` and the default Stage-3 β step.
    pub epsilon: f64,
    /// Stage-3 base inverse temperature.
    pub beta: f64,
    /// Stage-1 β step of the base-point estimators; defaults to `beta`.
    #[serde(default)]
    pub crude_beta: Option<f64>,
    /// Stage-1 time step.
    pub t_step: f64,
    /// Stage-3 β step; defaults to `epsilon / 20`.
    #[serde(default)]
    pub h: Option<f64>,
    /// Stage-3 time step; defaults to `epsilon / 20`.
    #[serde(default)]
    pub refine_t_step: Option<f64>,
    /// Shots per probe call; 0 = exact expectations.
    #[serde(default)]
    pub shots: u64,
    /// Constant `c` in `k̄ = k + ceil(c log(1/ε) / log(1/β))`.
    #[serde(default = "default_k_bar_c")]
    pub k_bar_c: f64,
    #[serde(default = "default_newton_iters")]
    pub newton_iters: usize,
    #[serde(default = "default_beta_crit")]
    pub beta_crit: f64,
    #[serde(default = "default_solver")]
    pub solver: SearchConfig,
}

fn default_k_bar_c() -> f64 {
    1.0
}

fn default_newton_iters() -> usize {
    20
}

fn default_beta_crit() -> f64 {
    0.1
}

/// Stage-2 search with filters loose enough for the `O(β)` bias of the
/// Stage-1 data; `F(x) = c̃'` may have no real root at all.
pub fn default_solver() -> SearchConfig {
    SearchConfig {
        box_radius: 3.0,
        residual_tol_f: 0.1,
        residual_tol_g: 0.1,
        max_newton_iters: 30,
        strategy: Strategy::Multistart { count: 100_000, seed: 0 },
        ..SearchConfig::default()
    }
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            epsilon: 1e-3,
            beta: 0.05,
            crude_beta: None,
            t_step: 1e-3,
            h: None,
            refine_t_step: None,
            shots: 0,
            k_bar_c: default_k_bar_c(),
            newton_iters: default_newton_iters(),
            beta_crit: default_beta_crit(),
            solver: default_solver(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta <= self.beta_crit) {
            return Err(Error::Config(format!("beta {} must lie in (0, beta_crit = {}]", self.beta, self.beta_crit)));
        }
        if !(self.k_bar_c >= 0.0) {
            return Err(Error::Config(format!("k_bar_c must be >= 0, got {}", self.k_bar_c)));
        }
        self.stage1().validate()?;
        self.stage3().validate()?;
        self.solver.validate(NUM_PARAMS)
    }

    pub fn refine_h(&self) -> f64 {
        self.h.unwrap_or(self.epsilon / 20.0)
    }

    fn stage1(&self) -> EstimatorConfig {
        EstimatorConfig {
            t_step: self.t_step,
            beta: self.crude_beta.unwrap_or(self.beta),
            h: self.refine_h(),
            shots_per_point: self.shots,
            beta_crit: self.beta_crit,
        }
    }

    fn stage3(&self) -> EstimatorConfig {
        EstimatorConfig {
            t_step: self.refine_t_step.unwrap_or(self.epsilon / 20.0),
            ..self.stage1()
        }
    }

    /// `k̄` for a row of orders `(j, k)`, capped at `j + k̄ ≤ MAX_REFINE_ORDER`.
    pub fn k_bar(&self, j: usize, k: usize) -> usize {
        let extra = (self.k_bar_c * (1.0 / self.epsilon).ln() / (1.0 / self.beta).ln()).ceil().max(0.0) as usize;
        (k + extra).min(MAX_REFINE_ORDER.saturating_sub(j)).max(k)
    }
}

/// `min(‖x - λ*‖∞, ‖x - τ(λ*)‖∞)`.
pub fn orbit_distance(x: &ParamVector, truth: &ParamVector) -> f64 {
    x.dist_inf(truth).min(x.dist_inf(&transpose_params(truth)))
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage1Report {
    pub rhs: Vec<f64>,
    pub shots: Vec<u64>,
    pub predicted_bias_bound: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage2Report {
    pub residual_f: f64,
    pub residual_g: f64,
    pub candidate_index: usize,
    pub candidates_tried: usize,
    pub coverage_note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage3Report {
    pub k_bar: Vec<usize>,
    pub h: f64,
    pub t_step: f64,
    pub targets: Vec<f64>,
    /// Truncated-system residual per Newton iterate.
    pub residuals: Vec<f64>,
    pub status: NewtonStatus,
    /// Stage 3 failed and `lambda_hat` is the Stage-2 point.
    pub degraded: bool,
    /// Rows whose `k̄` hit the order cap.
    pub capped_rows: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LearnReport {
    pub schema_version: u32,
    pub lattice: LatticeSpec,
    pub lambda_hat: ParamVector,
    pub lambda_stage2: ParamVector,
    pub truth: Option<ParamVector>,
    pub orbit_distance: Option<f64>,
    pub stage2_orbit_distance: Option<f64>,
    /// Orbit distance per Stage-3 iterate.
    pub orbit_distance_trace: Option<Vec<f64>>,
    pub stage1: Stage1Report,
    pub stage2: Stage2Report,
    pub stage3: Stage3Report,
    pub queries: u64,
    pub shots: u64,
    pub evolution_time: f64,
}

fn rational_beta(beta: f64) -> Result<Rational> {
    Rational::approximate_float(beta)
        .filter(|r| (r.to_f64().unwrap_or(f64::NAN) - beta).abs() <= 1e-15 * beta.max(1.0))
        .ok_or_else(|| Error::Config(format!("beta {beta} has no exact rational form")))
}

/// Three-stage learner. `truth`, when known, only feeds the orbit-distance
/// diagnostics.
pub fn probe_learn(probe: &dyn ProbeInterface, lattice: &LatticeSpec, cfg: &LearnConfig, truth: Option<&ParamVector>) -> Result<LearnReport> {
    cfg.validate()?;
    lattice.validate()?;
    let specs = canonical_specs();
    let system = canonical_system(lattice.dimension)?;

    // Stage 1: c̃ from the base-point estimators.
    let rhs = estimate_system_rhs(probe, &specs, &cfg.stage1())?;
    let stage1 = Stage1Report {
        rhs: rhs.values.clone(),
        shots: rhs.reports.iter().map(|r| r.shots).collect(),
        predicted_bias_bound: rhs.reports.iter().map(|r| r.predicted_bias_bound).collect(),
        warnings: rhs.reports.iter().flat_map(|r| r.warnings.iter().map(|w| format!("{}: {w}", r.spec.name))).collect(),
    };

    // Stage 2: crude root of the canonical system.
    let found = find_root_system(&system, &rhs.values, &cfg.solver)?;
    let x0 = found.x.clone();
    let stage2 = Stage2Report {
        residual_f: found.residual_f,
        residual_g: found.residual_g,
        candidate_index: found.candidate_index,
        candidates_tried: found.candidates_tried,
        coverage_note: found.coverage_note,
    };

    // Stage 3: truncated system on the physical lattice at β.
    let ctx = SeriesContext::new(*lattice, RadiusPolicy::FiniteLattice)?;
    let beta_q = rational_beta(cfg.beta)?;
    let k_bar: Vec<usize> = specs.iter().map(|s| cfg.k_bar(s.j, s.k)).collect();
    let uncapped = |s: &crate::polysys::CoefficientSpec| {
        let extra = (cfg.k_bar_c * (1.0 / cfg.epsilon).ln() / (1.0 / cfg.beta).ln()).ceil() as usize;
        s.k + extra
    };
    let capped_rows = specs
        .iter()
        .zip(&k_bar)
        .filter(|(s, &kb)| kb < uncapped(s))
        .map(|(s, _)| s.name.clone())
        .collect();
    let polys = specs
        .par_iter()
        .zip(k_bar.par_iter())
        .map(|(s, &kb)| s.derive_truncated(&ctx, kb, beta_q))
        .collect::<Result<Vec<_>>>()?;
    let truncated = PolySet::with_vars(polys, NUM_PARAMS);
    let st3 = cfg.stage3();
    let h = cfg.refine_h();
    let targets = specs
        .iter()
        .map(|s| estimate_spec_truncated(probe, s, cfg.beta, h, &st3).map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;
    let newton_cfg = NewtonConfig {
        box_radius: cfg.solver.box_radius,
        max_iters: cfg.newton_iters,
        ..NewtonConfig::default()
    };
    let refined = newton_refine(&truncated, &targets, &x0, &newton_cfg);
    // Near the estimator floor the residual jitters and may trip the
    // divergence check; keep the best iterate. No improvement at all means
    // Stage 3 failed and the Stage-2 point stands.
    let best = (0..refined.residuals.len())
        .min_by(|&a, &b| refined.residuals[a].total_cmp(&refined.residuals[b]))
        .expect("start residual present");
    let degraded = best == 0 && refined.iterates.len() > 1;
    let lambda_stage2 = ParamVector::from_slice(&x0);
    let lambda_hat = ParamVector::from_slice(&refined.iterates[best]);

    let trace = truth.map(|t| {
        refined
            .iterates
            .iter()
            .map(|x| orbit_distance(&ParamVector::from_slice(x), t))
            .collect()
    });
    Ok(LearnReport {
        schema_version: SCHEMA_VERSION,
        lattice: *lattice,
        lambda_hat,
        lambda_stage2,
        truth: truth.copied(),
        orbit_distance: truth.map(|t| orbit_distance(&lambda_hat, t)),
        stage2_orbit_distance: truth.map(|t| orbit_distance(&lambda_stage2, t)),
        orbit_distance_trace: trace,
        stage1,
        stage2,
        stage3: Stage3Report {
            k_bar,
            h,
            t_step: st3.t_step,
            targets,
            residuals: refined.residuals,
            status: refined.status,
            degraded,
            capped_rows,
        },
        queries: probe.queries(),
        shots: probe.shots_used(),
        evolution_time: probe.evolution_time(),
    })
}

/// How sweep instances pick the smoothing center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterSpec {
    Fixed { lambda: ParamVector },
    /// Uniform in `[-half_width, half_width]^12`, drawn from the row seed.
    Uniform { half_width: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub lattice: LatticeSpec,
    pub center: CenterSpec,
    pub sigmas: Vec<f64>,
    pub betas: Vec<f64>,
    pub shots: Vec<u64>,
    pub seeds: Vec<u64>,
    pub learn: LearnConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub beta: f64,
    pub shots: u64,
    pub seed: u64,
    pub ok: bool,
    pub orbit_distance: Option<f64>,
    pub stage2_orbit_distance: Option<f64>,
    pub queries: Option<u64>,
    pub shots_used: Option<u64>,
    pub evolution_time: Option<f64>,
    pub error: Option<String>,
}

impl SweepRow {
    fn key(&self) -> (u64, u64, u64, u64) {
        (self.sigma.to_bits(), self.beta.to_bits(), self.shots, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub sigma: f64,
    pub beta: f64,
    pub shots: u64,
    pub runs: usize,
    pub failures: usize,
    pub median: Option<f64>,
    pub q90: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepAggregate>,
}

/// Smoothed instance for one sweep row: the center (if random) and the
/// perturbation both come from `seed`.
pub fn sweep_instance(center: &CenterSpec, sigma: f64, seed: u64) -> Result<ParamVector> {
    let mu = match center {
        CenterSpec::Fixed { lambda } => *lambda,
        CenterSpec::Uniform { half_width } => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut v = [0.0; NUM_PARAMS];
            for x in v.iter_mut() {
                *x = rng.random_range(-*half_width..=*half_width);
            }
            ParamVector(v)
        }
    };
    Ok(SmoothedSampler::new(mu, sigma, seed)?.sample_many(1)[0])
}

fn run_row(plan: &SweepPlan, sigma: f64, beta: f64, shots: u64, seed: u64) -> SweepRow {
    let mut row = SweepRow {
        sigma,
        beta,
        shots,
        seed,
        ok: false,
        orbit_distance: None,
        stage2_orbit_distance: None,
        queries: None,
        shots_used: None,
        evolution_time: None,
        error: None,
    };
    let result = (|| {
        let truth = sweep_instance(&plan.center, sigma, seed)?;
        let probe = SimulatedProbe::from_params(&plan.lattice, &truth, seed)?.without_log();
        let mut cfg = plan.learn;
        cfg.beta = beta;
        cfg.shots = shots;
        if let Strategy::Multistart { seed: s, .. } = &mut cfg.solver.strategy {
            *s = seed;
        }
        probe_learn(&probe, &plan.lattice, &cfg, Some(&truth))
    })();
    match result {
        Ok(rep) => {
            row.ok = true;
            row.orbit_distance = rep.orbit_distance;
            row.stage2_orbit_distance = rep.stage2_orbit_distance;
            row.queries = Some(rep.queries);
            row.shots_used = Some(rep.shots);
            row.evolution_time = Some(rep.evolution_time);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

fn aggregate(rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut groups: Vec<SweepAggregate> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let idx = match groups
            .iter()
            .position(|g| g.sigma == r.sigma && g.beta == r.beta && g.shots == r.shots)
        {
            Some(i) => i,
            None => {
                groups.push(SweepAggregate {
                    sigma: r.sigma,
                    beta: r.beta,
                    shots: r.shots,
                    runs: 0,
                    failures: 0,
                    median: None,
                    q90: None,
                    max: None,
                });
                values.push(Vec::new());
                groups.len() - 1
            }
        };
        groups[idx].runs += 1;
        match r.orbit_distance {
            Some(d) if r.ok => values[idx].push(d),
            _ => groups[idx].failures += 1,
        }
    }
    for (g, mut v) in groups.iter_mut().zip(values) {
        v.sort_by(f64::total_cmp);
        g.median = quantile(&v, 0.5);
        g.q90 = quantile(&v, 0.9);
        g.max = v.last().copied();
    }
    groups
}

/// Run every `(σ, β, shots, seed)` combination not already in `existing`.
/// Rows come back in plan order; failed rows carry the error and the sweep
/// continues.
pub fn sweep(plan: &SweepPlan, existing: &[SweepRow]) -> SweepTable {
    let done: HashSet<_> = existing.iter().map(SweepRow::key).collect();
    let mut grid = Vec::new();
    for &sigma in &plan.sigmas {
        for &beta in &plan.betas {
            for &shots in &plan.shots {
                for &seed in &plan.seeds {
                    grid.push((sigma, beta, shots, seed));
                }
            }
        }
    }
    let fresh: Vec<SweepRow> = grid
        .par_iter()
        .filter(|&&(s, b, n, seed)| !done.contains(&(s.to_bits(), b.to_bits(), n, seed)))
        .map(|&(s, b, n, seed)| run_row(plan, s, b, n, seed))
        .collect();
    let mut all: Vec<SweepRow> = existing.to_vec();
    all.extend(fresh);
    let order = |r: &SweepRow| grid.iter().position(|g| (g.0.to_bits(), g.1.to_bits(), g.2, g.3) == r.key());
    all.sort_by_key(|r| order(r).unwrap_or(usize::MAX));
    SweepTable {
        aggregates: aggregate(&all),
        rows: all,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_bar_rule_and_cap() {
        let cfg = LearnConfig::default();
        // ceil(ln 1000 / ln 20) = 3
        assert_eq!(cfg.k_bar(0, 1), 4);
        assert_eq!(cfg.k_bar(0, 2), 5);
        assert_eq!(cfg.k_bar(1, 1), 4);
        assert_eq!(cfg.k_bar(2, 1), 4);
        assert_eq!(cfg.k_bar(3, 1), 3);
        assert_eq!(cfg.k_bar(4, 3), 3);
    }

    #[test]
    fn orbit_distance_examples() {
        let mut t = ParamVector::zero();
        t.0[4] = 0.5;
        t.0[6] = -0.5;
        assert_eq!(orbit_distance(&t, &t), 0.0);
        assert_eq!(orbit_distance(&transpose_params(&t), &t), 0.0);
        let mut x = t;
        x.0[4] += 0.1;
        assert!((orbit_distance(&x, &t) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn beta_as_rational() {
        assert_eq!(rational_beta(0.05).unwrap(), Rational::new(1, 20));
    }

    #[test]
    fn empty_sweep() {
        let plan = SweepPlan {
            lattice: LatticeSpec::new(1, 3).unwrap(),
            center: CenterSpec::Uniform { half_width: 0.5 },
            sigmas: vec![],
            betas: vec![0.05],
            shots: vec![0],
            seeds: vec![1, 2],
            learn: LearnConfig::default(),
        };
        let t = sweep(&plan, &[]);
        assert!(t.rows.is_empty() && t.aggregates.is_empty());
    }
}
