//! Finite-difference estimators for the Taylor coefficients of the probe
//! signal, built only from [`ProbeInterface`] calls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{coef::rational_to_f64, Channel, Letter};
use crate::polysys::CoefficientSpec;
use crate::sim::{ExperimentSpec, ProbeInterface};

pub const MAX_TIME_ORDER: usize = 4;
pub const MAX_BETA_ORDER: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Time step of the forward differences.
    pub t_step: f64,
    /// Base inverse temperature; also the β step of [`est_taylor_coeff`].
    pub beta: f64,
    /// β step of [`est_truncated`].
    #[serde(default = "default_h")]
    pub h: f64,
    /// Shots per probe call; 0 requests exact expectations.
    #[serde(default)]
    pub shots_per_point: u64,
    #[serde(default = "default_beta_crit")]
    pub beta_crit: f64,
}

fn default_h() -> f64 {
    1e-3
}

fn default_beta_crit() -> f64 {
    0.1
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            t_step: 1e-3,
            beta: 1e-3,
            h: default_h(),
            shots_per_point: 0,
            beta_crit: default_beta_crit(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.t_step, "t_step")?;
        positive(self.beta, "beta")?;
        positive(self.h, "h")?;
        positive(self.beta_crit, "beta_crit")
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Forward-difference weights `(-1)^{n-ℓ} binom(n, ℓ)`.
fn difference_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|l| if (n - l) % 2 == 0 { binom(n, l) } else { -binom(n, l) })
        .collect()
}

/// `t^j` coefficient of `A(β, t)` from `Σ_ℓ (-1)^{j-ℓ} binom(j,ℓ) A(β, ℓ t) / (j! t^j)`.
pub fn est_time_derivative(probe: &dyn ProbeInterface, j: usize, beta: f64, mu: Letter, channel: Channel, cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    if j > MAX_TIME_ORDER {
        return Err(Error::EstimatorGuard(format!("time order {j} above {MAX_TIME_ORDER}")));
    }
    let mut acc = 0.0;
    for (l, w) in difference_weights(j).into_iter().enumerate() {
        let spec = ExperimentSpec {
            beta,
            channel,
            time: l as f64 * cfg.t_step,
            observable: mu,
            shots: cfg.shots_per_point,
        };
        acc += w * probe.measure(&spec)?;
    }
    Ok(acc / (factorial(j) * cfg.t_step.powi(j as i32)))
}

fn beta_difference(
    probe: &dyn ProbeInterface,
    j: usize,
    k: usize,
    base: f64,
    step: f64,
    mu: Letter,
    channel: Channel,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    if k > MAX_BETA_ORDER {
        return Err(Error::EstimatorGuard(format!("beta order {k} above {MAX_BETA_ORDER}")));
    }
    let top = base + k as f64 * step;
    if top > cfg.beta_crit * (1.0 + 1e-12) {
        return Err(Error::EstimatorGuard(format!("largest beta {top} exceeds beta_crit {}", cfg.beta_crit)));
    }
    let mut acc = 0.0;
    for (l, w) in difference_weights(k).into_iter().enumerate() {
        let b = base + l as f64 * step;
        // At infinite temperature the probe signal vanishes identically.
        if b == 0.0 {
            continue;
        }
        acc += w * est_time_derivative(probe, j, b, mu, channel, cfg)?;
    }
    Ok(acc / (factorial(k) * step.powi(k as i32)))
}

/// `t^j β^k` coefficient: `k`-th forward difference of the `t^j`
/// coefficient over `β ∈ {0, β, .., kβ}`, with the `β = 0` point set to 0.
pub fn est_taylor_coeff(probe: &dyn ProbeInterface, j: usize, k: usize, mu: Letter, channel: Channel, cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    beta_difference(probe, j, k, 0.0, cfg.beta, mu, channel, cfg)
}

/// `k`-th forward difference over `β, β + h, .., β + kh`; estimates the
/// truncated series `Σ_{k' ≥ k} binom(k', k) β^{k'-k} A[j][k']`.
pub fn est_truncated(
    probe: &dyn ProbeInterface,
    j: usize,
    k: usize,
    beta: f64,
    h: f64,
    mu: Letter,
    channel: Channel,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !(h > 0.0) || !(beta >= 0.0) {
        return Err(Error::EstimatorGuard(format!("need beta >= 0 and h > 0, got {beta}, {h}")));
    }
    beta_difference(probe, j, k, beta, h, mu, channel, cfg)
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub spec: CoefficientSpec,
    pub value: f64,
    /// Shots spent on this estimate.
    pub shots: u64,
    pub queries: u64,
    pub t_step: f64,
    pub beta: f64,
    /// β step; equal to `beta` for the base-point estimator.
    pub h: f64,
    /// `β + t_step / β^k` with unit constants, a scale rather than a
    /// certified bound.
    pub predicted_bias_bound: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn spec_report(
    probe: &dyn ProbeInterface,
    spec: &CoefficientSpec,
    cfg: &EstimatorConfig,
    base: f64,
    step: f64,
) -> Result<EstimateReport> {
    let (q0, s0) = (probe.queries(), probe.shots_used());
    let mut value = 0.0;
    for &(channel, w) in &spec.channels {
        value += rational_to_f64(&w) * beta_difference(probe, spec.j, spec.k, base, step, spec.mu, channel, cfg)?;
    }
    let mut warnings = Vec::new();
    if cfg.shots_per_point > 0 {
        // Standard error of the j-th time difference before β differencing.
        let amp = 2f64.powi(spec.j as i32) / (factorial(spec.j) * cfg.t_step.powi(spec.j as i32));
        let noise = amp * 2f64.powi(spec.k as i32) / (factorial(spec.k) * step.powi(spec.k as i32))
            / (cfg.shots_per_point as f64).sqrt();
        if noise > 1.0 {
            warnings.push(format!("shot noise scale {noise:.3e} exceeds 1; steps too small for the shot budget"));
        }
    }
    Ok(EstimateReport {
        spec: spec.clone(),
        value,
        shots: probe.shots_used() - s0,
        queries: probe.queries() - q0,
        t_step: cfg.t_step,
        beta: base.max(step),
        h: step,
        predicted_bias_bound: step + base + cfg.t_step / step.powi(spec.k as i32),
        warnings,
    })
}

/// Estimate one weighted row at the base point.
pub fn estimate_spec(probe: &dyn ProbeInterface, spec: &CoefficientSpec, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    spec_report(probe, spec, cfg, 0.0, cfg.beta)
}

/// Estimate one weighted row on the shifted grid `β + ℓh`.
pub fn estimate_spec_truncated(probe: &dyn ProbeInterface, spec: &CoefficientSpec, beta: f64, h: f64, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    spec_report(probe, spec, cfg, beta, h)
}

#[derive(Clone, Debug, Serialize)]
pub struct RhsEstimate {
    pub values: Vec<f64>,
    pub reports: Vec<EstimateReport>,
}

/// `c̃` for the given rows, in order.
pub fn estimate_system_rhs(probe: &dyn ProbeInterface, specs: &[CoefficientSpec], cfg: &EstimatorConfig) -> Result<RhsEstimate> {
    let reports = specs
        .iter()
        .map(|s| estimate_spec(probe, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RhsEstimate {
        values: reports.iter().map(|r| r.value).collect(),
        reports,
    })
}
