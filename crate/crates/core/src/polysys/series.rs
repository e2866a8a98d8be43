//! Symbolic `t^j β^k` Taylor coefficients of the single-site probe signal
//! `A(β, t) = tr(σ^μ_0 e^{-iHt} C_B[ρ_β] e^{iHt})`.
//!
//! Heisenberg picture: `A = tr(C†[σ(t)] ρ_β)` with
//! `σ(t) = Σ_j (it)^j/j! [H, σ]_j`, and the thermal average expanded as the
//! quotient of the numerator series `tr(O e^{-βH})/d` by the partition
//! series `tr(e^{-βH})/d`.

use num_traits::One;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{build_symbolic_hamiltonian, LatticeSpec};
use crate::pauli::{conjugate_observable, nested_commutator, Channel, GaussRational, Letter, PauliExpr, Rational};

use super::multipoly::{CPoly, Poly};

/// Largest supported `j + k`.
pub const MAX_TOTAL_ORDER: usize = 6;

/// How the lattice radius is checked against the expansion order.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum RadiusPolicy {
    /// Require `r ≥ j + k + 1` so the coefficients equal their
    /// infinite-lattice values.
    #[default]
    TranslationInvariant,
    /// Exact coefficients of the given finite lattice, whatever its radius.
    FiniteLattice,
}

/// Required radius for the translation-invariant policy.
pub fn stable_radius(total_order: usize) -> u32 {
    total_order as u32 + 1
}

fn check_orders(lattice: &LatticeSpec, j_max: usize, k_max: usize, policy: RadiusPolicy) -> Result<()> {
    lattice.validate()?;
    let order = j_max + k_max;
    if order > MAX_TOTAL_ORDER {
        return Err(Error::OrderTooLarge {
            order,
            max: MAX_TOTAL_ORDER,
        });
    }
    if policy == RadiusPolicy::TranslationInvariant && lattice.radius < stable_radius(order) {
        return Err(Error::RadiusTooSmall {
            radius: lattice.radius,
            order,
            required: stable_radius(order),
        });
    }
    Ok(())
}

fn factorial(n: usize) -> i128 {
    (1..=n as i128).product()
}

/// `(-1)^m / m!`
fn exp_weight(m: usize) -> Rational {
    let s = if m % 2 == 0 { 1 } else { -1 };
    Rational::new(s, factorial(m))
}

/// Shared symbolic data for one lattice.
pub struct SeriesContext {
    lattice: LatticeSpec,
    hamiltonian: PauliExpr<CPoly>,
    policy: RadiusPolicy,
}

impl SeriesContext {
    pub fn new(lattice: LatticeSpec, policy: RadiusPolicy) -> Result<Self> {
        lattice.validate()?;
        Ok(SeriesContext {
            lattice,
            hamiltonian: build_symbolic_hamiltonian(&lattice),
            policy,
        })
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn hamiltonian(&self) -> &PauliExpr<CPoly> {
        &self.hamiltonian
    }

    /// `tr(O H^m)/d` for `m = 0..=m_max`.
    ///
    /// Partial products `O H^a` drop strings of weight above `2(m_max - a)`:
    /// each further factor of `H` changes the weight by at most two, so such
    /// strings cannot reach the identity.
    fn moments(&self, o: &PauliExpr<CPoly>, m_max: usize) -> Vec<CPoly> {
        let h = &self.hamiltonian;
        let mut out = vec![o.normalized_trace()];
        let mut left = o.clone();
        for m in 1..=m_max {
            out.push(left.trace_product(h));
            if m < m_max {
                let room = 2 * (m_max - m);
                left = left.mul_filtered(h, |p| p.weight() <= room);
            }
        }
        out
    }

    /// Inverse of the partition series `Σ_m (-1)^m/m! tr(H^m)/d β^m`,
    /// truncated at `β^k_max`.
    fn inverse_partition_series(&self, k_max: usize) -> Vec<CPoly> {
        let z: Vec<CPoly> = self
            .moments(&PauliExpr::identity(CPoly::one()), k_max)
            .into_iter()
            .enumerate()
            .map(|(m, t)| t.scale(GaussRational::real(exp_weight(m))))
            .collect();
        // z_0 = 1, so w_k = -Σ_{m=1..k} z_m w_{k-m}.
        let mut w: Vec<CPoly> = vec![CPoly::one()];
        for k in 1..=k_max {
            let mut acc = CPoly::zero();
            for m in 1..=k {
                acc = acc.sub(&z[m].mul(&w[k - m]));
            }
            w.push(acc);
        }
        w
    }

    /// Taylor coefficients `A[j][k]` of `t^j β^k` for `j ≤ j_max`, `k ≤ k_max`.
    pub fn series_observable(&self, j_max: usize, k_max: usize, mu: Letter, channel: Channel) -> Result<Vec<Vec<Poly>>> {
        check_orders(&self.lattice, j_max, k_max, self.policy)?;
        let probe = self.lattice.probe();
        let sigma = PauliExpr::<CPoly>::single(probe, mu);
        let w = self.inverse_partition_series(k_max);
        let commutators: Vec<PauliExpr<CPoly>> = (0..=j_max)
            .scan(sigma, |cur, j| {
                let out = cur.clone();
                if j < j_max {
                    *cur = nested_commutator(&self.hamiltonian, cur, 1);
                }
                Some(out)
            })
            .collect();
        commutators
            .par_iter()
            .enumerate()
            .map(|(j, comm)| {
                // O_j = i^j/j! C†[[H, σ]_j]
                let unit = match j % 4 {
                    0 => GaussRational::from_int(1),
                    1 => GaussRational::i(),
                    2 => GaussRational::from_int(-1),
                    _ => -GaussRational::i(),
                };
                let pref = unit * GaussRational::real(Rational::new(1, factorial(j)));
                let o = conjugate_observable(channel, probe, comm).scale(&CPoly::constant(pref));
                let num: Vec<CPoly> = self
                    .moments(&o, k_max)
                    .into_iter()
                    .enumerate()
                    .map(|(m, t)| t.scale(GaussRational::real(exp_weight(m))))
                    .collect();
                (0..=k_max)
                    .map(|k| {
                        let mut acc = CPoly::zero();
                        for m in 0..=k {
                            acc = acc.add(&num[m].mul(&w[k - m]));
                        }
                        acc.into_real().map_err(|e| Error::NonReal(format!("coefficient (j={j}, k={k}): {e}")))
                    })
                    .collect::<Result<Vec<Poly>>>()
            })
            .collect()
    }

    /// Coefficient of `t^j β^k` only.
    pub fn coefficient(&self, j: usize, k: usize, mu: Letter, channel: Channel) -> Result<Poly> {
        let table = self.series_observable(j, k, mu, channel)?;
        Ok(table[j][k].clone())
    }

    /// `Σ_{k ≤ k' ≤ k̄} β^{k'-k} binom(k', k) A[j][k']`, the polynomial that
    /// a `k`-th β-difference at base point β estimates when orders above
    /// `k̄` are neglected.
    pub fn truncated_series_poly(&self, j: usize, k: usize, k_bar: usize, mu: Letter, channel: Channel, beta: Rational) -> Result<Poly> {
        if k_bar < k {
            return Err(Error::Config(format!("truncation order {k_bar} below base order {k}")));
        }
        let table = self.series_observable(j, k_bar, mu, channel)?;
        let mut acc = Poly::zero();
        let mut beta_pow = Rational::one();
        for kp in k..=k_bar {
            let c = beta_pow * binomial(kp, k);
            acc = acc.add(&table[j][kp].scale(c));
            beta_pow *= beta;
        }
        Ok(acc)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> Rational {
    Rational::from_integer(factorial(n) / (factorial(k) * factorial(n - k)))
}

/// One-shot form of [`SeriesContext::series_observable`].
pub fn series_observable(
    lattice: &LatticeSpec,
    j_max: usize,
    k_max: usize,
    mu: Letter,
    channel: Channel,
    policy: RadiusPolicy,
) -> Result<Vec<Vec<Poly>>> {
    check_orders(lattice, j_max, k_max, policy)?;
    SeriesContext::new(*lattice, policy)?.series_observable(j_max, k_max, mu, channel)
}

