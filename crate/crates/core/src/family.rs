//! The 12-parameter nearest-neighbor Hamiltonian family on finite square
//! lattices, smoothed sampling, and the inversion symmetry on parameters.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{Coefficient, Letter, PauliExpr, PauliString, Site};
use crate::polysys::multipoly::CPoly;

pub const NUM_PARAMS: usize = 12;

pub const PARAM_NAMES: [&str; NUM_PARAMS] = [
    "h1", "h2", "h3", "J11", "J12", "J13", "J21", "J22", "J23", "J31", "J32", "J33",
];

/// Variable index of `h_mu` (`mu` in 0..3).
pub const fn field_var(mu: usize) -> usize {
    mu
}

/// Variable index of `J_{mu nu}` (`mu`, `nu` in 0..3).
pub const fn coupling_var(mu: usize, nu: usize) -> usize {
    3 + 3 * mu + nu
}

/// Variable permutation realizing `J_{mu nu} <-> J_{nu mu}`.
pub const TRANSPOSE_PERMUTATION: [usize; NUM_PARAMS] = [0, 1, 2, 3, 6, 9, 4, 7, 10, 5, 8, 11];

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
}

/// Site set `{-r..=r}^D` with open boundaries; the probe is the origin.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dimension: usize,
    pub radius: u32,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(dimension: usize, radius: u32) -> Result<Self> {
        let l = LatticeSpec {
            dimension,
            radius,
            boundary: Boundary::Open,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dimension) {
            return Err(Error::InvalidLattice(format!("dimension {} not in 1..=3", self.dimension)));
        }
        if self.radius < 1 {
            return Err(Error::InvalidLattice("radius must be at least 1".into()));
        }
        if self.radius > 100 {
            return Err(Error::InvalidLattice(format!("radius {} is unreasonably large", self.radius)));
        }
        Ok(())
    }

    pub fn probe(&self) -> Site {
        Site::origin(self.dimension)
    }

    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.dimension as u32)
    }

    /// Sites in lexicographic coordinate order.
    pub fn sites(&self) -> Vec<Site> {
        let r = self.radius as i16;
        let side = self.side();
        (0..self.num_sites())
            .map(|mut idx| {
                let mut c = [0i16; 3];
                for k in (0..self.dimension).rev() {
                    c[k] = (idx % side) as i16 - r;
                    idx /= side;
                }
                Site::new(&c[..self.dimension])
            })
            .collect()
    }

    /// Oriented nearest-neighbor pairs `(v, v + e_axis)`.
    pub fn edges(&self) -> Vec<(Site, Site)> {
        let r = self.radius as i16;
        let mut out = Vec::new();
        for v in self.sites() {
            for axis in 0..self.dimension {
                if v.coords()[axis] < r {
                    let mut c = v.coords().to_vec();
                    c[axis] += 1;
                    out.push((v, Site::new(&c)));
                }
            }
        }
        out
    }

    pub fn contains(&self, s: &Site) -> bool {
        s.dim() == self.dimension && s.coords().iter().all(|c| c.unsigned_abs() as u32 <= self.radius)
    }
}

/// Parameter vector `(h1,h2,h3,J11,...,J33)`.
#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
#[serde(from = "ParamJson", into = "ParamJson")]
pub struct ParamVector(pub [f64; NUM_PARAMS]);

impl ParamVector {
    pub fn zero() -> Self {
        ParamVector([0.0; NUM_PARAMS])
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let mut v = [0.0; NUM_PARAMS];
        v.copy_from_slice(&x[..NUM_PARAMS]);
        ParamVector(v)
    }

    pub fn h(&self, mu: usize) -> f64 {
        self.0[field_var(mu)]
    }

    pub fn j(&self, mu: usize, nu: usize) -> f64 {
        self.0[coupling_var(mu, nu)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dist_inf(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest `|J_{mu nu} - J_{nu mu}|`.
    pub fn asymmetry(&self) -> f64 {
        self.dist_inf(&transpose_params(self))
    }
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
#[serde(deny_unknown_fields)]
struct ParamJson {
    h1: f64,
    h2: f64,
    h3: f64,
    J11: f64,
    J12: f64,
    J13: f64,
    J21: f64,
    J22: f64,
    J23: f64,
    J31: f64,
    J32: f64,
    J33: f64,
}

impl From<ParamJson> for ParamVector {
    fn from(p: ParamJson) -> Self {
        ParamVector([
            p.h1, p.h2, p.h3, p.J11, p.J12, p.J13, p.J21, p.J22, p.J23, p.J31, p.J32, p.J33,
        ])
    }
}

impl From<ParamVector> for ParamJson {
    fn from(v: ParamVector) -> Self {
        let x = v.0;
        ParamJson {
            h1: x[0],
            h2: x[1],
            h3: x[2],
            J11: x[3],
            J12: x[4],
            J13: x[5],
            J21: x[6],
            J22: x[7],
            J23: x[8],
            J31: x[9],
            J32: x[10],
            J33: x[11],
        }
    }
}

/// Swap `J_{mu nu} <-> J_{nu mu}`, fixing the field.
pub fn transpose_params(lambda: &ParamVector) -> ParamVector {
    let mut out = [0.0; NUM_PARAMS];
    for (i, &p) in TRANSPOSE_PERMUTATION.iter().enumerate() {
        out[p] = lambda.0[i];
    }
    ParamVector(out)
}

/// `H = Σ_edges Σ c(J_{mu nu}) σ^mu_v σ^nu_v' + Σ_v Σ c(h_mu) σ^mu_v` with
/// coefficient `coef(var)` for each parameter; zero coefficients are skipped.
pub fn build_hamiltonian_with<C: Coefficient>(lattice: &LatticeSpec, coef: impl Fn(usize) -> C) -> PauliExpr<C> {
    let mut h = PauliExpr::zero();
    for v in lattice.sites() {
        for (mu, l) in Letter::ALL.iter().enumerate() {
            h.add_term(PauliString::single(v, *l), coef(field_var(mu)));
        }
    }
    for (a, b) in lattice.edges() {
        for (mu, la) in Letter::ALL.iter().enumerate() {
            for (nu, lb) in Letter::ALL.iter().enumerate() {
                h.add_term(PauliString::from_letters([(a, *la), (b, *lb)]), coef(coupling_var(mu, nu)));
            }
        }
    }
    h
}

pub fn build_hamiltonian(lattice: &LatticeSpec, lambda: &ParamVector) -> PauliExpr<Complex64> {
    build_hamiltonian_with(lattice, |v| Complex64::new(lambda.0[v], 0.0))
}

/// Hamiltonian with each coefficient the corresponding parameter variable.
pub fn build_symbolic_hamiltonian(lattice: &LatticeSpec) -> PauliExpr<CPoly> {
    build_hamiltonian_with(lattice, CPoly::var)
}

/// Gaussian smoothing of a center parameter vector.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmoothedSampler {
    pub mu: ParamVector,
    pub varsigma: f64,
    pub seed: u64,
}

impl SmoothedSampler {
    pub fn new(mu: ParamVector, varsigma: f64, seed: u64) -> Result<Self> {
        if !(varsigma >= 0.0) || !varsigma.is_finite() {
            return Err(Error::Config(format!("smoothing scale must be >= 0, got {varsigma}")));
        }
        Ok(SmoothedSampler { mu, varsigma, seed })
    }

    /// `count` successive draws from one seeded stream.
    pub fn sample_many(&self, count: usize) -> Vec<ParamVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|_| {
                let mut out = self.mu.0;
                for x in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x += self.varsigma * z;
                }
                ParamVector(out)
            })
            .collect()
    }
}

/// One draw `mu + varsigma · N(0, I)`, deterministic in the seed.
pub fn sample_smoothed(s: &SmoothedSampler) -> ParamVector {
    s.sample_many(1)[0]
}

/// Free parameters of the smoothed model.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmoothingModel {
    /// Bound `R` on the center `‖mu‖∞`.
    pub center_radius: f64,
    /// Failure probability `delta`.
    pub delta: f64,
}

impl Default for SmoothingModel {
    fn default() -> Self {
        SmoothingModel {
            center_radius: 1.0,
            delta: 0.01,
        }
    }
}

impl SmoothingModel {
    /// `Λ = R + 2 ς sqrt(log(N/δ))`.
    pub fn effective_radius(&self, varsigma: f64) -> f64 {
        self.center_radius + 2.0 * varsigma * (NUM_PARAMS as f64 / self.delta).ln().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(var: usize) -> ParamVector {
        let mut v = ParamVector::zero();
        v.0[var] = 1.0;
        v
    }

    fn site(x: i16) -> Site {
        Site::new(&[x])
    }

    #[test]
    fn field_only_hamiltonian() {
        let l = LatticeSpec::new(1, 1).unwrap();
        let h = build_hamiltonian(&l, &one_hot(field_var(2)));
        let mut want = PauliExpr::zero();
        for x in -1..=1 {
            want.add_term(PauliString::single(site(x), Letter::Z), Complex64::new(1.0, 0.0));
        }
        assert_eq!(h, want);
    }

    #[test]
    fn xx_coupling_hamiltonian() {
        let l = LatticeSpec::new(1, 1).unwrap();
        let h = build_hamiltonian(&l, &one_hot(coupling_var(0, 0)));
        let mut want = PauliExpr::zero();
        for x in -1..1 {
            want.add_term(
                PauliString::from_letters([(site(x), Letter::X), (site(x + 1), Letter::X)]),
                Complex64::new(1.0, 0.0),
            );
        }
        assert_eq!(h, want);
    }

    #[test]
    fn symbolic_term_count() {
        // 5 sites × 3 fields + 4 edges × 9 couplings.
        let l = LatticeSpec::new(1, 2).unwrap();
        assert_eq!(build_symbolic_hamiltonian(&l).len(), 51);
        let l2 = LatticeSpec::new(2, 1).unwrap();
        assert_eq!(l2.edges().len(), 12);
        assert_eq!(build_symbolic_hamiltonian(&l2).len(), 9 * 3 + 12 * 9);
    }

    #[test]
    fn traceless() {
        let l = LatticeSpec::new(2, 1).unwrap();
        assert!(build_symbolic_hamiltonian(&l).normalized_trace().is_zero());
    }

    #[test]
    fn transpose_examples() {
        let v = one_hot(coupling_var(0, 1));
        assert_eq!(transpose_params(&v), one_hot(coupling_var(1, 0)));
        let mut sym = ParamVector::zero();
        sym.0[coupling_var(0, 2)] = 0.3;
        sym.0[coupling_var(2, 0)] = 0.3;
        sym.0[field_var(1)] = -1.0;
        assert_eq!(transpose_params(&sym), sym);
    }

    #[test]
    fn param_json_keys() {
        let v = one_hot(coupling_var(2, 1));
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"J32\":1.0"));
        let back: ParamVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        let lat: LatticeSpec = serde_json::from_str(r#"{"dimension":2,"radius":1,"boundary":"open"}"#).unwrap();
        assert_eq!(lat, LatticeSpec::new(2, 1).unwrap());
    }

    #[test]
    fn smoothed_sampler_properties() {
        let mu = one_hot(3);
        let s0 = SmoothedSampler::new(mu, 0.0, 5).unwrap();
        assert_eq!(sample_smoothed(&s0), mu);
        let s = SmoothedSampler::new(mu, 0.1, 5).unwrap();
        assert_eq!(sample_smoothed(&s), sample_smoothed(&s));
        assert!(SmoothedSampler::new(mu, -1.0, 0).is_err());

        let std = SmoothedSampler::new(ParamVector::zero(), 1.0, 11).unwrap();
        let draws = std.sample_many(10_000);
        for k in 0..NUM_PARAMS {
            let mean = draws.iter().map(|d| d.0[k]).sum::<f64>() / 1e4;
            let var = draws.iter().map(|d| (d.0[k] - mean).powi(2)).sum::<f64>() / (1e4 - 1.0);
            assert!(mean.abs() < 3.0 / 100.0, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn effective_radius_default() {
        let m = SmoothingModel::default();
        assert!((m.effective_radius(0.0) - 1.0).abs() < 1e-15);
        let expect = 1.0 + 0.2 * (1200.0f64).ln().sqrt();
        assert!((m.effective_radius(0.1) - expect).abs() < 1e-12);
    }
}
