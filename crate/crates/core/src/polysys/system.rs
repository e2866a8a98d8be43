//! The 13-polynomial canonical system `P = (q, p1..p12)` and numeric
//! evaluation of polynomial lists.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::family::{LatticeSpec, TRANSPOSE_PERMUTATION};
use crate::pauli::{Channel, Letter, Rational};

use super::golden;
use super::multipoly::{Monomial, Poly, MAX_VARS};
use super::series::{stable_radius, RadiusPolicy, SeriesContext};

pub const SYSTEM_NAMES: [&str; 13] = [
    "q", "p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10", "p11", "p12",
];

/// One row of the system: `Σ_B weight_B · A[j][k](μ, B)`.
#[derive(Clone, PartialEq, Debug)]
pub struct CoefficientSpec {
    pub name: String,
    pub j: usize,
    pub k: usize,
    pub mu: Letter,
    pub channels: Vec<(Channel, Rational)>,
}

impl CoefficientSpec {
    pub fn new(name: &str, j: usize, k: usize, mu: Letter, channels: &[(usize, i128, i128)]) -> Self {
        CoefficientSpec {
            name: name.to_string(),
            j,
            k,
            mu,
            channels: channels
                .iter()
                .map(|&(b, n, d)| (Channel::new(b).expect("channel index in table"), Rational::new(n, d)))
                .collect(),
        }
    }

    pub fn total_order(&self) -> usize {
        self.j + self.k
    }

    /// Symbolic value on the context's lattice.
    pub fn derive(&self, ctx: &SeriesContext) -> Result<Poly> {
        self.combine(|channel| ctx.coefficient(self.j, self.k, self.mu, channel))
    }

    /// The polynomial a `k`-th β-difference at base point `beta` targets
    /// when orders above `k_bar` are dropped.
    pub fn derive_truncated(&self, ctx: &SeriesContext, k_bar: usize, beta: Rational) -> Result<Poly> {
        self.combine(|channel| ctx.truncated_series_poly(self.j, self.k, k_bar, self.mu, channel, beta))
    }

    fn combine(&self, mut f: impl FnMut(Channel) -> Result<Poly>) -> Result<Poly> {
        let mut acc = Poly::zero();
        for &(channel, w) in &self.channels {
            acc = acc.add(&f(channel)?.scale(w));
        }
        Ok(acc)
    }
}

#[derive(Serialize)]
struct SpecView<'a> {
    name: &'a str,
    j: usize,
    k: usize,
    mu: Letter,
    channels: Vec<(usize, String)>,
}

impl Serialize for CoefficientSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecView {
            name: &self.name,
            j: self.j,
            k: self.k,
            mu: self.mu,
            channels: self.channels.iter().map(|(c, w)| (c.index(), w.to_string())).collect(),
        }
        .serialize(s)
    }
}

/// Rows `q, p1..p12`. Each weight times the raw Taylor coefficient equals
/// the trace expression of that row, e.g. `p1 = tr(XH)/d` is minus the
/// `β^1` coefficient of `⟨X⟩`, and `p7 = tr([H,X] YHY)/(4id)` is `+1/4`
/// of the `t β` coefficient of `⟨X⟩` after the `Y` channel.
pub fn canonical_specs() -> Vec<CoefficientSpec> {
    use Letter::*;
    vec![
        CoefficientSpec::new("q", 2, 1, X, &[(1, 1, 4), (2, 1, 4)]),
        CoefficientSpec::new("p1", 0, 1, X, &[(0, -1, 1)]),
        CoefficientSpec::new("p2", 0, 1, Y, &[(0, -1, 1)]),
        CoefficientSpec::new("p3", 0, 1, Z, &[(0, -1, 1)]),
        CoefficientSpec::new("p4", 0, 2, X, &[(0, 1, 1)]),
        CoefficientSpec::new("p5", 0, 2, Y, &[(0, 1, 1)]),
        CoefficientSpec::new("p6", 0, 2, Z, &[(0, 1, 1)]),
        CoefficientSpec::new("p7", 1, 1, X, &[(2, 1, 4)]),
        CoefficientSpec::new("p8", 1, 1, Y, &[(3, 1, 4)]),
        CoefficientSpec::new("p9", 1, 1, Z, &[(1, 1, 4)]),
        CoefficientSpec::new("p10", 1, 1, Z, &[(9, 1, 4), (4, -1, 4)]),
        CoefficientSpec::new("p11", 1, 1, X, &[(7, 1, 4), (5, -1, 4)]),
        CoefficientSpec::new("p12", 1, 1, Y, &[(8, 1, 4), (6, -1, 4)]),
    ]
}

/// List of polynomials with cached first partials.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySet {
    polys: Vec<Poly>,
    partials: Vec<Vec<Poly>>,
    nvars: usize,
}

impl PolySet {
    /// Polynomials in all 12 parameters.
    pub fn new(polys: Vec<Poly>) -> Self {
        PolySet::with_vars(polys, MAX_VARS)
    }

    /// Polynomials in the first `nvars` variables.
    pub fn with_vars(polys: Vec<Poly>, nvars: usize) -> Self {
        assert!(nvars <= MAX_VARS);
        let partials = polys.iter().map(|p| (0..nvars).map(|v| p.partial(v)).collect()).collect();
        PolySet { polys, partials, nvars }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn polys(&self) -> &[Poly] {
        &self.polys
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    /// Subset of rows in the given order.
    pub fn rows(&self, idx: &[usize]) -> PolySet {
        PolySet {
            polys: idx.iter().map(|&i| self.polys[i].clone()).collect(),
            partials: idx.iter().map(|&i| self.partials[i].clone()).collect(),
            nvars: self.nvars,
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.polys.iter().map(|p| p.eval_f64(x)))
    }

    pub fn eval_complex(&self, x: &[Complex64]) -> DVector<Complex64> {
        DVector::from_iterator(self.len(), self.polys.iter().map(|p| p.eval_complex(x)))
    }

    pub fn eval_rational(&self, x: &[Rational]) -> Vec<Rational> {
        self.polys.iter().map(|p| p.eval_rational(x)).collect()
    }

    pub fn jacobian_f64(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.nvars, |r, c| self.partials[r][c].eval_f64(x))
    }

    pub fn jacobian_complex(&self, x: &[Complex64]) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.len(), self.nvars, |r, c| self.partials[r][c].eval_complex(x))
    }
}

/// Jacobian of a polynomial list at a real point.
pub fn jacobian(polys: &[Poly], x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(polys.len(), MAX_VARS, |r, c| polys[r].partial(c).eval_f64(x))
}

/// Hessian of one polynomial at a real point.
pub fn hessian(p: &Poly, x: &[f64]) -> DMatrix<f64> {
    let first: Vec<Poly> = (0..MAX_VARS).map(|v| p.partial(v)).collect();
    DMatrix::from_fn(MAX_VARS, MAX_VARS, |r, c| first[r].partial(c).eval_f64(x))
}

/// `P = (G | F)` with `G = q` and `F = (p1..p12)`, invariant under the
/// coupling transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSystem {
    set: PolySet,
}

impl PolynomialSystem {
    /// `polys` in the order `q, p1..p12`.
    pub fn new(polys: Vec<Poly>) -> Result<Self> {
        if polys.len() != SYSTEM_NAMES.len() {
            return Err(Error::Config(format!("system needs 13 polynomials, got {}", polys.len())));
        }
        Ok(PolynomialSystem { set: PolySet::new(polys) })
    }

    pub fn polys(&self) -> &[Poly] {
        self.set.polys()
    }

    pub fn g(&self) -> &Poly {
        &self.set.polys()[0]
    }

    pub fn f(&self) -> &[Poly] {
        &self.set.polys()[1..]
    }

    pub fn all(&self) -> &PolySet {
        &self.set
    }

    pub fn square(&self) -> PolySet {
        self.set.rows(&(1..13).collect::<Vec<_>>())
    }

    pub fn get(&self, name: &str) -> Option<&Poly> {
        SYSTEM_NAMES.iter().position(|n| *n == name).map(|i| &self.set.polys()[i])
    }

    /// Components `(G, F1..F12)`.
    pub fn evaluate(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.set.eval_complex(x).iter().copied().collect()
    }

    pub fn evaluate_f64(&self, x: &[f64]) -> Vec<f64> {
        self.set.eval_f64(x).iter().copied().collect()
    }

    /// Rows that change under `J_{μν} -> J_{νμ}`.
    pub fn asymmetric_rows(&self) -> Vec<&'static str> {
        self.polys()
            .iter()
            .zip(SYSTEM_NAMES)
            .filter(|(p, _)| p.permute(&TRANSPOSE_PERMUTATION) != **p)
            .map(|(_, n)| n)
            .collect()
    }

    pub fn variables(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.polys().iter().flat_map(|p| p.variables()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Thirteen named blocks; each monomial line is `num/den e1 .. e12`
    /// in descending graded-lex order, blocks separated by blank lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, (name, p)) in SYSTEM_NAMES.iter().zip(self.polys()).enumerate() {
            if k > 0 {
                out.push('\n');
            }
            out.push_str(name);
            out.push('\n');
            out.push_str(&poly_to_text(p));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut blocks: Vec<(String, Vec<(Monomial, Rational)>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() == 1 {
                blocks.push((fields[0].to_string(), Vec::new()));
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: ln + 1, msg };
            let (_, terms) = blocks
                .last_mut()
                .ok_or_else(|| parse_err("monomial before first block name".into()))?;
            if fields.len() != MAX_VARS + 1 {
                return Err(parse_err(format!("expected coefficient and {MAX_VARS} exponents")));
            }
            let coef = crate::pauli::parse_rational(fields[0])
                .ok_or_else(|| parse_err(format!("bad coefficient {:?}", fields[0])))?;
            let exps = fields[1..]
                .iter()
                .map(|e| e.parse::<u32>().map_err(|e| parse_err(e.to_string())))
                .collect::<Result<Vec<u32>>>()?;
            if exps.iter().any(|&e| e > 31) {
                return Err(parse_err("exponent above 31".into()));
            }
            terms.push((Monomial::from_exponents(&exps), coef));
        }
        let names: Vec<&str> = blocks.iter().map(|(n, _)| n.as_str()).collect();
        if names != SYSTEM_NAMES {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected blocks {SYSTEM_NAMES:?}, found {names:?}"),
            });
        }
        PolynomialSystem::new(blocks.into_iter().map(|(_, t)| Poly::from_terms(t)).collect())
    }
}

pub fn poly_to_text(p: &Poly) -> String {
    let mut out = String::new();
    for (m, c) in p.grlex_terms().into_iter().rev() {
        let _ = write!(out, "{}/{}", c.numer(), c.denom());
        for e in m.exponents() {
            let _ = write!(out, " {e}");
        }
        out.push('\n');
    }
    out
}

/// Derive the 13 rows on `lattice` without the golden comparison.
pub fn derive_system(lattice: &LatticeSpec, policy: RadiusPolicy) -> Result<PolynomialSystem> {
    let ctx = SeriesContext::new(*lattice, policy)?;
    let polys = canonical_specs()
        .par_iter()
        .map(|s| s.derive(&ctx))
        .collect::<Result<Vec<_>>>()?;
    PolynomialSystem::new(polys)
}

/// Lattice used for the canonical derivation in dimension `d`.
pub fn canonical_lattice(d: usize) -> Result<LatticeSpec> {
    let order = canonical_specs().iter().map(|s| s.total_order()).max().unwrap_or(0);
    LatticeSpec::new(d, stable_radius(order))
}

/// Derive `P` in dimension `d` and check it against the stored closed forms.
pub fn canonical_system(d: usize) -> Result<PolynomialSystem> {
    let sys = derive_system(&canonical_lattice(d)?, RadiusPolicy::TranslationInvariant)?;
    let expected = golden::expected_system(d)?;
    for (name, (got, want)) in SYSTEM_NAMES.iter().zip(sys.polys().iter().zip(expected.polys())) {
        if got != want {
            return Err(Error::GoldenMismatch {
                name: name.to_string(),
                diff: poly_to_text(&got.sub(want)),
            });
        }
    }
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let polys: Vec<Poly> = (0..13)
            .map(|i| {
                Poly::parse_expr("3*h1^2*J33 - J12/4 + h2", &crate::family::PARAM_NAMES, &[])
                    .unwrap()
                    .scale(Rational::from_integer(i as i128))
            })
            .collect();
        let sys = PolynomialSystem::new(polys).unwrap();
        let back = PolynomialSystem::from_text(&sys.to_text()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn from_text_rejects_bad_blocks() {
        assert!(PolynomialSystem::from_text("q\n1/1 1 0\n").is_err());
        assert!(PolynomialSystem::from_text("p1\n").is_err());
    }

    #[test]
    fn hessian_of_square() {
        let p = Poly::parse_expr("h1^2 + 2*J11^2", &crate::family::PARAM_NAMES, &[]).unwrap();
        let h = hessian(&p, &[0.3; 12]);
        assert_eq!(h[(0, 0)], 2.0);
        assert_eq!(h[(3, 3)], 4.0);
        assert_eq!(h[(0, 3)], 0.0);
    }
}
