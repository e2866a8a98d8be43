use std::fmt::Write as _;

use num_complex::Complex64;
use rustc_hash::FxHashMap;

use super::coef::{Coefficient, GaussRational, Rational};
use super::{Letter, PauliString, Site};
use crate::error::{Error, Result};
use crate::polysys::multipoly::CPoly;

/// Linear combination of phase-normalized Pauli strings.
#[derive(Clone, Debug)]
pub struct PauliExpr<C: Coefficient> {
    terms: FxHashMap<PauliString, C>,
}

impl<C: Coefficient> Default for PauliExpr<C> {
    fn default() -> Self {
        Self {
            terms: FxHashMap::default(),
        }
    }
}

impl<C: Coefficient> PartialEq for PauliExpr<C> {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl<C: Coefficient> PauliExpr<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(string: PauliString, coef: C) -> Self {
        let mut e = Self::zero();
        e.add_term(string, coef);
        e
    }

    pub fn identity(coef: C) -> Self {
        Self::term(PauliString::identity(), coef)
    }

    pub fn single(site: Site, letter: Letter) -> Self {
        Self::term(PauliString::single(site, letter), C::one())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Add `coef · string`, folding the string's phase into the coefficient.
    pub fn add_term(&mut self, string: PauliString, coef: C) {
        if coef.is_zero() {
            return;
        }
        let (phase, key) = string.normalized();
        let coef = coef.mul_i_pow(phase);
        match self.terms.get_mut(&key) {
            Some(c) => {
                c.add_assign_ref(&coef);
                if c.is_zero() {
                    self.terms.remove(&key);
                }
            }
            None => {
                self.terms.insert(key, coef);
            }
        }
    }

    pub fn coeff(&self, string: &PauliString) -> Option<&C> {
        self.terms.get(string)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &C)> {
        self.terms.iter()
    }

    /// Terms sorted by string, for reproducible output.
    pub fn sorted_terms(&self) -> Vec<(&PauliString, &C)> {
        let mut v: Vec<_> = self.terms.iter().collect();
        v.sort_by(|a, b| a.0.letters().cmp(b.0.letters()));
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(p.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(p.clone(), c.neg_ref());
        }
        out
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut out = Self::zero();
        for (p, c) in &self.terms {
            out.add_term(p.clone(), c.mul_ref(s));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_filtered(other, |_| true)
    }

    /// Product keeping only result strings accepted by `keep`.
    pub fn mul_filtered(&self, other: &Self, keep: impl Fn(&PauliString) -> bool) -> Self {
        let mut out = Self::zero();
        for (pa, ca) in &self.terms {
            for (pb, cb) in &other.terms {
                let prod = pa.mul(pb);
                if keep(&prod) {
                    out.add_term(prod, ca.mul_ref(cb));
                }
            }
        }
        out
    }

    /// `tr(self)/d`: the identity coefficient.
    pub fn normalized_trace(&self) -> C {
        self.terms
            .get(&PauliString::identity())
            .cloned()
            .unwrap_or_else(C::zero)
    }

    /// `tr(self · other)/d` without forming the product. Keys are
    /// Hermitian strings, so `P · P = I` with no phase.
    pub fn trace_product(&self, other: &Self) -> C {
        let (small, big) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut acc = C::zero();
        for (p, c) in &small.terms {
            if let Some(d) = big.terms.get(p) {
                acc.add_assign_ref(&c.mul_ref(d));
            }
        }
        acc
    }

    pub fn support_sites(&self) -> Vec<Site> {
        let mut sites: Vec<Site> = self.terms.keys().flat_map(|p| p.support()).collect();
        sites.sort();
        sites.dedup();
        sites
    }

    pub fn map_coefficients<D: Coefficient>(&self, f: impl Fn(&C) -> D) -> PauliExpr<D> {
        let mut out = PauliExpr::zero();
        for (p, c) in &self.terms {
            out.add_term(p.clone(), f(c));
        }
        out
    }

    pub fn map_sites(&self, f: impl Fn(&Site) -> Site) -> Self {
        let mut out = Self::zero();
        for (p, c) in &self.terms {
            out.add_term(p.map_sites(&f), c.clone());
        }
        out
    }

    pub fn retain(&mut self, keep: impl Fn(&PauliString) -> bool) {
        self.terms.retain(|p, _| keep(p));
    }
}

/// `[A, B] = AB − BA`. Only anticommuting string pairs contribute, each as
/// twice the product; pairs are found through a site index of the larger
/// operand so disjoint supports are never visited.
pub fn commutator<C: Coefficient>(a: &PauliExpr<C>, b: &PauliExpr<C>) -> PauliExpr<C> {
    let a_is_big = a.len() >= b.len();
    let (big, small) = if a_is_big { (a, b) } else { (b, a) };
    let entries: Vec<(&PauliString, &C)> = big.terms.iter().collect();
    let mut index: FxHashMap<Site, Vec<usize>> = FxHashMap::default();
    for (k, (p, _)) in entries.iter().enumerate() {
        for s in p.support() {
            index.entry(s).or_default().push(k);
        }
    }
    let two = C::from_rational(Rational::from_integer(2));
    let mut out = PauliExpr::zero();
    let mut candidates = Vec::new();
    for (ps, cs) in &small.terms {
        candidates.clear();
        for s in ps.support() {
            if let Some(v) = index.get(&s) {
                candidates.extend_from_slice(v);
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for &k in &candidates {
            let (pb, cb) = entries[k];
            if !pb.anticommutes(ps) {
                continue;
            }
            let prod = if a_is_big { pb.mul(ps) } else { ps.mul(pb) };
            out.add_term(prod, cb.mul_ref(cs).mul_ref(&two));
        }
    }
    out
}

/// `[H, O]_j`, the `j`-fold nested commutator; `j = 0` returns `O`.
pub fn nested_commutator<C: Coefficient>(h: &PauliExpr<C>, o: &PauliExpr<C>, j: usize) -> PauliExpr<C> {
    let mut cur = o.clone();
    for _ in 0..j {
        cur = commutator(h, &cur);
    }
    cur
}

fn write_letters(out: &mut String, p: &PauliString) {
    for (s, l) in p.letters() {
        let _ = write!(out, " {s}:{l}");
    }
}

fn parse_letters(parts: &[&str], line: usize) -> Result<PauliString> {
    let mut pairs = Vec::with_capacity(parts.len());
    for part in parts {
        let (site, letter) = part.rsplit_once(':').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected site:letter, got {part:?}"),
        })?;
        let site: Site = site.parse().map_err(|msg| Error::Parse { line, msg })?;
        let letter: Letter = letter.parse().map_err(|msg| Error::Parse { line, msg })?;
        pairs.push((site, letter));
    }
    Ok(PauliString::from_letters(pairs))
}

impl PauliExpr<Complex64> {
    /// One term per line: `re,im site:letter ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in self.sorted_terms() {
            let _ = write!(out, "{:e},{:e}", c.re, c.im);
            write_letters(&mut out, p);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut e = Self::zero();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (re, im) = parts[0].split_once(',').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: "coefficient must be re,im".into(),
            })?;
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: n + 1,
                    msg: e.to_string(),
                })
            };
            let c = Complex64::new(parse(re)?, parse(im)?);
            e.add_term(parse_letters(&parts[1..], n + 1)?, c);
        }
        Ok(e)
    }
}

impl PauliExpr<CPoly> {
    /// One term per line: `num/den site:letter ...`. Only expressions with
    /// constant real rational coefficients can be written this way.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        for (p, c) in self.sorted_terms() {
            let r = constant_rational(c)
                .ok_or_else(|| Error::NonReal(format!("coefficient of {p} is not a rational constant")))?;
            let _ = write!(out, "{}/{}", r.numer(), r.denom());
            write_letters(&mut out, p);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut e = Self::zero();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let r = parse_rational(parts[0]).ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("bad rational {:?}", parts[0]),
            })?;
            e.add_term(
                parse_letters(&parts[1..], n + 1)?,
                CPoly::constant(GaussRational::real(r)),
            );
        }
        Ok(e)
    }

    /// Substitute numeric parameter values.
    pub fn evaluate(&self, x: &[f64]) -> PauliExpr<Complex64> {
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.map_coefficients(|c| c.eval_complex(&xc))
    }
}

fn constant_rational(c: &CPoly) -> Option<Rational> {
    match c.terms() {
        [] => Some(Rational::from_integer(0)),
        [(m, g)] if m.degree() == 0 && g.is_real() => Some(g.re),
        _ => None,
    }
}

pub(crate) fn parse_rational(s: &str) -> Option<Rational> {
    match s.split_once('/') {
        Some((n, d)) => {
            let d: i128 = d.parse().ok()?;
            if d == 0 {
                return None;
            }
            Some(Rational::new(n.parse().ok()?, d))
        }
        None => Some(Rational::from_integer(s.parse().ok()?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polysys::multipoly::{CPoly, MAX_VARS};
    use proptest::prelude::*;

    fn s(x: i16) -> Site {
        Site::new(&[x])
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn zz() -> PauliExpr<Complex64> {
        PauliExpr::term(
            PauliString::from_letters([(s(0), Letter::Z), (s(1), Letter::Z)]),
            c(1.0, 0.0),
        )
    }

    #[test]
    fn commutator_of_zz_with_x() {
        let x0 = PauliExpr::<Complex64>::single(s(0), Letter::X);
        let got = commutator(&zz(), &x0);
        let want = PauliExpr::term(
            PauliString::from_letters([(s(0), Letter::Y), (s(1), Letter::Z)]),
            c(0.0, 2.0),
        );
        assert_eq!(got, want);
        assert!(commutator(&zz(), &zz()).is_zero());
    }

    #[test]
    fn double_commutator_of_zz_with_x() {
        // [ZZ, 2i YZ] = 2i·(ZY − YZ)⊗(ZZ) = 2i·(−2i X)⊗I = 4 X.
        let x0 = PauliExpr::<Complex64>::single(s(0), Letter::X);
        let got = nested_commutator(&zz(), &x0, 2);
        assert_eq!(got, PauliExpr::single(s(0), Letter::X).scale(&c(4.0, 0.0)));
    }

    #[test]
    fn traces() {
        let x0 = PauliExpr::<Complex64>::single(s(0), Letter::X);
        assert!(x0.normalized_trace().is_zero());
        assert_eq!(PauliExpr::identity(c(3.0, 0.0)).normalized_trace(), c(3.0, 0.0));
    }

    #[test]
    fn scalar_text_roundtrip() {
        let e = commutator(&zz(), &PauliExpr::single(s(0), Letter::X)).add(&PauliExpr::identity(c(0.5, 0.0)));
        let back = PauliExpr::<Complex64>::from_text(&e.to_text()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn rational_text_format() {
        let e = PauliExpr::<CPoly>::term(
            PauliString::from_letters([(s(-1), Letter::X), (s(0), Letter::Z)]),
            CPoly::constant(GaussRational::real(Rational::new(-3, 4))),
        );
        let text = e.to_text().unwrap();
        assert_eq!(text, "-3/4 -1:X 0:Z\n");
        assert_eq!(PauliExpr::<CPoly>::from_text(&text).unwrap(), e);
    }

    /// 3-site strings enumerated exhaustively: tr(ab)/d vanishes unless the
    /// normalized strings coincide.
    #[test]
    fn pauli_orthogonality_exhaustive() {
        let all: Vec<PauliString> = (0..64)
            .map(|code: usize| {
                PauliString::from_letters((0..3).filter_map(|i| {
                    Letter::from_index((code >> (2 * i)) % 4).map(|l| (s(i as i16), l))
                }))
            })
            .collect();
        // from_index(3) is None, so code digit 3 is identity; remap via set.
        for a in &all {
            for b in &all {
                let prod = PauliExpr::<Complex64>::term(a.mul(b), c(1.0, 0.0));
                let tr = prod.normalized_trace();
                if a == b {
                    assert_eq!(tr, c(1.0, 0.0));
                } else {
                    assert!(tr.is_zero());
                }
            }
        }
    }

    fn arb_expr() -> impl Strategy<Value = PauliExpr<CPoly>> {
        proptest::collection::vec((0usize..64, 0usize..MAX_VARS, -3i128..4), 1..6).prop_map(|items| {
            let mut e = PauliExpr::zero();
            for (code, var, k) in items {
                let p = PauliString::from_letters((0..3).filter_map(|i| {
                    Letter::from_index((code >> (2 * i)) % 4).map(|l| (s(i as i16 - 1), l))
                }));
                let coef = CPoly::var(var).scale(GaussRational::from_int(k));
                e.add_term(p, coef);
            }
            e
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        /// Evaluate-then-compute equals compute-then-evaluate.
        #[test]
        fn symbolic_path_commutes_with_evaluation(
            a in arb_expr(),
            b in arb_expr(),
            x in proptest::collection::vec(-1.0f64..1.0, MAX_VARS),
        ) {
            let sym = commutator(&a, &b).add(&a.mul(&b));
            let sym_eval = sym.evaluate(&x);
            let num = commutator(&a.evaluate(&x), &b.evaluate(&x)).add(&a.evaluate(&x).mul(&b.evaluate(&x)));
            let diff = sym_eval.sub(&num);
            for (_, c) in diff.iter() {
                prop_assert!(c.norm() < 1e-12);
            }
        }
    }
}
