//! Sparse multivariate polynomials in at most [`MAX_VARS`] variables.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;

use crate::pauli::coef::{rational_to_f64, Coefficient, GaussRational, Rational};

pub const MAX_VARS: usize = 12;
const BITS: u32 = 5;
const FIELD: u64 = (1 << BITS) - 1;

/// Exponent vector packed five bits per variable, variable 0 in the most
/// significant field, so integer order on the packed word is lexicographic
/// order on exponent vectors.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Monomial(u64);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    fn shift(var: usize) -> u32 {
        debug_assert!(var < MAX_VARS);
        (MAX_VARS - 1 - var) as u32 * BITS
    }

    pub fn var(var: usize) -> Self {
        Monomial(1 << Self::shift(var))
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        assert!(exps.len() <= MAX_VARS, "too many variables");
        let mut packed = 0u64;
        for (i, &e) in exps.iter().enumerate() {
            assert!(u64::from(e) <= FIELD, "exponent {e} out of range");
            packed |= u64::from(e) << Self::shift(i);
        }
        Monomial(packed)
    }

    pub fn exponent(&self, var: usize) -> u32 {
        ((self.0 >> Self::shift(var)) & FIELD) as u32
    }

    pub fn exponents(&self) -> [u32; MAX_VARS] {
        let mut out = [0; MAX_VARS];
        for (i, e) in out.iter_mut().enumerate() {
            *e = self.exponent(i);
        }
        out
    }

    pub fn degree(&self) -> u32 {
        (0..MAX_VARS).map(|i| self.exponent(i)).sum()
    }

    /// Product of monomials. Degrees stay far below the 31-per-variable
    /// field limit for every order the crate derives.
    pub fn mul(self, other: Monomial) -> Monomial {
        debug_assert!((0..MAX_VARS).all(|i| self.exponent(i) + other.exponent(i) <= FIELD as u32));
        Monomial(self.0 + other.0)
    }

    /// Graded-lex comparison: total degree first, then lexicographic with
    /// variable 0 dominant.
    pub fn grlex_cmp(&self, other: &Monomial) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }

    pub fn permute(&self, perm: &[usize]) -> Monomial {
        let mut exps = [0u32; MAX_VARS];
        for (i, &p) in perm.iter().enumerate() {
            exps[p] = self.exponent(i);
        }
        Monomial::from_exponents(&exps)
    }
}

/// Coefficient ring of a [`MultiPoly`].
pub trait Ring:
    Copy
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_rational(r: Rational) -> Self;
    fn to_complex(&self) -> Complex64;
}

impl Ring for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_rational(r: Rational) -> Self {
        r
    }
    fn to_complex(&self) -> Complex64 {
        Complex64::new(rational_to_f64(self), 0.0)
    }
}

impl Ring for GaussRational {
    fn zero() -> Self {
        GaussRational::default()
    }
    fn one() -> Self {
        GaussRational::from_int(1)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(&self.re) && Zero::is_zero(&self.im)
    }
    fn from_rational(r: Rational) -> Self {
        GaussRational::real(r)
    }
    fn to_complex(&self) -> Complex64 {
        GaussRational::to_complex(self)
    }
}

/// Sparse polynomial: sorted `(monomial, coefficient)` pairs, no zero
/// coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct MultiPoly<C: Ring> {
    terms: Vec<(Monomial, C)>,
}

/// Real polynomials with exact rational coefficients.
pub type Poly = MultiPoly<Rational>;
/// Polynomials with Gaussian-rational coefficients (symbolic Pauli path).
pub type CPoly = MultiPoly<GaussRational>;

impl<C: Ring> Default for MultiPoly<C> {
    fn default() -> Self {
        Self { terms: Vec::new() }
    }
}

impl<C: Ring> MultiPoly<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(Monomial::ONE, c)
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn monomial(m: Monomial, c: C) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            Self { terms: vec![(m, c)] }
        }
    }

    pub fn var(i: usize) -> Self {
        Self::monomial(Monomial::var(i), C::one())
    }

    /// Build from arbitrary pairs; combines duplicates and drops zeros.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, C)>>(iter: I) -> Self {
        let mut map: FxHashMap<Monomial, C> = FxHashMap::default();
        for (m, c) in iter {
            let e = map.entry(m).or_insert_with(C::zero);
            *e = *e + c;
        }
        let mut terms: Vec<_> = map.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by_key(|(m, _)| *m);
        Self { terms }
    }

    pub fn terms(&self) -> &[(Monomial, C)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: Monomial) -> C {
        match self.terms.binary_search_by_key(&m, |(k, _)| *k) {
            Ok(i) => self.terms[i].1,
            Err(_) => C::zero(),
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.iter().map(|(m, _)| m.degree()).max()
    }

    pub fn is_homogeneous(&self, degree: u32) -> bool {
        self.terms.iter().all(|(m, _)| m.degree() == degree)
    }

    /// Variables that occur in at least one monomial.
    pub fn variables(&self) -> Vec<usize> {
        (0..MAX_VARS)
            .filter(|&v| self.terms.iter().any(|(m, _)| m.exponent(v) > 0))
            .collect()
    }

    fn merge(&self, other: &Self, sign: C) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (ma, ca) = self.terms[i];
            let (mb, cb) = other.terms[j];
            match ma.cmp(&mb) {
                Ordering::Less => {
                    out.push((ma, ca));
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((mb, sign * cb));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = ca + sign * cb;
                    if !c.is_zero() {
                        out.push((ma, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend(other.terms[j..].iter().map(|&(m, c)| (m, sign * c)));
        Self { terms: out }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.merge(other, C::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.merge(other, -C::one())
    }

    pub fn neg(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|&(m, c)| (m, -c)).collect(),
        }
    }

    pub fn scale(&self, s: C) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|&(m, c)| (m, c * s)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        // Multiplying by a single monomial preserves the sort order.
        if other.terms.len() == 1 {
            let (mo, co) = other.terms[0];
            return Self {
                terms: self
                    .terms
                    .iter()
                    .map(|&(m, c)| (m.mul(mo), c * co))
                    .filter(|(_, c)| !c.is_zero())
                    .collect(),
            };
        }
        if self.terms.len() == 1 {
            return other.mul(self);
        }
        Self::from_terms(
            self.terms
                .iter()
                .flat_map(|&(ma, ca)| other.terms.iter().map(move |&(mb, cb)| (ma.mul(mb), ca * cb))),
        )
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Partial derivative with respect to variable `var`.
    pub fn partial(&self, var: usize) -> Self {
        let unit = Monomial::var(var);
        let terms = self
            .terms
            .iter()
            .filter_map(|&(m, c)| {
                let e = m.exponent(var);
                if e == 0 {
                    return None;
                }
                let lowered = Monomial(m.0 - unit.0);
                Some((lowered, c * C::from_rational(Rational::from_integer(i128::from(e)))))
            })
            .collect::<Vec<_>>();
        // Lowering one exponent by one is monotone, order is kept.
        Self { terms }
    }

    /// Relabel variables: variable `i` becomes variable `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        Self::from_terms(self.terms.iter().map(|&(m, c)| (m.permute(perm), c)))
    }

    pub fn eval_complex(&self, x: &[Complex64]) -> Complex64 {
        let mut total = Complex64::new(0.0, 0.0);
        for &(m, c) in &self.terms {
            let mut v = c.to_complex();
            for (i, xi) in x.iter().enumerate().take(MAX_VARS) {
                let e = m.exponent(i);
                if e > 0 {
                    v *= xi.powu(e);
                }
            }
            total += v;
        }
        total
    }

    /// Terms in graded-lex order.
    pub fn grlex_terms(&self) -> Vec<(Monomial, C)> {
        let mut t = self.terms.clone();
        t.sort_by(|a, b| a.0.grlex_cmp(&b.0));
        t
    }
}

impl MultiPoly<Rational> {
    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut v = rational_to_f64(c);
            for (i, xi) in x.iter().enumerate().take(MAX_VARS) {
                let e = m.exponent(i);
                if e > 0 {
                    v *= xi.powi(e as i32);
                }
            }
            total += v;
        }
        total
    }

    pub fn eval_rational(&self, x: &[Rational]) -> Rational {
        let mut total = <Rational as Zero>::zero();
        for &(m, c) in &self.terms {
            let mut v = c;
            for (i, xi) in x.iter().enumerate().take(MAX_VARS) {
                let e = m.exponent(i);
                for _ in 0..e {
                    v *= *xi;
                }
            }
            total += v;
        }
        total
    }

    pub fn to_gauss(&self) -> CPoly {
        MultiPoly {
            terms: self.terms.iter().map(|&(m, c)| (m, GaussRational::real(c))).collect(),
        }
    }
}

impl MultiPoly<GaussRational> {
    /// Real part, failing if any coefficient has a nonzero imaginary part.
    pub fn into_real(&self) -> Result<Poly, String> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for &(m, c) in &self.terms {
            if !Zero::is_zero(&c.im) {
                return Err(format!("monomial {:?} has coefficient {}", m.exponents(), c));
            }
            terms.push((m, c.re));
        }
        Ok(MultiPoly { terms })
    }
}

impl Coefficient for CPoly {
    fn zero() -> Self {
        MultiPoly::zero()
    }
    fn one() -> Self {
        MultiPoly::one()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self = MultiPoly::add(self, other);
    }
    fn mul_ref(&self, other: &Self) -> Self {
        MultiPoly::mul(self, other)
    }
    fn neg_ref(&self) -> Self {
        MultiPoly::neg(self)
    }
    fn mul_i_pow(&self, power: u8) -> Self {
        let unit = match power % 4 {
            0 => return self.clone(),
            1 => GaussRational::i(),
            2 => GaussRational::from_int(-1),
            _ => -GaussRational::i(),
        };
        self.scale(unit)
    }
    fn from_rational(r: Rational) -> Self {
        MultiPoly::constant(GaussRational::real(r))
    }
}

/// Recursive-descent parser for expressions over named variables with
/// integer literals, `+ - * / ^` and parentheses. Multiplication is explicit.
struct ExprParser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    names: &'a [&'a str],
    constants: &'a [(&'a str, i128)],
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Token<'a> {
    Num(i128),
    Ident(&'a str),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token<'_>>, String> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i].parse::<i128>().map_err(|e| e.to_string())?;
            out.push(Token::Num(n));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token::Ident(&src[start..i]));
        } else if "+-*^()/".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Poly, String> {
        let mut acc = if self.eat('-') {
            self.product()?.neg()
        } else {
            self.eat('+');
            self.product()?
        };
        loop {
            if self.eat('+') {
                acc = acc.add(&self.product()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.product()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Poly, String> {
        let mut acc = self.power()?;
        loop {
            if self.eat('*') {
                acc = acc.mul(&self.power()?);
            } else if self.eat('/') {
                match self.peek() {
                    Some(Token::Num(n)) if n != 0 => {
                        self.pos += 1;
                        acc = acc.scale(Rational::new(1, n));
                    }
                    other => return Err(format!("expected nonzero integer divisor, got {other:?}")),
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn power(&mut self) -> Result<Poly, String> {
        let base = self.atom()?;
        if self.eat('^') {
            match self.peek() {
                Some(Token::Num(n)) if (0..32).contains(&n) => {
                    self.pos += 1;
                    Ok(base.pow(n as u32))
                }
                other => return Err(format!("expected small exponent, got {other:?}")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Poly, String> {
        let tok = self.peek().ok_or("unexpected end of expression")?;
        self.pos += 1;
        match tok {
            Token::Num(n) => Ok(Poly::constant(Rational::from_integer(n))),
            Token::Ident(name) => {
                if let Some(i) = self.names.iter().position(|v| *v == name) {
                    Ok(Poly::var(i))
                } else if let Some((_, v)) = self.constants.iter().find(|(c, _)| *c == name) {
                    Ok(Poly::constant(Rational::from_integer(*v)))
                } else {
                    Err(format!("unknown identifier {name:?}"))
                }
            }
            Token::Op('(') => {
                let inner = self.sum()?;
                if !self.eat(')') {
                    return Err("missing ')'".into());
                }
                Ok(inner)
            }
            Token::Op('-') => Ok(self.power()?.neg()),
            Token::Op(c) => Err(format!("unexpected {c:?}")),
        }
    }
}

impl MultiPoly<Rational> {
    /// Parse an expression such as `h1*h3^2 + D*(J12 - 2*J21)` where
    /// variable `i` is spelled `names[i]` and `constants` binds integer
    /// symbols.
    pub fn parse_expr(src: &str, names: &[&str], constants: &[(&str, i128)]) -> Result<Poly, String> {
        let mut p = ExprParser {
            tokens: tokenize(src)?,
            pos: 0,
            names,
            constants,
        };
        let out = p.sum()?;
        if p.pos != p.tokens.len() {
            return Err(format!("trailing input at token {}", p.pos));
        }
        Ok(out)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128) -> Rational {
        Rational::from_integer(n)
    }

    #[test]
    fn monomial_order_is_lex_with_first_variable_dominant() {
        let x0 = Monomial::var(0);
        let x1sq = Monomial::from_exponents(&[0, 2]);
        assert!(x0 > x1sq);
        assert_eq!(x0.grlex_cmp(&x1sq), Ordering::Less);
    }

    #[test]
    fn arithmetic_matches_expansion() {
        let x = Poly::var(0);
        let y = Poly::var(1);
        let s = x.add(&y);
        let sq = s.mul(&s);
        assert_eq!(sq.coeff(Monomial::from_exponents(&[1, 1])), r(2));
        assert_eq!(sq.len(), 3);
        assert!(sq.sub(&sq).is_zero());
        assert_eq!(sq.partial(0), x.scale(r(2)).add(&y.scale(r(2))));
    }

    #[test]
    fn eval_paths_agree() {
        let x = Poly::var(0);
        let y = Poly::var(1);
        let p = x.mul(&x).mul(&y).sub(&y.scale(r(3))).add(&Poly::constant(r(7)));
        let xr = [Rational::new(1, 2), Rational::new(-2, 3)];
        let exact = p.eval_rational(&xr);
        let fl = p.eval_f64(&[0.5, -2.0 / 3.0]);
        assert!((rational_to_f64(&exact) - fl).abs() < 1e-14);
    }

    #[test]
    fn permute_swaps_variables() {
        let p = Poly::var(0).mul(&Poly::var(1)).mul(&Poly::var(1));
        let q = p.permute(&[1, 0]);
        assert_eq!(q.coeff(Monomial::from_exponents(&[2, 1])), r(1));
    }
}
