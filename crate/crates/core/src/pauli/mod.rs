//! Pauli-string algebra over sites of a `D`-dimensional integer lattice.

pub mod channel;
pub mod coef;
mod expr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

pub use channel::{conjugate_observable, Channel};
pub use coef::{Coefficient, GaussRational, Rational};
pub use expr::{commutator, nested_commutator, PauliExpr};
pub(crate) use expr::parse_rational;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Letter {
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];

    /// 0, 1, 2 for X, Y, Z.
    pub fn index(self) -> usize {
        match self {
            Letter::X => 0,
            Letter::Y => 1,
            Letter::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Letter> {
        Letter::ALL.get(i).copied()
    }

    /// Single-qubit product `self · other = i^phase · letter`.
    pub fn mul(self, other: Letter) -> (u8, Option<Letter>) {
        use Letter::*;
        match (self, other) {
            (a, b) if a == b => (0, None),
            (X, Y) => (1, Some(Z)),
            (Y, Z) => (1, Some(X)),
            (Z, X) => (1, Some(Y)),
            (Y, X) => (3, Some(Z)),
            (Z, Y) => (3, Some(X)),
            (X, Z) => (3, Some(Y)),
            _ => unreachable!(),
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

impl FromStr for Letter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(Letter::X),
            "Y" | "y" => Ok(Letter::Y),
            "Z" | "z" => Ok(Letter::Z),
            _ => Err(format!("unknown Pauli letter {s:?}")),
        }
    }
}

/// Lattice coordinate. Only the first `dim` entries are meaningful; the
/// rest are zero so ordering is lexicographic over the used coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Site {
    dim: u8,
    coords: [i16; 3],
}

impl Site {
    pub fn new(coords: &[i16]) -> Self {
        assert!((1..=3).contains(&coords.len()), "site dimension must be 1..=3");
        let mut c = [0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Site {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(&[0, 0, 0][..dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i16] {
        &self.coords[..self.dim as usize]
    }

    /// Manhattan distance, the hop distance on the square lattice.
    pub fn distance(&self, other: &Site) -> u32 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (i32::from(*a) - i32::from(*b)).unsigned_abs())
            .sum()
    }

    /// Reflection through the origin.
    pub fn reflected(&self) -> Site {
        let mut out = *self;
        for c in out.coords.iter_mut() {
            *c = -*c;
        }
        out
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for Site {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let coords = s
            .split(',')
            .map(|p| p.trim().parse::<i16>().map_err(|e| format!("bad coordinate {p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if !(1..=3).contains(&coords.len()) {
            return Err(format!("site {s:?} must have 1 to 3 coordinates"));
        }
        Ok(Site::new(&coords))
    }
}

type Letters = SmallVec<[(Site, Letter); 6]>;

/// `i^phase` times a tensor product of single-site Paulis. Identity sites
/// are absent and the remaining entries are sorted by site.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct PauliString {
    phase: u8,
    letters: Letters,
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString {
            phase: 0,
            letters: SmallVec::new(),
        }
    }

    pub fn single(site: Site, letter: Letter) -> Self {
        let mut letters = SmallVec::new();
        letters.push((site, letter));
        PauliString { phase: 0, letters }
    }

    /// Build from `(site, letter)` pairs; repeated sites are multiplied in
    /// the given order.
    pub fn from_letters<I: IntoIterator<Item = (Site, Letter)>>(pairs: I) -> Self {
        pairs
            .into_iter()
            .fold(PauliString::identity(), |acc, (s, l)| acc.mul(&PauliString::single(s, l)))
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn letters(&self) -> &[(Site, Letter)] {
        &self.letters
    }

    pub fn weight(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = Site> + '_ {
        self.letters.iter().map(|(s, _)| *s)
    }

    pub fn letter_at(&self, site: &Site) -> Option<Letter> {
        self.letters
            .binary_search_by(|(s, _)| s.cmp(site))
            .ok()
            .map(|i| self.letters[i].1)
    }

    /// Same string with phase dropped.
    pub fn normalized(&self) -> (u8, PauliString) {
        (
            self.phase,
            PauliString {
                phase: 0,
                letters: self.letters.clone(),
            },
        )
    }

    /// Group product with accumulated phase.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        let mut phase = self.phase + other.phase;
        let mut letters = Letters::with_capacity(self.letters.len() + other.letters.len());
        let (a, b) = (&self.letters, &other.letters);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    letters.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    letters.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let (p, l) = a[i].1.mul(b[j].1);
                    phase += p;
                    if let Some(l) = l {
                        letters.push((a[i].0, l));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        letters.extend_from_slice(&a[i..]);
        letters.extend_from_slice(&b[j..]);
        PauliString {
            phase: phase % 4,
            letters,
        }
    }

    /// True when the two strings anticommute: an odd number of shared sites
    /// carry different letters.
    pub fn anticommutes(&self, other: &PauliString) -> bool {
        let (a, b) = (&self.letters, &other.letters);
        let (mut i, mut j) = (0, 0);
        let mut odd = false;
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a[i].1 != b[j].1 {
                        odd = !odd;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        odd
    }

    pub fn overlaps(&self, other: &PauliString) -> bool {
        let (a, b) = (&self.letters, &other.letters);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Image under a site map, e.g. a lattice reflection. The map must be
    /// injective on the support.
    pub fn map_sites(&self, f: impl Fn(&Site) -> Site) -> PauliString {
        let mut letters: Letters = self.letters.iter().map(|(s, l)| (f(s), *l)).collect();
        letters.sort_by(|a, b| a.0.cmp(&b.0));
        PauliString {
            phase: self.phase,
            letters,
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i", "-", "-i"][self.phase as usize];
        if self.letters.is_empty() {
            return write!(f, "{prefix}I");
        }
        write!(f, "{prefix}")?;
        for (k, (s, l)) in self.letters.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}:{l}")?;
        }
        Ok(())
    }
}
