//! The ten single-qubit unitary control channels acting on the probe site.

use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::coef::{Coefficient, GaussRational, Rational};
use super::{Letter, PauliExpr, PauliString, Site};
use crate::error::{Error, Result};

/// Channel `C_B[ρ] = U_B ρ U_B†` with
/// `U_0 = I`, `U_1 = X`, `U_2 = Y`, `U_3 = Z`,
/// `U_4 = (X+Y)/√2`, `U_5 = (Y+Z)/√2`, `U_6 = (Z+X)/√2`,
/// `U_7 = (I+iX)/√2`, `U_8 = (I+iY)/√2`, `U_9 = (I+iZ)/√2`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Channel(u8);

impl TryFrom<usize> for Channel {
    type Error = Error;
    fn try_from(b: usize) -> Result<Self> {
        Channel::new(b)
    }
}

impl From<Channel> for usize {
    fn from(c: Channel) -> usize {
        c.0 as usize
    }
}

impl Channel {
    pub const IDENTITY: Channel = Channel(0);

    pub fn new(index: usize) -> Result<Self> {
        if index <= 9 {
            Ok(Channel(index as u8))
        } else {
            Err(Error::InvalidChannel(index))
        }
    }

    pub fn all() -> impl Iterator<Item = Channel> {
        (0..10).map(Channel)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Unnormalized Pauli decomposition `U ∝ Σ u_a P_a` (`None` is the
    /// identity) and the factor `|norm|²` restoring unitarity.
    fn decomposition(self) -> (Vec<(GaussRational, Option<Letter>)>, Rational) {
        use Letter::*;
        let one = GaussRational::from_int(1);
        let i = GaussRational::i();
        let half = Rational::new(1, 2);
        match self.0 {
            0 => (vec![(one, None)], Rational::one()),
            1 => (vec![(one, Some(X))], Rational::one()),
            2 => (vec![(one, Some(Y))], Rational::one()),
            3 => (vec![(one, Some(Z))], Rational::one()),
            4 => (vec![(one, Some(X)), (one, Some(Y))], half),
            5 => (vec![(one, Some(Y)), (one, Some(Z))], half),
            6 => (vec![(one, Some(Z)), (one, Some(X))], half),
            7 => (vec![(one, None), (i, Some(X))], half),
            8 => (vec![(one, None), (i, Some(Y))], half),
            9 => (vec![(one, None), (i, Some(Z))], half),
            _ => unreachable!(),
        }
    }

    /// The 2×2 unitary, row-major.
    pub fn unitary(self) -> [[Complex64; 2]; 2] {
        let (parts, norm2) = self.decomposition();
        let scale = norm2.numer().to_owned() as f64 / *norm2.denom() as f64;
        let scale = scale.sqrt();
        let mut u = [[<Complex64 as Zero>::zero(); 2]; 2];
        for (coef, letter) in parts {
            let m = single_qubit_matrix(letter);
            let c = coef.to_complex() * scale;
            for r in 0..2 {
                for k in 0..2 {
                    u[r][k] += c * m[r][k];
                }
            }
        }
        u
    }
}

pub fn single_qubit_matrix(letter: Option<Letter>) -> [[Complex64; 2]; 2] {
    let o = <Complex64 as Zero>::zero();
    let l = <Complex64 as One>::one();
    let i = Complex64::i();
    match letter {
        None => [[l, o], [o, l]],
        Some(Letter::X) => [[o, l], [l, o]],
        Some(Letter::Y) => [[o, -i], [i, o]],
        Some(Letter::Z) => [[l, o], [o, -l]],
    }
}

/// Heisenberg-picture image `C†[O] = U† O U` of an observable under the
/// channel applied at `probe`.
pub fn conjugate_observable<C: Coefficient>(channel: Channel, probe: Site, o: &PauliExpr<C>) -> PauliExpr<C>
where
    C: FromGauss,
{
    let (parts, norm2) = channel.decomposition();
    if parts.len() == 1 && parts[0].1.is_none() {
        return o.clone();
    }
    let string = |l: Option<Letter>| match l {
        None => PauliString::identity(),
        Some(l) => PauliString::single(probe, l),
    };
    let mut out = PauliExpr::zero();
    for (ua, la) in &parts {
        for (ub, lb) in &parts {
            let weight = C::from_gauss(ua.conj() * *ub * GaussRational::real(norm2));
            let (pa, pb) = (string(*la), string(*lb));
            for (p, c) in o.iter() {
                out.add_term(pa.mul(p).mul(&pb), c.mul_ref(&weight));
            }
        }
    }
    out
}

/// Coefficients that can embed Gaussian rationals exactly (or as floats).
pub trait FromGauss {
    fn from_gauss(g: GaussRational) -> Self;
}

impl FromGauss for Complex64 {
    fn from_gauss(g: GaussRational) -> Self {
        g.to_complex()
    }
}

impl FromGauss for crate::polysys::multipoly::CPoly {
    fn from_gauss(g: GaussRational) -> Self {
        crate::polysys::multipoly::CPoly::constant(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = [[Complex64; 2]; 2];

    fn matmul(a: &M, b: &M) -> M {
        let mut out = [[<Complex64 as Zero>::zero(); 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    out[r][c] += a[r][k] * b[k][c];
                }
            }
        }
        out
    }

    fn dagger(a: &M) -> M {
        [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
    }

    fn expr_to_matrix(e: &PauliExpr<Complex64>) -> M {
        let mut out = [[<Complex64 as Zero>::zero(); 2]; 2];
        for (p, c) in e.iter() {
            let m = single_qubit_matrix(p.letters().first().map(|(_, l)| *l));
            for r in 0..2 {
                for k in 0..2 {
                    out[r][k] += c * m[r][k];
                }
            }
        }
        out
    }

    #[test]
    fn invalid_index_rejected() {
        assert!(matches!(Channel::new(10), Err(Error::InvalidChannel(10))));
    }

    #[test]
    fn identity_and_x_channels() {
        let o = Site::origin(1);
        let z = PauliExpr::<Complex64>::single(o, Letter::Z);
        assert_eq!(conjugate_observable(Channel::IDENTITY, o, &z), z);
        let got = conjugate_observable(Channel::new(1).unwrap(), o, &z);
        assert_eq!(got, z.scale(&Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn all_channels_are_unitary_and_match_dense_conjugation() {
        let o = Site::origin(1);
        for ch in Channel::all() {
            let u = ch.unitary();
            let uu = matmul(&dagger(&u), &u);
            assert!((uu[0][0] - 1.0).norm() < 1e-15 && uu[0][1].norm() < 1e-15);
            for l in Letter::ALL {
                let obs = PauliExpr::<Complex64>::single(o, l);
                let sym = expr_to_matrix(&conjugate_observable(ch, o, &obs));
                let dense = matmul(&matmul(&dagger(&u), &single_qubit_matrix(Some(l))), &u);
                for r in 0..2 {
                    for k in 0..2 {
                        assert!((sym[r][k] - dense[r][k]).norm() < 1e-14, "channel {ch:?} letter {l:?}");
                    }
                }
            }
        }
    }
}
