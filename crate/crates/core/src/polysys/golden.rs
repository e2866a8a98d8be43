//! Closed forms of the canonical system as functions of the dimension `D`.

use crate::error::{Error, Result};
use crate::family::PARAM_NAMES;

use super::multipoly::Poly;
use super::system::PolynomialSystem;

const EXPRESSIONS: [&str; 13] = [
    "h1*h3^2 + D*(3*h2*(-J23*J31 - J13*J32 + (J12 + J21)*J33) + h1*(J13^2 + J23^2 + J31^2 + J32^2 + 6*J23*J32 + 2*J33*(J33 - 3*J22)) + h3*(J21*(2*J23 - 3*J32) + J12*(2*J32 - 3*J23) + (J13 + J31)*(2*J11 + 3*J22 + 2*J33)))",
    "h1",
    "h2",
    "h3",
    "D*(2*h1*J11 + h2*(J12 + J21) + h3*(J13 + J31))",
    "D*(h1*(J12 + J21) + 2*h2*J22 + h3*(J23 + J32))",
    "D*(h1*(J13 + J31) + h2*(J23 + J32) + 2*h3*J33)",
    "h2*h3 + D*(J12*J13 + J22*J23 + J21*J31 + J22*J32 + J23*J33 + J32*J33)",
    "h1*h3 + D*(J11*J13 + J21*J23 + J11*J31 + J12*J32 + J13*J33 + J31*J33)",
    "h1*h2 + D*(J11*J12 + J11*J21 + J12*J22 + J21*J22 + J13*J23 + J31*J32)",
    "h1^2 + D*(2*J11^2 + J12^2 + J21^2 + J13^2 + J31^2)",
    "h2^2 + D*(J21^2 + J12^2 + 2*J22^2 + J23^2 + J32^2)",
    "h3^2 + D*(J31^2 + J13^2 + J23^2 + J32^2 + 2*J33^2)",
];

pub fn expected_system(d: usize) -> Result<PolynomialSystem> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidLattice(format!("dimension {d} not in 1..=3")));
    }
    let consts = [("D", d as i128)];
    let polys = EXPRESSIONS
        .iter()
        .map(|e| Poly::parse_expr(e, &PARAM_NAMES, &consts).map_err(Error::Config))
        .collect::<Result<Vec<_>>>()?;
    PolynomialSystem::new(polys)
}
