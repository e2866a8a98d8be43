//! Polynomials in the 12 Hamiltonian parameters and the symbolic
//! derivation of the probe-signal Taylor coefficients.

pub mod golden;
pub mod multipoly;
pub mod series;
pub mod system;

pub use multipoly::{CPoly, Monomial, MultiPoly, Poly};
pub use series::{series_observable, RadiusPolicy, SeriesContext};
pub use system::{
    canonical_lattice, canonical_specs, canonical_system, derive_system, hessian, jacobian, CoefficientSpec,
    PolySet, PolynomialSystem, SYSTEM_NAMES,
};
