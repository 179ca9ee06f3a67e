//! Scattering resonances of one-dimensional high-contrast resonator chains.
//!
//! The library models a chain of `N` resonators on the real line via 2x2
//! propagation (transfer) matrices. From those it computes:
//!
//! - complex scattering resonances as zeros of a characteristic determinant,
//!   located by argument-principle subdivision plus Newton refinement
//!   ([`spectra`]);
//! - exceptional-point diagnostics (algebraic vs geometric multiplicity);
//! - the high-contrast limiting spectrum and generalised capacitance-matrix
//!   asymptotics ([`capacitance`]);
//! - band structure, quasimomenta and skin-effect decay envelopes for chains
//!   with imaginary gauge potentials ([`skin`]);
//! - resonant-mode profiles, Green's functions and transmission spectra
//!   ([`propagation`], [`spectra`]).
//!
//! All quantities are nondimensional. Configurations are immutable value
//! types; every operation is a pure function, safe for data-parallel use.

pub mod capacitance;
pub mod model;
pub mod propagation;
pub mod skin;
pub mod spectra;

pub use model::{RadiationCondition, ResonatorArray};
pub use propagation::Mat2C;
pub use spectra::{Resonance, SearchRegion};
