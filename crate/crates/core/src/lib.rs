//! Cavity QED for a single 2D electron coupled to quantized photon modes.
//!
//! The crate solves the long-wavelength Pauli-Fierz problem for one electron
//! in a fixed external potential in three ways:
//!
//! * exactly, by Krylov diagonalization over the real-space grid ⊗ Fock
//!   tensor space, in length form and in momentum form ([`coupled`]);
//! * in the explicit-polariton truncated basis of bare electronic
//!   eigenstates ⊗ photon occupations ([`polariton`]);
//! * with the closed-form single-photon polariton model ([`spp`]).
//!
//! Supporting modules provide the finite-difference grid and bare electronic
//! problem ([`grid`], [`electronic`]), the symmetric eigensolvers
//! ([`eigensolver`]), the photonic Fock algebra and analytic coupling tables
//! ([`photon`]), observables ([`observables`]) and the eigenpair cache format
//! ([`cache`]).
//!
//! All quantities are in atomic units.

pub mod cache;
pub mod coupled;
pub mod eigensolver;
pub mod electronic;
mod error;
pub mod grid;
pub mod observables;
pub mod photon;
pub mod polariton;
pub mod spp;

pub use error::{Error, Result};

/// Guide chapters under `book/src`, compiled as doctests so the snippets
/// there stay in sync with the API.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    pub mod quickstart {}
    #[doc = include_str!("../../../book/src/grid.md")]
    pub mod grid {}
    #[doc = include_str!("../../../book/src/eigensolver.md")]
    pub mod eigensolver {}
    #[doc = include_str!("../../../book/src/photons.md")]
    pub mod photons {}
    #[doc = include_str!("../../../book/src/exact.md")]
    pub mod exact {}
    #[doc = include_str!("../../../book/src/polariton.md")]
    pub mod polariton {}
    #[doc = include_str!("../../../book/src/spp.md")]
    pub mod spp {}
    #[doc = include_str!("../../../book/src/observables.md")]
    pub mod observables {}
}
