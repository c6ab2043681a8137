//! Ground states, correlations and localizable state-preparation circuits
//! for one-dimensional lattice scalar field theory.
//!
//! The pipeline runs from a [`LatticeSpec`] through the free-field kernel
//! ([`lattice`]), Gaussian entanglement measures ([`gaussian`]), the digitized
//! ground state ([`digitize`]) or the interacting one ([`interacting`]), to
//! rotation-angle schedules ([`angles`]), their truncation ([`truncation`]) and
//! finally an emitted circuit ([`circuit`]).

pub mod angles;
pub mod circuit;
pub mod digitize;
pub mod error;
pub mod gaussian;
pub mod interacting;
pub mod lattice;
pub mod special;
pub mod truncation;

pub use error::{Error, Result};
pub use lattice::{
    build_kernel, build_mass_matrix, Boundary, CorrelationKernel, GradientStencil, LatticeSpec,
    TwoPointMode, TwoPointTable,
};
