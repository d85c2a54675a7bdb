//! Quantum diffusion in d-dimensional random band matrices.
//!
//! The crate provides:
//! - the periodic lattice, band count M(W) and profile matrix S ([`lattice`]);
//! - reproducible sampling of the Hermitian phase-ensemble band matrix H
//!   ([`sampler`]);
//! - the Chebyshev / non-backtracking expansion of `e^{-itH/2}`
//!   ([`chebyshev`], [`propagator`]);
//! - the transition profile P(t,x), the scaled observable Y_T(φ) and Monte
//!   Carlo variance estimation with a scaling-exponent study ([`observables`]);
//! - the diagrammatic machinery: chain graphs, lumpings, pairings, skeletons,
//!   orbits and exact small-instance verification ([`diagrams`]);
//! - result records and CSV export for the CLI ([`report`]).

pub mod chebyshev;
pub mod diagrams;
pub mod error;
pub mod lattice;
pub mod observables;
pub mod propagator;
pub mod report;
pub mod sampler;

pub use error::QdiffError;

/// Version tag of the angle-generation algorithm, recorded in output
/// metadata. Bump whenever the mapping from seeds to matrices changes.
pub const GENERATOR_VERSION: &str = "qdiff-rng-v1";

/// Tool version, embedded in result records.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
