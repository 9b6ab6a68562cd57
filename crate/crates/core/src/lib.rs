//! Simple random walks on horizontally oriented two-dimensional lattices.
//!
//! Each row `y` of `Z^2` carries one-way horizontal edges pointing in the
//! direction `epsilon_y`, while vertical edges are two-way. The crate
//! provides the environments ([`lattice`]), a reproducible walk simulator
//! ([`walk`]), the vertical-skeleton decomposition ([`skeleton`]), the
//! characteristic-function quadrature for return probabilities
//! ([`analysis`]), exact small-scale oracles ([`oracle`]) and path-sum
//! expansions of lattice Green functions ([`expansions`]).

pub mod analysis;
pub mod error;
pub mod estimate;
pub mod expansions;
pub mod lattice;
pub mod oracle;
pub mod parallel;
pub mod quadrature;
pub mod rng;
pub mod skeleton;
pub mod walk;

pub use error::{Error, Result};
pub use estimate::Estimate;
pub use lattice::{EnvironmentSpec, Sign, Vertex};
pub use rng::RngStream;

/// Version string embedded in every result document.
pub const VERSION: &str = concat!("orwalk ", env!("CARGO_PKG_VERSION"));
