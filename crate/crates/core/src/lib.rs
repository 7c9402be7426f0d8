//! Electrostatic and topological featurization of protein structures.
//!
//! * [`structure`] reads PQR files and selects element-specific point clouds.
//! * [`octree`] and [`multipole`] build the complete cluster tree with Cartesian multipole
//!   moments; [`coulomb`] evaluates Coulomb energies directly or by treecode.
//! * [`electro`] flattens the moments into fixed-length feature vectors.
//! * [`rips`] computes Vietoris–Rips barcodes; [`topo`] bins them into twelve channels.
//! * [`gb`] implements the Generalized Born energy formulas.
//! * [`pipeline`] assembles, filters, scales and serializes datasets.

pub mod coulomb;
pub mod electro;
pub mod error;
pub mod featurize;
pub mod gb;
pub mod multipole;
pub mod octree;
pub mod pipeline;
pub mod rips;
pub mod structure;
pub mod topo;

pub use error::{Error, Result};
