//! Quenched Widom–Rowlinson models on random environments.
//!
//! Three environments are supported: Bernoulli site percolation on `Z^d`,
//! the Poisson–Gilbert graph and the Poisson–Boolean model. For each the
//! crate provides exact or Monte Carlo partition functions, the canonical
//! Papangelou intensities, GNZ/DLR consistency checks and the half-lattice
//! experiments exhibiting non-quasilocal intensities.

// Negated comparisons such as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod env;
pub mod error;
pub mod experiments;
pub mod gnz;
pub mod io;
pub mod rng;
pub mod stats;
pub mod wrm_continuum;
pub mod wrm_lattice;

pub use cluster::{AdjacencyGraph, ClusterDecomposition, DiskRegion, Rule};
pub use env::{
    ExperimentGeometry, LatticeBox, LatticeEnv, MarkedPointCloud, ModelParams, RadiusLaw, Site,
    Window,
};
pub use error::{Result, WrmError};
pub use experiments::DiscontinuityRow;
pub use gnz::GnzReport;
pub use wrm_continuum::{ChoiceVariables, JointContinuumConfig, WRPointConfig};
pub use wrm_lattice::{LatticeConfig, MarginalTable, SpinWeights};
