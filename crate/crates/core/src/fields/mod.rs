//! Grids, sampled fields and finite-difference operators.

mod constants;
mod diff;
mod field;
mod grid;
pub mod io;

pub use constants::PhysicalConstants;
pub(crate) use diff::raw_gradient;
pub use diff::{divergence, gradient, laplacian};
pub(crate) use field::l2 as field_l2;
pub use field::{checkable_nodes, ComplexField, NodeMask, ScalarField};
pub use grid::{node_cap, Boundary, Grid, GridSpec, DEFAULT_NODE_CAP, MIN_EXTENT, NODE_CAP_ENV};
