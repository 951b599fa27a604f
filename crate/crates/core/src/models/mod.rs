//! Concrete system families.
//!
//! Node `1` of the networks (the node the input enters and the output is
//! read from) is index `0` here. All rates and couplings are positive
//! parameters and therefore tuned in log space.

mod diffusive;
mod graph;
mod kuramoto;
mod linear;

pub use diffusive::{make_diffusive, DiffusiveNetwork};
pub use graph::{barabasi_albert, AdjacencyMatrix};
pub use kuramoto::{make_kuramoto, KuramotoConfig, KuramotoNetwork, PairRange};
pub use linear::{make_scalar_linear, ScalarLinear};
