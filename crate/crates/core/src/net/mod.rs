//! Chain and tree LSTMs with hand-derived gradients.

mod check;
mod lstm;
pub mod math;
mod params;

pub use check::{gradient_check, relative_error, MIN_PROBED_COORDS};
pub use lstm::{
    chain_forward, tree_backward, tree_forward, NodeState, TopoNode, Topology, TreeForward,
    TreeGrads,
};
pub use params::{Gate, LstmParams};
