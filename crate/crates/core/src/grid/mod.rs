//! Oscillator-network model of a power grid: topology, per-node physical
//! parameters, synchronous equilibrium, linearized state matrix, and the
//! modal (natural-frequency) structure used to design resonance scenarios.

mod model;
mod spectral;
mod topology;

pub use model::{GridModel, NodeParams};
pub use spectral::{
    build_state_matrix, modal_analysis, pick_resonant_frequency, Mode, ModalStructure, StateMatrix,
};
pub use topology::{generate_topology, load_topology, Edge, GridTopology, TopologyKind};
