//! Forced-oscillation (FO) source location in oscillator-network power grids.
//!
//! The pipeline: simulate a grid under a sinusoidal disturbance, build the
//! motif embedding correlation field (MECF) of every node's angular-speed
//! series, embed the inter-field distances in 2-D, and flag the source as the
//! node whose average embedding distance exceeds a Chebyshev threshold.

pub mod error;
pub mod grid;
pub mod locate;
pub mod mecf;
pub mod sim;

pub use error::Error;
pub type Result<T> = std::result::Result<T, Error>;

pub use grid::{
    build_state_matrix, generate_topology, load_topology, modal_analysis,
    pick_resonant_frequency, GridModel, GridTopology, NodeParams, StateMatrix, TopologyKind,
};
pub use locate::{
    average_distances, chebyshev_threshold, field_distance_matrix, fourier_locate,
    fourier_spectrum, locate, locate_sources, normalize_embedding, tsne_embed, Embedding2D,
    FourierVerdict, LocationReport, LocatorConfig, PeakVerdict, SpectrumSet, TsneParams,
    DEFAULT_DOMINANCE_RATIO,
};
pub use mecf::{assemble_field, delay_embed, field_distance, MECFParams, MotifField};
pub use sim::{
    simulate_linear, simulate_nonlinear, steady_state_response, FOSource, ModelKind, NoiseMode,
    ScenarioConfig, Trajectory,
};
