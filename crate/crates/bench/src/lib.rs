//! Shared fixtures for the pipeline benchmarks.

use foloc_core::{
    build_state_matrix, generate_topology, simulate_linear, FOSource, GridModel, ModelKind,
    NodeParams, NoiseMode, ScenarioConfig, StateMatrix, Trajectory, TopologyKind,
};

pub const NODES: usize = 120;
pub const EDGES: usize = 165;

pub fn desk_state_matrix() -> StateMatrix {
    let topo = generate_topology(TopologyKind::RewiredLattice, NODES, EDGES, 7, 15.0).unwrap();
    let mut params = NodeParams::balanced_default(NODES, 7);
    params.alpha = vec![100.0; NODES];
    params.beta = vec![0.3; NODES];
    let mut model = GridModel::new(topo, params).unwrap();
    model.solve_equilibrium().unwrap();
    build_state_matrix(&model).unwrap()
}

pub fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig {
        sources: vec![FOSource {
            node: 0,
            gamma: 1.0,
            freq_hz: 0.5,
            phase: -std::f64::consts::FRAC_PI_2,
        }],
        sigma: 0.05,
        duration: 30.0,
        dt: 0.01,
        seed: 1,
        model_kind: ModelKind::Linear,
        noise_mode: NoiseMode::Measurement,
        scale_forcing_by_inertia: false,
    }
}

pub fn desk_trajectory() -> Trajectory {
    simulate_linear(&desk_state_matrix(), &desk_scenario()).unwrap()
}
