//! Scenario construction for the three experiment families: a single forced
//! node, a forced node resonating with a network mode, and two concurrent
//! sources.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use foloc_core::{
    build_state_matrix, modal_analysis, pick_resonant_frequency, Error, FOSource, GridModel,
    ModelKind, NoiseMode, Result, ScenarioConfig,
};

pub const DEFAULT_SIGMA: f64 = 0.05;
pub const DEFAULT_DURATION: f64 = 30.0;
pub const DEFAULT_DT: f64 = 0.01;

/// Switch-on phase of the forcing, in cycles. Starting the cosine off-peak
/// gives the grid a step-like kick at t = 0 that keeps the network modes
/// ringing, which is what separates the forced node from the rest when the
/// measurement noise is small.
pub const DEFAULT_PHASE: f64 = -std::f64::consts::FRAC_PI_2;

pub const SINGLE_FREQ_HZ: f64 = 0.5;
pub const MULTI_FREQ_HZ: [f64; 2] = [0.2, 0.4];
pub const DEFAULT_GAMMA: f64 = 1.0;
/// Driving exactly on a mode amplifies strongly; a smaller amplitude keeps
/// the resonance runs in the same dynamic range as the detuned ones.
pub const RESONANCE_GAMMA: f64 = 0.3;

/// Minimum hop distance between a resonance source and its predicted
/// resonator, so "source" and "resonator" are geographically distinct.
const MIN_RESONATOR_HOPS: usize = 5;
const RESONANCE_TRIES: usize = 256;

/// The three experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Single,
    Resonance,
    Multi,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Single => write!(f, "single"),
            ScenarioKind::Resonance => write!(f, "resonance"),
            ScenarioKind::Multi => write!(f, "multi"),
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(ScenarioKind::Single),
            "resonance" => Ok(ScenarioKind::Resonance),
            "multi" => Ok(ScenarioKind::Multi),
            other => Err(Error::InvalidParameter(format!(
                "unknown scenario kind '{other}' (expected single | resonance | multi)"
            ))),
        }
    }
}

/// A generated scenario plus the resonance bookkeeping that goes with it.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub scenario: ScenarioConfig,
    /// Predicted resonator node (resonance kind only).
    pub resonator: Option<usize>,
}

/// Nodes eligible to host a source: degree >= 2 and not a cut vertex, so a
/// disturbance always has more than one path into the rest of the grid.
pub fn eligible_source_nodes(model: &GridModel) -> Vec<usize> {
    let topo = model.topology();
    let arti = topo.articulation_points();
    (0..topo.node_count())
        .filter(|&v| topo.degree(v) >= 2 && !arti[v])
        .collect()
}

/// Build a scenario of the given kind on a solved grid. Deterministic for a
/// fixed seed; the same seed is reused as the simulation seed.
pub fn build_scenario(
    kind: ScenarioKind,
    model: &GridModel,
    seed: u64,
    gamma: Option<f64>,
) -> Result<BuiltScenario> {
    let eligible = eligible_source_nodes(model);
    if eligible.is_empty() {
        return Err(Error::InvalidParameter(
            "no eligible source nodes (need degree >= 2, non-cut)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = model.topology();

    let (sources, resonator) = match kind {
        ScenarioKind::Single => {
            let node = eligible[rng.gen_range(0..eligible.len())];
            (
                vec![FOSource {
                    node,
                    gamma: gamma.unwrap_or(DEFAULT_GAMMA),
                    freq_hz: SINGLE_FREQ_HZ,
                    phase: DEFAULT_PHASE,
                }],
                None,
            )
        }
        ScenarioKind::Resonance => {
            let phi = build_state_matrix(model)?;
            let modes = modal_analysis(&phi)?;
            let mut picked = None;
            for _ in 0..RESONANCE_TRIES {
                let node = eligible[rng.gen_range(0..eligible.len())];
                let (freq_hz, resonator) = pick_resonant_frequency(&modes, node)?;
                if topo.hop_distances(node)[resonator] >= MIN_RESONATOR_HOPS {
                    picked = Some((node, freq_hz, resonator));
                    break;
                }
            }
            let (node, freq_hz, resonator) = picked.ok_or_else(|| {
                Error::NoQualifyingMode(format!(
                    "no source at least {MIN_RESONATOR_HOPS} hops from its predicted resonator"
                ))
            })?;
            (
                vec![FOSource {
                    node,
                    gamma: gamma.unwrap_or(RESONANCE_GAMMA),
                    freq_hz,
                    phase: DEFAULT_PHASE,
                }],
                Some(resonator),
            )
        }
        ScenarioKind::Multi => {
            let first = eligible[rng.gen_range(0..eligible.len())];
            let hops = topo.hop_distances(first);
            // second source: the eligible node farthest from the first
            let second = eligible
                .iter()
                .copied()
                .filter(|&v| v != first)
                .max_by_key(|&v| hops[v])
                .expect("at least two eligible nodes");
            let g = gamma.unwrap_or(DEFAULT_GAMMA);
            (
                vec![
                    FOSource {
                        node: first,
                        gamma: g,
                        freq_hz: MULTI_FREQ_HZ[0],
                        phase: DEFAULT_PHASE,
                    },
                    FOSource {
                        node: second,
                        gamma: g,
                        freq_hz: MULTI_FREQ_HZ[1],
                        phase: DEFAULT_PHASE,
                    },
                ],
                None,
            )
        }
    };

    let scenario = ScenarioConfig {
        sources,
        sigma: DEFAULT_SIGMA,
        duration: DEFAULT_DURATION,
        dt: DEFAULT_DT,
        seed,
        model_kind: ModelKind::Linear,
        noise_mode: NoiseMode::Measurement,
        scale_forcing_by_inertia: false,
    };
    scenario.validate(model.node_count())?;
    Ok(BuiltScenario {
        scenario,
        resonator,
    })
}
