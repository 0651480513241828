//! JSON experiment specifications: which grid, which scenario, which
//! pipeline settings, where the artifacts go.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use foloc_core::{
    generate_topology, load_topology, Error, GridModel, LocatorConfig, MECFParams, NodeParams,
    Result, ScenarioConfig, TopologyKind,
};

use crate::scenario::ScenarioKind;

fn default_generator_seed() -> u64 {
    7
}

fn default_coupling() -> f64 {
    15.0
}

fn default_params_seed() -> u64 {
    7
}

fn default_scenario_seed() -> u64 {
    1
}

fn default_seeds() -> Vec<u64> {
    (0..10).map(|s| s * 7 + 1).collect()
}

fn default_k_values() -> Vec<f64> {
    vec![15.0, 18.0, 21.0, 24.0, 27.0, 30.0]
}

fn default_sigma_values() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3]
}

/// Synthetic topology request.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: TopologyKind,
    pub nodes: usize,
    pub edges: usize,
    #[serde(default = "default_generator_seed")]
    pub seed: u64,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
}

/// Where the grid comes from and how its node parameters are filled in.
/// Exactly one of `topology_csv` / `generator` must be present.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Optional per-node parameter CSV `node,alpha,beta,power`; absent rows
    /// fall back to the seeded balanced defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_csv: Option<PathBuf>,
    /// Override every node's inertia.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_alpha: Option<f64>,
    /// Override every node's damping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_beta: Option<f64>,
    #[serde(default = "default_params_seed")]
    pub params_seed: u64,
}

impl GridSpec {
    /// Build and equilibrate the model this spec describes.
    pub fn build(&self) -> Result<GridModel> {
        let topology = match (&self.topology_csv, &self.generator) {
            (Some(path), None) => load_topology(path)?,
            (None, Some(g)) => generate_topology(g.kind, g.nodes, g.edges, g.seed, g.coupling)?,
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter(
                    "grid: give either topology_csv or generator, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::InvalidParameter(
                    "grid: missing topology_csv or generator".into(),
                ))
            }
        };
        let n = topology.node_count();
        let defaults = NodeParams::balanced_default(n, self.params_seed);
        let mut params = match &self.params_csv {
            Some(path) => NodeParams::load_csv(path, defaults)?,
            None => defaults,
        };
        if let Some(a) = self.uniform_alpha {
            if a <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "uniform_alpha must be positive, got {a}"
                )));
            }
            params.alpha = vec![a; n];
        }
        if let Some(b) = self.uniform_beta {
            if b <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "uniform_beta must be positive, got {b}"
                )));
            }
            params.beta = vec![b; n];
        }
        let mut model = GridModel::new(topology, params)?;
        model.solve_equilibrium()?;
        Ok(model)
    }
}

/// One end-to-end experiment: grid, scenario, pipeline settings, seed set,
/// output directory. The scenario is either given verbatim or generated from
/// a kind + seed when the run starts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_kind: Option<ScenarioKind>,
    #[serde(default = "default_scenario_seed")]
    pub scenario_seed: u64,
    /// FO amplitude override for generated scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub mecf: MECFParams,
    #[serde(default)]
    pub locator: LocatorConfig,
    /// t-SNE seeds; the verdict is a majority vote across them.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Also write every node's full field as CSV (large; sidecars are always
    /// written).
    #[serde(default)]
    pub write_field_csv: bool,
    /// Sweep axes; only read by the sweep command.
    #[serde(default = "default_k_values")]
    pub k_values: Vec<f64>,
    #[serde(default = "default_sigma_values")]
    pub sigma_values: Vec<f64>,
}

impl ExperimentSpec {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seeds must be non-empty".into()));
        }
        if self.scenario.is_none() && self.scenario_kind.is_none() {
            return Err(Error::InvalidParameter(
                "give either scenario or scenario_kind".into(),
            ));
        }
        self.mecf.validate()?;
        if !strictly_increasing(&self.k_values) || !strictly_increasing(&self.sigma_values) {
            return Err(Error::InvalidParameter(
                "k_values and sigma_values must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_json(extra: &str) -> String {
        format!(
            r#"{{
  "name": "t",
  "grid": {{ "generator": {{ "kind": "rewired-lattice", "nodes": 20, "edges": 30 }} }},
  "scenario_kind": "single",
  "output_dir": "/tmp/t"{extra}
}}"#
        )
    }

    #[test]
    fn parse_minimal_spec() {
        let spec: ExperimentSpec = serde_json::from_str(&desk_json("")).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.seeds.len(), 10);
        assert_eq!(spec.k_values.len(), 6);
        assert_eq!(spec.scenario_seed, 1);
    }

    #[test]
    fn unknown_field_rejected() {
        let bad = desk_json(",\n  \"typo_field\": 3");
        assert!(serde_json::from_str::<ExperimentSpec>(&bad).is_err());
    }

    #[test]
    fn empty_seeds_rejected() {
        let mut spec: ExperimentSpec = serde_json::from_str(&desk_json("")).unwrap();
        spec.seeds.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn grid_needs_exactly_one_source() {
        let spec = GridSpec::default();
        assert!(spec.build().is_err());
        let mut both: GridSpec = serde_json::from_str(
            r#"{ "generator": { "kind": "ring", "nodes": 5, "edges": 5 } }"#,
        )
        .unwrap();
        both.topology_csv = Some("edges.csv".into());
        assert!(both.build().is_err());
    }

    #[test]
    fn uniform_overrides_apply() {
        let spec: GridSpec = serde_json::from_str(
            r#"{ "generator": { "kind": "ring", "nodes": 6, "edges": 6 },
                 "uniform_alpha": 2.5, "uniform_beta": 0.4 }"#,
        )
        .unwrap();
        let model = spec.build().unwrap();
        assert!(model.params().alpha.iter().all(|&a| a == 2.5));
        assert!(model.params().beta.iter().all(|&b| b == 0.4));
        assert!(model.equilibrium().is_some());
    }

    #[test]
    fn non_increasing_axes_rejected() {
        let mut spec: ExperimentSpec = serde_json::from_str(&desk_json("")).unwrap();
        spec.sigma_values = vec![0.1, 0.1];
        assert!(spec.validate().is_err());
    }
}
