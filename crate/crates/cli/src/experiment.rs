//! End-to-end experiment runs: simulate once, build per-node fields, embed
//! per seed, majority-vote the verdicts, and write all artifacts.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use foloc_core::{
    assemble_field, build_state_matrix, field_distance_matrix, locate_sources, simulate_linear,
    simulate_nonlinear, Embedding2D, Error, GridModel, LocationReport, LocatorConfig, MECFParams,
    ModelKind, MotifField, Result, ScenarioConfig, Trajectory,
};

use crate::config::ExperimentSpec;
use crate::scenario::build_scenario;

/// Command-line overrides applied on top of a spec file.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub source_node: Option<usize>,
}

/// Resolve the spec's scenario against a built model: either the verbatim
/// scenario from the file or one generated from `scenario_kind`, with
/// command-line overrides applied last.
pub fn resolve_scenario(
    spec: &ExperimentSpec,
    model: &GridModel,
    ov: &Overrides,
) -> Result<(ScenarioConfig, Option<usize>)> {
    let (mut scenario, resonator) = match &spec.scenario {
        Some(s) => (s.clone(), None),
        None => {
            let kind = spec.scenario_kind.ok_or_else(|| {
                Error::InvalidParameter("spec has neither scenario nor scenario_kind".into())
            })?;
            let seed = ov.seed.unwrap_or(spec.scenario_seed);
            let built = build_scenario(kind, model, seed, spec.gamma)?;
            (built.scenario, built.resonator)
        }
    };
    if let Some(sigma) = ov.sigma {
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        scenario.sigma = sigma;
    }
    if let Some(seed) = ov.seed {
        scenario.seed = seed;
    }
    if let Some(node) = ov.source_node {
        let first = scenario
            .sources
            .first_mut()
            .ok_or_else(|| Error::InvalidParameter("scenario has no sources".into()))?;
        first.node = node;
    }
    scenario.validate(model.node_count())?;
    Ok((scenario, resonator))
}

/// Simulate according to the scenario's model kind.
pub fn simulate(model: &GridModel, scenario: &ScenarioConfig) -> Result<Trajectory> {
    match scenario.model_kind {
        ModelKind::Linear => {
            let phi = build_state_matrix(model)?;
            simulate_linear(&phi, scenario)
        }
        ModelKind::Nonlinear => simulate_nonlinear(model, scenario),
    }
}

/// Everything one pipeline pass produces in memory.
pub struct PipelineRun {
    pub trajectory: Trajectory,
    pub fields: Vec<MotifField>,
    pub distances: Array2<f64>,
    pub reports: Vec<LocationReport>,
    pub embeddings: Vec<Embedding2D>,
}

/// simulate -> per-node MECF -> distances -> one t-SNE + verdict per seed.
pub fn run_pipeline(
    model: &GridModel,
    scenario: &ScenarioConfig,
    mecf: &MECFParams,
    locator: &LocatorConfig,
    seeds: &[u64],
) -> Result<PipelineRun> {
    let trajectory = simulate(model, scenario).map_err(|e| e.in_stage("simulate"))?;
    let n = trajectory.node_count();
    let mut fields = Vec::with_capacity(n);
    for i in 0..n {
        let field = assemble_field(&trajectory.omega_series(i), mecf)
            .map_err(|e| e.in_stage("mecf"))?;
        fields.push(field);
    }
    let distances = field_distance_matrix(&fields).map_err(|e| e.in_stage("distances"))?;
    let mut reports = Vec::with_capacity(seeds.len());
    let mut embeddings = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (report, emb) =
            locate_sources(&distances, locator, seed).map_err(|e| e.in_stage("locate"))?;
        reports.push(report);
        embeddings.push(emb);
    }
    Ok(PipelineRun {
        trajectory,
        fields,
        distances,
        reports,
        embeddings,
    })
}

/// Nodes flagged in more than half of the per-seed reports, ascending.
pub fn majority_vote(reports: &[LocationReport]) -> Vec<usize> {
    if reports.is_empty() {
        return Vec::new();
    }
    let n = reports[0].avg_distances.len();
    let mut counts = vec![0usize; n];
    for r in reports {
        for &o in &r.outliers {
            counts[o] += 1;
        }
    }
    (0..n)
        .filter(|&v| 2 * counts[v] > reports.len())
        .collect()
}

/// Summary report for one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub source_nodes: Vec<usize>,
    pub resonator: Option<usize>,
    pub seeds: Vec<u64>,
    /// Outlier set of each seed, in seed order.
    pub outliers_per_seed: Vec<Vec<usize>>,
    /// Nodes flagged by more than half of the seeds.
    pub majority: Vec<usize>,
    pub threshold_per_seed: Vec<f64>,
}

/// In-memory outcome of `run_experiment`.
pub struct ExperimentOutcome {
    pub scenario: ScenarioConfig,
    pub resonator: Option<usize>,
    pub run: PipelineRun,
    pub report: ExperimentReport,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentSpec,
    scenario: &'a ScenarioConfig,
    artifacts: &'a [String],
    metadata: ManifestMetadata,
}

#[derive(Serialize)]
struct ManifestMetadata {
    created_unix: u64,
    version: &'static str,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run the full experiment and write its artifacts under `spec.output_dir`:
/// trajectory CSV, per-node field sidecars, per-seed embedding CSVs and
/// reports, the summary report, and a manifest indexing all of it.
pub fn run_experiment(spec: &ExperimentSpec, ov: &Overrides) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let model = spec.grid.build().map_err(|e| e.in_stage("grid"))?;
    let (scenario, resonator) = resolve_scenario(spec, &model, ov)?;
    let run = run_pipeline(&model, &scenario, &spec.mecf, &spec.locator, &spec.seeds)?;

    let report = ExperimentReport {
        name: spec.name.clone(),
        source_nodes: scenario.sources.iter().map(|s| s.node).collect(),
        resonator,
        seeds: spec.seeds.clone(),
        outliers_per_seed: run.reports.iter().map(|r| r.outliers.clone()).collect(),
        majority: majority_vote(&run.reports),
        threshold_per_seed: run.reports.iter().map(|r| r.threshold).collect(),
    };

    let out = &spec.output_dir;
    std::fs::create_dir_all(out.join("fields"))?;
    std::fs::create_dir_all(out.join("embeddings"))?;
    std::fs::create_dir_all(out.join("reports"))?;
    let mut artifacts: Vec<String> = Vec::new();
    let record = |p: &Path| -> String { p.to_string_lossy().into_owned() };

    let traj_path = out.join("trajectory.csv");
    run.trajectory.save_omega_csv(&traj_path)?;
    artifacts.push(record(&traj_path));

    let sidecars: Vec<_> = run.fields.iter().map(|f| f.sidecar()).collect();
    let sidecar_path = out.join("fields").join("sidecars.json");
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecars)?)?;
    artifacts.push(record(&sidecar_path));
    if spec.write_field_csv {
        for (i, f) in run.fields.iter().enumerate() {
            let p = out.join("fields").join(format!("node_{i:03}.csv"));
            f.save_csv(&p)?;
            artifacts.push(record(&p));
        }
    }

    for (emb, &seed) in run.embeddings.iter().zip(&spec.seeds) {
        let p = out.join("embeddings").join(format!("seed_{seed}.csv"));
        emb.save_csv(&p)?;
        artifacts.push(record(&p));
    }
    for (r, &seed) in run.reports.iter().zip(&spec.seeds) {
        let p = out.join("reports").join(format!("seed_{seed}.json"));
        r.save_json(&p)?;
        artifacts.push(record(&p));
    }

    let report_path = out.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    artifacts.push(record(&report_path));

    let manifest = Manifest {
        config: spec,
        scenario: &scenario,
        artifacts: &artifacts,
        metadata: ManifestMetadata {
            created_unix: now_unix(),
            version: env!("CARGO_PKG_VERSION"),
        },
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    Ok(ExperimentOutcome {
        scenario,
        resonator,
        run,
        report,
        artifacts: artifacts.into_iter().map(PathBuf::from).collect(),
    })
}
