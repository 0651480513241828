use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use foloc_cli::config::ExperimentSpec;
use foloc_cli::experiment::{resolve_scenario, run_experiment, simulate, Overrides};
use foloc_cli::fourier::{run_fourier_baseline, write_artifacts};
use foloc_cli::scenario::ScenarioKind;
use foloc_cli::sweep::run_sweep;
use foloc_core::{assemble_field, Error, MECFParams, Trajectory};

#[derive(Parser)]
#[command(
    name = "foloc",
    about = "Forced-oscillation source location in oscillator-network grids",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment spec (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override: uniform coupling strength K for all edges
    #[arg(long = "K")]
    k: Option<f64>,
    /// Override: noise level σ
    #[arg(long)]
    sigma: Option<f64>,
    /// Override: scenario / simulation seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override: scenario kind (single | resonance | multi)
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    /// Override: output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override: first source node
    #[arg(long)]
    source_node: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation only; write the angular-speed trajectory CSV
    Simulate(Common),
    /// Compute per-node motif fields from a trajectory CSV
    Mecf {
        /// Trajectory CSV (as written by `simulate`)
        #[arg(long)]
        input: PathBuf,
        /// Output directory for field CSVs and sidecars
        #[arg(long)]
        out: PathBuf,
        /// MECF parameters as JSON (defaults when omitted)
        #[arg(long)]
        params: Option<String>,
    },
    /// One localization pass (single t-SNE seed); print the outlier set
    Locate(Common),
    /// Full experiment: all seeds, majority vote, artifacts on disk
    Experiment(Common),
    /// K–σ robustness sweep
    Sweep(Common),
    /// Fourier baseline on the same simulation
    Fourier {
        #[command(flatten)]
        common: Common,
        /// Leader/runner-up ratio below which a peak is ambiguous
        #[arg(long)]
        ratio: Option<f64>,
    },
}

fn load_spec(common: &Common) -> Result<(ExperimentSpec, Overrides), Error> {
    let mut spec = ExperimentSpec::load(&common.config)?;
    if let Some(kind) = common.scenario {
        spec.scenario = None;
        spec.scenario_kind = Some(kind);
    }
    if let Some(k) = common.k {
        match spec.grid.generator.as_mut() {
            Some(g) => g.coupling = k,
            None => {
                return Err(Error::InvalidParameter(
                    "--K needs a generator-based grid spec".into(),
                ))
            }
        }
    }
    if let Some(out) = &common.out {
        spec.output_dir = out.clone();
    }
    let ov = Overrides {
        sigma: common.sigma,
        seed: common.seed,
        source_node: common.source_node,
    };
    Ok((spec, ov))
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Stage { source, .. } => exit_code(source),
        Error::Numerical(_)
        | Error::Divergence { .. }
        | Error::LossOfSynchrony { .. }
        | Error::Resonant { .. }
        | Error::NoSynchronousState(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Simulate(common) => {
            let (spec, ov) = load_spec(&common)?;
            let model = spec.grid.build()?;
            let (scenario, _) = resolve_scenario(&spec, &model, &ov)?;
            let traj = simulate(&model, &scenario)?;
            std::fs::create_dir_all(&spec.output_dir)?;
            let path = spec.output_dir.join("trajectory.csv");
            traj.save_omega_csv(&path)?;
            println!(
                "simulated {} nodes x {} samples -> {}",
                traj.node_count(),
                traj.sample_count(),
                path.display()
            );
            Ok(0)
        }
        Command::Mecf { input, out, params } => {
            let mecf: MECFParams = match params {
                Some(text) => serde_json::from_str(&text)?,
                None => MECFParams::default(),
            };
            mecf.validate()?;
            let traj = Trajectory::load_omega_csv(&input)?;
            std::fs::create_dir_all(&out)?;
            let mut sidecars = Vec::new();
            for i in 0..traj.node_count() {
                let field = assemble_field(&traj.omega_series(i), &mecf)?;
                field.save_csv(out.join(format!("node_{i:03}.csv")))?;
                sidecars.push(field.sidecar());
            }
            std::fs::write(
                out.join("sidecars.json"),
                serde_json::to_string_pretty(&sidecars)?,
            )?;
            println!("wrote {} fields -> {}", traj.node_count(), out.display());
            Ok(0)
        }
        Command::Locate(common) => {
            let (mut spec, ov) = load_spec(&common)?;
            // single-seed pass: first configured seed, or --seed
            let seed = common.seed.unwrap_or(spec.locator.tsne.seed);
            spec.seeds = vec![seed];
            let outcome = run_experiment(&spec, &ov)?;
            let outliers = &outcome.report.outliers_per_seed[0];
            println!("sources (true): {:?}", outcome.report.source_nodes);
            println!("outliers: {outliers:?}");
            if outliers.is_empty() {
                eprintln!("no source found");
                return Ok(3);
            }
            Ok(0)
        }
        Command::Experiment(common) => {
            let (spec, ov) = load_spec(&common)?;
            let outcome = run_experiment(&spec, &ov)?;
            println!("sources (true): {:?}", outcome.report.source_nodes);
            if let Some(res) = outcome.resonator {
                println!("predicted resonator: {res}");
            }
            for (seed, outliers) in outcome
                .report
                .seeds
                .iter()
                .zip(&outcome.report.outliers_per_seed)
            {
                println!("seed {seed}: {outliers:?}");
            }
            println!("majority: {:?}", outcome.report.majority);
            println!("artifacts in {}", spec.output_dir.display());
            if outcome.report.majority.is_empty() {
                eprintln!("no source found");
                return Ok(3);
            }
            Ok(0)
        }
        Command::Sweep(common) => {
            let (spec, _) = load_spec(&common)?;
            let result = run_sweep(&spec, &spec.k_values, &spec.sigma_values)?;
            std::fs::create_dir_all(&spec.output_dir)?;
            result.save_csv(spec.output_dir.join("sweep.csv"))?;
            result.save_json(spec.output_dir.join("sweep.json"))?;
            for c in &result.cells {
                println!(
                    "K={:<5} sigma={:<5} success {:.0}%{}",
                    c.k,
                    c.sigma,
                    100.0 * c.success_rate,
                    c.error.as_deref().map(|e| format!("  [{e}]")).unwrap_or_default()
                );
            }
            println!("artifacts in {}", spec.output_dir.display());
            Ok(0)
        }
        Command::Fourier { common, ratio } => {
            let (spec, ov) = load_spec(&common)?;
            let baseline = run_fourier_baseline(&spec, &ov, ratio)?;
            write_artifacts(&spec, &baseline)?;
            println!("sources (true): {:?}", baseline.source_nodes);
            for p in &baseline.verdict.peaks {
                println!(
                    "peak {:.4} Hz: leader {} ({:.3}), runner-up {:?} ({:.3}), ambiguous {}",
                    p.freq_hz,
                    p.leader,
                    p.leader_magnitude,
                    p.runner_up,
                    p.runner_up_magnitude,
                    p.ambiguous
                );
            }
            println!("candidates: {:?}", baseline.verdict.candidates);
            println!("ambiguous: {}", baseline.verdict.ambiguous);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
