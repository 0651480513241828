//! Fourier baseline: spectra of the same simulation, peak leaders, and the
//! ambiguity verdict, for side-by-side comparison with the field pipeline.

use foloc_core::{
    fourier_locate, fourier_spectrum, FourierVerdict, Result, SpectrumSet,
    DEFAULT_DOMINANCE_RATIO,
};

use crate::config::ExperimentSpec;
use crate::experiment::{resolve_scenario, simulate, Overrides};

pub struct FourierBaseline {
    pub spectra: SpectrumSet,
    pub verdict: FourierVerdict,
    pub source_nodes: Vec<usize>,
    pub resonator: Option<usize>,
}

/// Run the spec's simulation once and locate sources from node spectra.
pub fn run_fourier_baseline(
    spec: &ExperimentSpec,
    ov: &Overrides,
    dominance_ratio: Option<f64>,
) -> Result<FourierBaseline> {
    spec.validate()?;
    let model = spec.grid.build().map_err(|e| e.in_stage("grid"))?;
    let (scenario, resonator) = resolve_scenario(spec, &model, ov)?;
    let traj = simulate(&model, &scenario).map_err(|e| e.in_stage("simulate"))?;
    let spectra = fourier_spectrum(&traj).map_err(|e| e.in_stage("fourier"))?;
    let verdict = fourier_locate(&spectra, dominance_ratio.unwrap_or(DEFAULT_DOMINANCE_RATIO));
    Ok(FourierBaseline {
        spectra,
        verdict,
        source_nodes: scenario.sources.iter().map(|s| s.node).collect(),
        resonator,
    })
}

/// Write `spectra.csv` and `fourier.json` under the spec's output dir.
pub fn write_artifacts(spec: &ExperimentSpec, baseline: &FourierBaseline) -> Result<()> {
    std::fs::create_dir_all(&spec.output_dir)?;
    baseline.spectra.save_csv(spec.output_dir.join("spectra.csv"))?;
    baseline.verdict.save_json(spec.output_dir.join("fourier.json"))?;
    Ok(())
}
