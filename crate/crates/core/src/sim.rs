//! Stochastic simulation of the grid under forced-oscillation disturbances.
//!
//! The deterministic drift is advanced with classical 4th-order Runge-Kutta
//! (plain forward Euler is unstable for the stiffest swing modes at the
//! 0.01 s default step); the Gaussian process noise enters as an
//! Euler-Maruyama increment sigma*sqrt(dt) on every ω-row after each step.
//! Runs are bit-reproducible for a fixed seed.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::grid::{GridModel, StateMatrix};
use crate::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
/// Any |state| beyond this aborts the run as a numeric blow-up.
const BLOWUP_LIMIT: f64 = 1e6;
/// Consecutive steps with |Δδ| > 2π before declaring loss of synchrony.
const DESYNC_STEPS: usize = 50;

/// Sinusoidal disturbance injected at one node.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FOSource {
    pub node: usize,
    /// Amplitude γ (per-unit).
    pub gamma: f64,
    /// Frequency in Hz.
    pub freq_hz: f64,
    /// Phase offset in cycles; the forcing argument is 2π(f t + φ).
    #[serde(default)]
    pub phase: f64,
}

/// Deterministic FO term γ cos(2π(f t + φ)).
pub fn fo_signal(src: &FOSource, t: f64) -> f64 {
    src.gamma * (TWO_PI * (src.freq_hz * t + src.phase)).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Linear,
    Nonlinear,
}

/// How the noise standard deviation is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// Process noise on the ω-equations, increment σ·sqrt(dt) per step.
    #[default]
    Process,
    /// Noise-free integration with σ·N(0,1) added to the recorded ω samples.
    Measurement,
}

/// Everything that determines one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub sources: Vec<FOSource>,
    pub sigma: f64,
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub model_kind: ModelKind,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    /// Scale the deterministic forcing by H⁻¹ (per-node 1/alpha) in the
    /// linear model. Off by default; moot for the unit-inertia defaults.
    #[serde(default)]
    pub scale_forcing_by_inertia: bool,
}

impl ScenarioConfig {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::InvalidParameter("duration must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidParameter("sigma must be non-negative".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.sources {
            if s.node >= node_count {
                return Err(Error::InvalidParameter(format!(
                    "source node {} out of range (N = {node_count})",
                    s.node
                )));
            }
            if !seen.insert(s.node) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate source node {}",
                    s.node
                )));
            }
            if s.gamma <= 0.0 || s.freq_hz <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "source at node {} needs gamma > 0 and freq > 0",
                    s.node
                )));
            }
        }
        Ok(())
    }

    /// Number of recorded samples.
    pub fn sample_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Per-node deviation time series from one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    /// N×T angular-speed deviations (rad/s).
    pub omega: Array2<f64>,
    /// N×T phase deviations (rad).
    pub delta: Array2<f64>,
}

impl Trajectory {
    pub fn node_count(&self) -> usize {
        self.omega.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.omega.ncols()
    }

    pub fn omega_series(&self, node: usize) -> Vec<f64> {
        self.omega.row(node).to_vec()
    }

    /// Canonical CSV interchange: header `t,node_0,...,node_{N-1}`, one row
    /// per time step, ω-block only.
    pub fn write_omega_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.node_count();
        let mut header = String::from("t");
        for i in 0..n {
            header.push_str(&format!(",node_{i}"));
        }
        writeln!(w, "{header}")?;
        for t in 0..self.sample_count() {
            let mut row = format!("{}", (t + 1) as f64 * self.dt);
            for i in 0..n {
                row.push_str(&format!(",{}", self.omega[[i, t]]));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn save_omega_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_omega_csv(std::io::BufWriter::new(f))
    }

    /// Read a trajectory back from the canonical ω CSV. Phase deviations are
    /// not part of the interchange format and come back as zeros.
    pub fn load_omega_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "empty file".into(),
        })??;
        let n = header.split(',').count().saturating_sub(1);
        if n == 0 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: "header has no node columns".into(),
            });
        }
        let mut times = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n + 1 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 2,
                    msg: format!("expected {} fields, got {}", n + 1, fields.len()),
                });
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim().parse().map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 2,
                    msg: format!("bad number '{s}': {e}"),
                })
            };
            times.push(parse(fields[0])?);
            for f in &fields[1..] {
                values.push(parse(f)?);
            }
        }
        let t = times.len();
        let dt = if t >= 2 { times[1] - times[0] } else { 0.01 };
        let by_row = Array2::from_shape_vec((t, n), values)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(Self {
            dt,
            omega: by_row.reversed_axes().as_standard_layout().to_owned(),
            delta: Array2::zeros((n, t)),
        })
    }
}

/// Shared fixed-step driver: RK4 on the drift, EM increment on the ω rows.
fn integrate<F>(
    n: usize,
    scenario: &ScenarioConfig,
    initial: Vec<f64>,
    reference: &[f64],
    mut drift: F,
    check_desync: bool,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let steps = scenario.sample_count();
    let dt = scenario.dt;
    let dim = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let process_sigma = match scenario.noise_mode {
        NoiseMode::Process => scenario.sigma,
        NoiseMode::Measurement => 0.0,
    };
    let noise_scale = process_sigma * dt.sqrt();

    let mut y = initial;
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let mut omega = Array2::<f64>::zeros((n, steps));
    let mut delta = Array2::<f64>::zeros((n, steps));
    let mut desync_run = vec![0usize; n];

    for step in 0..steps {
        let t = step as f64 * dt;
        drift(t, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * dt * k1[i];
        }
        drift(t + 0.5 * dt, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * dt * k2[i];
        }
        drift(t + 0.5 * dt, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + dt * k3[i];
        }
        drift(t + dt, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if noise_scale > 0.0 {
            for i in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                y[n + i] += noise_scale * z;
            }
        }

        let time = (step + 1) as f64 * dt;
        for i in 0..dim {
            if !y[i].is_finite() || y[i].abs() > BLOWUP_LIMIT {
                return Err(Error::Divergence {
                    step: step + 1,
                    time,
                    limit: BLOWUP_LIMIT,
                });
            }
        }
        for i in 0..n {
            let dev = y[i] - reference[i];
            delta[[i, step]] = dev;
            omega[[i, step]] = y[n + i];
            if check_desync {
                if dev.abs() > TWO_PI {
                    desync_run[i] += 1;
                    if desync_run[i] >= DESYNC_STEPS {
                        return Err(Error::LossOfSynchrony {
                            node: i,
                            step: step + 1,
                            time,
                        });
                    }
                } else {
                    desync_run[i] = 0;
                }
            }
        }
    }

    if let NoiseMode::Measurement = scenario.noise_mode {
        if scenario.sigma > 0.0 {
            for step in 0..steps {
                for i in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    omega[[i, step]] += scenario.sigma * z;
                }
            }
        }
    }

    Ok(Trajectory { dt, omega, delta })
}

/// Integrate the linear stochastic model ẏ = Φy + forcing + noise from y(0)=0.
pub fn simulate_linear(phi: &StateMatrix, scenario: &ScenarioConfig) -> Result<Trajectory> {
    let n = phi.node_count();
    scenario.validate(n)?;
    if scenario.model_kind != ModelKind::Linear {
        return Err(Error::InvalidParameter(
            "scenario.model_kind must be linear for simulate_linear".into(),
        ));
    }
    let sources: Vec<(usize, FOSource, f64)> = scenario
        .sources
        .iter()
        .map(|s| {
            let scale = if scenario.scale_forcing_by_inertia {
                phi.inv_alpha()[s.node]
            } else {
                1.0
            };
            (n + s.node, *s, scale)
        })
        .collect();
    let reference = vec![0.0; n];
    integrate(
        n,
        scenario,
        vec![0.0; 2 * n],
        &reference,
        |t, y, out| {
            phi.drift(y, out);
            for (row, src, scale) in &sources {
                out[*row] += scale * fo_signal(src, t);
            }
        },
        false,
    )
}

/// Integrate the nonlinear swing model from the solved equilibrium, with the
/// FO disturbance added to the injected power of its source node. Reported
/// series are deviations from (δ*, 0).
pub fn simulate_nonlinear(model: &GridModel, scenario: &ScenarioConfig) -> Result<Trajectory> {
    let n = model.node_count();
    scenario.validate(n)?;
    if scenario.model_kind != ModelKind::Nonlinear {
        return Err(Error::InvalidParameter(
            "scenario.model_kind must be nonlinear for simulate_nonlinear".into(),
        ));
    }
    let equilibrium = model.equilibrium().ok_or(Error::EquilibriumUnset)?.to_vec();
    let params = model.params().clone();
    let topology = model.topology().clone();
    let sources = scenario.sources.clone();

    let mut initial = vec![0.0; 2 * n];
    initial[..n].copy_from_slice(&equilibrium);

    integrate(
        n,
        scenario,
        initial,
        &equilibrium.clone(),
        move |t, y, out| {
            let (delta, omega) = y.split_at(n);
            for i in 0..n {
                out[i] = omega[i];
                let mut power = params.power[i];
                for s in &sources {
                    if s.node == i {
                        power += fo_signal(s, t);
                    }
                }
                let mut coupling = 0.0;
                for &(j, k) in topology.neighbors(i) {
                    coupling += k * (delta[i] - delta[j]).sin();
                }
                out[n + i] = (power - coupling - params.beta[i] * omega[i]) / params.alpha[i];
            }
        },
        true,
    )
}

/// Analytic steady-state oscillation of the linear model under one source:
/// (i·2πf·I - Φ)⁻¹ b with b carrying γ·e^{i2πφ} at the source's ω-row.
/// |entry| is the steady amplitude of each state component.
pub fn steady_state_response(phi: &StateMatrix, src: &FOSource) -> Result<Vec<Complex64>> {
    let n = phi.node_count();
    let dim = 2 * n;
    if src.node >= n {
        return Err(Error::InvalidParameter(format!(
            "source node {} out of range (N = {n})",
            src.node
        )));
    }
    let omega_drive = TWO_PI * src.freq_hz;
    let mut a = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            a[[i, j]] = Complex64::new(-phi.phi()[[i, j]], 0.0);
        }
        a[[i, i]] += Complex64::new(0.0, omega_drive);
    }
    let mut b = Array1::<Complex64>::zeros(dim);
    b[n + src.node] = Complex64::from_polar(src.gamma, TWO_PI * src.phase);
    a.solve(&b)
        .map(|x| x.to_vec())
        .map_err(|_| Error::Resonant { freq: src.freq_hz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{
        build_state_matrix, generate_topology, Edge, GridModel, GridTopology, NodeParams,
        TopologyKind,
    };
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::{Eig, Solve};

    fn solved(topo: GridTopology, params: NodeParams) -> GridModel {
        let mut m = GridModel::new(topo, params).unwrap();
        m.solve_equilibrium().unwrap();
        m
    }

    fn small_grid(n: usize, edges: usize, k: f64) -> GridModel {
        let topo = generate_topology(TopologyKind::RewiredLattice, n, edges, 11, k).unwrap();
        solved(topo, NodeParams::balanced_default(n, 11))
    }

    fn scenario(sources: Vec<FOSource>, sigma: f64, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            sources,
            sigma,
            duration: 30.0,
            dt: 0.01,
            seed,
            model_kind: ModelKind::Linear,
            noise_mode: NoiseMode::Process,
            scale_forcing_by_inertia: false,
        }
    }

    fn src(node: usize, gamma: f64, freq_hz: f64, phase: f64) -> FOSource {
        FOSource { node, gamma, freq_hz, phase }
    }

    #[test]
    fn fo_signal_values() {
        assert_abs_diff_eq!(fo_signal(&src(0, 1.0, 0.5, 0.0), 0.0), 1.0);
        assert_abs_diff_eq!(fo_signal(&src(0, 1.0, 0.5, 0.0), 0.5), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fo_signal(&src(0, 2.0, 0.5, 0.5), 0.0), -2.0);
    }

    #[test]
    fn zero_input_stays_zero() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let traj = simulate_linear(&phi, &scenario(vec![], 0.0, 1)).unwrap();
        assert_eq!(traj.sample_count(), 3000);
        assert!(traj.omega.iter().all(|&x| x == 0.0));
        assert!(traj.delta.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linearity_in_gamma() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let base = simulate_linear(&phi, &scenario(vec![src(2, 1.0, 0.5, 0.0)], 0.0, 1)).unwrap();
        let scaled =
            simulate_linear(&phi, &scenario(vec![src(2, 3.0, 0.5, 0.0)], 0.0, 1)).unwrap();
        for (a, b) in base.omega.iter().zip(scaled.omega.iter()) {
            assert_abs_diff_eq!(3.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn superposition_of_sources() {
        let model = small_grid(8, 12, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let s1 = src(1, 1.0, 0.2, 0.0);
        let s2 = src(5, 0.7, 0.4, 0.25);
        let both = simulate_linear(&phi, &scenario(vec![s1, s2], 0.0, 1)).unwrap();
        let only1 = simulate_linear(&phi, &scenario(vec![s1], 0.0, 1)).unwrap();
        let only2 = simulate_linear(&phi, &scenario(vec![s2], 0.0, 1)).unwrap();
        for ((a, b), c) in both
            .omega
            .iter()
            .zip(only1.omega.iter())
            .zip(only2.omega.iter())
        {
            assert_abs_diff_eq!(*a, b + c, epsilon = 1e-10);
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let cfg = scenario(vec![src(2, 1.0, 0.5, 0.0)], 0.05, 42);
        let a = simulate_linear(&phi, &cfg).unwrap();
        let b = simulate_linear(&phi, &cfg).unwrap();
        assert_eq!(a.omega, b.omega);
        assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn measurement_noise_leaves_dynamics_clean() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let mut cfg = scenario(vec![], 0.3, 9);
        cfg.noise_mode = NoiseMode::Measurement;
        let traj = simulate_linear(&phi, &cfg).unwrap();
        // delta untouched, omega is pure recorded noise
        assert!(traj.delta.iter().all(|&x| x == 0.0));
        let var: f64 =
            traj.omega.iter().map(|x| x * x).sum::<f64>() / traj.omega.len() as f64;
        assert_abs_diff_eq!(var.sqrt(), 0.3, epsilon = 0.02);
    }

    /// Peak amplitude over the last 10 s of each node's ω series.
    fn tail_amplitudes(traj: &Trajectory) -> Vec<f64> {
        let t = traj.sample_count();
        let tail = t - (10.0 / traj.dt) as usize;
        (0..traj.node_count())
            .map(|i| {
                let row = traj.omega.row(i);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &x in row.iter().skip(tail) {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                (hi - lo) / 2.0
            })
            .collect()
    }

    #[test]
    fn steady_state_matches_simulation() {
        let model = small_grid(10, 14, 15.0);
        let phi = build_state_matrix(&model).unwrap();
        let s = src(3, 1.0, 0.5, 0.0);
        let traj = simulate_linear(&phi, &scenario(vec![s], 0.0, 1)).unwrap();
        let amps = tail_amplitudes(&traj);
        let resp = steady_state_response(&phi, &s).unwrap();
        let n = phi.node_count();
        for i in 0..n {
            let predicted = resp[n + i].norm();
            if predicted > 1e-4 {
                let rel = (amps[i] - predicted).abs() / predicted;
                assert!(
                    rel < 0.02,
                    "node {i}: simulated {:.6} vs analytic {predicted:.6} (rel {rel:.4})",
                    amps[i]
                );
            }
        }
    }

    #[test]
    fn scalar_transfer_function_limit() {
        // negligible coupling decouples the driven node: ω̇ ≈ -ω + cos(2πft)
        // with steady amplitude 1/sqrt(1 + (2πf)²)
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 1e-9 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        let model = solved(topo, params);
        let phi = build_state_matrix(&model).unwrap();
        let f = 0.5;
        let resp = steady_state_response(&phi, &src(0, 1.0, f, 0.0)).unwrap();
        let expected = 1.0 / (1.0 + (TWO_PI * f).powi(2)).sqrt();
        assert_abs_diff_eq!(resp[2].norm(), expected, epsilon = 1e-6);
    }

    #[test]
    fn high_frequency_rolloff() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let mut last = f64::INFINITY;
        for f in [5.0, 10.0, 20.0, 40.0] {
            let resp = steady_state_response(&phi, &src(2, 1.0, f, 0.0)).unwrap();
            let peak = resp.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            assert!(peak < last, "no roll-off at {f} Hz");
            last = peak;
        }
    }

    #[test]
    fn resonant_drive_amplifies() {
        // lightly damped 2-node grid: driving at the natural frequency beats
        // a far-detuned drive by well over 5x
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 2.0 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![0.05; 2], vec![1.0, -1.0]).unwrap();
        let model = solved(topo, params);
        let phi = build_state_matrix(&model).unwrap();
        let modes = crate::grid::modal_analysis(&phi).unwrap();
        let f_nat = modes
            .modes
            .iter()
            .map(|m| m.frequency_hz)
            .fold(0.0f64, f64::max);
        let on = steady_state_response(&phi, &src(0, 1.0, f_nat, 0.0)).unwrap();
        let off = steady_state_response(&phi, &src(0, 1.0, 5.0 * f_nat, 0.0)).unwrap();
        let peak = |r: &[Complex64]| r[2..].iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        assert!(peak(&on) > 5.0 * peak(&off));
    }

    /// Analytic solution of ẏ = Φy + b cos(2π(f t + φ)), y(0) = 0 via
    /// eigendecomposition: particular complex response plus matrix-exponential
    /// homogeneous correction. Independent of the RK4 path.
    fn analytic_forced_response(
        phi: &StateMatrix,
        s: &FOSource,
        times: &[f64],
    ) -> Vec<Vec<f64>> {
        let dim = 2 * phi.node_count();
        let (vals, vecs) = phi.phi().eig().unwrap();
        let x_part = {
            let resp = steady_state_response(phi, s).unwrap();
            Array1::from_vec(resp)
        };
        // homogeneous coefficient: expm(Φt)(-Re x_part) in the eigenbasis
        let y0: Array1<Complex64> = x_part.mapv(|c| Complex64::new(-c.re, 0.0));
        let coeff = {
            // solve V c = y0
            let mut v = Array2::<Complex64>::zeros((dim, dim));
            for i in 0..dim {
                for j in 0..dim {
                    v[[i, j]] = vecs[[i, j]];
                }
            }
            v.solve(&y0).unwrap()
        };
        times
            .iter()
            .map(|&t| {
                let drive = Complex64::from_polar(1.0, TWO_PI * s.freq_hz * t);
                (0..dim)
                    .map(|i| {
                        let mut h = Complex64::new(0.0, 0.0);
                        for k in 0..dim {
                            h += vecs[[i, k]] * coeff[k] * (vals[k] * t).exp();
                        }
                        (x_part[i] * drive).re + h.re
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn matches_matrix_exponential_solution() {
        let model = small_grid(4, 5, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let s = src(1, 1.0, 0.5, 0.0);
        let traj = simulate_linear(&phi, &scenario(vec![s], 0.0, 1)).unwrap();
        let n = phi.node_count();
        let probe_steps: Vec<usize> = (99..3000).step_by(300).collect();
        let times: Vec<f64> = probe_steps.iter().map(|&k| (k + 1) as f64 * 0.01).collect();
        let exact = analytic_forced_response(&phi, &s, &times);
        for (row, &k) in exact.iter().zip(&probe_steps) {
            for i in 0..n {
                assert_abs_diff_eq!(traj.delta[[i, k]], row[i], epsilon = 1e-4);
                assert_abs_diff_eq!(traj.omega[[i, k]], row[n + i], epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn nonlinear_fixed_point() {
        let model = small_grid(6, 9, 5.0);
        let mut cfg = scenario(vec![], 0.0, 1);
        cfg.model_kind = ModelKind::Nonlinear;
        let traj = simulate_nonlinear(&model, &cfg).unwrap();
        assert!(traj.omega.iter().all(|&x| x.abs() < 1e-9));
        assert!(traj.delta.iter().all(|&x| x.abs() < 1e-9));
    }

    #[test]
    fn nonlinear_agrees_with_linear_for_small_forcing() {
        let model = small_grid(6, 9, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let s = src(2, 0.05, 0.5, 0.0);
        let lin = simulate_linear(&phi, &scenario(vec![s], 0.0, 1)).unwrap();
        let mut cfg = scenario(vec![s], 0.0, 1);
        cfg.model_kind = ModelKind::Nonlinear;
        let nonlin = simulate_nonlinear(&model, &cfg).unwrap();
        for (a, b) in lin.omega.iter().zip(nonlin.omega.iter()) {
            assert!((a - b).abs() < 1e-2, "linearization mismatch: {a} vs {b}");
        }
    }

    #[test]
    fn driven_pendulum_loses_synchrony() {
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 2.0 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![1.0, -1.0]).unwrap();
        let model = solved(topo, params);
        let mut cfg = scenario(vec![src(0, 8.0, 0.05, 0.0)], 0.0, 1);
        cfg.model_kind = ModelKind::Nonlinear;
        match simulate_nonlinear(&model, &cfg) {
            Err(Error::LossOfSynchrony { .. }) => {}
            other => panic!("expected LossOfSynchrony, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let model = small_grid(4, 5, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let mut cfg = scenario(vec![src(1, 1.0, 0.5, 0.0)], 0.02, 5);
        cfg.duration = 2.0;
        let traj = simulate_linear(&phi, &cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        traj.save_omega_csv(f.path()).unwrap();
        let back = Trajectory::load_omega_csv(f.path()).unwrap();
        assert_eq!(back.node_count(), 4);
        assert_eq!(back.sample_count(), 200);
        for (a, b) in traj.omega.iter().zip(back.omega.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(back.dt, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_sources_rejected() {
        let model = small_grid(4, 5, 5.0);
        let phi = build_state_matrix(&model).unwrap();
        let cfg = scenario(vec![src(1, 1.0, 0.5, 0.0), src(1, 1.0, 0.2, 0.0)], 0.0, 1);
        assert!(matches!(
            simulate_linear(&phi, &cfg),
            Err(Error::InvalidParameter(_))
        ));
    }
}
