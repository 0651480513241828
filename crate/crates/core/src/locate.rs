//! Source localization: t-SNE embedding of inter-field distances, the
//! five-sigma Chebyshev outlier rule, and the Fourier-spectrum baseline.
//!
//! Per-node motif fields are compared pairwise (Frobenius distance), the
//! distance matrix is embedded into 2-D with exact t-SNE, and a node whose
//! average embedding distance exceeds V_p = mean + 5·std is reported as a
//! forced-oscillation source. Chebyshev's inequality bounds the exceedance
//! probability of that threshold at 4% for any distribution.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::mecf::MotifField;
use crate::sim::Trajectory;
use crate::{Error, Result};

/// Outlier rule multiplier: V_p = mean + K_SIGMA * std.
pub const K_SIGMA: f64 = 5.0;

// Pinned t-SNE schedule (standard exact algorithm).
const LEARNING_RATE: f64 = 200.0;
const EARLY_EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const INIT_STD: f64 = 1e-4;
const PERPLEXITY_TOL: f64 = 1e-5;
const PERPLEXITY_ITERS: usize = 50;
const P_FLOOR: f64 = 1e-12;
/// Per-coordinate step clamp. With few points the affinities are O(1) and a
/// raw 200x gradient step multiplies inter-point gaps every iteration; the
/// clamp bounds single-step travel without affecting settled layouts.
const MAX_STEP: f64 = 5.0;

fn default_perplexity() -> f64 {
    30.0
}

fn default_iterations() -> usize {
    1000
}

fn default_seed() -> u64 {
    42
}

fn default_true() -> bool {
    true
}

/// Default leader/runner-up ratio below which a spectral peak is ambiguous.
pub const DEFAULT_DOMINANCE_RATIO: f64 = 2.0;

/// Envelope magnitude below which a local maximum is not counted as a peak.
const PEAK_FLOOR: f64 = 0.2;

/// Embedding hyperparameters exposed to configuration files. The gradient
/// schedule itself (learning rate, exaggeration, momentum) is pinned.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TsneParams {
    #[serde(default = "default_perplexity")]
    pub perplexity: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: default_perplexity(),
            iterations: default_iterations(),
            seed: default_seed(),
        }
    }
}

/// Locator settings: embedding hyperparameters plus the choice of whether
/// average distances are measured on normalized or raw t-SNE coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocatorConfig {
    #[serde(default)]
    pub tsne: TsneParams,
    /// Measure L on [0,1]-normalized coordinates (default) instead of the
    /// raw gradient-descent output. The outlier set rarely differs; the
    /// reported magnitudes do.
    #[serde(default = "default_true")]
    pub normalize_before_distances: bool,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        Self {
            tsne: TsneParams::default(),
            normalize_before_distances: true,
        }
    }
}

/// A 2-D embedding: normalized points plus the raw coordinates they came
/// from, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Embedding2D {
    /// Per-axis min-max normalized to [0, 1].
    pub points: Vec<[f64; 2]>,
    /// Raw gradient-descent output before normalization.
    #[serde(skip)]
    pub raw_points: Vec<[f64; 2]>,
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Embedding2D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV export `node,x,y` of the normalized coordinates.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node,x,y")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(w, "{i},{},{}", p[0], p[1])?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Localization verdict for one embedding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocationReport {
    /// Average embedding distance per node.
    pub avg_distances: Vec<f64>,
    /// V_p = mean + 5·population-std of the averages.
    pub threshold: f64,
    /// Nodes with avg distance above the threshold, ascending.
    pub outliers: Vec<usize>,
    pub seed: u64,
    pub perplexity: f64,
    pub iterations: usize,
    /// Whether distances were measured on normalized coordinates.
    pub normalized_coordinates: bool,
    /// Standard-deviation convention used for the threshold.
    pub std_convention: String,
    #[serde(skip)]
    pub distance_matrix: Array2<f64>,
}

impl LocationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// One-sided magnitude spectra for every node, jointly scaled to [0, 1].
#[derive(Debug, Clone)]
pub struct SpectrumSet {
    /// Bin centers in Hz; resolution 1/duration.
    pub frequencies: Vec<f64>,
    /// N x (T/2 + 1).
    pub magnitudes: Array2<f64>,
}

impl SpectrumSet {
    pub fn node_count(&self) -> usize {
        self.magnitudes.nrows()
    }

    /// CSV export `frequency,node_0,...,node_{N-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.node_count();
        let header: Vec<String> = (0..n).map(|i| format!("node_{i}")).collect();
        writeln!(w, "frequency,{}", header.join(","))?;
        for (k, &f) in self.frequencies.iter().enumerate() {
            let row: Vec<String> = (0..n)
                .map(|i| self.magnitudes[[i, k]].to_string())
                .collect();
            writeln!(w, "{f},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// One spectral peak and the nodes competing for it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeakVerdict {
    pub freq_hz: f64,
    pub bin: usize,
    pub leader: usize,
    pub leader_magnitude: f64,
    pub runner_up: Option<usize>,
    pub runner_up_magnitude: f64,
    pub ambiguous: bool,
}

/// Outcome of the Fourier baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierVerdict {
    /// Distinct leader nodes over all peaks, ascending.
    pub candidates: Vec<usize>,
    pub peaks: Vec<PeakVerdict>,
    /// True when any peak's runner-up is within the dominance ratio.
    pub ambiguous: bool,
    pub dominance_ratio: f64,
}

impl FourierVerdict {
    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Pairwise Frobenius distances between per-node fields via one Gram-matrix
/// product: ||F_i - F_j||² = G_ii + G_jj - 2 G_ij with G = X Xᵀ over the
/// flattened fields. Cancellation for near-identical fields bottoms out
/// around sqrt(eps)·||F||, far below anything the embedding resolves.
pub fn field_distance_matrix(fields: &[MotifField]) -> Result<Array2<f64>> {
    let n = fields.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 fields, got {n}"
        )));
    }
    let shape = fields[0].values().raw_dim();
    let params = *fields[0].params();
    for (i, f) in fields.iter().enumerate().skip(1) {
        if f.values().raw_dim() != shape || *f.params() != params {
            return Err(Error::ShapeMismatch(format!(
                "field {i} has shape {:?}, expected {:?} (or differing params)",
                f.values().shape(),
                shape
            )));
        }
    }
    let len = shape[0] * shape[1];
    let mut x = Array2::<f64>::zeros((n, len));
    for (i, f) in fields.iter().enumerate() {
        for (dst, &v) in x.row_mut(i).iter_mut().zip(f.values().iter()) {
            *dst = v;
        }
    }
    let gram = x.dot(&x.t());
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let sq = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
            let v = sq.max(0.0).sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(d)
}

fn check_distance_matrix(distances: &Array2<f64>) -> Result<usize> {
    let n = distances.nrows();
    if distances.ncols() != n {
        return Err(Error::ShapeMismatch(format!(
            "distance matrix is {}x{}",
            n,
            distances.ncols()
        )));
    }
    for i in 0..n {
        if distances[[i, i]] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "distance matrix diagonal entry {i} is {}",
                distances[[i, i]]
            )));
        }
        for j in 0..i {
            let v = distances[[i, j]];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "invalid distance [{i},{j}] = {v}"
                )));
            }
            if (v - distances[[j, i]]).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::InvalidParameter(format!(
                    "distance matrix not symmetric at [{i},{j}]"
                )));
            }
        }
    }
    Ok(n)
}

/// Conditional Gaussian affinities for point `i`, with the bandwidth tuned
/// by binary search so the distribution's perplexity matches the target.
fn calibrated_row(d2: &[f64], i: usize, target_entropy: f64, out: &mut [f64]) {
    let n = d2.len();
    let mut beta = 1.0;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    for _ in 0..PERPLEXITY_ITERS {
        let mut sum = 0.0;
        for j in 0..n {
            out[j] = if j == i { 0.0 } else { (-beta * d2[j]).exp() };
            sum += out[j];
        }
        if sum <= 0.0 {
            // all mass collapsed; soften and retry
            beta_max = beta;
            beta = if beta_min.is_finite() {
                (beta + beta_min) / 2.0
            } else {
                beta / 2.0
            };
            continue;
        }
        let mut entropy = 0.0;
        for j in 0..n {
            out[j] /= sum;
            if out[j] > 0.0 {
                entropy -= out[j] * out[j].ln();
            }
        }
        let diff = entropy - target_entropy;
        if diff.abs() < PERPLEXITY_TOL {
            return;
        }
        if diff > 0.0 {
            beta_min = beta;
            beta = if beta_max.is_finite() {
                (beta + beta_max) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_finite() {
                (beta + beta_min) / 2.0
            } else {
                beta / 2.0
            };
        }
    }
}

/// Per-axis min-max rescale to [0, 1]; a constant axis maps to all-zeros.
pub fn normalize_embedding(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = points.to_vec();
    for axis in 0..2 {
        let min = points.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let max = points
            .iter()
            .map(|p| p[axis])
            .fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        for p in &mut out {
            p[axis] = if span > 0.0 { (p[axis] - min) / span } else { 0.0 };
        }
    }
    out
}

/// Exact t-SNE on a precomputed distance matrix. Deterministic for a fixed
/// seed; coordinates are normalized to [0, 1] per axis (raw output kept
/// alongside).
pub fn tsne_embed(
    distances: &Array2<f64>,
    perplexity: f64,
    iterations: usize,
    seed: u64,
) -> Result<Embedding2D> {
    let n = check_distance_matrix(distances)?;
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "t-SNE needs at least 3 points, got {n}"
        )));
    }
    if !(perplexity >= 1.0 && perplexity < n as f64) {
        return Err(Error::InvalidParameter(format!(
            "perplexity {perplexity} infeasible for {n} points (need 1 <= perplexity < N)"
        )));
    }

    let finish = |raw: Vec<[f64; 2]>| Embedding2D {
        points: normalize_embedding(&raw),
        raw_points: raw,
        perplexity,
        iterations,
        seed,
    };

    // No structure to preserve: every point is identical, so they coincide.
    if distances.iter().all(|&v| v == 0.0) {
        return Ok(finish(vec![[0.0, 0.0]; n]));
    }

    // Symmetrized joint affinities from perplexity-calibrated conditionals.
    let target_entropy = perplexity.ln();
    let mut p = Array2::<f64>::zeros((n, n));
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d2: Vec<f64> = (0..n).map(|j| distances[[i, j]].powi(2)).collect();
        calibrated_row(&d2, i, target_entropy, &mut row);
        for j in 0..n {
            p[[i, j]] = row[j];
        }
    }
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = ((p[[i, j]] + p[[j, i]]) / denom).max(P_FLOOR);
            p[[i, j]] = v;
            p[[j, i]] = v;
        }
        p[[i, i]] = 0.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut grad = vec![[0.0f64; 2]; n];
    let mut qnum = Array2::<f64>::zeros((n, n));

    for iter in 0..iterations {
        let exaggeration = if iter < EXAGGERATION_ITERS {
            EARLY_EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };

        // Student-t kernel numerators and their sum.
        let mut z = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let num = 1.0 / (1.0 + dx * dx + dy * dy);
                qnum[[i, j]] = num;
                qnum[[j, i]] = num;
                z += 2.0 * num;
            }
        }
        let z = z.max(P_FLOOR);

        for g in &mut grad {
            *g = [0.0, 0.0];
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let num = qnum[[i, j]];
                let q = (num / z).max(P_FLOOR);
                let coeff = 4.0 * (exaggeration * p[[i, j]] - q) * num;
                grad[i][0] += coeff * (y[i][0] - y[j][0]);
                grad[i][1] += coeff * (y[i][1] - y[j][1]);
            }
        }

        // adaptive per-coordinate gains, as in the reference implementation
        let mut mean = [0.0f64; 2];
        for i in 0..n {
            for axis in 0..2 {
                let g = grad[i][axis];
                gains[i][axis] = if (g > 0.0) != (velocity[i][axis] > 0.0) {
                    gains[i][axis] + 0.2
                } else {
                    (gains[i][axis] * 0.8).max(0.01)
                };
                velocity[i][axis] = (momentum * velocity[i][axis]
                    - LEARNING_RATE * gains[i][axis] * g)
                    .clamp(-MAX_STEP, MAX_STEP);
                y[i][axis] += velocity[i][axis];
                mean[axis] += y[i][axis];
            }
        }
        for i in 0..n {
            for axis in 0..2 {
                y[i][axis] -= mean[axis] / n as f64;
            }
        }
    }

    Ok(finish(y))
}

/// Euclidean distance matrix of the embedding plus the per-node averages
/// L̃_i = (1/(N-1)) Σ_j L_ij.
pub fn average_distances(points: &[[f64; 2]]) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 points, got {n}"
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((points[i][0] - points[j][0]).powi(2)
                + (points[i][1] - points[j][1]).powi(2))
            .sqrt();
            l[[i, j]] = d;
            l[[j, i]] = d;
        }
    }
    let avg: Vec<f64> = (0..n)
        .map(|i| l.row(i).sum() / (n - 1) as f64)
        .collect();
    Ok((avg, l))
}

/// V_p = mean + 5·population-std of the average distances.
pub fn chebyshev_threshold(avg: &[f64]) -> Result<f64> {
    if avg.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 averages, got {}",
            avg.len()
        )));
    }
    let n = avg.len() as f64;
    let mean = avg.iter().sum::<f64>() / n;
    let var = avg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + K_SIGMA * var.sqrt())
}

/// Nodes whose average distance strictly exceeds the threshold. An empty
/// result means no source was found.
pub fn locate(avg: &[f64], v_p: f64) -> Vec<usize> {
    avg.iter()
        .enumerate()
        .filter(|(_, &v)| v > v_p)
        .map(|(i, _)| i)
        .collect()
}

/// Full localization pass on a precomputed field-distance matrix.
pub fn locate_sources(
    distances: &Array2<f64>,
    cfg: &LocatorConfig,
    seed: u64,
) -> Result<(LocationReport, Embedding2D)> {
    let emb = tsne_embed(distances, cfg.tsne.perplexity, cfg.tsne.iterations, seed)?;
    let coords = if cfg.normalize_before_distances {
        &emb.points
    } else {
        &emb.raw_points
    };
    let (avg, l) = average_distances(coords)?;
    let v_p = chebyshev_threshold(&avg)?;
    let outliers = locate(&avg, v_p);
    let report = LocationReport {
        avg_distances: avg,
        threshold: v_p,
        outliers,
        seed,
        perplexity: cfg.tsne.perplexity,
        iterations: cfg.tsne.iterations,
        normalized_coordinates: cfg.normalize_before_distances,
        std_convention: "population".into(),
        distance_matrix: l,
    };
    Ok((report, emb))
}

/// One-sided magnitude spectra of every node's angular-speed series, mean
/// removed, jointly rescaled so the global maximum is 1.
pub fn fourier_spectrum(traj: &Trajectory) -> Result<SpectrumSet> {
    let n = traj.node_count();
    let t = traj.sample_count();
    if t < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: t });
    }
    let bins = t / 2 + 1;
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(t);
    let mut magnitudes = Array2::<f64>::zeros((n, bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    for i in 0..n {
        let series = traj.omega_series(i);
        let mean = series.iter().sum::<f64>() / t as f64;
        for (b, &v) in buf.iter_mut().zip(&series) {
            *b = Complex64::new(v - mean, 0.0);
        }
        fft.process(&mut buf);
        for k in 0..bins {
            magnitudes[[i, k]] = buf[k].norm();
        }
    }
    let max = magnitudes.iter().fold(0.0f64, |m, &v| m.max(v));
    if max > 0.0 {
        magnitudes.mapv_inplace(|v| v / max);
    }
    let df = 1.0 / (t as f64 * traj.dt);
    let frequencies = (0..bins).map(|k| k as f64 * df).collect();
    Ok(SpectrumSet {
        frequencies,
        magnitudes,
    })
}

/// Peak-based Fourier localization. For each spectral peak of the across-node
/// envelope, the node with the largest magnitude is a candidate; the peak is
/// ambiguous when the runner-up is within `dominance_ratio` of the leader.
pub fn fourier_locate(spectra: &SpectrumSet, dominance_ratio: f64) -> FourierVerdict {
    let n = spectra.node_count();
    let bins = spectra.frequencies.len();
    let envelope: Vec<f64> = (0..bins)
        .map(|k| (0..n).fold(0.0f64, |m, i| m.max(spectra.magnitudes[[i, k]])))
        .collect();
    let floor = PEAK_FLOOR;

    let mut peaks = Vec::new();
    let mut candidates = Vec::new();
    let mut ambiguous = false;
    for k in 1..bins.saturating_sub(1) {
        if envelope[k] < floor || envelope[k] <= envelope[k - 1] || envelope[k] < envelope[k + 1]
        {
            continue;
        }
        let mut leader = 0;
        let mut runner: Option<usize> = None;
        for i in 1..n {
            if spectra.magnitudes[[i, k]] > spectra.magnitudes[[leader, k]] {
                runner = Some(leader);
                leader = i;
            } else if runner.is_none_or(|r| spectra.magnitudes[[i, k]] > spectra.magnitudes[[r, k]])
            {
                runner = Some(i);
            }
        }
        let leader_magnitude = spectra.magnitudes[[leader, k]];
        let runner_up_magnitude = runner.map_or(0.0, |r| spectra.magnitudes[[r, k]]);
        let peak_ambiguous = leader_magnitude < dominance_ratio * runner_up_magnitude;
        ambiguous |= peak_ambiguous;
        if !candidates.contains(&leader) {
            candidates.push(leader);
        }
        peaks.push(PeakVerdict {
            freq_hz: spectra.frequencies[k],
            bin: k,
            leader,
            leader_magnitude,
            runner_up: runner,
            runner_up_magnitude,
            ambiguous: peak_ambiguous,
        });
    }
    candidates.sort_unstable();
    FourierVerdict {
        candidates,
        peaks,
        ambiguous,
        dominance_ratio,
    }
}
