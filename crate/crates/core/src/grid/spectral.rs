//! Linearized state matrix and modal structure.
//!
//! Around the equilibrium δ*, deviations y = [δ-block; ω-block] follow
//! ẏ = Φ y with
//!
//!   Φ = [[ 0,        I        ],
//!        [ -H⁻¹ L,   -H⁻¹ D  ]]
//!
//! where H = diag(alpha), D = diag(beta) and L is the weighted Laplacian at
//! the equilibrium: L_ij = -K_ij cos(δ*_i - δ*_j), L_ii = Σ_j K_ij cos(..).
//! With this (positive-semidefinite) Laplacian the minus sign on H⁻¹L is
//! what makes the linearization of the swing dynamics stable.

use ndarray::Array2;
use ndarray_linalg::Eig;
use num_complex::Complex64;

use super::GridModel;
use crate::{Error, Result};

/// Dense 2N×2N linearization plus a sparse factored form of the lower blocks
/// for fast drift evaluation in the integrator.
#[derive(Debug, Clone)]
pub struct StateMatrix {
    phi: Array2<f64>,
    n: usize,
    inv_alpha: Vec<f64>,
    /// beta_i / alpha_i
    damping_over_inertia: Vec<f64>,
    /// Laplacian diagonal Σ_j K_ij cos(δ*_i - δ*_j).
    lap_diag: Vec<f64>,
    /// Off-diagonal Laplacian entries as (i, j, K_ij cos(δ*_i - δ*_j)), i < j.
    lap_off: Vec<(usize, usize, f64)>,
}

impl StateMatrix {
    pub fn phi(&self) -> &Array2<f64> {
        &self.phi
    }

    /// Number of grid nodes N (the matrix is 2N×2N).
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn inv_alpha(&self) -> &[f64] {
        &self.inv_alpha
    }

    /// Drift ẏ = Φ y evaluated through the sparse blocks; `out` may not
    /// alias `state`.
    pub fn drift(&self, state: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(state.len(), 2 * n);
        debug_assert_eq!(out.len(), 2 * n);
        let (delta, omega) = state.split_at(n);
        for i in 0..n {
            out[i] = omega[i];
            out[n + i] = -self.inv_alpha[i] * self.lap_diag[i] * delta[i]
                - self.damping_over_inertia[i] * omega[i];
        }
        for &(i, j, c) in &self.lap_off {
            // L_ij = -c, so -H⁻¹L contributes +c/alpha off the diagonal
            out[n + i] += self.inv_alpha[i] * c * delta[j];
            out[n + j] += self.inv_alpha[j] * c * delta[i];
        }
    }
}

/// Assemble Φ from a model with a solved equilibrium.
pub fn build_state_matrix(model: &GridModel) -> Result<StateMatrix> {
    let delta = model.equilibrium().ok_or(Error::EquilibriumUnset)?;
    let n = model.node_count();
    let params = model.params();
    let inv_alpha: Vec<f64> = params.alpha.iter().map(|a| 1.0 / a).collect();
    let damping_over_inertia: Vec<f64> = params
        .beta
        .iter()
        .zip(&params.alpha)
        .map(|(b, a)| b / a)
        .collect();

    let mut lap_diag = vec![0.0; n];
    let mut lap_off = Vec::with_capacity(model.topology().edges().len());
    for e in model.topology().edges() {
        let c = e.coupling * (delta[e.i] - delta[e.j]).cos();
        lap_diag[e.i] += c;
        lap_diag[e.j] += c;
        lap_off.push((e.i, e.j, c));
    }

    let mut phi = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        phi[[i, n + i]] = 1.0;
        phi[[n + i, i]] = -inv_alpha[i] * lap_diag[i];
        phi[[n + i, n + i]] = -damping_over_inertia[i];
    }
    for &(i, j, c) in &lap_off {
        phi[[n + i, j]] = inv_alpha[i] * c;
        phi[[n + j, i]] = inv_alpha[j] * c;
    }

    Ok(StateMatrix {
        phi,
        n,
        inv_alpha,
        damping_over_inertia,
        lap_diag,
        lap_off,
    })
}

/// One eigenmode of the linearized grid.
#[derive(Debug, Clone)]
pub struct Mode {
    pub eigenvalue: Complex64,
    /// |Im λ| / 2π in Hz.
    pub frequency_hz: f64,
    /// -Re λ / |λ|; 0 for the structural zero mode.
    pub damping_ratio: f64,
    /// Unit-norm mode shape, length 2N, ordered [δ-block; ω-block].
    pub shape: Vec<Complex64>,
    /// argmax |shape| restricted to the ω-block.
    pub dominant_node: usize,
}

impl Mode {
    pub fn is_oscillatory(&self) -> bool {
        self.eigenvalue.im.abs() > 1e-9
    }
}

/// All 2N eigenmodes, sorted by ascending natural frequency.
#[derive(Debug, Clone)]
pub struct ModalStructure {
    pub modes: Vec<Mode>,
}

/// Full eigendecomposition of Φ.
pub fn modal_analysis(phi: &StateMatrix) -> Result<ModalStructure> {
    let (eigvals, eigvecs) = phi
        .phi()
        .eig()
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e}")))?;
    let n = phi.node_count();
    let mut modes: Vec<Mode> = Vec::with_capacity(2 * n);
    for (k, &lambda) in eigvals.iter().enumerate() {
        let mut shape: Vec<Complex64> = eigvecs.column(k).to_vec();
        let norm = shape.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for c in &mut shape {
                *c /= norm;
            }
        }
        let modulus = lambda.norm();
        let damping_ratio = if modulus > 1e-9 { -lambda.re / modulus } else { 0.0 };
        let dominant_node = (0..n)
            .max_by(|&a, &b| {
                shape[n + a]
                    .norm()
                    .partial_cmp(&shape[n + b].norm())
                    .unwrap()
            })
            .unwrap();
        modes.push(Mode {
            eigenvalue: lambda,
            frequency_hz: lambda.im.abs() / (2.0 * std::f64::consts::PI),
            damping_ratio,
            shape,
            dominant_node,
        });
    }
    modes.sort_by(|a, b| a.frequency_hz.partial_cmp(&b.frequency_hz).unwrap());
    Ok(ModalStructure { modes })
}

/// Natural frequency of the least-damped oscillatory mode whose dominant
/// node differs from `exclude_node`, and that dominant node. Driving a
/// source at `exclude_node` with this frequency excites a geographically
/// distinct resonator.
pub fn pick_resonant_frequency(
    modes: &ModalStructure,
    exclude_node: usize,
) -> Result<(f64, usize)> {
    modes
        .modes
        .iter()
        .filter(|m| m.is_oscillatory() && m.dominant_node != exclude_node)
        .min_by(|a, b| a.damping_ratio.partial_cmp(&b.damping_ratio).unwrap())
        .map(|m| (m.frequency_hz, m.dominant_node))
        .ok_or_else(|| {
            Error::NoQualifyingMode(format!(
                "no underdamped mode with dominant node != {exclude_node}"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_topology, Edge, GridTopology, NodeParams, TopologyKind};
    use approx::assert_abs_diff_eq;

    fn solved_model(topo: GridTopology, params: NodeParams) -> GridModel {
        let mut model = GridModel::new(topo, params).unwrap();
        model.solve_equilibrium().unwrap();
        model
    }

    fn desk_model() -> GridModel {
        let topo = generate_topology(TopologyKind::RewiredLattice, 120, 165, 7, 15.0).unwrap();
        solved_model(topo, NodeParams::balanced_default(120, 7))
    }

    #[test]
    fn two_node_flat_hand_assembly() {
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 5.0 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        let model = solved_model(topo, params);
        let sm = build_state_matrix(&model).unwrap();
        let phi = sm.phi();
        // lower-left -H⁻¹L = [[-5, 5], [5, -5]], lower-right -I
        assert_abs_diff_eq!(phi[[2, 0]], -5.0);
        assert_abs_diff_eq!(phi[[2, 1]], 5.0);
        assert_abs_diff_eq!(phi[[3, 0]], 5.0);
        assert_abs_diff_eq!(phi[[3, 1]], -5.0);
        assert_abs_diff_eq!(phi[[2, 2]], -1.0);
        assert_abs_diff_eq!(phi[[3, 3]], -1.0);
    }

    #[test]
    fn upper_blocks_are_zero_and_identity() {
        let model = desk_model();
        let sm = build_state_matrix(&model).unwrap();
        let n = sm.node_count();
        let phi = sm.phi();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(phi[[i, j]], 0.0);
                assert_eq!(phi[[i, n + j]], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let model = desk_model();
        let sm = build_state_matrix(&model).unwrap();
        let n = sm.node_count();
        let phi = sm.phi();
        for i in 0..n {
            let row_sum: f64 = (0..n).map(|j| phi[[n + i, j]]).sum();
            assert!(row_sum.abs() < 1e-12, "row {i} sums to {row_sum:e}");
        }
    }

    #[test]
    fn equilibrium_required() {
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 5.0 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        let model = GridModel::new(topo, params).unwrap();
        assert!(matches!(build_state_matrix(&model), Err(Error::EquilibriumUnset)));
    }

    #[test]
    fn sparse_drift_matches_dense_matvec() {
        let model = desk_model();
        let sm = build_state_matrix(&model).unwrap();
        let n = sm.node_count();
        let state: Vec<f64> = (0..2 * n).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let mut out = vec![0.0; 2 * n];
        sm.drift(&state, &mut out);
        let dense = sm.phi().dot(&ndarray::Array1::from_vec(state));
        for i in 0..2 * n {
            assert_abs_diff_eq!(out[i], dense[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn three_node_path_spectrum_stable_with_one_zero_pair() {
        let topo = GridTopology::new(
            3,
            vec![
                Edge { i: 0, j: 1, coupling: 1.0 },
                Edge { i: 1, j: 2, coupling: 1.0 },
            ],
        )
        .unwrap();
        let params = NodeParams::new(vec![1.0; 3], vec![1.0; 3], vec![0.0; 3]).unwrap();
        let model = solved_model(topo, params);
        let sm = build_state_matrix(&model).unwrap();
        let modes = modal_analysis(&sm).unwrap();
        let zeros = modes
            .modes
            .iter()
            .filter(|m| m.eigenvalue.norm() < 1e-9)
            .count();
        assert_eq!(zeros, 1, "structural Laplacian null-space mode");
        for m in &modes.modes {
            assert!(m.eigenvalue.re <= 1e-9, "unstable eigenvalue {}", m.eigenvalue);
        }
    }

    #[test]
    fn two_node_natural_frequency_closed_form() {
        // P = (1, -1), K = 2 => cos(Δδ) = cos(π/6); tiny damping so the
        // oscillatory frequency is sqrt(2 K cos Δ)/2π ≈ 0.296 Hz
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 2.0 }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1e-9; 2], vec![1.0, -1.0]).unwrap();
        let model = solved_model(topo, params);
        let modes = modal_analysis(&build_state_matrix(&model).unwrap()).unwrap();
        let osc = modes.modes.iter().filter(|m| m.is_oscillatory()).count();
        assert_eq!(osc, 2);
        let f = modes
            .modes
            .iter()
            .map(|m| m.frequency_hz)
            .fold(0.0f64, f64::max);
        let expected = (2.0 * 2.0 * (std::f64::consts::PI / 6.0).cos()).sqrt()
            / (2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(f, expected, epsilon = 1e-6);
        assert_abs_diff_eq!(f, 0.296, epsilon = 1e-3);
    }

    #[test]
    fn desk_grid_modes_conjugate_paired_and_stable() {
        let model = desk_model();
        let modes = modal_analysis(&build_state_matrix(&model).unwrap()).unwrap();
        assert_eq!(modes.modes.len(), 240);
        for m in &modes.modes {
            assert!(m.eigenvalue.re <= 1e-9);
            assert!(m.frequency_hz >= 0.0);
            assert!(m.frequency_hz < 5.0, "frequency {} out of range", m.frequency_hz);
            let norm: f64 = m.shape.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
            if m.is_oscillatory() {
                let conj = m.eigenvalue.conj();
                assert!(
                    modes
                        .modes
                        .iter()
                        .any(|o| (o.eigenvalue - conj).norm() < 1e-8),
                    "missing conjugate of {}",
                    m.eigenvalue
                );
            }
        }
        // sorted by ascending natural frequency
        for w in modes.modes.windows(2) {
            assert!(w[0].frequency_hz <= w[1].frequency_hz);
        }
    }

    #[test]
    fn pick_resonant_on_two_node_grid() {
        // lighter node 1 carries the larger ω-component of the swing mode
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: 2.0 }]).unwrap();
        let params = NodeParams::new(vec![2.0, 0.5], vec![0.2; 2], vec![1.0, -1.0]).unwrap();
        let model = solved_model(topo, params);
        let modes = modal_analysis(&build_state_matrix(&model).unwrap()).unwrap();
        let (f, resonator) = pick_resonant_frequency(&modes, 0).unwrap();
        assert!(f > 0.0);
        assert_eq!(resonator, 1);
        // excluding the dominant node of every oscillatory mode
        assert!(matches!(
            pick_resonant_frequency(&modes, resonator),
            Err(Error::NoQualifyingMode(_))
        ));
    }

    #[test]
    fn desk_grid_resonant_pick_is_distinct_node() {
        let model = desk_model();
        let modes = modal_analysis(&build_state_matrix(&model).unwrap()).unwrap();
        let leaf = (0..120)
            .find(|&v| model.topology().degree(v) == 1)
            .unwrap_or(0);
        let (f, resonator) = pick_resonant_frequency(&modes, leaf).unwrap();
        assert!(f > 0.0 && f < 5.0);
        assert_ne!(resonator, leaf);
    }
}
