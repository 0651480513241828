//! Physical node parameters and the synchronous equilibrium of the
//! second-order phase-oscillator grid
//!
//!   alpha_i dω_i/dt + beta_i ω_i = P_i - Σ_j K_ij sin(δ_i - δ_j)
//!
//! The equilibrium δ* solves the power-flow balance with ω = 0, gauge-fixed
//! by δ*_0 = 0, via Newton's method from a flat start.

use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GridTopology;
use crate::{Error, Result};

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_TOL: f64 = 1e-10;

/// Per-node inertia, damping, and injected power.
#[derive(Debug, Clone)]
pub struct NodeParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub power: Vec<f64>,
}

impl NodeParams {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        let n = alpha.len();
        if beta.len() != n || power.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "alpha/beta/power lengths differ: {n}/{}/{}",
                beta.len(),
                power.len()
            )));
        }
        if let Some(i) = alpha.iter().position(|&a| a <= 0.0 || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha[{i}] = {} must be positive",
                alpha[i]
            )));
        }
        if let Some(i) = beta.iter().position(|&b| b <= 0.0 || !b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta[{i}] = {} must be positive",
                beta[i]
            )));
        }
        let balance: f64 = power.iter().sum();
        if balance.abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "power does not balance: sum P_i = {balance:e}"
            )));
        }
        Ok(Self { alpha, beta, power })
    }

    /// Conventional defaults: alpha = beta = 1 everywhere, P = ±1 on a
    /// seeded balanced half/half split (one node gets P = 0 when n is odd).
    pub fn balanced_default(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut rng);
        let mut power = vec![0.0; n];
        let half = n / 2;
        for &v in &nodes[..half] {
            power[v] = 1.0;
        }
        for &v in &nodes[n - half..] {
            power[v] = -1.0;
        }
        Self {
            alpha: vec![1.0; n],
            beta: vec![1.0; n],
            power,
        }
    }

    /// Load from CSV `i,alpha,beta,P`; nodes absent from the file keep the
    /// supplied defaults.
    pub fn load_csv<P: AsRef<Path>>(path: P, defaults: NodeParams) -> Result<Self> {
        let path = path.as_ref();
        let path_str = path.display().to_string();
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut params = defaults;
        let n = params.alpha.len();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            // allow a header row
            if lineno == 0 && trimmed.starts_with('i') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: path_str.clone(),
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "expected 4 fields `i,alpha,beta,P`, got {}",
                    fields.len()
                )));
            }
            let i: usize = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("bad node index: {e}")))?;
            if i >= n {
                return Err(parse_err(format!("node index {i} out of range (N = {n})")));
            }
            params.alpha[i] = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("bad alpha: {e}")))?;
            params.beta[i] = fields[2]
                .parse()
                .map_err(|e| parse_err(format!("bad beta: {e}")))?;
            params.power[i] = fields[3]
                .parse()
                .map_err(|e| parse_err(format!("bad P: {e}")))?;
        }
        Self::new(params.alpha, params.beta, params.power)
    }
}

/// Topology plus node parameters, with the solved equilibrium cached.
#[derive(Debug, Clone)]
pub struct GridModel {
    topology: GridTopology,
    params: NodeParams,
    equilibrium: Option<Vec<f64>>,
}

impl GridModel {
    pub fn new(topology: GridTopology, params: NodeParams) -> Result<Self> {
        if params.alpha.len() != topology.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "params for {} nodes, topology has {}",
                params.alpha.len(),
                topology.node_count()
            )));
        }
        Ok(Self {
            topology,
            params,
            equilibrium: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn params(&self) -> &NodeParams {
        &self.params
    }

    pub fn equilibrium(&self) -> Option<&[f64]> {
        self.equilibrium.as_deref()
    }

    /// Power-flow residual P_i - Σ_j K_ij sin(δ_i - δ_j) at a phase vector.
    pub fn residual(&self, delta: &[f64]) -> Vec<f64> {
        let n = self.node_count();
        let mut r = self.params.power.clone();
        for i in 0..n {
            for &(j, k) in self.topology.neighbors(i) {
                r[i] -= k * (delta[i] - delta[j]).sin();
            }
        }
        r
    }

    /// Solve the synchronous equilibrium by Newton's method (flat start,
    /// gauge δ_0 = 0). Fails when no synchronous state exists.
    pub fn solve_equilibrium(&mut self) -> Result<&[f64]> {
        let n = self.node_count();
        let mut delta = vec![0.0; n];
        for iter in 0..NEWTON_MAX_ITER {
            let r = self.residual(&delta);
            let max_res = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if !max_res.is_finite() {
                return Err(Error::NoSynchronousState(format!(
                    "residual diverged at iteration {iter}"
                )));
            }
            if max_res < NEWTON_TOL {
                self.equilibrium = Some(delta);
                return Ok(self.equilibrium.as_deref().unwrap());
            }
            // Jacobian of the residual in the reduced variables δ_1..δ_{N-1}:
            // dr_i/dδ_j = K_ij cos(δ_i - δ_j), dr_i/dδ_i = -Σ_j K_ij cos(..).
            let m = n - 1;
            let mut jac = Array2::<f64>::zeros((m, m));
            for i in 1..n {
                let mut diag = 0.0;
                for &(j, k) in self.topology.neighbors(i) {
                    let c = k * (delta[i] - delta[j]).cos();
                    diag -= c;
                    if j >= 1 {
                        jac[[i - 1, j - 1]] += c;
                    }
                }
                jac[[i - 1, i - 1]] += diag;
            }
            let rhs = Array1::from_iter(r[1..].iter().map(|x| -x));
            let step = jac.solve(&rhs).map_err(|e| {
                Error::NoSynchronousState(format!("singular Jacobian at iteration {iter}: {e}"))
            })?;
            for i in 1..n {
                delta[i] += step[i - 1];
            }
        }
        Err(Error::NoSynchronousState(format!(
            "no convergence within {NEWTON_MAX_ITER} iterations (grid overloaded?)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_topology, Edge, TopologyKind};
    use approx::assert_abs_diff_eq;

    fn two_node(p: f64, k: f64) -> GridModel {
        let topo = GridTopology::new(2, vec![Edge { i: 0, j: 1, coupling: k }]).unwrap();
        let params = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![p, -p]).unwrap();
        GridModel::new(topo, params).unwrap()
    }

    #[test]
    fn two_node_closed_form() {
        let mut model = two_node(1.0, 2.0);
        let delta = model.solve_equilibrium().unwrap();
        // sin(δ0 - δ1) = P/K = 0.5
        assert_abs_diff_eq!(delta[0] - delta[1], 0.5f64.asin(), epsilon = 1e-9);
        assert_eq!(delta[0], 0.0, "gauge δ*_0 = 0");
    }

    #[test]
    fn zero_power_gives_flat_equilibrium() {
        let topo = generate_topology(TopologyKind::RewiredLattice, 12, 16, 1, 3.0).unwrap();
        let params = NodeParams::new(vec![1.0; 12], vec![1.0; 12], vec![0.0; 12]).unwrap();
        let mut model = GridModel::new(topo, params).unwrap();
        let delta = model.solve_equilibrium().unwrap();
        assert!(delta.iter().all(|&d| d.abs() < 1e-12));
    }

    #[test]
    fn overloaded_grid_has_no_synchronous_state() {
        let mut model = two_node(3.0, 2.0);
        assert!(matches!(
            model.solve_equilibrium(),
            Err(Error::NoSynchronousState(_))
        ));
    }

    #[test]
    fn residual_below_tolerance_on_desk_grid() {
        let topo = generate_topology(TopologyKind::RewiredLattice, 120, 165, 7, 15.0).unwrap();
        let params = NodeParams::balanced_default(120, 7);
        let mut model = GridModel::new(topo, params).unwrap();
        model.solve_equilibrium().unwrap();
        let r = model.residual(model.equilibrium().unwrap());
        assert!(r.iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn residual_is_gauge_invariant() {
        let mut model = two_node(1.0, 2.0);
        model.solve_equilibrium().unwrap();
        let delta = model.equilibrium().unwrap().to_vec();
        let shifted: Vec<f64> = delta.iter().map(|d| d + 1.234).collect();
        let r0 = model.residual(&delta);
        let r1 = model.residual(&shifted);
        for (a, b) in r0.iter().zip(&r1) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn balanced_default_sums_to_zero() {
        for n in [7usize, 120] {
            let p = NodeParams::balanced_default(n, 42);
            let sum: f64 = p.power.iter().sum();
            assert_eq!(sum, 0.0);
            assert_eq!(p.power.iter().filter(|&&x| x > 0.0).count(), n / 2);
        }
    }

    #[test]
    fn unbalanced_power_rejected() {
        assert!(matches!(
            NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![1.0, -0.5]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn params_csv_roundtrip() {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "i,alpha,beta,P").unwrap();
        writeln!(f, "0,2.0,0.5,1.0").unwrap();
        writeln!(f, "1,1.0,1.0,-1.0").unwrap();
        let defaults = NodeParams::new(vec![1.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        let p = NodeParams::load_csv(f.path(), defaults).unwrap();
        assert_eq!(p.alpha, vec![2.0, 1.0]);
        assert_eq!(p.beta, vec![0.5, 1.0]);
        assert_eq!(p.power, vec![1.0, -1.0]);
    }
}
