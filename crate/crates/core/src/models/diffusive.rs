use super::graph::AdjacencyMatrix;
use crate::trajectory::{ParamDomain, SystemFamily};

/// Network of cubically stabilized nodes on a fixed graph:
///
/// ```text
/// x_n' = -x_n - p_n x_n^3 + sum_m A_nm (x_n - x_m) + [n = 1] (x_n - i)
/// o    = i - x_1,      x_n(0) = 0,      p_n > 0
/// ```
///
/// Signs are exactly as above; the coupling term pushes nodes apart and the
/// cubic damping bounds the trajectories.
#[derive(Debug, Clone)]
pub struct DiffusiveNetwork {
    name: String,
    adjacency: AdjacencyMatrix,
    neighbors: Vec<Vec<usize>>,
    /// `-1 + deg(n) + [n = 1]`, the linear part of the diagonal.
    linear_diag: Vec<f64>,
    domain: ParamDomain,
}

pub fn make_diffusive(adjacency: AdjacencyMatrix) -> DiffusiveNetwork {
    let n = adjacency.n();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| adjacency.neighbors(i).collect()).collect();
    let linear_diag = neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| -1.0 + nb.len() as f64 + if i == 0 { 1.0 } else { 0.0 })
        .collect();
    DiffusiveNetwork {
        name: format!("diffusive-{n}"),
        adjacency,
        neighbors,
        linear_diag,
        domain: ParamDomain::all_positive(n),
    }
}

impl DiffusiveNetwork {
    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn n_nodes(&self) -> usize {
        self.adjacency.n()
    }
}

impl SystemFamily for DiffusiveNetwork {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_dim(&self) -> usize {
        self.adjacency.n()
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn initial_state(&self, _p: &[f64], x0: &mut [f64]) {
        x0.fill(0.0);
    }

    fn rhs(&self, _t: f64, x: &[f64], input: f64, p: &[f64], dx: &mut [f64]) {
        for (i, nb) in self.neighbors.iter().enumerate() {
            let xi = x[i];
            let coupling: f64 = nb.iter().map(|&j| x[j]).sum();
            dx[i] = self.linear_diag[i] * xi - p[i] * xi * xi * xi - coupling;
        }
        dx[0] -= input;
    }

    fn output(&self, x: &[f64], input: f64, _p: &[f64]) -> f64 {
        input - x[0]
    }

    fn output_gradient(&self, _x: &[f64], _input: f64, _p: &[f64], d_state: &mut [f64], d_param: &mut [f64]) {
        d_state.fill(0.0);
        d_state[0] = -1.0;
        d_param.fill(0.0);
    }

    fn jacobians(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], jac_state: &mut [f64], jac_param: &mut [f64]) {
        let n = self.state_dim();
        jac_state.fill(0.0);
        jac_param.fill(0.0);
        for (i, nb) in self.neighbors.iter().enumerate() {
            jac_state[i * n + i] = self.linear_diag[i] - 3.0 * p[i] * x[i] * x[i];
            for &j in nb {
                jac_state[i * n + j] = -1.0;
            }
            jac_param[i * n + i] = -x[i] * x[i] * x[i];
        }
    }

    fn sensitivity_rhs(&self, _t: f64, x: &[f64], _input: f64, p: &[f64], s: &[f64], ds: &mut [f64]) {
        let m = self.state_dim();
        for (i, nb) in self.neighbors.iter().enumerate() {
            let diag = self.linear_diag[i] - 3.0 * p[i] * x[i] * x[i];
            let row = &mut ds[i * m..(i + 1) * m];
            for (d, &sv) in row.iter_mut().zip(&s[i * m..(i + 1) * m]) {
                *d = diag * sv;
            }
            for &j in nb {
                for (d, &sv) in row.iter_mut().zip(&s[j * m..(j + 1) * m]) {
                    *d -= sv;
                }
            }
            row[i] -= x[i] * x[i] * x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::barabasi_albert;
    use crate::trajectory::{integrate, output_trajectory, TimeGrid};

    #[test]
    fn origin_is_fixed_without_input() {
        let sys = make_diffusive(barabasi_albert(10, 2, 3).unwrap());
        let grid = TimeGrid::new(5.0, 0.01).unwrap();
        let p: Vec<f64> = (0..10).map(|i| 0.3 + i as f64).collect();
        let x = integrate(&sys, &p, &|_t: f64| 0.0, &grid).unwrap();
        assert!(x.as_slice().iter().all(|&v| v == 0.0));
        let o = output_trajectory(&sys, &p, &|_t: f64| 0.0, &grid).unwrap();
        assert!(o.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_node_reduces_to_cubic_drift() {
        // x' = -x - p x^3 + (x - i) = -p x^3 - i
        let sys = make_diffusive(AdjacencyMatrix::empty(1));
        let mut dx = [0.0];
        sys.rhs(0.0, &[0.5], 1.0, &[2.0], &mut dx);
        assert!((dx[0] - (-2.0 * 0.125 - 1.0)).abs() < 1e-15);

        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let x = integrate(&sys, &[1.0], &|_t: f64| 1.0, &grid).unwrap();
        let xs = x.component(0);
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
        let o = output_trajectory(&sys, &[1.0], &|_t: f64| 1.0, &grid).unwrap();
        assert_eq!(o.point(0)[0], 1.0);
    }

    #[test]
    fn sparse_sensitivity_matches_dense_default() {
        let sys = make_diffusive(barabasi_albert(6, 2, 8).unwrap());
        let n = 6;
        let x: Vec<f64> = (0..n).map(|i| 0.2 * i as f64 - 0.4).collect();
        let p: Vec<f64> = (0..n).map(|i| 0.5 + 0.1 * i as f64).collect();
        let s: Vec<f64> = (0..n * n).map(|k| ((k * 7) % 11) as f64 * 0.1 - 0.5).collect();
        let mut sparse = vec![0.0; n * n];
        sys.sensitivity_rhs(0.0, &x, 0.3, &p, &s, &mut sparse);

        let mut jx = vec![0.0; n * n];
        let mut jp = vec![0.0; n * n];
        sys.jacobians(0.0, &x, 0.3, &p, &mut jx, &mut jp);
        for i in 0..n {
            for j in 0..n {
                let dense: f64 = jp[i * n + j] + (0..n).map(|k| jx[i * n + k] * s[k * n + j]).sum::<f64>();
                assert!((dense - sparse[i * n + j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn relabeling_non_input_nodes_preserves_output() {
        let adj = barabasi_albert(7, 2, 4).unwrap();
        let perm = [0usize, 3, 6, 1, 5, 2, 4];
        let relabeled = AdjacencyMatrix::from_edges(7, adj.edges().map(|(i, j)| (perm[i], perm[j]))).unwrap();
        let p: Vec<f64> = (0..7).map(|i| 0.2 + 0.3 * i as f64).collect();
        let mut q = vec![0.0; 7];
        for i in 0..7 {
            q[perm[i]] = p[i];
        }
        let grid = TimeGrid::new(3.0, 0.01).unwrap();
        let input = |t: f64| (2.0 * t).sin() + 0.3;
        let a = output_trajectory(&make_diffusive(adj), &p, &input, &grid).unwrap();
        let b = output_trajectory(&make_diffusive(relabeled), &q, &input, &grid).unwrap();
        for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((u - v).abs() < 1e-12);
        }
    }
}
