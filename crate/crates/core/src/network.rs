//! Undirected weighted communication graphs and their Laplacians.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Laplacian `L = D - W` with its two spectral quantities of interest.
#[derive(Debug, Clone)]
pub struct LaplacianView {
    pub matrix: DMatrix<f64>,
    /// Second-smallest eigenvalue (algebraic connectivity).
    pub lambda2: f64,
    /// Eigenvalue of largest magnitude.
    pub lambda_max: f64,
}

/// A connected undirected graph with symmetric positive edge weights.
#[derive(Debug, Clone)]
pub struct Topology {
    neighbors: Vec<Vec<(usize, f64)>>,
    laplacian: LaplacianView,
}

impl Topology {
    /// Cycle graph `0 - 1 - ... - (n-1) - 0` with uniform weight `w`.
    pub fn ring(n: usize, w: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::Structure(format!("a ring needs at least 3 nodes, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, w)).collect();
        Self::from_edges(n, &edges)
    }

    /// Builds a graph from `(i, j, w_ij)` triples. Each undirected edge is listed once.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::Structure(format!("a network needs at least 2 nodes, got {n}")));
        }
        let mut w = DMatrix::<f64>::zeros(n, n);
        for &(i, j, weight) in edges {
            if i >= n || j >= n {
                return Err(Error::Structure(format!("edge ({i}, {j}) references a node outside 0..{n}")));
            }
            if i == j {
                return Err(Error::Structure(format!("self-loop on node {i}")));
            }
            if !(weight > 0.0) || !weight.is_finite() {
                return Err(Error::Structure(format!("edge ({i}, {j}) weight {weight} must be positive")));
            }
            if w[(i, j)] != 0.0 {
                return Err(Error::Structure(format!("edge ({i}, {j}) listed twice")));
            }
            w[(i, j)] = weight;
            w[(j, i)] = weight;
        }

        let neighbors: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| (0..n).filter(|&j| w[(i, j)] > 0.0).map(|j| (j, w[(i, j)])).collect())
            .collect();
        if !is_connected(&neighbors) {
            return Err(Error::Structure("communication graph is not connected".into()));
        }

        let mut l = -w;
        for i in 0..n {
            let degree: f64 = neighbors[i].iter().map(|(_, wij)| wij).sum();
            l[(i, i)] = degree;
        }
        let laplacian = spectrum(l);
        Ok(Self { neighbors, laplacian })
    }

    pub fn nodes(&self) -> usize {
        self.neighbors.len()
    }

    /// `(j, w_ij)` for every neighbor `j` of node `i`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.laplacian.matrix[(i, i)]
    }

    pub fn laplacian(&self) -> &LaplacianView {
        &self.laplacian
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

fn is_connected(neighbors: &[Vec<(usize, f64)>]) -> bool {
    let mut seen = vec![false; neighbors.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &(j, _) in &neighbors[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn spectrum(matrix: DMatrix<f64>) -> LaplacianView {
    let mut eig: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let lambda2 = eig[1];
    let lambda_max = eig.iter().copied().fold(0.0_f64, |a, v| a.max(v.abs()));
    LaplacianView {
        matrix,
        lambda2,
        lambda_max,
    }
}

/// `A = I - beta L`. Doubly stochastic for every `beta`; entry-wise nonnegative
/// only while `beta * d_ii <= 1`, which is reported as a warning.
pub fn mixing_matrix(topo: &Topology, beta: f64) -> DMatrix<f64> {
    let n = topo.nodes();
    let a = DMatrix::<f64>::identity(n, n) - &topo.laplacian.matrix * beta;
    if let Some(i) = (0..n).find(|&i| a[(i, i)] < 0.0) {
        log::warn!(
            "mixing matrix with beta = {beta} has negative diagonal entry {} at node {i}",
            a[(i, i)]
        );
    }
    a
}

/// Config form of a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySpec {
    Ring {
        n: usize,
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    Edges {
        n: usize,
        /// `[i, j, w_ij]` triples, each undirected edge once.
        edges: Vec<(usize, usize, f64)>,
    },
}

fn unit_weight() -> f64 {
    1.0
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology> {
        match self {
            TopologySpec::Ring { n, weight } => Topology::ring(*n, *weight),
            TopologySpec::Edges { n, edges } => Topology::from_edges(*n, edges),
        }
        .map_err(|e| Error::config("topology", e.to_string()))
    }

    pub fn nodes(&self) -> usize {
        match self {
            TopologySpec::Ring { n, .. } | TopologySpec::Edges { n, .. } => *n,
        }
    }
}
