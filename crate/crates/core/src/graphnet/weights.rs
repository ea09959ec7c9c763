use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::digraph::Digraph;
use crate::error::{Error, Result};

/// Positive weights must exceed this.
pub const DEFAULT_KAPPA: f64 = 1e-9;

const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    ColumnStochastic,
    DoublyStochastic,
}

/// Dense mixing matrix `A` with `A[i][j] = a_ij`, the weight agent `i`
/// applies to what it receives from `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub entries: Array2<f64>,
    pub kind: WeightKind,
}

impl WeightMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[[i, j]]
    }

    /// Checks zero pattern, κ-positivity and the stochasticity of `kind`.
    pub fn validate(&self, g: &Digraph, kappa: f64) -> Result<()> {
        let n = g.num_nodes();
        if self.entries.dim() != (n, n) {
            return Err(Error::Shape(format!(
                "weight matrix {:?} for {n}-node graph",
                self.entries.dim()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let a = self.entries[[i, j]];
                if g.has_edge(j, i) {
                    if !(a > kappa) {
                        return Err(Error::Invariant(format!(
                            "a[{i}][{j}] = {a} not above κ = {kappa}"
                        )));
                    }
                } else if a != 0.0 {
                    return Err(Error::Invariant(format!(
                        "a[{i}][{j}] = {a} but {j} -> {i} is not an edge"
                    )));
                }
            }
        }
        for j in 0..n {
            let s: f64 = self.entries.column(j).sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Invariant(format!("column {j} sums to {s}")));
            }
        }
        if self.kind == WeightKind::DoublyStochastic {
            for i in 0..n {
                let s: f64 = self.entries.row(i).sum();
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::Invariant(format!("row {i} sums to {s}")));
                }
            }
        }
        Ok(())
    }
}

/// Push-sum weights: `a_ij = 1/d_j` for `j` an in-neighbor of `i`, where
/// `d_j` is the out-degree of `j` including its self-loop.
pub fn push_sum_weights(g: &Digraph) -> WeightMatrix {
    let n = g.num_nodes();
    let mut a = Array2::zeros((n, n));
    for j in 0..n {
        let w = 1.0 / g.out_degree(j) as f64;
        for i in g.out_neighbors(j) {
            a[[i, j]] = w;
        }
    }
    WeightMatrix {
        entries: a,
        kind: WeightKind::ColumnStochastic,
    }
}

/// Metropolis–Hastings weights on an undirected graph (symmetric edge set).
pub fn metropolis_hastings_weights(g: &Digraph) -> Result<WeightMatrix> {
    if !g.is_symmetric() {
        return Err(Error::Graph(
            "Metropolis–Hastings weights need a symmetric edge set".into(),
        ));
    }
    let n = g.num_nodes();
    let deg: Vec<usize> = (0..n).map(|i| g.out_degree(i) - 1).collect();
    let mut a = Array2::zeros((n, n));
    for (j, i) in g.edges() {
        a[[i, j]] = 1.0 / (1 + deg[i].max(deg[j])) as f64;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[[i, j]]).sum();
        a[[i, i]] = 1.0 - off;
    }
    Ok(WeightMatrix {
        entries: a,
        kind: WeightKind::DoublyStochastic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    #[default]
    PushSum,
    MetropolisHastings,
}

impl WeightRule {
    pub fn build(self, g: &Digraph) -> Result<WeightMatrix> {
        match self {
            WeightRule::PushSum => Ok(push_sum_weights(g)),
            WeightRule::MetropolisHastings => metropolis_hastings_weights(g),
        }
    }
}

/// One push-sum round on the scalar weights: returns `φ⁺ = Aφ` and the
/// normalized matrix `W = diag(φ⁺)⁻¹ A diag(φ)`.
pub fn normalize_push_sum(a: &WeightMatrix, phi: &Array1<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = a.size();
    let next = a.entries.dot(phi);
    if let Some(i) = next.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Invariant(format!(
            "φ[{i}] = {} is not positive",
            next[i]
        )));
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let aij = a.entries[[i, j]];
            if aij != 0.0 {
                w[[i, j]] = aij * phi[j] / next[i];
            }
        }
    }
    Ok((w, next))
}
