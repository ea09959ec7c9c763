//! Problem families: quadratic fidelity plus elastic-net codes, with a
//! family-specific dictionary set and dictionary regularizer.

mod io;
mod sets;

pub use io::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use sets::{prox_elastic_net, ElasticNet, FeasibleSet};

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sigma_max_sq;

/// Absolute slack used when checking feasibility of iterates.
pub const FEASIBILITY_TOL: f64 = 1e-10;

pub type Dictionary = Array2<f64>;
pub type CodeMatrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Column-norm ball on `D`, free codes, no dictionary penalty.
    ElasticNetDl,
    /// Row-norm ball on `D`, free codes, elastic net on `D` as well.
    SparseSvd,
    /// Non-negative `D` with row-norm ball, non-negative codes.
    Nnsc,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ElasticNetDl => "elastic-net-dl",
            Family::SparseSvd => "sparse-svd",
            Family::Nnsc => "nnsc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// ℓ₁ weight on the codes.
    pub lambda: f64,
    /// Squared-ℓ₂ weight on the codes; must be positive.
    pub mu: f64,
    /// ℓ₁ weight on the dictionary (sparse SVD only).
    #[serde(default)]
    pub lambda_d: f64,
    /// Squared-ℓ₂ weight on the dictionary (sparse SVD only).
    #[serde(default)]
    pub mu_d: f64,
    /// Radius of the dictionary norm ball.
    pub alpha: f64,
}

impl Params {
    pub fn elastic_net(lambda: f64, mu: f64, alpha: f64) -> Self {
        Self {
            lambda,
            mu,
            lambda_d: 0.0,
            mu_d: 0.0,
            alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub family: Family,
    pub shards: Vec<Array2<f64>>,
    pub atoms: usize,
    pub params: Params,
}

impl ProblemInstance {
    pub fn new(family: Family, shards: Vec<Array2<f64>>, atoms: usize, params: Params) -> Result<Self> {
        let first = shards
            .first()
            .ok_or_else(|| Error::InvalidParameter("at least one shard is required".into()))?;
        let m = first.nrows();
        if m == 0 {
            return Err(Error::Shape("shards need at least one row".into()));
        }
        for (i, s) in shards.iter().enumerate() {
            if s.nrows() != m {
                return Err(Error::Shape(format!(
                    "shard {i} has {} rows, expected {m}",
                    s.nrows()
                )));
            }
            if s.ncols() == 0 {
                return Err(Error::Shape(format!("shard {i} has no columns")));
            }
        }
        if atoms == 0 {
            return Err(Error::InvalidParameter("atom count must be ≥ 1".into()));
        }
        let p = &params;
        if !(p.lambda >= 0.0 && p.mu > 0.0 && p.alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need λ ≥ 0, μ > 0, α > 0 (got λ={}, μ={}, α={})",
                p.lambda, p.mu, p.alpha
            )));
        }
        if !(p.lambda_d >= 0.0 && p.mu_d >= 0.0) {
            return Err(Error::InvalidParameter("dictionary penalties must be ≥ 0".into()));
        }
        if family != Family::SparseSvd && (p.lambda_d != 0.0 || p.mu_d != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dictionary penalties only apply to sparse SVD, not {}",
                family.name()
            )));
        }
        Ok(Self {
            family,
            shards,
            atoms,
            params,
        })
    }

    pub fn agents(&self) -> usize {
        self.shards.len()
    }

    pub fn dim(&self) -> usize {
        self.shards[0].nrows()
    }

    pub fn dict_shape(&self) -> (usize, usize) {
        (self.dim(), self.atoms)
    }

    pub fn dict_set(&self) -> FeasibleSet {
        let a = self.params.alpha;
        match self.family {
            Family::ElasticNetDl => FeasibleSet::ColumnBall(a),
            Family::SparseSvd => FeasibleSet::RowBall(a),
            Family::Nnsc => FeasibleSet::NonnegRowBall(a),
        }
    }

    pub fn code_set(&self) -> FeasibleSet {
        match self.family {
            Family::Nnsc => FeasibleSet::Nonneg,
            _ => FeasibleSet::Free,
        }
    }

    /// `g_i`: elastic net on the codes.
    pub fn code_penalty(&self) -> ElasticNet {
        ElasticNet::new(self.params.lambda, self.params.mu)
    }

    /// `G`: elastic net on the dictionary (zero outside sparse SVD).
    pub fn dict_penalty(&self) -> ElasticNet {
        ElasticNet::new(self.params.lambda_d, self.params.mu_d)
    }

    /// Euclidean projection onto the dictionary set.
    pub fn project_dictionary(&self, z: &Array2<f64>) -> Dictionary {
        let mut d = z.clone();
        self.dict_set().project(&mut d);
        d
    }

    pub fn check_dictionary(&self, d: &Dictionary) -> Result<()> {
        if d.dim() != self.dict_shape() {
            return Err(Error::Shape(format!(
                "dictionary {:?}, expected {:?}",
                d.dim(),
                self.dict_shape()
            )));
        }
        if !self.dict_set().contains(d, FEASIBILITY_TOL) {
            return Err(Error::Infeasible("dictionary outside its set".into()));
        }
        Ok(())
    }

    fn check_codes(&self, x: &[CodeMatrix]) -> Result<()> {
        if x.len() != self.agents() {
            return Err(Error::Shape(format!(
                "{} code matrices for {} shards",
                x.len(),
                self.agents()
            )));
        }
        for (i, (xi, s)) in x.iter().zip(&self.shards).enumerate() {
            if xi.dim() != (self.atoms, s.ncols()) {
                return Err(Error::Shape(format!(
                    "code {i} is {:?}, expected {:?}",
                    xi.dim(),
                    (self.atoms, s.ncols())
                )));
            }
            if !self.code_set().contains(xi, FEASIBILITY_TOL) {
                return Err(Error::Infeasible(format!("code {i} outside its set")));
            }
        }
        Ok(())
    }

    /// `U(D, X) = Σ_i [f_i(D, X_i) + g_i(X_i)] + G(D)`, per-shard terms summed
    /// in index order.
    pub fn objective(&self, d: &Dictionary, x: &[CodeMatrix]) -> Result<f64> {
        self.check_dictionary(d)?;
        self.check_codes(x)?;
        let g = self.code_penalty();
        let mut total = 0.0;
        for (s, xi) in self.shards.iter().zip(x) {
            total += fidelity(d, xi, s) + g.value(xi);
        }
        Ok(total + self.dict_penalty().value(d))
    }

    /// `L_{∇X}(D) = σ_max(D)²`.
    pub fn lipschitz_x(&self, d: &Dictionary) -> f64 {
        sigma_max_sq(d.view())
    }
}

/// `½‖S − D X‖²_F`.
pub fn fidelity(d: &Array2<f64>, x: &Array2<f64>, s: &Array2<f64>) -> f64 {
    let r = d.dot(x) - s;
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// `∇_D ½‖S − DX‖² = (DX − S)Xᵀ`, evaluated as `D(XXᵀ) − SXᵀ`.
pub fn grad_d(d: &Array2<f64>, x: &Array2<f64>, s: &Array2<f64>) -> Array2<f64> {
    check_product(d, x, s);
    let gram = x.dot(&x.t());
    let cross = s.dot(&x.t());
    grad_d_from_moments(d, &gram, &cross)
}

/// `D·gram − cross`, the dictionary gradient from the code moments
/// `gram = XXᵀ` and `cross = SXᵀ`.
pub fn grad_d_from_moments(d: &Array2<f64>, gram: &Array2<f64>, cross: &Array2<f64>) -> Array2<f64> {
    let mut g = d.dot(gram);
    Zip::from(&mut g).and(cross).for_each(|a, &c| *a -= c);
    g
}

/// `∇_X ½‖S − DX‖² = Dᵀ(DX − S)`.
pub fn grad_x(d: &Array2<f64>, x: &Array2<f64>, s: &Array2<f64>) -> Array2<f64> {
    check_product(d, x, s);
    let r = d.dot(x) - s;
    d.t().dot(&r)
}

fn check_product(d: &Array2<f64>, x: &Array2<f64>, s: &Array2<f64>) {
    assert!(
        d.ncols() == x.nrows() && d.nrows() == s.nrows() && x.ncols() == s.ncols(),
        "shape mismatch: D {:?}, X {:?}, S {:?}",
        d.dim(),
        x.dim(),
        s.dim()
    );
}
