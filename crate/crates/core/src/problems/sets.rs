use ndarray::{Array2, ArrayViewMut1, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::linalg::soft_threshold;

/// Slack on sign constraints when checking membership.
const SIGN_TOL: f64 = 1e-12;

/// Closed convex sets used for dictionaries and codes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    Free,
    Nonneg,
    /// Every column has Euclidean norm at most the radius.
    ColumnBall(f64),
    /// Every row has Euclidean norm at most the radius.
    RowBall(f64),
    /// Non-negative entries and every row norm at most the radius.
    NonnegRowBall(f64),
}

fn shrink_into_ball(mut v: ArrayViewMut1<'_, f64>, radius: f64) {
    let norm = v.dot(&v).sqrt();
    if norm > radius {
        let s = radius / norm;
        v.mapv_inplace(|x| x * s);
        // rounding can leave the norm a few ulps above the radius; nudge in
        // so a second projection is a bitwise no-op
        while v.dot(&v).sqrt() > radius {
            v.mapv_inplace(|x| x * (1.0 - f64::EPSILON));
        }
    }
}

fn clamp_nonneg(z: &mut Array2<f64>) {
    z.mapv_inplace(|x| if x < 0.0 { 0.0 } else { x });
}

impl FeasibleSet {
    /// In-place Euclidean projection.
    pub fn project(&self, z: &mut Array2<f64>) {
        match *self {
            FeasibleSet::Free => {}
            FeasibleSet::Nonneg => clamp_nonneg(z),
            FeasibleSet::ColumnBall(r) => {
                for col in z.axis_iter_mut(Axis(1)) {
                    shrink_into_ball(col, r);
                }
            }
            FeasibleSet::RowBall(r) => {
                for row in z.axis_iter_mut(Axis(0)) {
                    shrink_into_ball(row, r);
                }
            }
            FeasibleSet::NonnegRowBall(r) => {
                clamp_nonneg(z);
                for row in z.axis_iter_mut(Axis(0)) {
                    shrink_into_ball(row, r);
                }
            }
        }
    }

    pub fn projected(&self, z: &Array2<f64>) -> Array2<f64> {
        let mut out = z.clone();
        self.project(&mut out);
        out
    }

    pub fn contains(&self, z: &Array2<f64>, tol: f64) -> bool {
        let nonneg = || z.iter().all(|&v| v >= -SIGN_TOL);
        let cols = |r: f64| z.axis_iter(Axis(1)).all(|c| c.dot(&c).sqrt() <= r + tol);
        let rows = |r: f64| z.axis_iter(Axis(0)).all(|c| c.dot(&c).sqrt() <= r + tol);
        let finite = z.iter().all(|v| v.is_finite());
        finite
            && match *self {
                FeasibleSet::Free => true,
                FeasibleSet::Nonneg => nonneg(),
                FeasibleSet::ColumnBall(r) => cols(r),
                FeasibleSet::RowBall(r) => rows(r),
                FeasibleSet::NonnegRowBall(r) => nonneg() && rows(r),
            }
    }

    pub fn is_nonneg(&self) -> bool {
        matches!(self, FeasibleSet::Nonneg | FeasibleSet::NonnegRowBall(_))
    }
}

/// `l1·‖·‖₁,₁ + (l2/2)·‖·‖²_F`, applied entrywise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticNet {
    pub l1: f64,
    pub l2: f64,
}

impl ElasticNet {
    pub const ZERO: ElasticNet = ElasticNet { l1: 0.0, l2: 0.0 };

    pub fn new(l1: f64, l2: f64) -> Self {
        Self { l1, l2 }
    }

    pub fn is_zero(&self) -> bool {
        self.l1 == 0.0 && self.l2 == 0.0
    }

    pub fn value(&self, x: &Array2<f64>) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let (mut a, mut q) = (0.0, 0.0);
        for &v in x {
            a += v.abs();
            q += v * v;
        }
        self.l1 * a + 0.5 * self.l2 * q
    }

    /// Scalar prox with step `t`: argmin ½(y − v)² + t·(l1|y| + l2/2·y²),
    /// restricted to y ≥ 0 when `nonneg`.
    #[inline]
    pub fn prox_scalar(&self, v: f64, t: f64, nonneg: bool) -> f64 {
        let th = t * self.l1;
        let shrunk = if nonneg {
            if v > th {
                v - th
            } else {
                0.0
            }
        } else {
            soft_threshold(v, th)
        };
        shrunk / (1.0 + t * self.l2)
    }

    pub fn prox(&self, v: &Array2<f64>, t: f64, nonneg: bool) -> Array2<f64> {
        v.mapv(|x| self.prox_scalar(x, t, nonneg))
    }

    pub fn prox_inplace(&self, v: &mut Array2<f64>, t: f64, nonneg: bool) {
        Zip::from(v).for_each(|x| *x = self.prox_scalar(*x, t, nonneg));
    }
}

/// Entrywise prox of `λ_eff‖·‖₁ + (μ_eff/2)‖·‖²` (plus the orthant when
/// `nonneg`): `T_{λ_eff}(V) / (1 + μ_eff)`.
pub fn prox_elastic_net(v: &Array2<f64>, lambda_eff: f64, mu_eff: f64, nonneg: bool) -> Array2<f64> {
    ElasticNet::new(lambda_eff, mu_eff).prox(v, 1.0, nonneg)
}
