use ndarray::{Array2, Zip};

use super::inner::{inner_projected_subgradient, CompositeProblem, InnerSolverConfig};
use super::{SurrogateChoice, SurrogateKind};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, sigma_max_sq};
use crate::problems::{grad_d, ElasticNet, FeasibleSet, ProblemInstance};

/// Result of one local subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemOutcome {
    pub value: Array2<f64>,
    /// Inner iterations spent (0 for closed forms).
    pub inner_iters: usize,
    /// False when the inner solver stopped at its iteration cap.
    pub converged: bool,
}

impl SubproblemOutcome {
    fn closed_form(value: Array2<f64>) -> Self {
        Self {
            value,
            inner_iters: 0,
            converged: true,
        }
    }
}

fn check_finite(what: &'static str, a: &Array2<f64>) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite {what}")))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_finite() && tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("proximal weight {tau} must be > 0")))
    }
}

/// Entrywise-separable sets for which prox-then-project equals the joint prox.
fn sign_preserving(set: FeasibleSet) -> bool {
    matches!(
        set,
        FeasibleSet::Free
            | FeasibleSet::Nonneg
            | FeasibleSet::ColumnBall(_)
            | FeasibleSet::RowBall(_)
            | FeasibleSet::NonnegRowBall(_)
    )
}

/// `argmin_{D∈𝒟} ⟨c, D − D₀⟩ + (τ/2)‖D − D₀‖² + G(D)`.
///
/// Folds the quadratic part of `G` into the proximal weight and its ℓ₁ part
/// into a soft-threshold ahead of the projection.
pub fn linearized_dictionary_step(
    p: &ProblemInstance,
    d0: &Array2<f64>,
    c: &Array2<f64>,
    tau: f64,
) -> Result<Array2<f64>> {
    check_tau(tau)?;
    let set = p.dict_set();
    let pen = p.dict_penalty();
    if !sign_preserving(set) {
        return Err(Error::InvalidParameter(
            "closed-form dictionary step needs a sign-preserving set".into(),
        ));
    }
    let mut v = d0.clone();
    if pen.is_zero() {
        let s = 1.0 / tau;
        Zip::from(&mut v).and(c).for_each(|d, &g| *d -= s * g);
    } else {
        let denom = tau + pen.l2;
        let th = pen.l1 / denom;
        let nonneg = set.is_nonneg();
        Zip::from(&mut v).and(c).for_each(|d, &g| {
            let w = (tau * *d - g) / denom;
            *d = ElasticNet::new(th, 0.0).prox_scalar(w, 1.0, nonneg);
        });
    }
    set.project(&mut v);
    Ok(v)
}

/// Local dictionary subproblem of agent `i`:
/// `min_{D∈𝒟} f̃_i(D; D_i, X_i) + ⟨I·Θ_i − ∇f_i(D_i, X_i), D − D_i⟩ + G(D)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_d_subproblem(
    p: &ProblemInstance,
    i: usize,
    d_i: &Array2<f64>,
    x_i: &Array2<f64>,
    theta_i: &Array2<f64>,
    tau_d: f64,
    choice: SurrogateChoice,
    cfg: &InnerSolverConfig,
) -> Result<SubproblemOutcome> {
    check_tau(tau_d)?;
    check_finite("dictionary", d_i)?;
    check_finite("codes", x_i)?;
    check_finite("tracking variable", theta_i)?;
    if d_i.dim() != p.dict_shape() || theta_i.dim() != p.dict_shape() {
        return Err(Error::Shape("dictionary or tracking shape mismatch".into()));
    }
    let agents = p.agents() as f64;
    let s_i = &p.shards[i];
    match choice.f_kind {
        SurrogateKind::Linearized => {
            let c = theta_i * agents;
            linearized_dictionary_step(p, d_i, &c, tau_d).map(SubproblemOutcome::closed_form)
        }
        SurrogateKind::Plain => {
            let gram = x_i.dot(&x_i.t());
            let cross = s_i.dot(&x_i.t());
            // constant linear term: I·Θ_i − ∇f_i(D_i) − τ·D_i
            let mut lin = theta_i * agents - grad_d(d_i, x_i, s_i);
            Zip::from(&mut lin).and(d_i).for_each(|l, &d| *l -= tau_d * d);
            let grad = move |d: &Array2<f64>| {
                let mut g = d.dot(&gram);
                Zip::from(&mut g)
                    .and(d)
                    .and(&cross)
                    .and(&lin)
                    .for_each(|g, &d, &c, &l| *g += tau_d * d - c + l);
                g
            };
            let problem = CompositeProblem {
                grad: &grad,
                lipschitz: sigma_max_sq(x_i.view()) + tau_d,
                penalty: p.dict_penalty(),
                set: p.dict_set(),
            };
            let out = inner_projected_subgradient(&problem, d_i, cfg)?;
            Ok(SubproblemOutcome {
                value: out.solution,
                inner_iters: out.iters,
                converged: out.converged,
            })
        }
    }
}

/// Local code subproblem of agent `i`: `min_{X∈𝒳_i} h̃_i(X; U, X_i) + g_i(X)`.
#[allow(clippy::too_many_arguments)]
pub fn solve_x_subproblem(
    p: &ProblemInstance,
    i: usize,
    u: &Array2<f64>,
    x_i: &Array2<f64>,
    tau_x: f64,
    choice: SurrogateChoice,
    cfg: &InnerSolverConfig,
) -> Result<SubproblemOutcome> {
    check_tau(tau_x)?;
    check_finite("dictionary", u)?;
    check_finite("codes", x_i)?;
    let s_i = &p.shards[i];
    if u.dim() != p.dict_shape() || x_i.dim() != (p.atoms, s_i.ncols()) {
        return Err(Error::Shape("dictionary or code shape mismatch".into()));
    }
    let set = p.code_set();
    let pen = p.code_penalty();
    let utu = u.t().dot(u);
    let uts = u.t().dot(s_i);
    match choice.h_kind {
        SurrogateKind::Linearized => {
            let mut v = utu.dot(x_i);
            let s = 1.0 / tau_x;
            Zip::from(&mut v)
                .and(x_i)
                .and(&uts)
                .for_each(|v, &x, &c| *v = x - s * (*v - c));
            pen.prox_inplace(&mut v, s, set.is_nonneg());
            set.project(&mut v);
            Ok(SubproblemOutcome::closed_form(v))
        }
        SurrogateKind::Plain => {
            let anchor = x_i.clone();
            let grad = move |x: &Array2<f64>| {
                let mut g = utu.dot(x);
                Zip::from(&mut g)
                    .and(x)
                    .and(&anchor)
                    .and(&uts)
                    .for_each(|g, &x, &a, &c| *g += tau_x * (x - a) - c);
                g
            };
            let problem = CompositeProblem {
                grad: &grad,
                lipschitz: sigma_max_sq(u.view()) + tau_x,
                penalty: pen,
                set,
            };
            let out = inner_projected_subgradient(&problem, x_i, cfg)?;
            Ok(SubproblemOutcome {
                value: out.solution,
                inner_iters: out.iters,
                converged: out.converged,
            })
        }
    }
}
