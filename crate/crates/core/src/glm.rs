//! Weighted generalized linear working models.
//!
//! Fits coefficients by solving the weighted estimating equation
//!
//! `sum_i w_i (y_i - h(x_i' beta)) x_i = 0`
//!
//! with damped Newton iteration (step halving on the score norm). This is
//! not a likelihood when the weights differ from 1, so the solver works on
//! the score directly rather than a deviance.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LinkFamily;

/// Relative score tolerance: converged when `max_j |score_j| <= SCORE_TOL * n`.
pub const SCORE_TOL: f64 = 1e-10;
/// Iteration cap for the Newton loop.
pub const MAX_ITERATIONS: usize = 100;
/// Relative pivot threshold for the design rank check.
pub const RANK_TOL: f64 = 1e-12;
/// Coefficient norm beyond which a non-converged logit fit is declared separated.
const SEPARATION_NORM: f64 = 1e3;
const MAX_HALVINGS: usize = 40;

/// A fitted working model.
#[derive(Debug, Clone)]
pub struct GlmFit {
    /// Coefficients, intercept first.
    pub beta: Array1<f64>,
    pub family: LinkFamily,
    /// Per-row weights actually used in the estimating equation.
    pub row_weights: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max absolute component of the estimating equation at the solution.
    pub max_score_norm: f64,
}

impl GlmFit {
    /// Fitted means `h(x' beta)` for each row of `design`.
    pub fn predict_mean(&self, design: &Array2<f64>) -> Result<Array1<f64>> {
        predict_mean(self, design)
    }
}

/// Solves the weighted estimating equation for `beta`.
///
/// `design` must carry a leading column of ones; rows with zero weight are
/// excluded from every accumulation exactly, so the fit equals the fit on
/// the positively weighted subset bit for bit.
pub fn fit_weighted_glm(
    design: &Array2<f64>,
    response: &Array1<f64>,
    weights: &Array1<f64>,
    family: LinkFamily,
) -> Result<GlmFit> {
    let n = design.nrows();
    let p = design.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: response.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
        return Err(Error::NumericalDomain(format!(
            "row weights must be finite and nonnegative, got {w}"
        )));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::NoControls);
    }

    // Rank of the design restricted to positively weighted rows.
    let mut gram = Array2::<f64>::zeros((p, p));
    for i in 0..n {
        if weights[i] == 0.0 {
            continue;
        }
        for j in 0..p {
            for k in j..p {
                gram[[j, k]] += design[[i, j]] * design[[i, k]];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            gram[[j, k]] = gram[[k, j]];
        }
    }
    linalg::check_full_rank_gram(&gram, RANK_TOL)?;

    let mut beta = Array1::<f64>::zeros(p);
    if family == LinkFamily::Identity {
        let wsum: f64 = weights.iter().filter(|w| **w > 0.0).sum();
        let wy: f64 = (0..n)
            .filter(|&i| weights[i] > 0.0)
            .map(|i| weights[i] * response[i])
            .sum();
        beta[0] = wy / wsum;
    }

    let tol = SCORE_TOL * n as f64;
    let score = score_at(design, response, weights, family, &beta);
    let mut norm = inf_norm(&score);
    let mut score = score;
    let mut iterations = 0;

    while norm > tol {
        if iterations >= MAX_ITERATIONS {
            if family == LinkFamily::Logit && inf_norm(&beta) > SEPARATION_NORM {
                return Err(Error::Separation);
            }
            return Err(Error::NoConvergence {
                iterations,
                score_norm: norm,
            });
        }
        iterations += 1;

        let jac = neg_jacobian(design, weights, family, &beta);
        let direction = linalg::solve(&jac, &score)?;

        // Step halving on the score norm.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &beta + &(step * &direction);
            let trial_score = score_at(design, response, weights, family, &trial);
            let trial_norm = inf_norm(&trial_score);
            if trial_norm.is_finite() && (trial_norm < norm || trial_norm <= tol) {
                beta = trial;
                score = trial_score;
                norm = trial_norm;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if family == LinkFamily::Logit && inf_norm(&beta) > SEPARATION_NORM {
                return Err(Error::Separation);
            }
            if family == LinkFamily::Log {
                return Err(Error::NumericalDomain(
                    "log link: step halving exhausted without reducing the score".into(),
                ));
            }
            return Err(Error::NoConvergence {
                iterations,
                score_norm: norm,
            });
        }
        if family == LinkFamily::Logit && inf_norm(&beta) > SEPARATION_NORM && norm > tol {
            return Err(Error::Separation);
        }
    }

    Ok(GlmFit {
        beta,
        family,
        row_weights: weights.clone(),
        converged: true,
        iterations,
        max_score_norm: norm,
    })
}

/// Elementwise `h(x' beta)` over the rows of `design`.
pub fn predict_mean(fit: &GlmFit, design: &Array2<f64>) -> Result<Array1<f64>> {
    if design.ncols() != fit.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: fit.beta.len(),
            found: design.ncols(),
        });
    }
    Ok(design.dot(&fit.beta).mapv(|eta| fit.family.h(eta)))
}

/// Score of the weighted estimating equation at `beta`.
pub fn score_at(
    design: &Array2<f64>,
    response: &Array1<f64>,
    weights: &Array1<f64>,
    family: LinkFamily,
    beta: &Array1<f64>,
) -> Array1<f64> {
    let p = design.ncols();
    let mut score = Array1::<f64>::zeros(p);
    for i in 0..design.nrows() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let eta: f64 = (0..p).map(|j| design[[i, j]] * beta[j]).sum();
        let r = w * (response[i] - family.h(eta));
        for j in 0..p {
            score[j] += r * design[[i, j]];
        }
    }
    score
}

/// Negated score Jacobian `sum_i w_i h_dot(eta_i) x_i x_i'` (the Newton matrix).
pub fn neg_jacobian(
    design: &Array2<f64>,
    weights: &Array1<f64>,
    family: LinkFamily,
    beta: &Array1<f64>,
) -> Array2<f64> {
    let p = design.ncols();
    let mut jac = Array2::<f64>::zeros((p, p));
    for i in 0..design.nrows() {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let eta: f64 = (0..p).map(|j| design[[i, j]] * beta[j]).sum();
        let hd = w * family.h_dot(eta);
        for j in 0..p {
            let v = hd * design[[i, j]];
            for k in j..p {
                jac[[j, k]] += v * design[[i, k]];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            jac[[j, k]] = jac[[k, j]];
        }
    }
    jac
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
