//! Generic stacked M-estimation sandwich.
//!
//! An [`InfluenceSpec`] bundles the stacked estimating functions
//! `phi(O_i; theta)` (one row per observation), the stacked solution
//! `theta_hat`, and an analytic bread `M(theta) = -n^-1 sum d phi / d theta'`.
//! The sandwich covariance is `n^-1 M^-1 B M^-T` with `B = n^-1 sum phi phi'`,
//! and the per-row influence values `psi_i = M^-1 phi_i` are returned for
//! reuse (joint delta-method contrasts, diagnostics).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Blockwise score tolerance (per observation) at `theta_hat`.
pub const STACK_SCORE_TOL: f64 = 1e-8;

/// One parameter block of a stacked system.
#[derive(Debug, Clone)]
pub struct BlockSpec {
    pub name: String,
    pub dim: usize,
}

impl BlockSpec {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        BlockSpec {
            name: name.into(),
            dim,
        }
    }
}

type MatrixFn<'a> = Box<dyn Fn(&Array1<f64>) -> Array2<f64> + Sync + 'a>;

/// A stacked system of estimating equations evaluated on a fixed dataset.
pub struct InfluenceSpec<'a> {
    blocks: Vec<BlockSpec>,
    theta_hat: Array1<f64>,
    phi: MatrixFn<'a>,
    bread: MatrixFn<'a>,
}

impl<'a> InfluenceSpec<'a> {
    /// `phi(theta)` must return the n x d matrix of per-row estimating
    /// functions; `bread(theta)` the analytic d x d mean negative Jacobian.
    pub fn new(
        blocks: Vec<BlockSpec>,
        theta_hat: Array1<f64>,
        phi: impl Fn(&Array1<f64>) -> Array2<f64> + Sync + 'a,
        bread: impl Fn(&Array1<f64>) -> Array2<f64> + Sync + 'a,
    ) -> Self {
        let dim: usize = blocks.iter().map(|b| b.dim).sum();
        assert_eq!(dim, theta_hat.len(), "blocks must cover theta");
        InfluenceSpec {
            blocks,
            theta_hat,
            phi: Box::new(phi),
            bread: Box::new(bread),
        }
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn theta_hat(&self) -> &Array1<f64> {
        &self.theta_hat
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn phi_at(&self, theta: &Array1<f64>) -> Array2<f64> {
        (self.phi)(theta)
    }

    pub fn bread_at(&self, theta: &Array1<f64>) -> Array2<f64> {
        (self.bread)(theta)
    }

    /// Central finite differences of the mean estimating function; the
    /// cross-check mode for the analytic bread.
    pub fn bread_finite_difference(&self) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::<f64>::zeros((d, d));
        for j in 0..d {
            let h = 6e-6 * self.theta_hat[j].abs().max(1.0);
            let mut tp = self.theta_hat.clone();
            let mut tm = self.theta_hat.clone();
            tp[j] += h;
            tm[j] -= h;
            let mp = mean_rows(&self.phi_at(&tp));
            let mm = mean_rows(&self.phi_at(&tm));
            for k in 0..d {
                out[[k, j]] = -(mp[k] - mm[k]) / (2.0 * h);
            }
        }
        out
    }
}

/// Output of [`stacked_sandwich`].
#[derive(Debug, Clone)]
pub struct StackedSandwich {
    /// Covariance of `theta_hat`: `n^-1 M^-1 B M^-T`, symmetrized.
    pub covariance: Array2<f64>,
    /// Per-row influence values `psi_i = M^-1 phi_i` (n x d).
    pub influence: Array2<f64>,
    pub bread: Array2<f64>,
    pub meat: Array2<f64>,
}

/// Computes the sandwich covariance of a stacked system at its solution.
///
/// Verifies the blockwise score identity (each component of the summed
/// estimating function vanishes to `STACK_SCORE_TOL * n`) and errors with
/// [`Error::SingularBread`] when the bread cannot be inverted.
pub fn stacked_sandwich(spec: &InfluenceSpec) -> Result<StackedSandwich> {
    let phi = spec.phi_at(spec.theta_hat());
    let n = phi.nrows();
    let d = spec.dim();
    let tol = STACK_SCORE_TOL * n as f64;
    let sums = phi.sum_axis(ndarray::Axis(0));
    let mut offset = 0;
    for block in spec.blocks() {
        for k in 0..block.dim {
            let s = sums[offset + k];
            if !(s.is_finite() && s.abs() <= tol) {
                return Err(Error::NumericalDomain(format!(
                    "stacked score for block '{}' component {k} is {s:e} (tolerance {tol:e})",
                    block.name
                )));
            }
        }
        offset += block.dim;
    }

    let bread = spec.bread_at(spec.theta_hat());
    let bread_inv = linalg::inverse(&bread).map_err(|_| Error::SingularBread)?;

    // psi_i' = phi_i' * (M^-1)'
    let influence = phi.dot(&bread_inv.t());
    let meat = phi.t().dot(&phi) / n as f64;
    let nf = n as f64;
    let mut cov = influence.t().dot(&influence) / (nf * nf);
    // Enforce exact symmetry against rounding.
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (cov[[i, j]] + cov[[j, i]]);
            cov[[i, j]] = avg;
            cov[[j, i]] = avg;
        }
    }
    Ok(StackedSandwich {
        covariance: cov,
        influence,
        bread,
        meat,
    })
}

fn mean_rows(m: &Array2<f64>) -> Array1<f64> {
    m.mean_axis(ndarray::Axis(0)).unwrap()
}
