//! Shared data model: observation tables, design constants, link families,
//! and effect scales.
//!
//! A hybrid control study combines an RCT (cohort indicator `z = 1`, with
//! treated `a = 1` and control `a = 0` arms) with an external control arm
//! (`z = 0`, always `a = 0`). All estimators in this crate operate on an
//! [`ObservationTable`] of such rows.

use crate::error::{Error, Result};

/// One subject: cohort indicator, treatment indicator, outcome, covariates.
///
/// Binary outcomes are coded 0/1 in the same `y` field; all estimators
/// operate on means, so no separate outcome type is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    /// Source cohort: 1 = RCT, 0 = external control study.
    pub z: u8,
    /// Treatment: 1 = experimental, 0 = control. External rows must have `a = 0`.
    pub a: u8,
    /// Outcome.
    pub y: f64,
    /// Baseline covariates (raw; transformations are materialized by callers).
    pub x: Vec<f64>,
}

impl ObservationRow {
    pub fn new(z: u8, a: u8, y: f64, x: Vec<f64>) -> Self {
        ObservationRow { z, a, y, x }
    }

    fn check(&self, row: usize, dim: usize) -> Result<()> {
        if self.z > 1 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("z must be 0 or 1, got {}", self.z),
            });
        }
        if self.a > 1 {
            return Err(Error::MalformedRow {
                row,
                reason: format!("a must be 0 or 1, got {}", self.a),
            });
        }
        if self.z == 0 && self.a == 1 {
            return Err(Error::MalformedRow {
                row,
                reason: "external rows (z=0) must be controls (a=0)".into(),
            });
        }
        if !self.y.is_finite() {
            return Err(Error::MalformedRow {
                row,
                reason: format!("outcome must be finite, got {}", self.y),
            });
        }
        if self.x.len() != dim {
            return Err(Error::MalformedRow {
                row,
                reason: format!(
                    "covariate vector has length {}, expected {}",
                    self.x.len(),
                    dim
                ),
            });
        }
        if let Some(bad) = self.x.iter().find(|v| !v.is_finite()) {
            return Err(Error::MalformedRow {
                row,
                reason: format!("covariate must be finite, got {bad}"),
            });
        }
        Ok(())
    }
}

/// An immutable table of observations with a common covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTable {
    rows: Vec<ObservationRow>,
    covariate_dim: usize,
}

impl ObservationTable {
    /// Builds a table, rejecting rows that violate the row invariants
    /// (non-binary indicators, `z=0 ∧ a=1`, covariate dimension mismatch).
    pub fn new(rows: Vec<ObservationRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::DegenerateDesign("table has no rows".into()));
        }
        let dim = rows[0].x.len();
        for (i, row) in rows.iter().enumerate() {
            row.check(i, dim)?;
        }
        Ok(ObservationTable {
            rows,
            covariate_dim: dim,
        })
    }

    pub fn rows(&self) -> &[ObservationRow] {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    /// Count of rows in each (z, a) cell: (external, internal control, treated).
    pub fn cell_counts(&self) -> (usize, usize, usize) {
        let mut ext = 0;
        let mut ic = 0;
        let mut tr = 0;
        for r in &self.rows {
            match (r.z, r.a) {
                (0, _) => ext += 1,
                (1, 0) => ic += 1,
                _ => tr += 1,
            }
        }
        (ext, ic, tr)
    }
}

/// Empirical design constants of a hybrid control table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignInfo {
    /// Empirical P(Z=1): share of RCT rows.
    pub tau_hat: f64,
    /// Empirical P(A=1|Z=1): share of treated rows within the RCT.
    pub pi_hat: f64,
}

/// Validates a table for hybrid-control estimation and returns its design
/// constants. Rejects degenerate designs: a useful table needs external
/// rows, internal controls, and treated subjects, so that both
/// `tau_hat` and `pi_hat` land strictly inside (0, 1).
pub fn validate_table(table: &ObservationTable) -> Result<DesignInfo> {
    let n = table.n() as f64;
    let (ext, ic, tr) = table.cell_counts();
    if tr == 0 {
        return Err(Error::DegenerateDesign(
            "no treated rows (pi_hat = 0)".into(),
        ));
    }
    if ic == 0 {
        return Err(Error::DegenerateDesign(
            "no internal control rows (pi_hat = 1)".into(),
        ));
    }
    if ext == 0 {
        return Err(Error::DegenerateDesign(
            "no external control rows (tau_hat = 1)".into(),
        ));
    }
    let n_rct = (ic + tr) as f64;
    let tau_hat = n_rct / n;
    let pi_hat = tr as f64 / n_rct;
    Ok(DesignInfo { tau_hat, pi_hat })
}

/// Inverse link family of a generalized linear working model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkFamily {
    /// h(eta) = eta.
    Identity,
    /// h(eta) = exp(eta).
    Log,
    /// h(eta) = 1 / (1 + exp(-eta)).
    Logit,
}

/// Numerically stable expit that avoids overflow for large |eta|.
pub fn expit(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl LinkFamily {
    /// Inverse link: maps a linear predictor to a mean.
    pub fn h(self, eta: f64) -> f64 {
        match self {
            LinkFamily::Identity => eta,
            LinkFamily::Log => eta.exp(),
            LinkFamily::Logit => expit(eta),
        }
    }

    /// Derivative of the inverse link.
    pub fn h_dot(self, eta: f64) -> f64 {
        match self {
            LinkFamily::Identity => 1.0,
            LinkFamily::Log => eta.exp(),
            LinkFamily::Logit => {
                let p = expit(eta);
                p * (1.0 - p)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LinkFamily::Identity => "identity",
            LinkFamily::Log => "log",
            LinkFamily::Logit => "logit",
        }
    }
}

/// Effect scale defining delta = g(mu1) - g(mu0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EffectScale {
    /// g(mu) = mu: mean difference.
    #[default]
    Difference,
    /// g(mu) = log(mu): log mean ratio; requires mu > 0.
    LogRatio,
    /// g(mu) = logit(mu): log odds ratio; requires mu in (0, 1).
    LogOddsRatio,
}

impl EffectScale {
    /// Applies g, rejecting means outside the scale's domain.
    pub fn g(self, mu: f64) -> Result<f64> {
        match self {
            EffectScale::Difference => Ok(mu),
            EffectScale::LogRatio => {
                if mu > 0.0 {
                    Ok(mu.ln())
                } else {
                    Err(Error::ScaleDomain {
                        scale: self.name(),
                        value: mu,
                    })
                }
            }
            EffectScale::LogOddsRatio => {
                if mu > 0.0 && mu < 1.0 {
                    Ok((mu / (1.0 - mu)).ln())
                } else {
                    Err(Error::ScaleDomain {
                        scale: self.name(),
                        value: mu,
                    })
                }
            }
        }
    }

    /// Derivative of g at mu (domain-checked like [`EffectScale::g`]).
    pub fn g_dot(self, mu: f64) -> Result<f64> {
        match self {
            EffectScale::Difference => Ok(1.0),
            EffectScale::LogRatio => {
                if mu > 0.0 {
                    Ok(1.0 / mu)
                } else {
                    Err(Error::ScaleDomain {
                        scale: self.name(),
                        value: mu,
                    })
                }
            }
            EffectScale::LogOddsRatio => {
                if mu > 0.0 && mu < 1.0 {
                    Ok(1.0 / (mu * (1.0 - mu)))
                } else {
                    Err(Error::ScaleDomain {
                        scale: self.name(),
                        value: mu,
                    })
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectScale::Difference => "difference",
            EffectScale::LogRatio => "log_ratio",
            EffectScale::LogOddsRatio => "log_odds_ratio",
        }
    }
}
