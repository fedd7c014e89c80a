//! Stacked estimating-equation systems for the analytic variances.
//!
//! Each method's report comes from one joint system over the parameter
//! blocks it actually estimates:
//!
//! * RCT-only:            (tau, pi, mu1, mu0)
//! * augmentation:        (tau, pi, beta1, beta0, mu1, mu0)
//! * G-computation:       (tau, pi, beta1, beta0, mu1, mu0)
//! * weighted regression: (tau, pi, gamma, c, beta1, beta0, mu1, mu0)
//!
//! where `beta1`/`beta0` are the treated/control outcome-regression
//! coefficients, `gamma` the propensity coefficients, and `c` the
//! normalization solving `sum_ext (w - c * odds_i) = 0`, i.e. the adjusted
//! weight. The joint meat matrix carries the (mu1, mu0) cross-covariance,
//! so the delta-method variance of `g(mu1) - g(mu0)` carries the joint
//! variability of both mean estimators. The augmentation mu0 block uses the exact
//! decomposition `z(1-a)(y - m0)/(tau(1-pi)) + z(m0 - mu0)/tau`, whose
//! solution is the augmented estimator for every `w`; at `w = 0` its
//! influence row reduces algebraically to the G-computation one.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::estimators::{Mu0Kind, PointEstimates};
use crate::model::{validate_table, LinkFamily, ObservationTable};

use super::sandwich::{stacked_sandwich, BlockSpec, InfluenceSpec};
use super::VarianceReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mu0Block {
    RctOnly,
    Augmentation,
    GComputation,
    WeightedRegression,
}

#[derive(Debug, Clone, Copy, Default)]
struct Layout {
    tau: usize,
    pi: usize,
    gamma: Option<(usize, usize)>,
    c: Option<usize>,
    beta1: Option<(usize, usize)>,
    beta0: Option<(usize, usize)>,
    mu1: usize,
    mu0: usize,
    dim: usize,
}

struct StackedSystem {
    z: Vec<f64>,
    a: Vec<f64>,
    y: Vec<f64>,
    or0: Option<Array2<f64>>,
    or1: Option<Array2<f64>>,
    ps: Option<Array2<f64>>,
    link: LinkFamily,
    w: f64,
    mu0_block: Mu0Block,
    /// When false, a weighted-regression system treats the odds as known
    /// constants 1 and `w` as fixed (no gamma/c blocks).
    with_ps_blocks: bool,
    layout: Layout,
}

impl StackedSystem {
    fn n(&self) -> usize {
        self.z.len()
    }

    fn blocks(&self) -> Vec<BlockSpec> {
        let mut blocks = vec![BlockSpec::new("tau", 1), BlockSpec::new("pi", 1)];
        if let Some((_, len)) = self.layout.gamma {
            blocks.push(BlockSpec::new("gamma", len));
            blocks.push(BlockSpec::new("c", 1));
        }
        if let Some((_, len)) = self.layout.beta1 {
            blocks.push(BlockSpec::new("beta1", len));
        }
        if let Some((_, len)) = self.layout.beta0 {
            blocks.push(BlockSpec::new("beta0", len));
        }
        blocks.push(BlockSpec::new("mu1", 1));
        blocks.push(BlockSpec::new("mu0", 1));
        blocks
    }

    fn phi(&self, theta: &Array1<f64>) -> Array2<f64> {
        let n = self.n();
        let l = &self.layout;
        let t = theta[l.tau];
        let p = theta[l.pi];
        let mu1 = theta[l.mu1];
        let mu0 = theta[l.mu0];
        let mut phi = Array2::<f64>::zeros((n, l.dim));

        for i in 0..n {
            let (z, a, y) = (self.z[i], self.a[i], self.y[i]);
            phi[[i, l.tau]] = z - t;
            phi[[i, l.pi]] = z * (a - p);

            let mut ext_weight = self.w; // row weight of external controls in beta0
            if let (Some((g0, glen)), Some(ci)) = (l.gamma, l.c) {
                let ps = self.ps.as_ref().unwrap();
                let mut eta = 0.0;
                for k in 0..glen {
                    eta += ps[[i, k]] * theta[g0 + k];
                }
                let odds = eta.exp();
                let pr = crate::model::expit(eta);
                for k in 0..glen {
                    phi[[i, g0 + k]] = (z - pr) * ps[[i, k]];
                }
                let c = theta[ci];
                phi[[i, ci]] = (1.0 - z) * (self.w - c * odds);
                ext_weight = c * odds;
            }

            if let Some((b0, blen)) = l.beta1 {
                let or1 = self.or1.as_ref().unwrap();
                let mut eta = 0.0;
                for k in 0..blen {
                    eta += or1[[i, k]] * theta[b0 + k];
                }
                let m1 = self.link.h(eta);
                let za = z * a;
                for k in 0..blen {
                    phi[[i, b0 + k]] = za * (y - m1) * or1[[i, k]];
                }
                phi[[i, l.mu1]] = za * (y - m1) / (t * p) + z * (m1 - mu1) / t;
            } else {
                phi[[i, l.mu1]] = z * a * (y - mu1) / (t * p);
            }

            match self.mu0_block {
                Mu0Block::RctOnly => {
                    phi[[i, l.mu0]] = z * (1.0 - a) * (y - mu0) / (t * (1.0 - p));
                }
                _ => {
                    let (b0, blen) = l.beta0.unwrap();
                    let or0 = self.or0.as_ref().unwrap();
                    let mut eta = 0.0;
                    for k in 0..blen {
                        eta += or0[[i, k]] * theta[b0 + k];
                    }
                    let m0 = self.link.h(eta);
                    let u = if a == 1.0 {
                        0.0
                    } else if z == 1.0 {
                        1.0
                    } else {
                        ext_weight
                    };
                    if u != 0.0 {
                        for k in 0..blen {
                            phi[[i, b0 + k]] = u * (y - m0) * or0[[i, k]];
                        }
                    }
                    phi[[i, l.mu0]] = match self.mu0_block {
                        Mu0Block::Augmentation => {
                            z * (1.0 - a) * (y - m0) / (t * (1.0 - p)) + z * (m0 - mu0) / t
                        }
                        _ => z * (m0 - mu0),
                    };
                }
            }
        }
        phi
    }

    fn bread(&self, theta: &Array1<f64>) -> Array2<f64> {
        let n = self.n();
        let nf = n as f64;
        let l = &self.layout;
        let t = theta[l.tau];
        let p = theta[l.pi];
        let mu1 = theta[l.mu1];
        let mu0 = theta[l.mu0];
        let mut m = Array2::<f64>::zeros((l.dim, l.dim));

        m[[l.tau, l.tau]] = 1.0;
        m[[l.pi, l.pi]] = self.z.iter().sum::<f64>() / nf;

        for i in 0..n {
            let (z, a, y) = (self.z[i], self.a[i], self.y[i]);

            let mut ext_weight = self.w;
            let mut odds = 1.0;
            if let (Some((g0, glen)), Some(ci)) = (l.gamma, l.c) {
                let ps = self.ps.as_ref().unwrap();
                let mut eta = 0.0;
                for k in 0..glen {
                    eta += ps[[i, k]] * theta[g0 + k];
                }
                odds = eta.exp();
                let pr = crate::model::expit(eta);
                let c = theta[ci];
                let hd = pr * (1.0 - pr);
                for k in 0..glen {
                    for kk in 0..glen {
                        m[[g0 + k, g0 + kk]] += hd * ps[[i, k]] * ps[[i, kk]] / nf;
                    }
                    m[[ci, g0 + k]] += (1.0 - z) * c * odds * ps[[i, k]] / nf;
                }
                m[[ci, ci]] += (1.0 - z) * odds / nf;
                ext_weight = c * odds;
            }

            if let Some((b0, blen)) = l.beta1 {
                let or1 = self.or1.as_ref().unwrap();
                let mut eta = 0.0;
                for k in 0..blen {
                    eta += or1[[i, k]] * theta[b0 + k];
                }
                let m1 = self.link.h(eta);
                let hd = self.link.h_dot(eta);
                let za = z * a;
                if za != 0.0 {
                    for k in 0..blen {
                        for kk in 0..blen {
                            m[[b0 + k, b0 + kk]] += za * hd * or1[[i, k]] * or1[[i, kk]] / nf;
                        }
                    }
                }
                let phi_mu1 = za * (y - m1) / (t * p) + z * (m1 - mu1) / t;
                m[[l.mu1, l.tau]] += phi_mu1 / t / nf;
                m[[l.mu1, l.pi]] += za * (y - m1) / (t * p * p) / nf;
                for k in 0..blen {
                    m[[l.mu1, b0 + k]] += (za / (t * p) - z / t) * hd * or1[[i, k]] / nf;
                }
                m[[l.mu1, l.mu1]] += z / t / nf;
            } else {
                let phi_mu1 = z * a * (y - mu1) / (t * p);
                m[[l.mu1, l.tau]] += phi_mu1 / t / nf;
                m[[l.mu1, l.pi]] += z * a * (y - mu1) / (t * p * p) / nf;
                m[[l.mu1, l.mu1]] += z * a / (t * p) / nf;
            }

            match self.mu0_block {
                Mu0Block::RctOnly => {
                    let phi_mu0 = z * (1.0 - a) * (y - mu0) / (t * (1.0 - p));
                    m[[l.mu0, l.tau]] += phi_mu0 / t / nf;
                    m[[l.mu0, l.pi]] -= z * (1.0 - a) * (y - mu0) / (t * (1.0 - p) * (1.0 - p)) / nf;
                    m[[l.mu0, l.mu0]] += z * (1.0 - a) / (t * (1.0 - p)) / nf;
                }
                _ => {
                    let (b0, blen) = l.beta0.unwrap();
                    let or0 = self.or0.as_ref().unwrap();
                    let mut eta = 0.0;
                    for k in 0..blen {
                        eta += or0[[i, k]] * theta[b0 + k];
                    }
                    let m0 = self.link.h(eta);
                    let hd = self.link.h_dot(eta);
                    let u = if a == 1.0 {
                        0.0
                    } else if z == 1.0 {
                        1.0
                    } else {
                        ext_weight
                    };
                    if u != 0.0 {
                        for k in 0..blen {
                            for kk in 0..blen {
                                m[[b0 + k, b0 + kk]] += u * hd * or0[[i, k]] * or0[[i, kk]] / nf;
                            }
                        }
                    }
                    if self.with_ps_blocks && z == 0.0 && a == 0.0 {
                        // Row weight c * odds depends on (gamma, c).
                        let (g0, glen) = l.gamma.unwrap();
                        let ci = l.c.unwrap();
                        let c = theta[ci];
                        let ps = self.ps.as_ref().unwrap();
                        for k in 0..blen {
                            let base = (y - m0) * or0[[i, k]];
                            for kk in 0..glen {
                                m[[b0 + k, g0 + kk]] -= c * odds * base * ps[[i, kk]] / nf;
                            }
                            m[[b0 + k, ci]] -= odds * base / nf;
                        }
                    }
                    match self.mu0_block {
                        Mu0Block::Augmentation => {
                            let phi_mu0 =
                                z * (1.0 - a) * (y - m0) / (t * (1.0 - p)) + z * (m0 - mu0) / t;
                            m[[l.mu0, l.tau]] += phi_mu0 / t / nf;
                            m[[l.mu0, l.pi]] -=
                                z * (1.0 - a) * (y - m0) / (t * (1.0 - p) * (1.0 - p)) / nf;
                            for k in 0..blen {
                                m[[l.mu0, b0 + k]] += (z * (1.0 - a) / (t * (1.0 - p)) - z / t)
                                    * hd
                                    * or0[[i, k]]
                                    / nf;
                            }
                            m[[l.mu0, l.mu0]] += z / t / nf;
                        }
                        _ => {
                            for k in 0..blen {
                                m[[l.mu0, b0 + k]] -= z * hd * or0[[i, k]] / nf;
                            }
                            m[[l.mu0, l.mu0]] += z / nf;
                        }
                    }
                }
            }
        }
        m
    }
}

fn build_system(
    table: &ObservationTable,
    est: &PointEstimates,
    mu0_block: Mu0Block,
    with_ps_blocks: bool,
) -> Result<(StackedSystem, Array1<f64>)> {
    let info = validate_table(table)?;
    let fits = &est.fits;
    let link = fits
        .m0
        .as_ref()
        .or(fits.m1.as_ref())
        .map(|f| f.family)
        .unwrap_or(LinkFamily::Identity);

    let mu1_aug = fits.m1.is_some();
    let mut layout = Layout {
        tau: 0,
        pi: 1,
        ..Default::default()
    };
    let mut next = 2;
    let mut theta = vec![info.tau_hat, info.pi_hat];

    let needs_ps = mu0_block == Mu0Block::WeightedRegression && with_ps_blocks;
    if needs_ps {
        let ps = fits
            .ps
            .as_ref()
            .ok_or_else(|| Error::Config("weighted-regression variance needs a PS fit".into()))?;
        let glen = ps.gamma.len();
        layout.gamma = Some((next, glen));
        theta.extend(ps.gamma.iter());
        next += glen;
        layout.c = Some(next);
        theta.push(
            fits.w_dagger
                .ok_or_else(|| Error::Config("weighted-regression variance needs w_dagger".into()))?,
        );
        next += 1;
    }
    if mu1_aug {
        let m1 = fits.m1.as_ref().unwrap();
        let blen = m1.beta.len();
        layout.beta1 = Some((next, blen));
        theta.extend(m1.beta.iter());
        next += blen;
    }
    if mu0_block != Mu0Block::RctOnly {
        let m0 = fits
            .m0
            .as_ref()
            .ok_or_else(|| Error::Config("variance needs the control-arm OR fit".into()))?;
        let blen = m0.beta.len();
        layout.beta0 = Some((next, blen));
        theta.extend(m0.beta.iter());
        next += blen;
    }
    layout.mu1 = next;
    theta.push(est.mu1);
    layout.mu0 = next + 1;
    theta.push(est.mu0);
    layout.dim = next + 2;

    let system = StackedSystem {
        z: table.rows().iter().map(|r| r.z as f64).collect(),
        a: table.rows().iter().map(|r| r.a as f64).collect(),
        y: table.rows().iter().map(|r| r.y).collect(),
        or0: fits.or_design_control.clone(),
        or1: fits.or_design_treated.clone(),
        ps: fits.ps_design.clone(),
        link,
        w: fits.w,
        mu0_block,
        with_ps_blocks: needs_ps,
        layout,
    };
    Ok((system, Array1::from_vec(theta)))
}

fn sandwich_report(
    table: &ObservationTable,
    est: &PointEstimates,
    mu0_block: Mu0Block,
    with_ps_blocks: bool,
    method: Mu0Kind,
) -> Result<VarianceReport> {
    let (system, theta) = build_system(table, est, mu0_block, with_ps_blocks)?;
    let spec = InfluenceSpec::new(
        system.blocks(),
        theta,
        |t: &Array1<f64>| system.phi(t),
        |t: &Array1<f64>| system.bread(t),
    );
    let s = stacked_sandwich(&spec)?;
    let l = system.layout;
    let mut cov = Array2::<f64>::zeros((2, 2));
    cov[[0, 0]] = s.covariance[[l.mu1, l.mu1]];
    cov[[0, 1]] = s.covariance[[l.mu1, l.mu0]];
    cov[[1, 0]] = s.covariance[[l.mu0, l.mu1]];
    cov[[1, 1]] = s.covariance[[l.mu0, l.mu0]];
    VarianceReport::from_cov(cov, est.mu1, est.mu0, est.scale, method, "stacked_sandwich")
}

/// Analytic report for the RCT-only method (arm means).
pub fn variance_rct_only(table: &ObservationTable, est: &PointEstimates) -> Result<VarianceReport> {
    sandwich_report(table, est, Mu0Block::RctOnly, false, Mu0Kind::RctOnly)
}

/// Analytic report for the augmentation method.
pub fn variance_augmentation(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<VarianceReport> {
    sandwich_report(
        table,
        est,
        Mu0Block::Augmentation,
        false,
        Mu0Kind::Augmentation,
    )
}

/// Analytic report for the G-computation method.
pub fn variance_gcomputation(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<VarianceReport> {
    sandwich_report(
        table,
        est,
        Mu0Block::GComputation,
        false,
        Mu0Kind::GComputation,
    )
}

/// Analytic report for the weighted-regression method, stacking the PS
/// coefficients and the adjusted-weight normalization as estimated blocks.
pub fn variance_weighted_regression(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<VarianceReport> {
    sandwich_report(
        table,
        est,
        Mu0Block::WeightedRegression,
        true,
        Mu0Kind::WeightedRegression,
    )
}

/// Direct plug-in of the augmentation influence expressions:
/// per-row values of
///
/// `z[(1-a)(y - mu0) + (a - pi)(m0(x) - mu0*)] / (tau(1-pi))`
///
/// (and the mu1 analogue), with empirical plug-ins everywhere. The report
/// is the sample covariance of those expressions over n. This estimate
/// ignores the finite-sample variability of the fitted coefficients, which
/// is first-order irrelevant for the augmented estimators.
pub fn variance_augmentation_plugin(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<VarianceReport> {
    let info = validate_table(table)?;
    let fits = &est.fits;
    let m0_fit = fits
        .m0
        .as_ref()
        .ok_or_else(|| Error::Config("plugin variance needs the control-arm OR fit".into()))?;
    let m1_fit = fits
        .m1
        .as_ref()
        .ok_or_else(|| Error::Config("plugin variance needs the treated-arm OR fit".into()))?;
    let or0 = fits.or_design_control.as_ref().unwrap();
    let or1 = fits.or_design_treated.as_ref().unwrap();
    let m0 = crate::glm::predict_mean(m0_fit, or0)?;
    let m1 = crate::glm::predict_mean(m1_fit, or1)?;

    // Empirical limits of the G-computation means over RCT rows.
    let mut mu0_star = 0.0;
    let mut mu1_star = 0.0;
    let mut n_rct = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.z == 1 {
            mu0_star += m0[i];
            mu1_star += m1[i];
            n_rct += 1.0;
        }
    }
    mu0_star /= n_rct;
    mu1_star /= n_rct;

    let (tau, pi) = (info.tau_hat, info.pi_hat);
    let n = table.n();
    let mut psi = Array2::<f64>::zeros((n, 2));
    for (i, r) in table.rows().iter().enumerate() {
        let z = r.z as f64;
        let a = r.a as f64;
        psi[[i, 0]] =
            z * (a * (r.y - est.mu1) - (a - pi) * (m1[i] - mu1_star)) / (tau * pi);
        psi[[i, 1]] =
            z * ((1.0 - a) * (r.y - est.mu0) + (a - pi) * (m0[i] - mu0_star)) / (tau * (1.0 - pi));
    }
    let means = psi.mean_axis(ndarray::Axis(0)).unwrap();
    let nf = n as f64;
    let mut cov = Array2::<f64>::zeros((2, 2));
    for i in 0..n {
        let d1 = psi[[i, 0]] - means[0];
        let d0 = psi[[i, 1]] - means[1];
        cov[[0, 0]] += d1 * d1;
        cov[[0, 1]] += d1 * d0;
        cov[[1, 1]] += d0 * d0;
    }
    cov[[1, 0]] = cov[[0, 1]];
    cov.mapv_inplace(|v| v / (nf * nf));
    VarianceReport::from_cov(cov, est.mu1, est.mu0, est.scale, Mu0Kind::Augmentation, "plugin")
}

/// Frobenius relative error between the analytic bread and its central
/// finite-difference counterpart, for the stacked system behind `est`.
pub fn bread_fd_relative_error(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<f64> {
    let mu0_block = match est.mu0_kind {
        Mu0Kind::RctOnly => Mu0Block::RctOnly,
        Mu0Kind::Augmentation => Mu0Block::Augmentation,
        Mu0Kind::GComputation => Mu0Block::GComputation,
        Mu0Kind::WeightedRegression => Mu0Block::WeightedRegression,
        other => {
            return Err(Error::Config(format!(
                "no stacked system for method '{}'",
                other.name()
            )))
        }
    };
    let with_ps = mu0_block == Mu0Block::WeightedRegression;
    let (system, theta) = build_system(table, est, mu0_block, with_ps)?;
    let spec = InfluenceSpec::new(
        system.blocks(),
        theta,
        |t: &Array1<f64>| system.phi(t),
        |t: &Array1<f64>| system.bread(t),
    );
    let analytic = spec.bread_at(spec.theta_hat());
    let fd = spec.bread_finite_difference();
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, f) in analytic.iter().zip(fd.iter()) {
        num += (a - f) * (a - f);
        den += a * a;
    }
    Ok((num / den).sqrt())
}

/// Internal: the weighted-regression report with the odds frozen at 1 and
/// no (gamma, c) blocks; used to check the reduction to G-computation.
#[cfg(test)]
pub(crate) fn variance_wr_fixed_unit_odds(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<VarianceReport> {
    sandwich_report(
        table,
        est,
        Mu0Block::WeightedRegression,
        false,
        Mu0Kind::WeightedRegression,
    )
}
