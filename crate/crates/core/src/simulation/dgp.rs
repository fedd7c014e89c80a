//! Data-generating processes and exact/true parameter values.
//!
//! Covariates are Gaussian with different location/scale in the RCT and the
//! external arm. Outcome means follow a fixed quadratic form with a
//! treatment term; outcomes are Gaussian (identity link) or Bernoulli
//! (logit link). True values of (mu1, mu0, delta) integrate the outcome
//! mean over the RCT covariate law: in closed form for the continuous
//! case, by Gauss-Hermite quadrature for the binary case.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{expit, ObservationRow, ObservationTable};
use crate::rng::{substream, PURPOSE_ALLOCATION, PURPOSE_COVARIATES, PURPOSE_OUTCOME};

use super::{Allocation, CovariateSetting, OutcomeType, Scenario};

/// Linear predictor of the outcome model.
pub(crate) fn outcome_eta(covariates: CovariateSetting, a: f64, x: &[f64]) -> f64 {
    match covariates {
        CovariateSetting::One => {
            let x1 = x[0];
            -0.5 + 0.3 * x1 + 0.5 * x1 * x1 + a * (0.5 - 0.1 * x1)
        }
        CovariateSetting::Two => {
            let (x1, x2) = (x[0], x[1]);
            -0.5 + 0.5 * x1 + 0.2 * x2 - 0.25 * x1 * x2 + 0.5 * x2 * x2 + a * (0.5 - 0.1 * x1)
        }
    }
}

/// Simulates one study table: external rows first, then the RCT block with
/// its randomized allocation. Deterministic given `seed`.
pub fn generate_dataset(sc: &Scenario, seed: u64) -> Result<ObservationTable> {
    sc.validate()?;
    let p = sc.covariates.dim();
    let mut cov_rng = substream(seed, 0, PURPOSE_COVARIATES);
    let mut alloc_rng = substream(seed, 0, PURPOSE_ALLOCATION);
    let mut out_rng = substream(seed, 0, PURPOSE_OUTCOME);

    let mut rows = Vec::with_capacity(sc.n_external + sc.n_rct);
    for _ in 0..sc.n_external {
        let x: Vec<f64> = (0..p)
            .map(|_| sc.ext_cov_mean + sc.ext_cov_sd * cov_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = draw_outcome(sc, 0.0, &x, &mut out_rng);
        rows.push(ObservationRow::new(0, 0, y, x));
    }

    let assignments = match sc.allocation {
        Allocation::Exact => {
            let n_treated = sc.n_treated();
            let mut assign = vec![0_u8; sc.n_rct];
            for slot in assign.iter_mut().take(n_treated) {
                *slot = 1;
            }
            // Fisher-Yates with the allocation substream.
            for i in (1..assign.len()).rev() {
                let j = alloc_rng.random_range(0..=i);
                assign.swap(i, j);
            }
            assign
        }
        Allocation::Bernoulli => {
            let pi = sc.alloc_treated as f64 / (sc.alloc_treated + sc.alloc_control) as f64;
            (0..sc.n_rct)
                .map(|_| (alloc_rng.random::<f64>() < pi) as u8)
                .collect()
        }
    };

    for &a in &assignments {
        let x: Vec<f64> = (0..p)
            .map(|_| sc.rct_cov_mean + sc.rct_cov_sd * cov_rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = draw_outcome(sc, a as f64, &x, &mut out_rng);
        rows.push(ObservationRow::new(1, a, y, x));
    }
    ObservationTable::new(rows)
}

fn draw_outcome(sc: &Scenario, a: f64, x: &[f64], rng: &mut impl Rng) -> f64 {
    let eta = outcome_eta(sc.covariates, a, x);
    match sc.outcome {
        OutcomeType::Continuous => eta + rng.sample::<f64, _>(StandardNormal),
        OutcomeType::Binary => (rng.random::<f64>() < expit(eta)) as u8 as f64,
    }
}

/// True (mu1, mu0, delta) on the difference scale under the RCT covariate law.
pub fn true_values(sc: &Scenario) -> Result<(f64, f64, f64)> {
    sc.validate()?;
    let m = sc.rct_cov_mean;
    let s = sc.rct_cov_sd;
    match sc.outcome {
        OutcomeType::Continuous => {
            // E[eta(a, X)] in closed form from Gaussian moments.
            let ex2 = m * m + s * s;
            let mu0 = match sc.covariates {
                CovariateSetting::One => -0.5 + 0.3 * m + 0.5 * ex2,
                CovariateSetting::Two => -0.5 + 0.5 * m + 0.2 * m - 0.25 * m * m + 0.5 * ex2,
            };
            let mu1 = mu0 + 0.5 - 0.1 * m;
            Ok((mu1, mu0, mu1 - mu0))
        }
        OutcomeType::Binary => {
            let (nodes, weights) = gauss_hermite(GH_NODES);
            let norm = std::f64::consts::PI.sqrt();
            let expect = |a: f64| -> f64 {
                match sc.covariates {
                    CovariateSetting::One => {
                        let mut acc = 0.0;
                        for (&t, &w) in nodes.iter().zip(weights.iter()) {
                            let x = m + std::f64::consts::SQRT_2 * s * t;
                            acc += w * expit(outcome_eta(sc.covariates, a, &[x]));
                        }
                        acc / norm
                    }
                    CovariateSetting::Two => {
                        let mut acc = 0.0;
                        for (&t1, &w1) in nodes.iter().zip(weights.iter()) {
                            let x1 = m + std::f64::consts::SQRT_2 * s * t1;
                            let mut inner = 0.0;
                            for (&t2, &w2) in nodes.iter().zip(weights.iter()) {
                                let x2 = m + std::f64::consts::SQRT_2 * s * t2;
                                inner += w2 * expit(outcome_eta(sc.covariates, a, &[x1, x2]));
                            }
                            acc += w1 * inner;
                        }
                        acc / (norm * norm)
                    }
                }
            };
            let mu1 = expect(1.0);
            let mu0 = expect(0.0);
            Ok((mu1, mu0, mu1 - mu0))
        }
    }
}

const GH_NODES: usize = 64;

/// Gauss-Hermite nodes and weights for `int exp(-x^2) f(x) dx`.
///
/// Newton iteration on the orthonormal Hermite recurrence with the usual
/// asymptotic initial guesses; accurate to machine precision for the node
/// counts used here.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => {
                let nn = 2.0 * n as f64 + 1.0;
                nn.sqrt() - 1.85575 * nn.powf(-1.0 / 6.0)
            }
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n_external == 0 || self.n_rct == 0 {
            return Err(Error::Config("scenario needs positive arm sizes".into()));
        }
        if self.alloc_treated == 0 || self.alloc_control == 0 {
            return Err(Error::Config("allocation ratio parts must be positive".into()));
        }
        let n_treated = self.n_treated();
        if n_treated == 0 || n_treated >= self.n_rct {
            return Err(Error::Config(
                "allocation must give at least one subject per RCT arm".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Config(format!(
                "weight w must lie in [0,1], got {}",
                self.w
            )));
        }
        if self.rct_cov_sd < 0.0 || self.ext_cov_sd < 0.0 {
            return Err(Error::Config("covariate SDs must be nonnegative".into()));
        }
        Ok(())
    }

    /// Treated count under exact allocation (nearest integer to the ratio).
    pub fn n_treated(&self) -> usize {
        let frac = self.alloc_treated as f64 / (self.alloc_treated + self.alloc_control) as f64;
        (self.n_rct as f64 * frac).round() as usize
    }
}
