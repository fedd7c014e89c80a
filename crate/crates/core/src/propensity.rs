//! Propensity score model and the adjusted external-control weight.
//!
//! The propensity score `p(x) = P(Z=1|x)` is fitted by logistic maximum
//! likelihood on all rows (treated and control alike; within the RCT `Z=1`
//! regardless of treatment). External rows are weighted by the propensity
//! odds `p(x)/(1-p(x)) = exp((1,x')gamma)`, rescaled by an adjusted weight
//! so the external arm keeps the same effective sample size `w * n_ext`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::glm::{self, GlmFit};
use crate::model::{LinkFamily, ObservationTable};

/// A fitted logistic propensity model.
#[derive(Debug, Clone)]
pub struct PsFit {
    /// Logistic coefficients, intercept first.
    pub gamma: Array1<f64>,
    /// Labels of the design columns used (for reporting).
    pub ps_design_cols: Vec<String>,
    /// Per-row propensity odds `exp((1,x')gamma)`, in table order.
    pub fitted_odds: Array1<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_score_norm: f64,
}

/// Fits the propensity model by maximum likelihood on all `n` rows.
pub fn fit_propensity(
    table: &ObservationTable,
    ps_design: &Array2<f64>,
    ps_design_cols: Vec<String>,
) -> Result<PsFit> {
    let n = table.n();
    if ps_design.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ps_design.nrows(),
        });
    }
    let has_internal = table.rows().iter().any(|r| r.z == 1);
    let has_external = table.rows().iter().any(|r| r.z == 0);
    if !has_external || !has_internal {
        return Err(Error::DegenerateDesign(
            "propensity model needs rows from both cohorts".into(),
        ));
    }

    let z: Array1<f64> = table.rows().iter().map(|r| r.z as f64).collect();
    let ones = Array1::from_elem(n, 1.0);
    let fit: GlmFit = glm::fit_weighted_glm(ps_design, &z, &ones, LinkFamily::Logit)?;

    let fitted_odds = ps_design.dot(&fit.beta).mapv(f64::exp);
    Ok(PsFit {
        gamma: fit.beta,
        ps_design_cols,
        fitted_odds,
        converged: fit.converged,
        iterations: fit.iterations,
        max_score_norm: fit.max_score_norm,
    })
}

/// Adjusted weight `w_dagger = w * n_ext / sum_ext odds_i`, which gives the
/// external arm effective size `w * n_ext` after odds weighting.
pub fn adjusted_weight(ps: &PsFit, table: &ObservationTable, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Config(format!("weight w must lie in [0,1], got {w}")));
    }
    let mut n_ext = 0.0;
    let mut odds_sum = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.z == 0 {
            n_ext += 1.0;
            odds_sum += ps.fitted_odds[i];
        }
    }
    if n_ext == 0.0 {
        return Err(Error::NoExternalRows);
    }
    Ok(w * n_ext / odds_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{expit, ObservationRow};
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn cohort_table(n1: usize, n0: usize) -> ObservationTable {
        let mut rows = Vec::new();
        for _ in 0..n0 {
            rows.push(ObservationRow::new(0, 0, 0.0, vec![0.0]));
        }
        for i in 0..n1 {
            rows.push(ObservationRow::new(1, (i % 2) as u8, 0.0, vec![0.0]));
        }
        ObservationTable::new(rows).unwrap()
    }

    fn intercept_design(n: usize) -> Array2<f64> {
        Array2::from_elem((n, 1), 1.0)
    }

    #[test]
    fn test_intercept_only_cohort_fraction() {
        let table = cohort_table(150, 100);
        let fit = fit_propensity(&table, &intercept_design(250), vec!["1".into()]).unwrap();
        assert!((fit.gamma[0] - 1.5_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn test_intercept_only_equal_cohorts() {
        let table = cohort_table(80, 80);
        let fit = fit_propensity(&table, &intercept_design(160), vec!["1".into()]).unwrap();
        assert!(fit.gamma[0].abs() < 1e-10);
    }

    #[test]
    fn test_single_cohort_rejected() {
        let rows = (0..5)
            .map(|i| ObservationRow::new(1, (i % 2) as u8, 0.0, vec![0.0]))
            .collect();
        let table = ObservationTable::new(rows).unwrap();
        assert!(fit_propensity(&table, &intercept_design(5), vec!["1".into()]).is_err());
    }

    /// Gaussian Bayes-rule oracle: with X ~ N(0,1) in the RCT and
    /// X ~ N(-0.5, 1.5^2) externally, the true PS is logistic in (1, X, X^2)
    /// with slope coefficients 2/9 and -5/18.
    #[test]
    fn test_bayes_rule_coefficients_recovered_at_large_n() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let n1 = 120_000;
        let n0 = 80_000;
        let mut rows = Vec::with_capacity(n1 + n0);
        for _ in 0..n0 {
            let x = -0.5 + 1.5 * rng.sample::<f64, _>(StandardNormal);
            rows.push(ObservationRow::new(0, 0, 0.0, vec![x]));
        }
        for i in 0..n1 {
            let x: f64 = rng.sample(StandardNormal);
            rows.push(ObservationRow::new(1, (i % 2) as u8, 0.0, vec![x]));
        }
        let table = ObservationTable::new(rows).unwrap();
        let n = table.n();
        let design = Array2::from_shape_fn((n, 3), |(i, j)| {
            let x = table.rows()[i].x[0];
            match j {
                0 => 1.0,
                1 => x,
                _ => x * x,
            }
        });
        let fit = fit_propensity(&table, &design, vec!["1".into(), "x".into(), "x^2".into()])
            .unwrap();
        assert!(
            (fit.gamma[1] - 2.0 / 9.0).abs() < 0.025,
            "gamma1 = {}",
            fit.gamma[1]
        );
        assert!(
            (fit.gamma[2] + 5.0 / 18.0).abs() < 0.025,
            "gamma2 = {}",
            fit.gamma[2]
        );
        assert!(fit.max_score_norm <= crate::glm::SCORE_TOL * n as f64);
    }

    #[test]
    fn test_adjusted_weight_unit_odds() {
        let table = cohort_table(80, 80);
        let fit = fit_propensity(&table, &intercept_design(160), vec!["1".into()]).unwrap();
        // gamma is ~0 so all odds are ~1.
        let wd = adjusted_weight(&fit, &table, 0.5).unwrap();
        assert!((wd - 0.5).abs() < 1e-9);
        assert_eq!(adjusted_weight(&fit, &table, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn test_adjusted_weight_hand_computed() {
        // Two external rows with odds (2, 0.5) and w = 1 give 2/2.5 = 0.8.
        let rows = vec![
            ObservationRow::new(0, 0, 0.0, vec![0.0]),
            ObservationRow::new(0, 0, 0.0, vec![0.0]),
            ObservationRow::new(1, 0, 0.0, vec![0.0]),
            ObservationRow::new(1, 1, 0.0, vec![0.0]),
        ];
        let table = ObservationTable::new(rows).unwrap();
        let ps = PsFit {
            gamma: array![0.0],
            ps_design_cols: vec!["1".into()],
            fitted_odds: array![2.0, 0.5, 1.0, 1.0],
            converged: true,
            iterations: 0,
            max_score_norm: 0.0,
        };
        let wd = adjusted_weight(&ps, &table, 1.0).unwrap();
        assert!((wd - 0.8).abs() < 1e-15);
    }

    #[test]
    fn test_effective_size_identity() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        for _ in 0..40 {
            let x = -0.3 + rng.sample::<f64, _>(StandardNormal);
            rows.push(ObservationRow::new(0, 0, 0.0, vec![x]));
        }
        for i in 0..60 {
            let x: f64 = rng.sample(StandardNormal);
            rows.push(ObservationRow::new(1, (i % 3 == 0) as u8, 0.0, vec![x]));
        }
        let table = ObservationTable::new(rows).unwrap();
        let design = Array2::from_shape_fn((100, 2), |(i, j)| {
            if j == 0 {
                1.0
            } else {
                table.rows()[i].x[0]
            }
        });
        let fit = fit_propensity(&table, &design, vec!["1".into(), "x".into()]).unwrap();
        let w = 0.37;
        let wd = adjusted_weight(&fit, &table, w).unwrap();
        let effective: f64 = table
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.z == 0)
            .map(|(i, _)| wd * fit.fitted_odds[i])
            .sum();
        assert!((effective - w * 40.0).abs() < 1e-10 * 40.0);
        // expit'd odds are positive and monotone in the linear predictor.
        assert!(fit.fitted_odds.iter().all(|o| *o > 0.0));
        let mut pairs: Vec<(f64, f64)> = design
            .dot(&fit.gamma)
            .iter()
            .zip(fit.fitted_odds.iter())
            .map(|(&e, &o)| (e, o))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for win in pairs.windows(2) {
            assert!(win[1].1 >= win[0].1);
        }
    }

    #[test]
    fn test_expit_matches_odds() {
        // Propensity and odds are consistent transforms of the same eta.
        for eta in [-3.0, -0.5, 0.0, 1.2] {
            let p = expit(eta);
            assert!((p / (1.0 - p) - eta.exp()).abs() < 1e-12);
        }
    }
}
