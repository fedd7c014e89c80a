//! The `analyze` pipeline: one dataset, several methods and weights.
//!
//! Analytic standard errors for the RCT-only, augmentation, G-computation
//! and weighted-regression methods; stratified-bootstrap standard errors
//! for the unadjusted and PS-weighting estimates of (mu0, delta), whose
//! mu1 column is the treated-arm mean with its analytic SE.

use ndarray::Array2;

use crate::design::DesignSpec;
use crate::error::Result;
use crate::estimators::{self, estimate, estimate_point, Designs, Mu0Kind, Mu0Method};
use crate::inference::{
    bootstrap_ses, variance_augmentation, variance_gcomputation, variance_rct_only,
    variance_weighted_regression, wald_ci, BootstrapOptions,
};
use crate::model::{validate_table, EffectScale, LinkFamily, ObservationTable};
use crate::propensity;

use super::config::AnalysisConfig;
use super::csv_io::NamedTable;
use super::report::{AnalysisReport, AnalysisRow};

pub struct AnalyzeOutcome {
    pub report: AnalysisReport,
    /// (cell label, error message) for cells that failed.
    pub failed_cells: Vec<(String, String)>,
}

pub fn run_analysis(
    named: &NamedTable,
    cfg: &AnalysisConfig,
    bootstrap_b_override: Option<usize>,
    seed_override: Option<u64>,
) -> Result<AnalyzeOutcome> {
    let table = &named.table;
    validate_table(table)?;
    let scale = cfg.parse_scale()?;
    let link = cfg.parse_link()?;
    let level = cfg.ci_level;

    let or_spec = cfg
        .or_model
        .as_ref()
        .map(|m| m.to_design_spec())
        .transpose()?;
    let or_spec_treated = cfg
        .or_model_treated
        .as_ref()
        .map(|m| m.to_design_spec())
        .transpose()?
        .or_else(|| or_spec.clone());
    let ps_spec = cfg
        .ps_model
        .as_ref()
        .map(|m| m.to_design_spec())
        .transpose()?;

    let build = |spec: &Option<DesignSpec>| -> Result<Option<Array2<f64>>> {
        spec.as_ref()
            .map(|s| s.build(table, &named.covariate_names))
            .transpose()
    };
    let designs = Designs {
        or_control: build(&or_spec)?,
        or_treated: build(&or_spec_treated)?,
        ps: build(&ps_spec)?,
        or_cols: or_spec.as_ref().map(|s| s.labels()).unwrap_or_default(),
        ps_cols: ps_spec.as_ref().map(|s| s.labels()).unwrap_or_default(),
    };

    let boot_opts = BootstrapOptions {
        samples: bootstrap_b_override.unwrap_or(cfg.bootstrap.samples),
        seed: seed_override.unwrap_or(cfg.bootstrap.seed),
        stratified: cfg.bootstrap.stratified,
        ..Default::default()
    };

    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for kind in cfg.parse_methods() {
        let w_values: &[f64] = if kind == Mu0Kind::RctOnly {
            &[0.0]
        } else {
            &cfg.w_values
        };
        for &w in w_values {
            let label = if kind == Mu0Kind::RctOnly {
                kind.name().to_string()
            } else {
                format!("{} (w={})", kind.name(), w)
            };
            match run_cell(
                table,
                named,
                kind,
                w,
                &designs,
                link,
                scale,
                level,
                &ps_spec,
                cfg,
                &boot_opts,
            ) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    failed.push((label, e.to_string()));
                    rows.push(AnalysisRow {
                        method: kind.name().into(),
                        w: (kind != Mu0Kind::RctOnly).then_some(w),
                        mu1: None,
                        se_mu1: None,
                        mu0: None,
                        se_mu0: None,
                        delta: None,
                        se_delta: None,
                        ci_lo: None,
                        ci_hi: None,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    Ok(AnalyzeOutcome {
        report: AnalysisReport {
            rows,
            ci_level: level,
        },
        failed_cells: failed,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    table: &ObservationTable,
    named: &NamedTable,
    kind: Mu0Kind,
    w: f64,
    designs: &Designs,
    link: LinkFamily,
    scale: EffectScale,
    level: f64,
    ps_spec: &Option<DesignSpec>,
    cfg: &AnalysisConfig,
    boot_opts: &BootstrapOptions,
) -> Result<AnalysisRow> {
    let method = Mu0Method::new(kind, w)?
        .with_columns(designs.or_cols.clone(), designs.ps_cols.clone());
    let est = estimate(table, &method, designs, link, scale)?;

    let (se_mu1, se_mu0, se_delta) = match kind {
        Mu0Kind::RctOnly => {
            let rep = variance_rct_only(table, &est)?;
            (rep.se_mu1, rep.se_mu0, rep.se_delta)
        }
        Mu0Kind::Augmentation => {
            let rep = variance_augmentation(table, &est)?;
            (rep.se_mu1, rep.se_mu0, rep.se_delta)
        }
        Mu0Kind::GComputation => {
            let rep = variance_gcomputation(table, &est)?;
            (rep.se_mu1, rep.se_mu0, rep.se_delta)
        }
        Mu0Kind::WeightedRegression => {
            let rep = variance_weighted_regression(table, &est)?;
            (rep.se_mu1, rep.se_mu0, rep.se_delta)
        }
        Mu0Kind::Unadjusted | Mu0Kind::PsWeighting => {
            // mu1 is the treated-arm mean; its SE comes from the RCT-only system.
            let simple = estimate_point(table, Mu0Kind::RctOnly, 0.0, designs, link, scale)?;
            let rct_rep = variance_rct_only(table, &simple)?;
            if !cfg.bootstrap.enabled {
                return Err(crate::error::Error::Config(format!(
                    "method '{}' needs bootstrap SEs; enable [bootstrap]",
                    kind.name()
                )));
            }
            let names = named.covariate_names.clone();
            let ps_spec = ps_spec.clone();
            let estimator = move |t: &ObservationTable| -> Result<Vec<f64>> {
                let mu0 = match kind {
                    Mu0Kind::Unadjusted => estimators::mu0_unadjusted(t, w)?,
                    _ => {
                        let spec = ps_spec.as_ref().ok_or_else(|| {
                            crate::error::Error::Config("ps_weighting needs [ps_model]".into())
                        })?;
                        let design = spec.build(t, &names)?;
                        let ps = propensity::fit_propensity(t, &design, spec.labels())?;
                        estimators::mu0_ps_weighting(t, &ps, w)?
                    }
                };
                let mu1 = estimators::mu1_simple(t)?;
                let delta = estimators::estimate_delta(mu1, mu0, scale)?;
                Ok(vec![mu0, delta])
            };
            let (ses, _failures) = bootstrap_ses(table, &estimator, 2, boot_opts)?;
            (rct_rep.se_mu1, ses[0], ses[1])
        }
    };

    let (ci_lo, ci_hi) = wald_ci(est.delta, se_delta, level)?;

    Ok(AnalysisRow {
        method: kind.name().into(),
        w: (kind != Mu0Kind::RctOnly).then_some(w),
        mu1: Some(est.mu1),
        se_mu1: Some(se_mu1),
        mu0: Some(est.mu0),
        se_mu0: Some(se_mu0),
        delta: Some(est.delta),
        se_delta: Some(se_delta),
        ci_lo: Some(ci_lo),
        ci_hi: Some(ci_hi),
        error: None,
    })
}
