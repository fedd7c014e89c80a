//! Point estimation of the control mean `mu0` (six methods), the treated
//! mean `mu1` (two methods), and the treatment effect `delta` on a chosen
//! effect scale.
//!
//! The model-based `mu0` methods share one fitted outcome-regression model:
//! augmentation and G-computation use the same downweighted estimating
//! equation (external rows weighted by `w`), and weighted regression refits
//! it with propensity-odds weights on the external rows. With `w = 0` all
//! three collapse to the same estimate whenever the design carries an
//! intercept.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::glm::{self, GlmFit};
use crate::model::{EffectScale, LinkFamily, ObservationTable};
use crate::propensity::{self, PsFit};

/// The six control-mean estimation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mu0Kind {
    RctOnly,
    Unadjusted,
    PsWeighting,
    Augmentation,
    GComputation,
    WeightedRegression,
}

impl Mu0Kind {
    pub const ALL: [Mu0Kind; 6] = [
        Mu0Kind::RctOnly,
        Mu0Kind::Unadjusted,
        Mu0Kind::PsWeighting,
        Mu0Kind::Augmentation,
        Mu0Kind::GComputation,
        Mu0Kind::WeightedRegression,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mu0Kind::RctOnly => "rct_only",
            Mu0Kind::Unadjusted => "unadjusted",
            Mu0Kind::PsWeighting => "ps_weighting",
            Mu0Kind::Augmentation => "augmentation",
            Mu0Kind::GComputation => "g_computation",
            Mu0Kind::WeightedRegression => "weighted_regression",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Mu0Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }

    /// Whether the method needs an outcome-regression design.
    pub fn uses_or_model(self) -> bool {
        matches!(
            self,
            Mu0Kind::Augmentation | Mu0Kind::GComputation | Mu0Kind::WeightedRegression
        )
    }

    /// Whether the method needs a propensity-score design.
    pub fn uses_ps_model(self) -> bool {
        matches!(self, Mu0Kind::PsWeighting | Mu0Kind::WeightedRegression)
    }

    /// Model-based methods pair `mu0` with the augmented `mu1`; the others
    /// use the treated-arm sample mean.
    pub fn mu1_is_augmented(self) -> bool {
        self.uses_or_model()
    }
}

/// A `mu0` method together with its borrowing weight and design columns.
#[derive(Debug, Clone)]
pub struct Mu0Method {
    pub kind: Mu0Kind,
    /// Borrowing weight in [0, 1]; ignored by `rct_only`.
    pub w: f64,
    pub or_design_cols: Vec<String>,
    pub ps_design_cols: Vec<String>,
}

impl Mu0Method {
    pub fn new(kind: Mu0Kind, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Config(format!("weight w must lie in [0,1], got {w}")));
        }
        Ok(Mu0Method {
            kind,
            w,
            or_design_cols: Vec::new(),
            ps_design_cols: Vec::new(),
        })
    }

    /// Attaches the design column labels used by the method.
    pub fn with_columns(mut self, or_cols: Vec<String>, ps_cols: Vec<String>) -> Self {
        self.or_design_cols = or_cols;
        self.ps_design_cols = ps_cols;
        self
    }
}

/// Runs a described method end to end; see [`estimate_point`].
pub fn estimate(
    table: &ObservationTable,
    method: &Mu0Method,
    designs: &Designs,
    link: LinkFamily,
    scale: EffectScale,
) -> Result<PointEstimates> {
    if method.kind.uses_or_model() && designs.or_control.is_none() {
        return Err(Error::Config(format!(
            "method '{}' requires an outcome-regression design",
            method.kind.name()
        )));
    }
    if method.kind.uses_ps_model() && designs.ps.is_none() {
        return Err(Error::Config(format!(
            "method '{}' requires a propensity-score design",
            method.kind.name()
        )));
    }
    estimate_point(table, method.kind, method.w, designs, link, scale)
}

/// Design matrices consumed by the estimators (each with a leading ones
/// column). `or_treated` defaults to the same columns as `or_control` but
/// is fitted separately on the treated arm.
#[derive(Debug, Clone, Default)]
pub struct Designs {
    pub or_control: Option<Array2<f64>>,
    pub or_treated: Option<Array2<f64>>,
    pub ps: Option<Array2<f64>>,
    pub or_cols: Vec<String>,
    pub ps_cols: Vec<String>,
}

/// Fitted model objects (and the design matrices they were fitted on),
/// retained so the inference module can reuse them without refitting.
#[derive(Debug, Clone, Default)]
pub struct FitBundle {
    pub w: f64,
    pub m0: Option<GlmFit>,
    pub m1: Option<GlmFit>,
    pub ps: Option<PsFit>,
    /// Adjusted external weight `w_dagger` when a PS model is in play.
    pub w_dagger: Option<f64>,
    pub or_design_control: Option<Array2<f64>>,
    pub or_design_treated: Option<Array2<f64>>,
    pub ps_design: Option<Array2<f64>>,
}

/// Point estimates for one method, with the fits used to produce them.
#[derive(Debug, Clone)]
pub struct PointEstimates {
    pub mu1: f64,
    pub mu0: f64,
    pub delta: f64,
    pub scale: EffectScale,
    pub mu0_kind: Mu0Kind,
    pub fits: FitBundle,
}

/// Sample mean of the internal control arm (z=1, a=0).
pub fn mu0_rct_only(table: &ObservationTable) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0.0;
    for r in table.rows() {
        if r.z == 1 && r.a == 0 {
            sum += r.y;
            count += 1.0;
        }
    }
    if count == 0.0 {
        return Err(Error::NoInternalControls);
    }
    Ok(sum / count)
}

/// Downweighted pooled control mean: external rows contribute with weight `w`.
pub fn mu0_unadjusted(table: &ObservationTable, w: f64) -> Result<f64> {
    check_w(w)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for r in table.rows() {
        if r.a == 1 {
            continue;
        }
        let wi = if r.z == 1 { 1.0 } else { w };
        num += wi * r.y;
        den += wi;
    }
    if den == 0.0 {
        return Err(Error::NoControls);
    }
    Ok(num / den)
}

/// Propensity-odds weighted pooled control mean, using the adjusted weight
/// `w_dagger` so the external arm has effective size `w * n_ext`.
pub fn mu0_ps_weighting(table: &ObservationTable, ps: &PsFit, w: f64) -> Result<f64> {
    check_w(w)?;
    let w_dagger = propensity::adjusted_weight(ps, table, w)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.a == 1 {
            continue;
        }
        let wi = if r.z == 1 {
            1.0
        } else {
            w_dagger * ps.fitted_odds[i]
        };
        num += wi * r.y;
        den += wi;
    }
    if den == 0.0 {
        return Err(Error::NoControls);
    }
    Ok(num / den)
}

/// Per-row weights of the downweighted control estimating equation:
/// internal controls 1, treated 0, external `w`.
pub fn control_weights(table: &ObservationTable, w: f64) -> Array1<f64> {
    table
        .rows()
        .iter()
        .map(|r| {
            if r.a == 1 {
                0.0
            } else if r.z == 1 {
                1.0
            } else {
                w
            }
        })
        .collect()
}

/// Fits the control-arm outcome regression with downweighted external rows.
pub fn fit_control_or(
    table: &ObservationTable,
    w: f64,
    or_design: &Array2<f64>,
    link: LinkFamily,
) -> Result<GlmFit> {
    check_w(w)?;
    require_internal_controls(table)?;
    let y: Array1<f64> = table.rows().iter().map(|r| r.y).collect();
    let weights = control_weights(table, w);
    glm::fit_weighted_glm(or_design, &y, &weights, link)
}

// The model-based mu0 methods all assume an internal control arm, even
// those that only average fitted values over the RCT rows.
fn require_internal_controls(table: &ObservationTable) -> Result<()> {
    if table.rows().iter().any(|r| r.z == 1 && r.a == 0) {
        Ok(())
    } else {
        Err(Error::DegenerateDesign(
            "no internal control rows (z=1, a=0)".into(),
        ))
    }
}

/// Augmented estimator of `mu0`: the internal-control mean plus a
/// covariate-based correction that is exactly mean-zero under randomization.
pub fn mu0_augmentation(
    table: &ObservationTable,
    w: f64,
    or_design: &Array2<f64>,
    link: LinkFamily,
) -> Result<(f64, GlmFit)> {
    let fit = fit_control_or(table, w, or_design, link)?;
    let est = mu0_augmentation_from_fit(table, &fit, or_design)?;
    Ok((est, fit))
}

pub(crate) fn mu0_augmentation_from_fit(
    table: &ObservationTable,
    fit: &GlmFit,
    or_design: &Array2<f64>,
) -> Result<f64> {
    let y_bar0 = mu0_rct_only(table)?;
    let m = glm::predict_mean(fit, or_design)?;
    let (ic_mean, rct_mean) = control_and_rct_means(table, &m)?;
    Ok(y_bar0 - ic_mean + rct_mean)
}

/// G-computation estimator of `mu0`: averages the fitted outcome regression
/// over all RCT rows. Uses the same fit as [`mu0_augmentation`].
pub fn mu0_gcomputation(
    table: &ObservationTable,
    w: f64,
    or_design: &Array2<f64>,
    link: LinkFamily,
) -> Result<(f64, GlmFit)> {
    let fit = fit_control_or(table, w, or_design, link)?;
    let est = mu0_gcomputation_from_fit(table, &fit, or_design)?;
    Ok((est, fit))
}

pub(crate) fn mu0_gcomputation_from_fit(
    table: &ObservationTable,
    fit: &GlmFit,
    or_design: &Array2<f64>,
) -> Result<f64> {
    let m = glm::predict_mean(fit, or_design)?;
    rct_mean(table, &m)
}

/// Weighted regression estimator of `mu0`: refits the outcome regression
/// with propensity-odds weights on external rows, then averages over the
/// RCT rows. Doubly robust.
pub fn mu0_weighted_regression(
    table: &ObservationTable,
    w: f64,
    or_design: &Array2<f64>,
    ps_design: &Array2<f64>,
    link: LinkFamily,
) -> Result<(f64, GlmFit, PsFit)> {
    check_w(w)?;
    let ps = propensity::fit_propensity(table, ps_design, Vec::new())?;
    let (est, fit, _) = mu0_weighted_regression_from_ps(table, w, or_design, link, &ps)?;
    Ok((est, fit, ps))
}

pub(crate) fn mu0_weighted_regression_from_ps(
    table: &ObservationTable,
    w: f64,
    or_design: &Array2<f64>,
    link: LinkFamily,
    ps: &PsFit,
) -> Result<(f64, GlmFit, f64)> {
    require_internal_controls(table)?;
    let w_dagger = propensity::adjusted_weight(ps, table, w)?;
    let weights = wr_weights(table, ps, w_dagger);
    let y: Array1<f64> = table.rows().iter().map(|r| r.y).collect();
    let fit = glm::fit_weighted_glm(or_design, &y, &weights, link)?;
    let m = glm::predict_mean(&fit, or_design)?;
    let est = rct_mean(table, &m)?;
    Ok((est, fit, w_dagger))
}

/// Per-row weights of the propensity-odds weighted estimating equation.
pub fn wr_weights(table: &ObservationTable, ps: &PsFit, w_dagger: f64) -> Array1<f64> {
    table
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.a == 1 {
                0.0
            } else if r.z == 1 {
                1.0
            } else {
                w_dagger * ps.fitted_odds[i]
            }
        })
        .collect()
}

/// Treated-arm sample mean.
pub fn mu1_simple(table: &ObservationTable) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0.0;
    for r in table.rows() {
        if r.z == 1 && r.a == 1 {
            sum += r.y;
            count += 1.0;
        }
    }
    if count == 0.0 {
        return Err(Error::NoTreated);
    }
    Ok(sum / count)
}

/// Augmented estimator of `mu1`, fitted on the treated arm only.
///
/// Algebraically equals the G-computation form (the average of the fitted
/// treated-arm regression over all RCT rows) whenever the design carries an
/// intercept; the augmented form is computed here.
pub fn mu1_augmented(
    table: &ObservationTable,
    or_design: &Array2<f64>,
    link: LinkFamily,
) -> Result<(f64, GlmFit)> {
    let weights: Array1<f64> = table
        .rows()
        .iter()
        .map(|r| if r.z == 1 && r.a == 1 { 1.0 } else { 0.0 })
        .collect();
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::NoTreated);
    }
    let y: Array1<f64> = table.rows().iter().map(|r| r.y).collect();
    let fit = glm::fit_weighted_glm(or_design, &y, &weights, link)?;
    let est = mu1_augmented_from_fit(table, &fit, or_design)?;
    Ok((est, fit))
}

pub(crate) fn mu1_augmented_from_fit(
    table: &ObservationTable,
    fit: &GlmFit,
    or_design: &Array2<f64>,
) -> Result<f64> {
    let y_bar1 = mu1_simple(table)?;
    let m = glm::predict_mean(fit, or_design)?;
    let mut t_sum = 0.0;
    let mut t_n = 0.0;
    let mut rct_sum = 0.0;
    let mut rct_n = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.z == 1 {
            rct_sum += m[i];
            rct_n += 1.0;
            if r.a == 1 {
                t_sum += m[i];
                t_n += 1.0;
            }
        }
    }
    Ok(y_bar1 - t_sum / t_n + rct_sum / rct_n)
}

/// `delta = g(mu1) - g(mu0)` on the given effect scale.
pub fn estimate_delta(mu1: f64, mu0: f64, scale: EffectScale) -> Result<f64> {
    Ok(scale.g(mu1)? - scale.g(mu0)?)
}

/// Runs one method end to end: `mu0` by the requested method, `mu1` by the
/// method's pairing (augmented for the model-based methods, the treated-arm
/// mean otherwise), and `delta` on `scale`.
pub fn estimate_point(
    table: &ObservationTable,
    kind: Mu0Kind,
    w: f64,
    designs: &Designs,
    link: LinkFamily,
    scale: EffectScale,
) -> Result<PointEstimates> {
    check_w(w)?;
    let mut fits = FitBundle {
        w,
        ..Default::default()
    };

    let or_control = || -> Result<&Array2<f64>> {
        designs
            .or_control
            .as_ref()
            .ok_or_else(|| Error::Config("method requires an outcome-regression design".into()))
    };
    let ps_design = || -> Result<&Array2<f64>> {
        designs
            .ps
            .as_ref()
            .ok_or_else(|| Error::Config("method requires a propensity-score design".into()))
    };

    let mu0 = match kind {
        Mu0Kind::RctOnly => mu0_rct_only(table)?,
        Mu0Kind::Unadjusted => mu0_unadjusted(table, w)?,
        Mu0Kind::PsWeighting => {
            let ps = propensity::fit_propensity(table, ps_design()?, designs.ps_cols.clone())?;
            let est = mu0_ps_weighting(table, &ps, w)?;
            fits.w_dagger = Some(propensity::adjusted_weight(&ps, table, w)?);
            fits.ps = Some(ps);
            fits.ps_design = Some(ps_design()?.clone());
            est
        }
        Mu0Kind::Augmentation => {
            let (est, fit) = mu0_augmentation(table, w, or_control()?, link)?;
            fits.m0 = Some(fit);
            fits.or_design_control = Some(or_control()?.clone());
            est
        }
        Mu0Kind::GComputation => {
            let (est, fit) = mu0_gcomputation(table, w, or_control()?, link)?;
            fits.m0 = Some(fit);
            fits.or_design_control = Some(or_control()?.clone());
            est
        }
        Mu0Kind::WeightedRegression => {
            let ps = propensity::fit_propensity(table, ps_design()?, designs.ps_cols.clone())?;
            let (est, fit, w_dagger) =
                mu0_weighted_regression_from_ps(table, w, or_control()?, link, &ps)?;
            fits.m0 = Some(fit);
            fits.ps = Some(ps);
            fits.w_dagger = Some(w_dagger);
            fits.or_design_control = Some(or_control()?.clone());
            fits.ps_design = Some(ps_design()?.clone());
            est
        }
    };

    let mu1 = if kind.mu1_is_augmented() {
        let design = designs
            .or_treated
            .as_ref()
            .or(designs.or_control.as_ref())
            .ok_or_else(|| Error::Config("augmented mu1 requires an OR design".into()))?;
        let (est, fit) = mu1_augmented(table, design, link)?;
        fits.m1 = Some(fit);
        fits.or_design_treated = Some(design.clone());
        est
    } else {
        mu1_simple(table)?
    };

    let delta = estimate_delta(mu1, mu0, scale)?;
    Ok(PointEstimates {
        mu1,
        mu0,
        delta,
        scale,
        mu0_kind: kind,
        fits,
    })
}

fn check_w(w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Config(format!("weight w must lie in [0,1], got {w}")));
    }
    Ok(())
}

fn rct_mean(table: &ObservationTable, values: &Array1<f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.z == 1 {
            sum += values[i];
            count += 1.0;
        }
    }
    if count == 0.0 {
        return Err(Error::DegenerateDesign("no RCT rows".into()));
    }
    Ok(sum / count)
}

fn control_and_rct_means(table: &ObservationTable, values: &Array1<f64>) -> Result<(f64, f64)> {
    let mut ic_sum = 0.0;
    let mut ic_n = 0.0;
    let mut rct_sum = 0.0;
    let mut rct_n = 0.0;
    for (i, r) in table.rows().iter().enumerate() {
        if r.z == 1 {
            rct_sum += values[i];
            rct_n += 1.0;
            if r.a == 0 {
                ic_sum += values[i];
                ic_n += 1.0;
            }
        }
    }
    if ic_n == 0.0 {
        return Err(Error::NoInternalControls);
    }
    Ok((ic_sum / ic_n, rct_sum / rct_n))
}
