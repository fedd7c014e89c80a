//! Analytic variance estimation (stacked M-estimation sandwiches and a
//! direct influence-expression plug-in for augmentation), bootstrap
//! standard errors, and Wald confidence intervals.

mod bootstrap;
mod sandwich;
mod stacks;

pub use bootstrap::{bootstrap_se, bootstrap_ses, BootstrapOptions, BootstrapSe};
pub use sandwich::{stacked_sandwich, BlockSpec, InfluenceSpec, StackedSandwich};
pub use stacks::{
    bread_fd_relative_error, variance_augmentation, variance_augmentation_plugin,
    variance_gcomputation, variance_rct_only, variance_weighted_regression,
};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::estimators::Mu0Kind;
use crate::model::EffectScale;

/// Standard errors and the joint (mu1, mu0) covariance for one method.
#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub se_mu1: f64,
    pub se_mu0: f64,
    pub se_delta: f64,
    /// 2x2 covariance of (mu1_hat, mu0_hat) on the mean scale.
    pub cov: Array2<f64>,
    pub method: Mu0Kind,
    /// How the report was produced: "stacked_sandwich" or "plugin".
    pub se_kind: &'static str,
}

impl VarianceReport {
    /// Assembles a report from the (mu1, mu0) covariance, applying the delta
    /// method on the requested effect scale.
    pub fn from_cov(
        cov: Array2<f64>,
        mu1: f64,
        mu0: f64,
        scale: EffectScale,
        method: Mu0Kind,
        se_kind: &'static str,
    ) -> Result<Self> {
        let v11 = cov[[0, 0]];
        let v10 = cov[[0, 1]];
        let v00 = cov[[1, 1]];
        let g1 = scale.g_dot(mu1)?;
        let g0 = scale.g_dot(mu0)?;
        let var_delta = g1 * g1 * v11 - 2.0 * g1 * g0 * v10 + g0 * g0 * v00;
        Ok(VarianceReport {
            se_mu1: v11.max(0.0).sqrt(),
            se_mu0: v00.max(0.0).sqrt(),
            se_delta: var_delta.max(0.0).sqrt(),
            cov,
            method,
            se_kind,
        })
    }
}

/// Two-sided Wald interval `est +/- z_{(1+level)/2} * se`.
pub fn wald_ci(est: f64, se: f64, level: f64) -> Result<(f64, f64)> {
    if level <= 0.0 || level >= 1.0 {
        return Err(Error::Config(format!(
            "confidence level must lie in (0,1), got {level}"
        )));
    }
    if se < 0.0 {
        return Err(Error::Config(format!("standard error must be >= 0, got {se}")));
    }
    let z = normal_quantile((1.0 + level) / 2.0);
    Ok((est - z * se, est + z * se))
}

/// Standard normal quantile via the AS241 rational approximation
/// (absolute error well below 1e-9 across the open unit interval).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile defined on (0,1), got {p}");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * rational(r, &A_NUM, &A_DEN);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        rational(r, &C_NUM, &C_DEN)
    } else {
        r -= 5.0;
        rational(r, &E_NUM, &E_DEN)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn rational(r: f64, num: &[f64; 8], den: &[f64; 8]) -> f64 {
    let mut n = num[7];
    let mut d = den[7];
    for k in (0..7).rev() {
        n = n * r + num[k];
        d = d * r + den[k];
    }
    n / d
}

#[allow(clippy::excessive_precision)]
const A_NUM: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946_1e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
#[allow(clippy::excessive_precision)]
const A_DEN: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545_5e3,
];
#[allow(clippy::excessive_precision)]
const C_NUM: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
#[allow(clippy::excessive_precision)]
const C_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_8,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
#[allow(clippy::excessive_precision)]
const E_NUM: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_9e-1,
    2.653_218_952_657_612_3e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
#[allow(clippy::excessive_precision)]
const E_DEN: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];
