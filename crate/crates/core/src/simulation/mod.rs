//! Monte Carlo engine: scenarios, data generation, and bias / standard
//! deviation / coverage summaries over replicated studies.
//!
//! Replicates are independent tasks seeded by (master seed, replicate
//! index), so summaries are bit-identical for any worker count.

mod dgp;

pub use dgp::{gauss_hermite, generate_dataset, true_values};

use rayon::prelude::*;

use crate::design::DesignSpec;
use crate::error::{Error, Result};
use crate::estimators::{estimate, Designs, Mu0Kind, Mu0Method, PointEstimates};
use crate::inference::{
    variance_augmentation, variance_gcomputation, variance_rct_only,
    variance_weighted_regression, wald_ci, VarianceReport,
};
use crate::model::{EffectScale, LinkFamily, ObservationTable};
use crate::rng::substream_seed;

/// Purpose tag for per-replicate seeds.
pub const PURPOSE_REPLICATE: u64 = 0x7265_706c; // "repl"

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateSetting {
    One,
    Two,
}

impl CovariateSetting {
    pub fn dim(self) -> usize {
        match self {
            CovariateSetting::One => 1,
            CovariateSetting::Two => 2,
        }
    }

    pub fn names(self) -> Vec<String> {
        match self {
            CovariateSetting::One => vec!["x1".into()],
            CovariateSetting::Two => vec!["x1".into(), "x2".into()],
        }
    }

    /// Outcome-regression design columns: the correct model carries the
    /// quadratic (and, with two covariates, interaction) terms of the DGP;
    /// the incorrect one omits them.
    pub fn or_design(self, spec: ModelSpec) -> DesignSpec {
        match (self, spec) {
            (CovariateSetting::One, ModelSpec::Correct) => DesignSpec {
                columns: vec!["x1".into()],
                square: vec!["x1".into()],
                ..Default::default()
            },
            (CovariateSetting::One, ModelSpec::Incorrect) => DesignSpec::plain(&["x1"]),
            (CovariateSetting::Two, ModelSpec::Correct) => DesignSpec {
                columns: vec!["x1".into(), "x2".into()],
                square: vec!["x2".into()],
                interact: vec![("x1".into(), "x2".into())],
                ..Default::default()
            },
            (CovariateSetting::Two, ModelSpec::Incorrect) => DesignSpec::plain(&["x1", "x2"]),
        }
    }

    /// Propensity design columns: the correct model carries the quadratic
    /// terms implied by the Gaussian location-scale shift.
    pub fn ps_design(self, spec: ModelSpec) -> DesignSpec {
        match (self, spec) {
            (CovariateSetting::One, ModelSpec::Correct) => DesignSpec {
                columns: vec!["x1".into()],
                square: vec!["x1".into()],
                ..Default::default()
            },
            (CovariateSetting::One, ModelSpec::Incorrect) => DesignSpec::plain(&["x1"]),
            (CovariateSetting::Two, ModelSpec::Correct) => DesignSpec {
                columns: vec!["x1".into(), "x2".into()],
                square: vec!["x1".into(), "x2".into()],
                ..Default::default()
            },
            (CovariateSetting::Two, ModelSpec::Incorrect) => DesignSpec::plain(&["x1", "x2"]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeType {
    Binary,
    Continuous,
}

impl OutcomeType {
    pub fn link(self) -> LinkFamily {
        match self {
            OutcomeType::Binary => LinkFamily::Logit,
            OutcomeType::Continuous => LinkFamily::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    Correct,
    Incorrect,
}

impl ModelSpec {
    pub fn name(self) -> &'static str {
        match self {
            ModelSpec::Correct => "correct",
            ModelSpec::Incorrect => "incorrect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    /// Fixed arm sizes via random permutation.
    Exact,
    /// Independent Bernoulli assignment at the allocation fraction.
    Bernoulli,
}

/// Simulation scenario (arm sizes, covariate laws, borrowing weight,
/// default working-model specs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub covariates: CovariateSetting,
    pub outcome: OutcomeType,
    pub n_external: usize,
    pub n_rct: usize,
    pub alloc_treated: u32,
    pub alloc_control: u32,
    pub allocation: Allocation,
    pub w: f64,
    pub or_spec: ModelSpec,
    pub ps_spec: ModelSpec,
    pub rct_cov_mean: f64,
    pub rct_cov_sd: f64,
    pub ext_cov_mean: f64,
    pub ext_cov_sd: f64,
}

impl Scenario {
    /// The study layout used throughout: 100 external, 150 RCT subjects in
    /// a 2:1 allocation, w = 1/2, shifted wider external covariate law.
    pub fn defaults(covariates: CovariateSetting, outcome: OutcomeType) -> Self {
        Scenario {
            covariates,
            outcome,
            n_external: 100,
            n_rct: 150,
            alloc_treated: 2,
            alloc_control: 1,
            allocation: Allocation::Exact,
            w: 0.5,
            or_spec: ModelSpec::Correct,
            ps_spec: ModelSpec::Correct,
            rct_cov_mean: 0.0,
            rct_cov_sd: 1.0,
            ext_cov_mean: -0.5,
            ext_cov_sd: 1.5,
        }
    }

    pub fn link(&self) -> LinkFamily {
        self.outcome.link()
    }
}

/// One estimation cell of the summary tables: a method plus the
/// correctness of the working models it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub kind: Mu0Kind,
    pub or_spec: Option<ModelSpec>,
    pub ps_spec: Option<ModelSpec>,
}

impl MethodSpec {
    pub fn new(kind: Mu0Kind, or_spec: Option<ModelSpec>, ps_spec: Option<ModelSpec>) -> Self {
        MethodSpec {
            kind,
            or_spec,
            ps_spec,
        }
    }

    pub fn label(&self) -> String {
        let mut s = self.kind.name().to_string();
        if let Some(or) = self.or_spec {
            s.push_str(&format!(" or={}", or.name()));
        }
        if let Some(ps) = self.ps_spec {
            s.push_str(&format!(" ps={}", ps.name()));
        }
        s
    }

    /// Whether an analytic variance (and hence coverage) is available.
    pub fn has_analytic_se(&self) -> bool {
        matches!(
            self.kind,
            Mu0Kind::RctOnly
                | Mu0Kind::Augmentation
                | Mu0Kind::GComputation
                | Mu0Kind::WeightedRegression
        )
    }
}

/// The standard twelve-cell method grid: every estimator crossed with
/// the correct/incorrect working models it uses.
pub fn standard_method_grid() -> Vec<MethodSpec> {
    use ModelSpec::*;
    use Mu0Kind::*;
    vec![
        MethodSpec::new(RctOnly, None, None),
        MethodSpec::new(Augmentation, Some(Correct), None),
        MethodSpec::new(Augmentation, Some(Incorrect), None),
        MethodSpec::new(Unadjusted, None, None),
        MethodSpec::new(PsWeighting, None, Some(Correct)),
        MethodSpec::new(PsWeighting, None, Some(Incorrect)),
        MethodSpec::new(GComputation, Some(Correct), None),
        MethodSpec::new(GComputation, Some(Incorrect), None),
        MethodSpec::new(WeightedRegression, Some(Correct), Some(Correct)),
        MethodSpec::new(WeightedRegression, Some(Correct), Some(Incorrect)),
        MethodSpec::new(WeightedRegression, Some(Incorrect), Some(Correct)),
        MethodSpec::new(WeightedRegression, Some(Incorrect), Some(Incorrect)),
    ]
}

/// Per-cell Monte Carlo summary. Components are ordered (mu1, mu0, delta).
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub method: MethodSpec,
    pub reps_used: usize,
    pub failures: usize,
    pub bias: [Option<f64>; 3],
    pub sd: [Option<f64>; 3],
    pub coverage: [Option<f64>; 3],
    pub mc_se_bias: [Option<f64>; 3],
    pub mc_se_sd: [Option<f64>; 3],
    pub mc_se_coverage: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub truths: [f64; 3],
    pub reps: usize,
    pub seed: u64,
    pub ci_level: f64,
    pub cells: Vec<CellSummary>,
}

struct CellDraw {
    est: [f64; 3],
    covered: Option<[bool; 3]>,
}

/// Runs `reps` replications of `sc`, fitting every requested method, and
/// summarizes bias, SD, and (for methods with analytic SEs) the coverage
/// of 95% Wald intervals. Replication failures are counted per cell, and a
/// cell erroring on more than 1% of replications aborts the run.
pub fn run_monte_carlo(
    sc: &Scenario,
    methods: &[MethodSpec],
    reps: usize,
    seed: u64,
) -> Result<MonteCarloSummary> {
    sc.validate()?;
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    let (mu1_true, mu0_true, delta_true) = true_values(sc)?;
    let truths = [mu1_true, mu0_true, delta_true];
    let ci_level = 0.95;
    let names = sc.covariates.names();
    let link = sc.link();

    let draws: Vec<Vec<Option<CellDraw>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = substream_seed(seed, rep as u64, PURPOSE_REPLICATE);
            let table = match generate_dataset(sc, rep_seed) {
                Ok(t) => t,
                Err(_) => return vec![],
            };
            methods
                .iter()
                .map(|m| run_cell(&table, sc, m, &names, link, truths, ci_level).ok())
                .collect()
        })
        .collect();

    let mut cells = Vec::with_capacity(methods.len());
    for (ci, method) in methods.iter().enumerate() {
        let cell_draws: Vec<&CellDraw> = draws
            .iter()
            .filter_map(|rep| rep.get(ci).and_then(|c| c.as_ref()))
            .collect();
        let failures = reps - cell_draws.len();
        if failures as f64 > 0.01 * reps as f64 {
            return Err(Error::TooManyFailures {
                cell: method.label(),
                failures,
                reps,
            });
        }
        cells.push(summarize_cell(*method, &cell_draws, failures, truths, reps));
    }

    Ok(MonteCarloSummary {
        truths,
        reps,
        seed,
        ci_level,
        cells,
    })
}

fn run_cell(
    table: &ObservationTable,
    sc: &Scenario,
    method: &MethodSpec,
    names: &[String],
    link: LinkFamily,
    truths: [f64; 3],
    ci_level: f64,
) -> Result<CellDraw> {
    let mut designs = Designs::default();
    if let Some(or) = method.or_spec {
        let spec = sc.covariates.or_design(or);
        let d = spec.build(table, names)?;
        designs.or_cols = spec.labels();
        designs.or_control = Some(d.clone());
        designs.or_treated = Some(d);
    }
    if let Some(ps) = method.ps_spec {
        let spec = sc.covariates.ps_design(ps);
        designs.ps = Some(spec.build(table, names)?);
        designs.ps_cols = spec.labels();
    }
    let m = Mu0Method::new(method.kind, sc.w)?
        .with_columns(designs.or_cols.clone(), designs.ps_cols.clone());
    let est = estimate(table, &m, &designs, link, EffectScale::Difference)?;
    let report = analytic_report(table, &est)?;
    let covered = match report {
        Some(rep) => {
            let ses = [rep.se_mu1, rep.se_mu0, rep.se_delta];
            let ests = [est.mu1, est.mu0, est.delta];
            let mut hits = [false; 3];
            for k in 0..3 {
                let (lo, hi) = wald_ci(ests[k], ses[k], ci_level)?;
                hits[k] = lo <= truths[k] && truths[k] <= hi;
            }
            Some(hits)
        }
        None => None,
    };
    Ok(CellDraw {
        est: [est.mu1, est.mu0, est.delta],
        covered,
    })
}

fn analytic_report(
    table: &ObservationTable,
    est: &PointEstimates,
) -> Result<Option<VarianceReport>> {
    let report = match est.mu0_kind {
        Mu0Kind::RctOnly => Some(variance_rct_only(table, est)?),
        Mu0Kind::Augmentation => Some(variance_augmentation(table, est)?),
        Mu0Kind::GComputation => Some(variance_gcomputation(table, est)?),
        Mu0Kind::WeightedRegression => Some(variance_weighted_regression(table, est)?),
        _ => None,
    };
    Ok(report)
}

fn summarize_cell(
    method: MethodSpec,
    draws: &[&CellDraw],
    failures: usize,
    truths: [f64; 3],
    _reps: usize,
) -> CellSummary {
    let r = draws.len();
    let rf = r as f64;
    let mut bias = [None; 3];
    let mut sd = [None; 3];
    let mut coverage = [None; 3];
    let mut mc_se_bias = [None; 3];
    let mut mc_se_sd = [None; 3];
    let mut mc_se_coverage = [None; 3];

    for k in 0..3 {
        if r == 0 {
            continue;
        }
        let mean = draws.iter().map(|d| d.est[k]).sum::<f64>() / rf;
        bias[k] = Some(mean - truths[k]);
        if r >= 2 {
            let ss = draws
                .iter()
                .map(|d| (d.est[k] - mean) * (d.est[k] - mean))
                .sum::<f64>();
            let s = (ss / (rf - 1.0)).sqrt();
            sd[k] = Some(s);
            mc_se_bias[k] = Some(s / rf.sqrt());
            mc_se_sd[k] = Some(s / (2.0 * (rf - 1.0)).sqrt());
        }
        if method.has_analytic_se() {
            let hits = draws
                .iter()
                .filter(|d| d.covered.map(|c| c[k]).unwrap_or(false))
                .count();
            let p = hits as f64 / rf;
            coverage[k] = Some(p);
            mc_se_coverage[k] = Some((p * (1.0 - p) / rf).sqrt());
        }
    }

    CellSummary {
        method,
        reps_used: r,
        failures,
        bias,
        sd,
        coverage,
        mc_se_bias,
        mc_se_sd,
        mc_se_coverage,
    }
}
