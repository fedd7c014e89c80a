//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Criteria 1 and 2 run a 500-replication smoke tier by default; the full
//! 10^4-replication tier runs under `--ignored`:
//!
//! ```text
//! cargo test --release --test acceptance -- --ignored --nocapture
//! ```

use std::sync::OnceLock;

use hybridctl::cli::{self, config::AnalysisConfig, csv_io::NamedTable, report::AnalysisReport};
use hybridctl::estimators::{self, estimate_point, Designs, Mu0Kind};
use hybridctl::inference::{
    bootstrap_ses, bread_fd_relative_error, stacked_sandwich, variance_augmentation,
    variance_gcomputation, variance_rct_only, variance_weighted_regression, BlockSpec,
    BootstrapOptions, InfluenceSpec, VarianceReport,
};
use hybridctl::model::{
    expit, EffectScale, LinkFamily, ObservationRow, ObservationTable,
};
use hybridctl::simulation::{
    generate_dataset, run_monte_carlo, standard_method_grid, true_values, CovariateSetting,
    ModelSpec, MonteCarloSummary, OutcomeType, Scenario,
};
use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------------
// Frozen reference values for the standard one-covariate study design.
// Row order matches `standard_method_grid()`; components are (mu1, mu0, delta).
// ---------------------------------------------------------------------------

type Row3 = [f64; 3];

const REF_BIAS_SD_CONTINUOUS: [(Row3, Row3); 12] = [
    ([0.002, -0.001, 0.002], [0.124, 0.180, 0.219]),
    ([0.001, 0.001, 0.000], [0.117, 0.155, 0.173]),
    ([-0.002, -0.004, 0.002], [0.124, 0.183, 0.219]),
    ([0.002, 0.300, -0.299], [0.124, 0.131, 0.180]),
    ([0.002, -0.001, 0.003], [0.124, 0.119, 0.161]),
    ([0.002, 0.359, -0.357], [0.124, 0.183, 0.221]),
    ([0.001, 0.000, 0.000], [0.117, 0.110, 0.135]),
    ([-0.002, 0.269, -0.271], [0.124, 0.140, 0.186]),
    ([0.001, 0.000, 0.000], [0.117, 0.110, 0.134]),
    ([0.001, 0.000, 0.001], [0.117, 0.111, 0.135]),
    ([-0.002, -0.005, 0.003], [0.124, 0.117, 0.158]),
    ([-0.002, 0.292, -0.294], [0.124, 0.140, 0.184]),
];

const REF_BIAS_SD_BINARY: [(Row3, Row3); 12] = [
    ([0.000, 0.001, -0.001], [0.049, 0.071, 0.085]),
    ([0.000, 0.001, -0.001], [0.048, 0.069, 0.082]),
    ([-0.001, 0.000, -0.001], [0.049, 0.071, 0.085]),
    ([0.000, 0.044, -0.044], [0.049, 0.043, 0.064]),
    ([0.000, 0.001, -0.001], [0.049, 0.046, 0.066]),
    ([0.000, 0.050, -0.050], [0.049, 0.044, 0.065]),
    ([0.000, 0.001, -0.001], [0.048, 0.046, 0.065]),
    ([-0.001, 0.041, -0.042], [0.049, 0.045, 0.066]),
    ([0.000, 0.000, 0.000], [0.048, 0.045, 0.065]),
    ([0.000, 0.000, 0.000], [0.048, 0.046, 0.065]),
    ([0.000, -0.001, 0.001], [0.049, 0.046, 0.067]),
    ([0.000, 0.041, -0.042], [0.049, 0.045, 0.066]),
];

/// Coverage reference values, in `standard_method_grid()` order for the
/// eight model-based cells (aug x2, gc x2, wr x4).
const REF_COVERAGE_CONTINUOUS: [Row3; 8] = [
    [0.946, 0.946, 0.945],
    [0.946, 0.940, 0.946],
    [0.946, 0.948, 0.948],
    [0.946, 0.507, 0.687],
    [0.946, 0.949, 0.947],
    [0.946, 0.948, 0.949],
    [0.946, 0.931, 0.957],
    [0.946, 0.428, 0.639],
];

const REF_COVERAGE_BINARY: [Row3; 8] = [
    [0.944, 0.940, 0.947],
    [0.947, 0.940, 0.947],
    [0.944, 0.947, 0.950],
    [0.947, 0.845, 0.904],
    [0.944, 0.948, 0.947],
    [0.944, 0.944, 0.947],
    [0.945, 0.944, 0.948],
    [0.945, 0.846, 0.903],
];

const SMOKE_REPS: usize = 500;
const FULL_REPS: usize = 10_000;
const MC_SEED: u64 = 20_260_810;

fn smoke_summary(outcome: OutcomeType) -> &'static MonteCarloSummary {
    static CONT: OnceLock<MonteCarloSummary> = OnceLock::new();
    static BIN: OnceLock<MonteCarloSummary> = OnceLock::new();
    let cell = match outcome {
        OutcomeType::Continuous => &CONT,
        OutcomeType::Binary => &BIN,
    };
    cell.get_or_init(|| {
        let sc = Scenario::defaults(CovariateSetting::One, outcome);
        run_monte_carlo(&sc, &standard_method_grid(), SMOKE_REPS, MC_SEED).unwrap()
    })
}

fn full_summary(outcome: OutcomeType) -> &'static MonteCarloSummary {
    static CONT: OnceLock<MonteCarloSummary> = OnceLock::new();
    static BIN: OnceLock<MonteCarloSummary> = OnceLock::new();
    let cell = match outcome {
        OutcomeType::Continuous => &CONT,
        OutcomeType::Binary => &BIN,
    };
    cell.get_or_init(|| {
        let sc = Scenario::defaults(CovariateSetting::One, outcome);
        run_monte_carlo(&sc, &standard_method_grid(), FULL_REPS, MC_SEED).unwrap()
    })
}

fn check_bias_sd(summary: &MonteCarloSummary, targets: &[(Row3, Row3); 12], smoke: bool, label: &str) {
    let reps = summary.reps as f64;
    for (cell, (bias_t, sd_t)) in summary.cells.iter().zip(targets.iter()) {
        for k in 0..3 {
            let bias = cell.bias[k].unwrap();
            let sd = cell.sd[k].unwrap();
            let bias_tol = if smoke {
                0.02
            } else {
                3.0 * sd / reps.sqrt() + 0.002
            };
            let sd_tol = if smoke { 0.15 } else { 0.05 };
            assert!(
                (bias - bias_t[k]).abs() <= bias_tol,
                "{label} {} component {k}: bias {bias:.4} vs reference {} (tol {bias_tol:.4})",
                cell.method.label(),
                bias_t[k]
            );
            assert!(
                (sd / sd_t[k] - 1.0).abs() <= sd_tol,
                "{label} {} component {k}: sd {sd:.4} vs reference {} (tol {:.0}%)",
                cell.method.label(),
                sd_t[k],
                sd_tol * 100.0
            );
        }
    }
}

fn check_coverage(summary: &MonteCarloSummary, targets: &[Row3; 8], smoke: bool, label: &str) {
    let reps = summary.reps as f64;
    let covered_cells: Vec<_> = summary
        .cells
        .iter()
        .filter(|c| c.method.has_analytic_se() && c.method.kind != Mu0Kind::RctOnly)
        .collect();
    assert_eq!(covered_cells.len(), 8);
    for (cell, target) in covered_cells.iter().zip(targets.iter()) {
        for (k, &t) in target.iter().enumerate() {
            let cov = cell.coverage[k].unwrap();
            // The mis-specification failure signatures get the wider band.
            let base_tol = if t < 0.9 { 0.02 } else { 0.012 };
            let tol = if smoke {
                base_tol + 3.0 * (t * (1.0 - t) / reps).sqrt()
            } else {
                base_tol
            };
            assert!(
                (cov - t).abs() <= tol,
                "{label} {} component {k}: coverage {cov:.4} vs reference {t} (tol {tol:.4})",
                cell.method.label()
            );
        }
    }
}

#[test]
fn criterion_1_bias_sd_smoke() {
    check_bias_sd(
        smoke_summary(OutcomeType::Continuous),
        &REF_BIAS_SD_CONTINUOUS,
        true,
        "continuous",
    );
    check_bias_sd(
        smoke_summary(OutcomeType::Binary),
        &REF_BIAS_SD_BINARY,
        true,
        "binary",
    );
    println!(
        "criterion 1 PASS (smoke tier): one-covariate bias/SD cells within +/-0.02 and 15% of the reference values at {SMOKE_REPS} reps"
    );
}

#[test]
#[ignore = "full tier: run with --ignored (about a minute in release mode)"]
fn criterion_1_bias_sd_full() {
    check_bias_sd(
        full_summary(OutcomeType::Continuous),
        &REF_BIAS_SD_CONTINUOUS,
        false,
        "continuous",
    );
    check_bias_sd(
        full_summary(OutcomeType::Binary),
        &REF_BIAS_SD_BINARY,
        false,
        "binary",
    );
    println!(
        "criterion 1 PASS (full tier): one-covariate bias within 3 MC SEs + 0.002 and SD within 5% at {FULL_REPS} reps"
    );
}

#[test]
fn criterion_2_coverage_smoke() {
    check_coverage(
        smoke_summary(OutcomeType::Continuous),
        &REF_COVERAGE_CONTINUOUS,
        true,
        "continuous",
    );
    check_coverage(
        smoke_summary(OutcomeType::Binary),
        &REF_COVERAGE_BINARY,
        true,
        "binary",
    );
    println!(
        "criterion 2 PASS (smoke tier): coverage cells within widened Monte Carlo bands at {SMOKE_REPS} reps"
    );
}

#[test]
#[ignore = "full tier: run with --ignored (about a minute in release mode)"]
fn criterion_2_coverage_full() {
    check_coverage(
        full_summary(OutcomeType::Continuous),
        &REF_COVERAGE_CONTINUOUS,
        false,
        "continuous",
    );
    check_coverage(
        full_summary(OutcomeType::Binary),
        &REF_COVERAGE_BINARY,
        false,
        "binary",
    );
    println!(
        "criterion 2 PASS (full tier): coverage within +/-0.012 (failure signatures within +/-0.02) at {FULL_REPS} reps"
    );
}

#[test]
fn criterion_3_true_value_quadrature() {
    for cov in [CovariateSetting::One, CovariateSetting::Two] {
        let sc = Scenario::defaults(cov, OutcomeType::Continuous);
        let (mu1, mu0, delta) = true_values(&sc).unwrap();
        assert_eq!((mu1, mu0, delta), (0.5, 0.0, 0.5));
    }
    let one = true_values(&Scenario::defaults(CovariateSetting::One, OutcomeType::Binary)).unwrap();
    for (got, want) in [(one.0, 0.604), (one.1, 0.488), (one.2, 0.116)] {
        assert!((got - want).abs() < 1e-3, "one-covariate: {got} vs {want}");
    }
    let two = true_values(&Scenario::defaults(CovariateSetting::Two, OutcomeType::Binary)).unwrap();
    for (got, want) in [(two.0, 0.600), (two.1, 0.491), (two.2, 0.109)] {
        assert!((got - want).abs() < 1e-3, "two-covariate: {got} vs {want}");
    }
    println!(
        "criterion 3 PASS: binary truths within 1e-3 of (0.604,0.488,0.116)/(0.600,0.491,0.109); continuous exactly (0.5,0,0.5)"
    );
}

/// A small random hybrid table plus linear designs, for identity-link checks.
fn small_table(seed: u64, binary: bool) -> (ObservationTable, Array2<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let (n_ext, n_ic, n_tr) = if binary { (30, 20, 30) } else { (20, 15, 20) };
    let push = |z: u8, a: u8, rng: &mut ChaCha12Rng| {
        let shift = if z == 0 { -0.4 } else { 0.0 };
        let x = shift + rng.sample::<f64, _>(StandardNormal);
        let y = if binary {
            (rng.random::<f64>() < expit(0.2 + 0.4 * x + 0.3 * a as f64)) as u8 as f64
        } else {
            0.3 * a as f64 + 0.5 * x + 0.2 * x * x + rng.sample::<f64, _>(StandardNormal)
        };
        ObservationRow::new(z, a, y, vec![x])
    };
    for _ in 0..n_ext {
        let r = push(0, 0, &mut rng);
        rows.push(r);
    }
    for _ in 0..n_ic {
        let r = push(1, 0, &mut rng);
        rows.push(r);
    }
    for _ in 0..n_tr {
        let r = push(1, 1, &mut rng);
        rows.push(r);
    }
    let table = ObservationTable::new(rows).unwrap();
    let design = Array2::from_shape_fn((table.n(), 2), |(i, j)| {
        if j == 0 {
            1.0
        } else {
            table.rows()[i].x[0]
        }
    });
    (table, design)
}

#[test]
fn criterion_4_w_zero_estimator_identity() {
    let mut checked = 0;
    for seed in 0..200_u64 {
        let binary = seed % 10 == 9;
        let (table, design) = small_table(seed, binary);
        let link = if binary {
            LinkFamily::Logit
        } else {
            LinkFamily::Identity
        };
        let (aug, _) = estimators::mu0_augmentation(&table, 0.0, &design, link).unwrap();
        let (gc, _) = estimators::mu0_gcomputation(&table, 0.0, &design, link).unwrap();
        let (wr, _, _) =
            estimators::mu0_weighted_regression(&table, 0.0, &design, &design, link).unwrap();
        assert!(
            (aug - gc).abs() <= 1e-8,
            "seed {seed}: |aug-gc| = {:e}",
            (aug - gc).abs()
        );
        assert!(
            (gc - wr).abs() <= 1e-8,
            "seed {seed}: |gc-wr| = {:e}",
            (gc - wr).abs()
        );
        checked += 1;
    }
    assert_eq!(checked, 200);
    println!("criterion 4 PASS: w=0 gives |aug-gc| <= 1e-8 and |gc-wr| <= 1e-8 on 200 random tables");
}

#[test]
fn criterion_5_double_robustness_large_n() {
    let sc = Scenario {
        n_external: 40_000,
        n_rct: 60_000,
        ..Scenario::defaults(CovariateSetting::One, OutcomeType::Continuous)
    };
    let table = generate_dataset(&sc, 31).unwrap();
    let names = sc.covariates.names();
    let d = |or: ModelSpec, ps: ModelSpec| Designs {
        or_control: Some(sc.covariates.or_design(or).build(&table, &names).unwrap()),
        or_treated: Some(sc.covariates.or_design(or).build(&table, &names).unwrap()),
        ps: Some(sc.covariates.ps_design(ps).build(&table, &names).unwrap()),
        or_cols: vec![],
        ps_cols: vec![],
    };
    let truth = 0.0;

    // Weighted regression stays consistent when either model is correct.
    for (or, ps, tag) in [
        (ModelSpec::Incorrect, ModelSpec::Correct, "wrong OR, correct PS"),
        (ModelSpec::Correct, ModelSpec::Incorrect, "correct OR, wrong PS"),
    ] {
        let designs = d(or, ps);
        let est = estimate_point(
            &table,
            Mu0Kind::WeightedRegression,
            sc.w,
            &designs,
            LinkFamily::Identity,
            EffectScale::Difference,
        )
        .unwrap();
        let rep = variance_weighted_regression(&table, &est).unwrap();
        assert!(
            (est.mu0 - truth).abs() <= 3.0 * rep.se_mu0,
            "wr ({tag}): mu0 {} with se {}",
            est.mu0,
            rep.se_mu0
        );
    }

    // Augmentation stays consistent under the wrong OR model, and
    // G-computation under the correct one.
    {
        let designs = d(ModelSpec::Incorrect, ModelSpec::Correct);
        let est = estimate_point(
            &table,
            Mu0Kind::Augmentation,
            sc.w,
            &designs,
            LinkFamily::Identity,
            EffectScale::Difference,
        )
        .unwrap();
        let rep = variance_augmentation(&table, &est).unwrap();
        assert!(
            (est.mu0 - truth).abs() <= 3.0 * rep.se_mu0,
            "aug (wrong OR): mu0 {} with se {}",
            est.mu0,
            rep.se_mu0
        );
        let designs = d(ModelSpec::Correct, ModelSpec::Correct);
        let est = estimate_point(
            &table,
            Mu0Kind::GComputation,
            sc.w,
            &designs,
            LinkFamily::Identity,
            EffectScale::Difference,
        )
        .unwrap();
        let rep = variance_gcomputation(&table, &est).unwrap();
        assert!(
            (est.mu0 - truth).abs() <= 3.0 * rep.se_mu0,
            "gc (correct OR): mu0 {} with se {}",
            est.mu0,
            rep.se_mu0
        );
    }

    // G-computation under the wrong OR model fails the same check with
    // bias near 0.27.
    let designs = d(ModelSpec::Incorrect, ModelSpec::Correct);
    let est = estimate_point(
        &table,
        Mu0Kind::GComputation,
        sc.w,
        &designs,
        LinkFamily::Identity,
        EffectScale::Difference,
    )
    .unwrap();
    let rep = variance_gcomputation(&table, &est).unwrap();
    assert!(
        (est.mu0 - truth).abs() > 3.0 * rep.se_mu0,
        "gc (wrong OR) unexpectedly consistent: mu0 {} se {}",
        est.mu0,
        rep.se_mu0
    );
    assert!(
        (est.mu0 - 0.27).abs() < 0.05,
        "gc (wrong OR): bias {} not near 0.27",
        est.mu0
    );
    println!(
        "criterion 5 PASS: at n=10^5, wr within 3 analytic SEs of truth under one wrong model; gc biased {:.3} under the wrong OR",
        est.mu0
    );
}

/// 250-row study tables in the simulation layout.
fn study_table(seed: u64, outcome: OutcomeType) -> (ObservationTable, Designs, LinkFamily) {
    let sc = Scenario::defaults(CovariateSetting::One, outcome);
    let table = generate_dataset(&sc, seed).unwrap();
    let names = sc.covariates.names();
    let or = sc
        .covariates
        .or_design(ModelSpec::Correct)
        .build(&table, &names)
        .unwrap();
    let ps = sc
        .covariates
        .ps_design(ModelSpec::Correct)
        .build(&table, &names)
        .unwrap();
    let designs = Designs {
        or_control: Some(or.clone()),
        or_treated: Some(or),
        ps: Some(ps),
        or_cols: vec![],
        ps_cols: vec![],
    };
    (table, designs, sc.link())
}

#[test]
fn criterion_6_analytic_se_vs_bootstrap_oracle() {
    let cases = [
        (101_u64, OutcomeType::Continuous),
        (102, OutcomeType::Continuous),
        (103, OutcomeType::Continuous),
        (104, OutcomeType::Binary),
        (105, OutcomeType::Binary),
    ];
    for (seed, outcome) in cases {
        let (table, designs, link) = study_table(seed, outcome);
        for kind in [
            Mu0Kind::Augmentation,
            Mu0Kind::GComputation,
            Mu0Kind::WeightedRegression,
        ] {
            let est =
                estimate_point(&table, kind, 0.5, &designs, link, EffectScale::Difference)
                    .unwrap();
            let rep: VarianceReport = match kind {
                Mu0Kind::Augmentation => variance_augmentation(&table, &est).unwrap(),
                Mu0Kind::GComputation => variance_gcomputation(&table, &est).unwrap(),
                _ => variance_weighted_regression(&table, &est).unwrap(),
            };

            let estimator = move |t: &ObservationTable| {
                // Rebuild the (1, x, x^2) designs on the resampled rows.
                let quad = Array2::from_shape_fn((t.n(), 3), |(i, j)| match j {
                    0 => 1.0,
                    1 => t.rows()[i].x[0],
                    _ => t.rows()[i].x[0] * t.rows()[i].x[0],
                });
                let d = Designs {
                    or_control: Some(quad.clone()),
                    or_treated: Some(quad.clone()),
                    ps: Some(quad),
                    or_cols: vec![],
                    ps_cols: vec![],
                };
                let e = estimate_point(t, kind, 0.5, &d, link, EffectScale::Difference)?;
                Ok(vec![e.mu1, e.mu0, e.delta])
            };
            let opts = BootstrapOptions {
                samples: 2000,
                seed: seed ^ 0xb001,
                ..Default::default()
            };
            let (boot, _) = bootstrap_ses(&table, &estimator, 3, &opts).unwrap();
            let analytic = [rep.se_mu1, rep.se_mu0, rep.se_delta];
            let labels = ["mu1", "mu0", "delta"];
            for k in 0..3 {
                let ratio = analytic[k] / boot[k];
                assert!(
                    (ratio - 1.0).abs() <= 0.15,
                    "seed {seed} {:?} {} {}: analytic {} vs bootstrap {} (ratio {ratio:.3})",
                    outcome,
                    kind.name(),
                    labels[k],
                    analytic[k],
                    boot[k]
                );
            }
        }
    }
    println!(
        "criterion 6 PASS: every aug/gc/wr analytic SE within 15% of a 2000-resample stratified bootstrap on 5 fixed tables"
    );
}

#[test]
fn criterion_7_numerical_hygiene() {
    let (table, designs, link) = study_table(7, OutcomeType::Continuous);
    let (btable, bdesigns, blink) = study_table(8, OutcomeType::Binary);

    // Sandwich breads match central finite differences to 1e-5 relative.
    for (t, d, l) in [(&table, &designs, link), (&btable, &bdesigns, blink)] {
        for kind in [
            Mu0Kind::RctOnly,
            Mu0Kind::Augmentation,
            Mu0Kind::GComputation,
            Mu0Kind::WeightedRegression,
        ] {
            let est = estimate_point(t, kind, 0.5, d, l, EffectScale::Difference).unwrap();
            let err = bread_fd_relative_error(t, &est).unwrap();
            assert!(err <= 1e-5, "{}: bread FD error {err:e}", kind.name());
        }
    }

    // GLM score norm at convergence.
    let n = table.n() as f64;
    let est = estimate_point(
        &table,
        Mu0Kind::WeightedRegression,
        0.5,
        &designs,
        link,
        EffectScale::Difference,
    )
    .unwrap();
    let m0 = est.fits.m0.as_ref().unwrap();
    assert!(m0.max_score_norm <= 1e-10 * n);
    let ps = est.fits.ps.as_ref().unwrap();
    assert!(ps.max_score_norm <= 1e-10 * n);

    // Sandwich covariance symmetric PSD: the (mu1, mu0) block of every
    // method report, plus a full stacked system through the public API.
    for kind in [
        Mu0Kind::RctOnly,
        Mu0Kind::Augmentation,
        Mu0Kind::GComputation,
        Mu0Kind::WeightedRegression,
    ] {
        let est = estimate_point(&btable, kind, 0.5, &bdesigns, blink, EffectScale::Difference)
            .unwrap();
        let rep = match kind {
            Mu0Kind::RctOnly => variance_rct_only(&btable, &est).unwrap(),
            Mu0Kind::Augmentation => variance_augmentation(&btable, &est).unwrap(),
            Mu0Kind::GComputation => variance_gcomputation(&btable, &est).unwrap(),
            _ => variance_weighted_regression(&btable, &est).unwrap(),
        };
        assert_eq!(rep.cov[[0, 1]], rep.cov[[1, 0]]);
        assert!(hybridctl::linalg::is_psd(&rep.cov, 1e-16));
    }

    let y: Array1<f64> = table.rows().iter().map(|r| r.y).collect();
    let mean = y.mean().unwrap();
    let spec = InfluenceSpec::new(
        vec![BlockSpec::new("mu", 1)],
        ndarray::array![mean],
        |theta: &Array1<f64>| {
            Array2::from_shape_fn((y.len(), 1), |(i, _)| y[i] - theta[0])
        },
        |_: &Array1<f64>| ndarray::array![[1.0]],
    );
    let s = stacked_sandwich(&spec).unwrap();
    assert!(hybridctl::linalg::is_psd(&s.covariance, 1e-16));

    println!(
        "criterion 7 PASS: sandwich breads match finite differences to 1e-5, GLM scores below 1e-10*n, covariances symmetric PSD"
    );
}

#[test]
fn criterion_8_simulate_determinism_across_workers() {
    let sc = Scenario::defaults(CovariateSetting::One, OutcomeType::Binary);
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (workers, dir) in [(1usize, &dirs[0]), (4, &dirs[1])] {
        let summary = cli::simulate_scenario(&sc, 200, 99, Some(workers)).unwrap();
        cli::write_simulation_outputs(dir.path(), &summary).unwrap();
    }
    for file in ["bias_sd.csv", "coverage.csv", "bias_sd.txt", "coverage.txt"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between worker counts");
    }

    // The emitted CSV round-trips the in-memory summary bit for bit.
    let summary = cli::simulate_scenario(&sc, 200, 99, Some(2)).unwrap();
    let text = std::fs::read_to_string(dirs[0].path().join("bias_sd.csv")).unwrap();
    for (line, cell) in text.lines().skip(1).zip(summary.cells.iter()) {
        let fields: Vec<&str> = line.split(',').collect();
        for k in 0..3 {
            let bias: f64 = fields[5 + k].parse().unwrap();
            let sd: f64 = fields[8 + k].parse().unwrap();
            assert_eq!(bias.to_bits(), cell.bias[k].unwrap().to_bits());
            assert_eq!(sd.to_bits(), cell.sd[k].unwrap().to_bits());
        }
    }
    println!("criterion 8 PASS: simulate outputs byte-identical across 1 and 4 workers and CSV round-trips the summary");
}

/// Synthetic dataset shaped like an HIV treatment trial: covariates
/// (age, race, cd4), binary failure outcome, 404 external + 193 RCT rows.
fn hiv_shaped_csv() -> String {
    let mut rng = ChaCha12Rng::seed_from_u64(2026);
    let mut out = String::from("z,a,y,age,race,cd4\n");
    let mut push_row = |z: u8, a: u8, rng: &mut ChaCha12Rng| {
        let age = 30.0 + 8.0 * rng.sample::<f64, _>(StandardNormal);
        let race = (rng.random::<f64>() < 0.75) as u8 as f64;
        let base = if z == 1 { 330.0 } else { 300.0 };
        let cd4 = (base + 90.0 * rng.sample::<f64, _>(StandardNormal)).max(25.0);
        let p = expit(-3.1 + 0.012 * (age - 35.0) - 0.25 * race - 0.06 * (cd4.sqrt() - 18.0))
            + if a == 1 { -0.02 } else { 0.0 };
        let y = (rng.random::<f64>() < p.clamp(0.005, 0.6)) as u8;
        out.push_str(&format!("{z},{a},{y},{age},{race},{cd4}\n"));
    };
    for _ in 0..404 {
        push_row(0, 0, &mut rng);
    }
    for i in 0..193 {
        push_row(1, (i % 2) as u8, &mut rng);
    }
    out
}

fn hiv_config_toml() -> &'static str {
    r#"
methods = ["rct_only", "augmentation", "unadjusted", "ps_weighting", "g_computation", "weighted_regression"]
w_values = [0.1, 0.25, 0.5]
effect_scale = "difference"
link = "identity"
ci_level = 0.95

[or_model]
columns = ["age", "race", "cd4"]
sqrt = ["cd4"]
interact = ["age:race", "age:cd4", "race:cd4"]

[or_model_treated]
columns = ["age", "race", "cd4"]
sqrt = ["cd4"]

[ps_model]
columns = ["age", "race", "cd4"]
sqrt = ["cd4"]
square = ["age", "cd4"]
interact = ["age:race", "age:cd4", "race:cd4"]

[bootstrap]
enabled = true
samples = 1000
seed = 17
"#
}

#[test]
fn criterion_9_analysis_pathway_hiv_shape() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("hiv_shape.csv");
    let config_path = dir.path().join("analysis.toml");
    std::fs::write(&data_path, hiv_shaped_csv()).unwrap();
    std::fs::write(config_path.as_path(), hiv_config_toml()).unwrap();

    // Library pathway.
    let named: NamedTable = cli::read_table(&data_path).unwrap();
    let cfg = AnalysisConfig::from_toml(hiv_config_toml()).unwrap();
    let outcome = cli::run_analysis(&named, &cfg, None, None).unwrap();
    assert!(
        outcome.failed_cells.is_empty(),
        "failed cells: {:?}",
        outcome.failed_cells
    );
    // Table 4 shape: rct_only once + 5 methods x 3 weights.
    assert_eq!(outcome.report.rows.len(), 16);
    for r in &outcome.report.rows {
        assert!(r.error.is_none());
        assert!(r.se_delta.unwrap() > 0.0);
        assert!(r.ci_lo.unwrap() < r.ci_hi.unwrap());
    }

    // CLI pathway: same inputs through the binary.
    let out_dir = dir.path().join("out");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_hybridctl"))
        .args([
            "analyze",
            "--data",
            data_path.to_str().unwrap(),
            "--config",
            config_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv_text = std::fs::read_to_string(out_dir.join("estimates.csv")).unwrap();
    let parsed = AnalysisReport::from_csv_str(&csv_text, 0.95).unwrap();
    assert_eq!(parsed.rows.len(), 16);
    assert!(out_dir.join("estimates.txt").exists());

    // Exact ACTG value reproduction only applies when the user supplies the
    // public trial data (z,a,y,age,race,cd4 CSV).
    match std::env::var("HYBRIDCTL_ACTG_DATA") {
        Ok(path) => {
            let named = cli::read_table(std::path::Path::new(&path)).unwrap();
            let out = cli::run_analysis(&named, &cfg, None, None).unwrap();
            let rct = out
                .report
                .rows
                .iter()
                .find(|r| r.method == "rct_only")
                .unwrap();
            let delta = rct.delta.unwrap();
            let se = rct.se_delta.unwrap();
            assert!((delta + 0.030).abs() < 0.0055, "rct-only delta {delta}");
            assert!((se - 0.035).abs() < 0.0055, "rct-only se {se}");
            println!("criterion 9 PASS: ACTG data reproduced rct-only delta {delta:.3} (se {se:.3})");
        }
        Err(_) => {
            println!(
                "criterion 9 PASS: analyze pathway emits 16-row report with bootstrap SEs; ACTG value check skipped (set HYBRIDCTL_ACTG_DATA to run it)"
            );
        }
    }
}
