//! Nonparametric bootstrap standard errors.
//!
//! Resampling is stratified by (z, a) cell by default, so every resample
//! preserves the design's cell counts. Each replicate draws its rows from
//! its own substream keyed by (seed, replicate, attempt), which makes the
//! result independent of the parallelism degree.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ObservationRow, ObservationTable};
use crate::rng::{substream, PURPOSE_BOOTSTRAP};

#[derive(Debug, Clone)]
pub struct BootstrapOptions {
    /// Number of bootstrap resamples.
    pub samples: usize,
    pub seed: u64,
    /// Preserve (z, a) cell counts in every resample.
    pub stratified: bool,
    /// Redraw attempts per replicate before giving up.
    pub retry_cap: usize,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            samples: 1000,
            seed: 0,
            stratified: true,
            retry_cap: 20,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BootstrapSe {
    pub se: f64,
    /// Number of resamples on which the estimator failed and was redrawn.
    pub failures: usize,
}

/// Bootstrap SE of a scalar estimator.
pub fn bootstrap_se(
    table: &ObservationTable,
    estimator: &(dyn Fn(&ObservationTable) -> Result<f64> + Sync),
    opts: &BootstrapOptions,
) -> Result<BootstrapSe> {
    let wrap = |t: &ObservationTable| estimator(t).map(|v| vec![v]);
    let (ses, failures) = bootstrap_ses(table, &wrap, 1, opts)?;
    Ok(BootstrapSe {
        se: ses[0],
        failures,
    })
}

/// Bootstrap SEs of a vector-valued estimator (componentwise sample SDs
/// over the resampled estimates).
pub fn bootstrap_ses(
    table: &ObservationTable,
    estimator: &(dyn Fn(&ObservationTable) -> Result<Vec<f64>> + Sync),
    dim: usize,
    opts: &BootstrapOptions,
) -> Result<(Vec<f64>, usize)> {
    if opts.samples == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    let cells = cell_indices(table, opts.stratified);

    let replicate = |rep: usize| -> std::result::Result<(Vec<f64>, usize), usize> {
        let mut failures = 0;
        for attempt in 0..opts.retry_cap {
            let mut rng = substream(
                opts.seed,
                rep as u64,
                PURPOSE_BOOTSTRAP.wrapping_add(attempt as u64),
            );
            let resample = resample_table(table, &cells, &mut rng);
            match estimator(&resample) {
                Ok(values) => {
                    debug_assert_eq!(values.len(), dim);
                    return Ok((values, failures));
                }
                Err(_) => failures += 1,
            }
        }
        Err(failures)
    };

    let results: Vec<std::result::Result<(Vec<f64>, usize), usize>> =
        (0..opts.samples).into_par_iter().map(replicate).collect();

    let mut estimates: Vec<Vec<f64>> = Vec::with_capacity(opts.samples);
    let mut failures = 0;
    for r in results {
        match r {
            Ok((values, f)) => {
                failures += f;
                estimates.push(values);
            }
            Err(f) => {
                return Err(Error::EstimatorFailure {
                    failures: failures + f,
                    retry_cap: opts.retry_cap,
                })
            }
        }
    }

    let b = estimates.len();
    let mut ses = vec![0.0; dim];
    if b >= 2 {
        for k in 0..dim {
            let mean = estimates.iter().map(|e| e[k]).sum::<f64>() / b as f64;
            let ss = estimates
                .iter()
                .map(|e| (e[k] - mean) * (e[k] - mean))
                .sum::<f64>();
            ses[k] = (ss / (b as f64 - 1.0)).sqrt();
        }
    }
    Ok((ses, failures))
}

/// Row indices per resampling stratum. Stratified mode uses the (z, a)
/// cells in the fixed order external, internal control, treated.
fn cell_indices(table: &ObservationTable, stratified: bool) -> Vec<Vec<usize>> {
    if !stratified {
        return vec![(0..table.n()).collect()];
    }
    let mut ext = Vec::new();
    let mut ic = Vec::new();
    let mut tr = Vec::new();
    for (i, r) in table.rows().iter().enumerate() {
        match (r.z, r.a) {
            (0, _) => ext.push(i),
            (1, 0) => ic.push(i),
            _ => tr.push(i),
        }
    }
    [ext, ic, tr].into_iter().filter(|c| !c.is_empty()).collect()
}

fn resample_table(
    table: &ObservationTable,
    cells: &[Vec<usize>],
    rng: &mut impl Rng,
) -> ObservationTable {
    let mut rows: Vec<ObservationRow> = Vec::with_capacity(table.n());
    for cell in cells {
        for _ in 0..cell.len() {
            let pick = cell[rng.random_range(0..cell.len())];
            rows.push(table.rows()[pick].clone());
        }
    }
    ObservationTable::new(rows).expect("resampled rows satisfy the original invariants")
}
