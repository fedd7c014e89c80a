//! Report types and emission: machine-readable CSVs with full-precision
//! numbers, human-readable aligned tables at six significant digits.

use crate::error::{Error, Result};
use crate::simulation::MonteCarloSummary;

/// One (method, w) cell of an analysis report. Failed cells carry the
/// error text and empty numeric fields.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub method: String,
    pub w: Option<f64>,
    pub mu1: Option<f64>,
    pub se_mu1: Option<f64>,
    pub mu0: Option<f64>,
    pub se_mu0: Option<f64>,
    pub delta: Option<f64>,
    pub se_delta: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub rows: Vec<AnalysisRow>,
    pub ci_level: f64,
}

const ANALYSIS_HEADER: &str = "method,w,mu1,se_mu1,mu0,se_mu0,delta,se_delta,ci_lo,ci_hi,error";

impl AnalysisReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(ANALYSIS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fields = [
                r.method.clone(),
                opt(r.w),
                opt(r.mu1),
                opt(r.se_mu1),
                opt(r.mu0),
                opt(r.se_mu0),
                opt(r.delta),
                opt(r.se_delta),
                opt(r.ci_lo),
                opt(r.ci_hi),
                r.error.clone().unwrap_or_default().replace(',', ";"),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses an emitted CSV back into a report (round-trip check support).
    pub fn from_csv_str(text: &str, ci_level: f64) -> Result<AnalysisReport> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != ANALYSIS_HEADER {
            return Err(Error::parse("analysis csv", format!("unexpected header '{header}'")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.splitn(11, ',').collect();
            if parts.len() != 11 {
                return Err(Error::parse(
                    format!("analysis csv line {}", i + 2),
                    "wrong field count",
                ));
            }
            let num = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::parse(format!("analysis csv line {}", i + 2), e.to_string()))
                }
            };
            rows.push(AnalysisRow {
                method: parts[0].to_string(),
                w: num(parts[1])?,
                mu1: num(parts[2])?,
                se_mu1: num(parts[3])?,
                mu0: num(parts[4])?,
                se_mu0: num(parts[5])?,
                delta: num(parts[6])?,
                se_delta: num(parts[7])?,
                ci_lo: num(parts[8])?,
                ci_hi: num(parts[9])?,
                error: if parts[10].is_empty() {
                    None
                } else {
                    Some(parts[10].to_string())
                },
            });
        }
        Ok(AnalysisReport { rows, ci_level })
    }

    pub fn to_text_table(&self) -> String {
        let mut out = format!(
            "Point estimates (standard errors); {:.0}% Wald CI for delta\n",
            self.ci_level * 100.0
        );
        out.push_str(&format!(
            "{:<20} {:>6} {:>22} {:>22} {:>22} {:>24}\n",
            "method", "w", "mu1 (se)", "mu0 (se)", "delta (se)", "ci"
        ));
        for r in &self.rows {
            if let Some(err) = &r.error {
                out.push_str(&format!(
                    "{:<20} {:>6} ERROR: {}\n",
                    r.method,
                    r.w.map(|w| format_sig(w, 6)).unwrap_or_default(),
                    err
                ));
                continue;
            }
            let pair = |v: Option<f64>, se: Option<f64>| {
                format!(
                    "{} ({})",
                    v.map(|x| format_sig(x, 6)).unwrap_or_default(),
                    se.map(|x| format_sig(x, 6)).unwrap_or_default()
                )
            };
            out.push_str(&format!(
                "{:<20} {:>6} {:>22} {:>22} {:>22} {:>24}\n",
                r.method,
                r.w.map(|w| format_sig(w, 6)).unwrap_or_default(),
                pair(r.mu1, r.se_mu1),
                pair(r.mu0, r.se_mu0),
                pair(r.delta, r.se_delta),
                format!(
                    "({}, {})",
                    r.ci_lo.map(|x| format_sig(x, 6)).unwrap_or_default(),
                    r.ci_hi.map(|x| format_sig(x, 6)).unwrap_or_default()
                ),
            ));
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

fn opt3(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Point-estimation summary (bias and SD per cell) as CSV, with Monte
/// Carlo standard errors.
pub fn bias_sd_csv(s: &MonteCarloSummary) -> String {
    let mut out = String::from(
        "method,or_spec,ps_spec,reps_used,failures,\
         bias_mu1,bias_mu0,bias_delta,sd_mu1,sd_mu0,sd_delta,\
         mcse_bias_mu1,mcse_bias_mu0,mcse_bias_delta,mcse_sd_mu1,mcse_sd_mu0,mcse_sd_delta\n",
    );
    for c in &s.cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.method.kind.name(),
            c.method.or_spec.map(|m| m.name()).unwrap_or(""),
            c.method.ps_spec.map(|m| m.name()).unwrap_or(""),
            c.reps_used,
            c.failures,
            opt3(c.bias[0]),
            opt3(c.bias[1]),
            opt3(c.bias[2]),
            opt3(c.sd[0]),
            opt3(c.sd[1]),
            opt3(c.sd[2]),
            opt3(c.mc_se_bias[0]),
            opt3(c.mc_se_bias[1]),
            opt3(c.mc_se_bias[2]),
            opt3(c.mc_se_sd[0]),
            opt3(c.mc_se_sd[1]),
            opt3(c.mc_se_sd[2]),
        ));
    }
    out
}

/// Interval-estimation summary (coverage per cell) as CSV; methods with
/// analytic SEs only.
pub fn coverage_csv(s: &MonteCarloSummary) -> String {
    let mut out = String::from(
        "method,or_spec,ps_spec,reps_used,\
         coverage_mu1,coverage_mu0,coverage_delta,\
         mcse_coverage_mu1,mcse_coverage_mu0,mcse_coverage_delta\n",
    );
    for c in &s.cells {
        if !c.method.has_analytic_se() || c.method.kind == crate::estimators::Mu0Kind::RctOnly {
            continue;
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.method.kind.name(),
            c.method.or_spec.map(|m| m.name()).unwrap_or(""),
            c.method.ps_spec.map(|m| m.name()).unwrap_or(""),
            c.reps_used,
            opt3(c.coverage[0]),
            opt3(c.coverage[1]),
            opt3(c.coverage[2]),
            opt3(c.mc_se_coverage[0]),
            opt3(c.mc_se_coverage[1]),
            opt3(c.mc_se_coverage[2]),
        ));
    }
    out
}

pub fn bias_sd_text(s: &MonteCarloSummary) -> String {
    let mut out = format!(
        "Bias and standard deviation over {} replications (seed {})\n\
         true values: mu1 = {}, mu0 = {}, delta = {}\n\n",
        s.reps,
        s.seed,
        format_sig(s.truths[0], 6),
        format_sig(s.truths[1], 6),
        format_sig(s.truths[2], 6),
    );
    out.push_str(&format!(
        "{:<22} {:>10} {:>10} {:>13} {:>13} {:>13} {:>12} {:>12} {:>12}\n",
        "method", "or", "ps", "b_mu1", "b_mu0", "b_delta", "sd_mu1", "sd_mu0", "sd_delta"
    ));
    for c in &s.cells {
        let f = |v: Option<f64>| v.map(|x| format_sig(x, 6)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<22} {:>10} {:>10} {:>13} {:>13} {:>13} {:>12} {:>12} {:>12}\n",
            c.method.kind.name(),
            c.method.or_spec.map(|m| m.name()).unwrap_or("-"),
            c.method.ps_spec.map(|m| m.name()).unwrap_or("-"),
            f(c.bias[0]),
            f(c.bias[1]),
            f(c.bias[2]),
            f(c.sd[0]),
            f(c.sd[1]),
            f(c.sd[2]),
        ));
    }
    out
}

pub fn coverage_text(s: &MonteCarloSummary) -> String {
    let mut out = format!(
        "Coverage of {:.0}% Wald intervals over {} replications (seed {})\n\n",
        s.ci_level * 100.0,
        s.reps,
        s.seed
    );
    out.push_str(&format!(
        "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "method", "or", "ps", "cov_mu1", "cov_mu0", "cov_delta"
    ));
    for c in &s.cells {
        if !c.method.has_analytic_se() || c.method.kind == crate::estimators::Mu0Kind::RctOnly {
            continue;
        }
        let f = |v: Option<f64>| v.map(|x| format_sig(x, 6)).unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<22} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
            c.method.kind.name(),
            c.method.or_spec.map(|m| m.name()).unwrap_or("-"),
            c.method.ps_spec.map(|m| m.name()).unwrap_or("-"),
            f(c.coverage[0]),
            f(c.coverage[1]),
            f(c.coverage[2]),
        ));
    }
    out
}

/// Rounds to `sig` significant digits in plain decimal notation
/// (scientific for extreme magnitudes).
pub fn format_sig(v: f64, sig: usize) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if exp >= sig as i32 + 3 || exp < -5 {
        return format!("{:.*e}", sig - 1, v);
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, v)
}
