//! Design matrix construction from named covariates and transformations.
//!
//! Working-model correctness is a property of the supplied columns, so
//! "correct" vs "incorrect" models are expressed purely as column
//! specifications: which base covariates enter, which are square-root
//! transformed, and which squared/interaction terms are appended.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::ObservationTable;

/// Columns of a regression design, before the implicit leading intercept.
///
/// Base covariates listed in `sqrt` enter as `sqrt(value)`; `square` and
/// `interact` terms are built from the transformed base values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignSpec {
    /// Base covariate names, in order.
    pub columns: Vec<String>,
    /// Subset of `columns` to square-root transform.
    pub sqrt: Vec<String>,
    /// Squared terms to append, named by base column.
    pub square: Vec<String>,
    /// Interaction (product) terms to append, as pairs of base columns.
    pub interact: Vec<(String, String)>,
}

impl DesignSpec {
    /// A spec with plain base columns only.
    pub fn plain(columns: &[&str]) -> Self {
        DesignSpec {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    /// Column labels including the leading intercept.
    pub fn labels(&self) -> Vec<String> {
        let mut out = vec!["(intercept)".to_string()];
        for c in &self.columns {
            if self.sqrt.iter().any(|s| s == c) {
                out.push(format!("sqrt({c})"));
            } else {
                out.push(c.clone());
            }
        }
        for c in &self.square {
            out.push(format!("{}^2", self.base_label(c)));
        }
        for (a, b) in &self.interact {
            out.push(format!("{}:{}", self.base_label(a), self.base_label(b)));
        }
        out
    }

    fn base_label(&self, c: &str) -> String {
        if self.sqrt.iter().any(|s| s == c) {
            format!("sqrt({c})")
        } else {
            c.to_string()
        }
    }

    /// Number of columns including the intercept.
    pub fn width(&self) -> usize {
        1 + self.columns.len() + self.square.len() + self.interact.len()
    }

    /// Materializes the design matrix (leading ones column first) for
    /// `table`, resolving names against `covariate_names`.
    pub fn build(&self, table: &ObservationTable, covariate_names: &[String]) -> Result<Array2<f64>> {
        let index_of = |name: &str| -> Result<usize> {
            covariate_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Config(format!("unknown covariate column '{name}'")))
        };
        for name in self.sqrt.iter().chain(self.square.iter()) {
            if !self.columns.iter().any(|c| c == name) {
                return Err(Error::Config(format!(
                    "transformed column '{name}' is not among the base columns"
                )));
            }
        }
        for (a, b) in &self.interact {
            for name in [a, b] {
                if !self.columns.iter().any(|c| c == name) {
                    return Err(Error::Config(format!(
                        "interaction column '{name}' is not among the base columns"
                    )));
                }
            }
        }

        let base_idx: Vec<usize> = self
            .columns
            .iter()
            .map(|c| index_of(c))
            .collect::<Result<_>>()?;
        let sqrt_mask: Vec<bool> = self
            .columns
            .iter()
            .map(|c| self.sqrt.iter().any(|s| s == c))
            .collect();
        let square_pos: Vec<usize> = self
            .square
            .iter()
            .map(|c| self.columns.iter().position(|b| b == c).unwrap())
            .collect();
        let interact_pos: Vec<(usize, usize)> = self
            .interact
            .iter()
            .map(|(a, b)| {
                (
                    self.columns.iter().position(|c| c == a).unwrap(),
                    self.columns.iter().position(|c| c == b).unwrap(),
                )
            })
            .collect();

        let n = table.n();
        let width = self.width();
        let mut design = Array2::<f64>::zeros((n, width));
        for (i, row) in table.rows().iter().enumerate() {
            design[[i, 0]] = 1.0;
            let mut bases = Vec::with_capacity(base_idx.len());
            for (k, &ci) in base_idx.iter().enumerate() {
                let raw = row.x[ci];
                let v = if sqrt_mask[k] {
                    if raw < 0.0 {
                        return Err(Error::NumericalDomain(format!(
                            "sqrt transform of negative value {raw} in column '{}' (row {i})",
                            self.columns[k]
                        )));
                    }
                    raw.sqrt()
                } else {
                    raw
                };
                bases.push(v);
                design[[i, 1 + k]] = v;
            }
            let mut col = 1 + base_idx.len();
            for &p in &square_pos {
                design[[i, col]] = bases[p] * bases[p];
                col += 1;
            }
            for &(pa, pb) in &interact_pos {
                design[[i, col]] = bases[pa] * bases[pb];
                col += 1;
            }
        }
        Ok(design)
    }
}
