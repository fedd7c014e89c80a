//! Small dense linear algebra helpers.
//!
//! The systems in this crate are tiny (a handful of regression coefficients
//! plus a few scalar blocks), so plain partial-pivot elimination is all we
//! need. No BLAS/LAPACK dependency.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Solves `A x = b` by LU with partial pivoting. Errors on (near-)singular A.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let x = solve_many(a, &column_matrix(b))?;
    Ok(x.column(0).to_owned())
}

/// Solves `A X = B` for a matrix right-hand side.
pub fn solve_many(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "matrix must be square");
    assert_eq!(b.nrows(), n, "right-hand side rows must match");
    let m = b.ncols();

    let mut lu = a.clone();
    let mut rhs = b.clone();

    for col in 0..n {
        let mut piv = col;
        let mut max = lu[[col, col]].abs();
        for r in (col + 1)..n {
            let v = lu[[r, col]].abs();
            if v > max {
                max = v;
                piv = r;
            }
        }
        if !max.is_finite() || max == 0.0 {
            return Err(Error::SingularDesign);
        }
        if piv != col {
            for j in 0..n {
                lu.swap([col, j], [piv, j]);
            }
            for j in 0..m {
                rhs.swap([col, j], [piv, j]);
            }
        }
        let d = lu[[col, col]];
        for r in (col + 1)..n {
            let f = lu[[r, col]] / d;
            if f == 0.0 {
                continue;
            }
            for j in (col + 1)..n {
                lu[[r, j]] -= f * lu[[col, j]];
            }
            for j in 0..m {
                rhs[[r, j]] -= f * rhs[[col, j]];
            }
        }
    }

    // Back substitution.
    let mut x = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        for r in (0..n).rev() {
            let mut s = rhs[[r, j]];
            for k in (r + 1)..n {
                s -= lu[[r, k]] * x[[k, j]];
            }
            x[[r, j]] = s / lu[[r, r]];
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign);
    }
    Ok(x)
}

/// Inverse of a square matrix.
pub fn inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    solve_many(a, &Array2::eye(a.nrows()))
}

/// Rank check of a symmetric PSD Gram matrix via pivoted Cholesky.
///
/// Returns an error if any pivot falls below `rel_tol` times the largest
/// initial diagonal entry, i.e. the matrix is numerically rank deficient.
pub fn check_full_rank_gram(gram: &Array2<f64>, rel_tol: f64) -> Result<()> {
    let n = gram.nrows();
    let mut g = gram.clone();
    let max_diag = (0..n).map(|i| g[[i, i]]).fold(0.0_f64, f64::max);
    if !(max_diag.is_finite()) || max_diag <= 0.0 {
        return Err(Error::SingularDesign);
    }
    let threshold = rel_tol * max_diag;
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        // Pick the largest remaining diagonal as pivot.
        let piv = (k..n)
            .max_by(|x, y| g[[perm[*x], perm[*x]]].total_cmp(&g[[perm[*y], perm[*y]]]))
            .unwrap();
        perm.swap(k, piv);
        let p = perm[k];
        let d = g[[p, p]];
        if !(d.is_finite()) || d <= threshold {
            return Err(Error::SingularDesign);
        }
        let rest: Vec<usize> = perm[(k + 1)..].to_vec();
        for &r in &rest {
            let l = g[[r, p]] / d;
            for &c in &rest {
                let v = l * g[[c, p]];
                g[[r, c]] -= v;
            }
        }
    }
    Ok(())
}

/// True if the symmetric matrix is positive semidefinite up to `tol`
/// (checked by pivoted elimination allowing pivots down to `-tol`).
pub fn is_psd(sym: &Array2<f64>, tol: f64) -> bool {
    let n = sym.nrows();
    let mut g = sym.clone();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let (idx, &p) = active
            .iter()
            .enumerate()
            .max_by(|x, y| g[[*x.1, *x.1]].total_cmp(&g[[*y.1, *y.1]]))
            .unwrap();
        let d = g[[p, p]];
        if !d.is_finite() || d < -tol {
            return false;
        }
        active.swap_remove(idx);
        if d <= tol {
            // Remaining block must be ~zero on its diagonal.
            continue;
        }
        for &r in &active {
            let l = g[[r, p]] / d;
            for &c in &active {
                let v = l * g[[c, p]];
                g[[r, c]] -= v;
            }
        }
    }
    true
}

fn column_matrix(v: &Array1<f64>) -> Array2<f64> {
    let n = v.len();
    Array2::from_shape_fn((n, 1), |(i, _)| v[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn test_solve_roundtrip() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, -1.0], [0.5, -1.0, 2.0]];
        let b = array![1.0, -2.0, 0.25];
        let x = solve(&a, &b).unwrap();
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn test_solve_singular() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![1.0, 2.0];
        assert!(matches!(solve(&a, &b), Err(Error::SingularDesign)));
    }

    #[test]
    fn test_inverse() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let inv = inverse(&a).unwrap();
        let id = a.dot(&inv);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-14);
        assert!(id[[0, 1]].abs() < 1e-14);
    }

    #[test]
    fn test_rank_check_detects_collinearity() {
        // Gram of a design with a duplicated column.
        let a = array![[2.0, 2.0], [2.0, 2.0]];
        assert!(check_full_rank_gram(&a, 1e-12).is_err());
        let b = array![[2.0, 0.5], [0.5, 1.0]];
        assert!(check_full_rank_gram(&b, 1e-12).is_ok());
    }

    #[test]
    fn test_psd_check() {
        let psd = array![[1.0, 0.9], [0.9, 1.0]];
        assert!(is_psd(&psd, 1e-12));
        let indef = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(!is_psd(&indef, 1e-12));
        let zero = Array2::<f64>::zeros((3, 3));
        assert!(is_psd(&zero, 1e-12));
    }
}
