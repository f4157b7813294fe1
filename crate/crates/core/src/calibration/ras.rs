//! Matrix balancing by alternating row and column scaling (RAS).

use nalgebra::DMatrix;

use crate::error::CalibrationError;

pub const MARGINAL_TOL: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 100_000;

/// Fits a nonnegative matrix with the given row and column sums on the
/// support `adjacency` (diagonal ignored), starting from ones on the support.
///
/// Rows and columns with a zero marginal are dropped from the support.
pub fn reconstruct_interbank(
    row_sums: &[f64],
    col_sums: &[f64],
    adjacency: &[Vec<bool>],
) -> Result<DMatrix<f64>, CalibrationError> {
    let n = row_sums.len();
    if col_sums.len() != n || adjacency.len() != n || adjacency.iter().any(|r| r.len() != n) {
        return Err(CalibrationError::Infeasible(format!(
            "marginals and adjacency must all have dimension {n}"
        )));
    }
    for (what, sums) in [("row", row_sums), ("column", col_sums)] {
        if let Some(i) = sums.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(CalibrationError::Infeasible(format!(
                "{what} marginal {i} is {}",
                sums[i]
            )));
        }
    }
    let rows: f64 = row_sums.iter().sum();
    let cols: f64 = col_sums.iter().sum();
    if (rows - cols).abs() > 1e-6 * rows.max(cols) {
        return Err(CalibrationError::Marginals { rows, cols });
    }

    let support = |i: usize, j: usize| {
        i != j && adjacency[i][j] && row_sums[i] > 0.0 && col_sums[j] > 0.0
    };
    let mut x = DMatrix::from_fn(n, n, |i, j| if support(i, j) { 1.0 } else { 0.0 });
    check_support(row_sums, col_sums, &x)?;

    let mut error = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        for i in 0..n {
            let s: f64 = x.row(i).sum();
            if s > 0.0 {
                let f = row_sums[i] / s;
                x.row_mut(i).scale_mut(f);
            }
        }
        for j in 0..n {
            let s: f64 = x.column(j).sum();
            if s > 0.0 {
                let f = col_sums[j] / s;
                x.column_mut(j).scale_mut(f);
            }
        }
        error = marginal_error(&x, row_sums, col_sums);
        if error <= MARGINAL_TOL {
            return Ok(x);
        }
    }
    Err(CalibrationError::NoConvergence {
        sweeps: MAX_SWEEPS,
        error,
    })
}

/// Largest relative deviation of the row and column sums from their targets.
pub fn marginal_error(x: &DMatrix<f64>, row_sums: &[f64], col_sums: &[f64]) -> f64 {
    let rel = |got: f64, want: f64| {
        if want > 0.0 {
            (got - want).abs() / want
        } else {
            got.abs()
        }
    };
    let r = (0..x.nrows()).map(|i| rel(x.row(i).sum(), row_sums[i]));
    let c = (0..x.ncols()).map(|j| rel(x.column(j).sum(), col_sums[j]));
    r.chain(c).fold(0.0, f64::max)
}

fn check_support(
    row_sums: &[f64],
    col_sums: &[f64],
    x: &DMatrix<f64>,
) -> Result<(), CalibrationError> {
    let n = row_sums.len();
    let row_cells: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| x[(i, j)] > 0.0).collect())
        .collect();
    let col_cells: Vec<Vec<usize>> = (0..n)
        .map(|j| (0..n).filter(|&i| x[(i, j)] > 0.0).collect())
        .collect();
    for i in 0..n {
        if row_sums[i] > 0.0 && row_cells[i].is_empty() {
            return Err(CalibrationError::Infeasible(format!(
                "bank {i} owes {} but has no creditor in the support",
                row_sums[i]
            )));
        }
        if col_sums[i] > 0.0 && col_cells[i].is_empty() {
            return Err(CalibrationError::Infeasible(format!(
                "bank {i} is owed {} but has no debtor in the support",
                col_sums[i]
            )));
        }
    }
    // A row with a single cell forces that entry, which its column must be
    // able to absorb, and symmetrically for columns.
    let slack = |a: f64, b: f64| a > b * (1.0 + MARGINAL_TOL) + f64::MIN_POSITIVE;
    for i in 0..n {
        if let [j] = row_cells[i][..] {
            if slack(row_sums[i], col_sums[j])
                || (col_cells[j].len() == 1 && slack(col_sums[j], row_sums[i]))
            {
                return Err(CalibrationError::Infeasible(format!(
                    "bank {i} can only owe bank {j}: liability {} vs claim {}",
                    row_sums[i], col_sums[j]
                )));
            }
        }
    }
    for j in 0..n {
        if let [i] = col_cells[j][..] {
            if slack(col_sums[j], row_sums[i]) {
                return Err(CalibrationError::Infeasible(format!(
                    "bank {j} can only be owed by bank {i}: claim {} vs liability {}",
                    col_sums[j], row_sums[i]
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complete(n: usize) -> Vec<Vec<bool>> {
        (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect()
    }

    #[test]
    fn two_banks_forced() {
        let x = reconstruct_interbank(&[1.0, 1.0], &[1.0, 1.0], &complete(2)).unwrap();
        assert_eq!(x[(0, 1)], 1.0);
        assert_eq!(x[(1, 0)], 1.0);
        assert_eq!(x[(0, 0)], 0.0);
    }

    #[test]
    fn ring_feasibility() {
        let ring: Vec<Vec<bool>> = (0..4).map(|i| (0..4).map(|j| j == (i + 1) % 4).collect()).collect();
        let rows = [1.0, 2.0, 3.0, 4.0];
        let cols = [4.0, 1.0, 2.0, 3.0];
        let x = reconstruct_interbank(&rows, &cols, &ring).unwrap();
        for i in 0..4 {
            assert!((x[(i, (i + 1) % 4)] - rows[i]).abs() < 1e-12);
        }
        let err = reconstruct_interbank(&rows, &[1.0, 4.0, 2.0, 3.0], &ring).unwrap_err();
        assert!(matches!(err, CalibrationError::Infeasible(_)), "{err}");
    }

    #[test]
    fn empty_support_is_infeasible() {
        let mut adj = complete(3);
        adj[0] = vec![false; 3];
        let err = reconstruct_interbank(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &adj).unwrap_err();
        assert!(matches!(err, CalibrationError::Infeasible(_)));
    }

    #[test]
    fn mismatched_totals_rejected() {
        let err = reconstruct_interbank(&[1.0, 1.0], &[1.0, 2.0], &complete(2)).unwrap_err();
        assert!(matches!(err, CalibrationError::Marginals { .. }));
    }

    #[test]
    fn zero_marginals_are_excluded() {
        let (rows, cols) = ([1.0, 0.0, 2.0, 1.0], [2.0, 1.0, 0.0, 1.0]);
        let x = reconstruct_interbank(&rows, &cols, &complete(4)).unwrap();
        assert_eq!(x.row(1).sum(), 0.0);
        assert_eq!(x.column(2).sum(), 0.0);
        assert!(marginal_error(&x, &rows, &cols) < 1e-9);
    }
}
