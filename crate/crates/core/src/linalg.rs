//! Dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares solution.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// The design was rank deficient (or wider than tall) and the
    /// minimum-norm pseudoinverse solution was returned instead.
    pub rank_deficient: bool,
}

const RANK_TOL: f64 = 1e-10;

/// Least squares of `y` on the columns of `x` (no implicit intercept).
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let (n, k) = x.shape();
    if k == 0 {
        return LeastSquares {
            coefficients: DVector::zeros(0),
            residuals: y.clone(),
            rank_deficient: false,
        };
    }
    if n >= k {
        let qr = x.clone().qr();
        let r = qr.r();
        let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        let diag_min = (0..k).map(|i| r[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if diag_max > 0.0 && diag_min > RANK_TOL * diag_max {
            let qty = qr.q().transpose() * y;
            if let Some(coef) = r.solve_upper_triangular(&qty) {
                let residuals = y - x * &coef;
                return LeastSquares { coefficients: coef, residuals, rank_deficient: false };
            }
        }
    }
    let svd = x.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let coef = svd
        .solve(y, RANK_TOL * max_sv.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DVector::zeros(k));
    let residuals = y - x * &coef;
    LeastSquares { coefficients: coef, residuals, rank_deficient: true }
}

/// Columns of `x` listed in `idx`, in that order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), idx.len(), |i, j| x[(i, idx[j])])
}

/// Rows of `x` listed in `idx`.
pub fn select_rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Horizontal concatenation.
pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks.first().map_or(0, |b| b.nrows());
    let k: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, k);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), n, "row mismatch in hstack");
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// Appends a column of ones.
pub fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let ones = DMatrix::from_element(x.nrows(), 1, 1.0);
    hstack(&[x, &ones])
}

/// Column means and the centered matrix.
pub fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let mut centered = x.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    (centered, means)
}

/// `E_n[x_j²]` for every column.
pub fn column_mean_squares(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.norm_squared() / n))
}

/// Heteroskedasticity-consistent covariance flavour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum HcKind {
    #[default]
    Hc0,
    /// HC0 scaled by `n / (n - k)`.
    Hc1,
}

/// Sandwich covariance `(X'X)⁻¹ X' diag(e²) X (X'X)⁻¹`.
///
/// Returns `None` when `X'X` is singular.
pub fn hc_covariance(x: &DMatrix<f64>, residuals: &DVector<f64>, kind: HcKind) -> Option<DMatrix<f64>> {
    let (n, k) = x.shape();
    let bread = (x.transpose() * x).try_inverse()?;
    let mut scaled = x.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= residuals[i];
    }
    let meat = scaled.transpose() * &scaled;
    let mut cov = &bread * meat * &bread;
    if kind == HcKind::Hc1 && n > k {
        cov *= n as f64 / (n - k) as f64;
    }
    Some(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let ls = least_squares(&x, &y);
        assert!(!ls.rank_deficient);
        assert!((ls.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((ls.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(ls.residuals.amax() < 1e-12);
    }

    #[test]
    fn collinear_columns_fall_back_to_pseudoinverse() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let ls = least_squares(&x, &y);
        assert!(ls.rank_deficient);
        // minimum-norm solution splits weight 1:2
        assert!((ls.coefficients[0] - 0.2).abs() < 1e-10);
        assert!((ls.coefficients[1] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn hc0_matches_hand_computation_for_single_regressor() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let e = DVector::from_vec(vec![0.5, -1.0, 0.25]);
        let cov = hc_covariance(&x, &e, HcKind::Hc0).unwrap();
        let expected = (0.25 * 1.0 + 1.0 * 4.0 + 0.0625 * 9.0) / 14.0f64.powi(2);
        assert!((cov[(0, 0)] - expected).abs() < 1e-15);
    }
}
