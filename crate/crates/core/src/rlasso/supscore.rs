use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bootstrap::sup_norm_draws;
use crate::error::{Error, Result};
use crate::simkit::{MultiplierKind, RngStream};
use crate::stats::order_stat_quantile;

/// Joint significance test of all slopes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupScoreResult {
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub num_boot: usize,
    pub alpha: f64,
    pub reject: bool,
}

/// `S = ‖√n E_n[(y − ȳ) x]‖∞` calibrated by a Gaussian multiplier bootstrap.
///
/// With `studentize`, columns are first scaled to unit `E_n[x²]`.
pub fn sup_score_test(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    num_boot: usize,
    alpha: f64,
    studentize: bool,
    stream: RngStream,
) -> Result<SupScoreResult> {
    const OP: &str = "sup_score_test";
    let (n, p) = x.shape();
    if n < 2 || p == 0 {
        return Err(Error::invalid(OP, "need n >= 2 and at least one column"));
    }
    if y.len() != n {
        return Err(Error::invalid(OP, "outcome length differs from row count"));
    }
    if num_boot == 0 {
        return Err(Error::invalid(OP, "num_boot must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(OP, "alpha must lie in (0, 1)"));
    }
    let nf = n as f64;
    let e = y.add_scalar(-y.mean());
    // m_ij = (y_i − ȳ) x̃_ij / √n, so S = ‖Σ_i m_i‖∞ and S* = ‖Σ_i m_i g_i‖∞
    let mut m = x.clone();
    if studentize {
        for (j, mut col) in m.column_iter_mut().enumerate() {
            let s = (col.norm_squared() / nf).sqrt();
            if !(s > 0.0) {
                return Err(Error::invalid(OP, format!("column {j} is all zeros")));
            }
            col.unscale_mut(s);
        }
    }
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= e[i] / nf.sqrt();
    }
    let statistic = m.row_sum().amax();
    let mut draws = sup_norm_draws(&m, num_boot, MultiplierKind::Normal, stream);
    let exceed = draws.iter().filter(|&&s| s >= statistic).count();
    let critical_value = order_stat_quantile(&mut draws, 1.0 - alpha);
    Ok(SupScoreResult {
        statistic,
        critical_value,
        p_value: (exceed + 1) as f64 / (num_boot + 1) as f64,
        num_boot,
        alpha,
        reject: statistic > critical_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_outcome_never_rejects() {
        let x = DMatrix::from_fn(30, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = DVector::from_element(30, 3.0);
        let r = sup_score_test(&x, &y, 200, 0.05, true, RngStream::new(1, 0)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.reject);
        assert!(r.p_value >= 1.0 / 201.0);
    }
}
