//! Data-driven penalty levels and loadings.

use nalgebra::{DMatrix, DVector};

use crate::bootstrap::sup_norm_draws;
use crate::error::{Error, Result};
use crate::simkit::{MultiplierKind, RngStream};
use crate::stats::{norm_quantile, order_stat_quantile};

fn check_common(op: &'static str, n: usize, p: usize, c: f64, gamma: f64) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::invalid(op, "n and p must be positive"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(op, "c must be positive"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid(op, "gamma must lie in (0, 1)"));
    }
    if gamma / (2.0 * p as f64) >= 1.0 {
        return Err(Error::invalid(op, "gamma/(2p) must be below 1"));
    }
    Ok(())
}

/// `2c√n σ̂ Φ⁻¹(1 − γ/(2p))`.
pub fn lambda_homoscedastic_xindep(n: usize, p: usize, sigma_hat: f64, c: f64, gamma: f64) -> Result<f64> {
    const OP: &str = "lambda_homoscedastic_xindep";
    check_common(OP, n, p, c, gamma)?;
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::invalid(OP, "sigma_hat must be positive"));
    }
    Ok(2.0 * c * (n as f64).sqrt() * sigma_hat * norm_quantile(1.0 - gamma / (2.0 * p as f64)))
}

/// `2c√n Φ⁻¹(1 − γ/(2p))`; heteroscedasticity is carried by the loadings.
pub fn lambda_heteroscedastic_xindep(n: usize, p: usize, c: f64, gamma: f64) -> Result<f64> {
    check_common("lambda_heteroscedastic_xindep", n, p, c, gamma)?;
    Ok(2.0 * c * (n as f64).sqrt() * norm_quantile(1.0 - gamma / (2.0 * p as f64)))
}

fn check_num_sim(op: &'static str, num_sim: usize) -> Result<()> {
    if num_sim == 0 {
        return Err(Error::invalid(op, "num_sim must be at least 1"));
    }
    if num_sim < 100 {
        log::warn!("{op}: num_sim={num_sim} gives a noisy quantile");
    }
    Ok(())
}

/// `2cσ̂·Λ(1−γ|X)` where `Λ` is the simulated `(1−γ)` quantile of
/// `n‖E_n[x e]‖∞` with `e` iid standard normal.
pub fn lambda_homoscedastic_xdep(
    x: &DMatrix<f64>,
    sigma_hat: f64,
    c: f64,
    gamma: f64,
    num_sim: usize,
    stream: RngStream,
) -> Result<f64> {
    const OP: &str = "lambda_homoscedastic_xdep";
    check_common(OP, x.nrows(), x.ncols(), c, gamma)?;
    check_num_sim(OP, num_sim)?;
    if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
        return Err(Error::invalid(OP, "sigma_hat must be positive"));
    }
    // n·E_n[x e] = X'e
    let mut draws = sup_norm_draws(x, num_sim, MultiplierKind::Normal, stream);
    let q = order_stat_quantile(&mut draws, 1.0 - gamma);
    Ok(2.0 * c * sigma_hat * q)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XdepLambda {
    pub lambda: f64,
    /// All residuals were zero, so the bootstrap statistic vanished.
    pub degenerate: bool,
}

/// `c` times the simulated `(1−γ)` quantile of `W = n max_j |2E_n[x_j ε̂ e]|`.
pub fn lambda_heteroscedastic_xdep(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    c: f64,
    gamma: f64,
    num_sim: usize,
    stream: RngStream,
) -> Result<XdepLambda> {
    const OP: &str = "lambda_heteroscedastic_xdep";
    check_common(OP, x.nrows(), x.ncols(), c, gamma)?;
    check_num_sim(OP, num_sim)?;
    if residuals.len() != x.nrows() {
        return Err(Error::invalid(OP, "residuals length differs from row count"));
    }
    if residuals.iter().all(|&r| r == 0.0) {
        log::warn!("{OP}: all residuals are zero; lambda set to 0");
        return Ok(XdepLambda { lambda: 0.0, degenerate: true });
    }
    let mut scaled = x.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= 2.0 * residuals[i];
    }
    let mut draws = sup_norm_draws(&scaled, num_sim, MultiplierKind::Normal, stream);
    let q = order_stat_quantile(&mut draws, 1.0 - gamma);
    Ok(XdepLambda { lambda: c * q, degenerate: false })
}

/// Penalty loadings: `√E_n[x_j²]` (homoscedastic) or `√E_n[x_j² ε̂²]`.
pub fn compute_loadings(x: &DMatrix<f64>, residuals: Option<&DVector<f64>>, homoscedastic: bool) -> Result<DVector<f64>> {
    const OP: &str = "compute_loadings";
    let n = x.nrows() as f64;
    let load = if homoscedastic {
        DVector::from_iterator(x.ncols(), x.column_iter().map(|c| (c.norm_squared() / n).sqrt()))
    } else {
        let r = residuals.ok_or_else(|| Error::invalid(OP, "heteroscedastic loadings need residuals"))?;
        if r.len() != x.nrows() {
            return Err(Error::invalid(OP, "residuals length differs from row count"));
        }
        let r2 = r.map(|e| e * e);
        DVector::from_iterator(
            x.ncols(),
            x.column_iter().map(|c| (c.iter().zip(r2.iter()).map(|(v, e)| v * v * e).sum::<f64>() / n).sqrt()),
        )
    };
    if let Some(j) = load.iter().position(|&w| !(w > 0.0)) {
        return Err(Error::invalid(OP, format!("loading for column {j} is zero")));
    }
    Ok(load)
}
