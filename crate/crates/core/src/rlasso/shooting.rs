//! Cyclic coordinate descent ("shooting") for the weighted Lasso.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub max_pass: usize,
    /// Stop when no coefficient moves more than this in a full sweep.
    pub tol_coef: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions { max_pass: 1000, tol_coef: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub coefficients: DVector<f64>,
    pub passes: usize,
    pub converged: bool,
}

/// `S(z, t) = sign(z)·max(|z| − t, 0)`.
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Penalized objective `E_n[(y − xβ)²] + (λ/n)Σ ψ_j|β_j|` evaluated from residuals.
pub fn lasso_objective(residuals: &DVector<f64>, beta: &DVector<f64>, lambda: f64, loadings: &DVector<f64>) -> f64 {
    let n = residuals.len() as f64;
    let pen: f64 = beta
        .iter()
        .zip(loadings.iter())
        .filter(|(b, _)| **b != 0.0)
        .map(|(b, w)| w * b.abs())
        .sum();
    residuals.norm_squared() / n + lambda / n * pen
}

/// Minimizes `E_n[(y − x'β)²] + (λ/n)‖Ψβ‖₁` by cyclic coordinate descent in
/// ascending column order.
///
/// A zero loading leaves its coordinate unpenalized. Failure to converge in
/// `max_pass` sweeps is reported through `converged`, not as an error.
pub fn shooting_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    lambda: f64,
    loadings: &DVector<f64>,
    beta_init: Option<&DVector<f64>>,
    opts: ShootingOptions,
) -> Result<ShootingResult> {
    const OP: &str = "shooting_lasso";
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::invalid(OP, "outcome length differs from row count"));
    }
    if loadings.len() != p {
        return Err(Error::invalid(OP, "loadings length differs from column count"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(OP, "lambda must be non-negative"));
    }
    if loadings.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid(OP, "loadings must be finite and non-negative"));
    }
    let nf = n as f64;
    let sq: Vec<f64> = x.column_iter().map(|c| c.norm_squared() / nf).collect();
    if let Some(j) = sq.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::invalid(OP, format!("column {j} has zero variance")));
    }
    let thresholds: Vec<f64> = loadings
        .iter()
        .map(|&w| if w == 0.0 { 0.0 } else { lambda * w / (2.0 * nf) })
        .collect();

    let mut beta = match beta_init {
        Some(b) if b.len() == p => b.clone(),
        Some(_) => return Err(Error::invalid(OP, "beta_init length differs from column count")),
        None => DVector::zeros(p),
    };
    let mut resid = if beta.iter().any(|&b| b != 0.0) { y - x * &beta } else { y.clone() };
    let mut last_obj = if cfg!(debug_assertions) { lasso_objective(&resid, &beta, lambda, loadings) } else { 0.0 };

    for pass in 1..=opts.max_pass {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let col = x.column(j);
            let old = beta[j];
            let z = col.dot(&resid) / nf + sq[j] * old;
            let new = soft_threshold(z, thresholds[j]) / sq[j];
            if new != old {
                resid.axpy(old - new, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if cfg!(debug_assertions) && lambda.is_finite() {
            let obj = lasso_objective(&resid, &beta, lambda, loadings);
            debug_assert!(obj <= last_obj + 1e-10 * last_obj.abs().max(1.0), "objective increased: {last_obj} -> {obj}");
            last_obj = obj;
        }
        if max_change < opts.tol_coef {
            return Ok(ShootingResult { coefficients: beta, passes: pass, converged: true });
        }
    }
    log::warn!("{OP}: no convergence after {} sweeps", opts.max_pass);
    Ok(ShootingResult { coefficients: beta, passes: opts.max_pass, converged: false })
}
