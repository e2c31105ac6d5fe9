//! Lasso and post-Lasso with data-driven penalties.

mod fit;
mod logit;
mod penalty;
mod shooting;
mod supscore;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub use fit::{rlasso_fit, rlasso_fit_with, RlassoOptions};
pub use logit::{rlassologit_fit, rlassologit_fit_with, LogitOptions};
pub use penalty::{
    compute_loadings, lambda_heteroscedastic_xdep, lambda_heteroscedastic_xindep, lambda_homoscedastic_xdep,
    lambda_homoscedastic_xindep, XdepLambda,
};
pub use shooting::{lasso_objective, shooting_lasso, soft_threshold, ShootingOptions, ShootingResult};
pub use supscore::{sup_score_test, SupScoreResult};

/// How the noise scale enters the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Homoscedastic {
    Yes,
    #[default]
    No,
    /// Fixed `lambda_start`, homoscedastic-style loadings, no iteration.
    None,
}

/// Penalty-level rule and iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyConfig {
    pub c: f64,
    pub gamma: f64,
    pub homoscedastic: Homoscedastic,
    pub x_dependent: bool,
    pub lambda_start: Option<f64>,
    pub num_sim: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub max_pass: usize,
    pub tol_coef: f64,
}

impl Default for PenaltyConfig {
    /// Post-Lasso defaults (`c = 1.1`).
    fn default() -> Self {
        PenaltyConfig {
            c: 1.1,
            gamma: 0.1,
            homoscedastic: Homoscedastic::No,
            x_dependent: false,
            lambda_start: None,
            num_sim: 5000,
            max_iter: 15,
            tol: 1e-5,
            max_pass: 1000,
            tol_coef: 1e-7,
        }
    }
}

impl PenaltyConfig {
    /// Defaults for the plain Lasso (`c = 0.5`).
    pub fn lasso_default() -> Self {
        PenaltyConfig { c: 0.5, ..Default::default() }
    }

    /// A fixed penalty level with homoscedastic loadings.
    pub fn fixed(lambda: f64) -> Self {
        PenaltyConfig { homoscedastic: Homoscedastic::None, lambda_start: Some(lambda), ..Default::default() }
    }

    pub fn validate(&self, op: &'static str) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::invalid(op, "c must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(op, "gamma must lie in (0, 1)"));
        }
        if self.num_sim == 0 || self.max_iter == 0 || self.max_pass == 0 {
            return Err(Error::invalid(op, "num_sim, max_iter and max_pass must be at least 1"));
        }
        if !(self.tol > 0.0) || !(self.tol_coef > 0.0) {
            return Err(Error::invalid(op, "tolerances must be positive"));
        }
        match (self.homoscedastic, self.lambda_start) {
            (Homoscedastic::None, None) => Err(Error::invalid(op, "homoscedastic=none requires lambda_start")),
            (_, Some(l)) if !(l >= 0.0) => Err(Error::invalid(op, "lambda_start must be non-negative")),
            _ => Ok(()),
        }
    }

    pub(crate) fn shooting_options(&self) -> ShootingOptions {
        ShootingOptions { max_pass: self.max_pass, tol_coef: self.tol_coef }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Binomial,
}

/// Result of a (post-)Lasso or logistic Lasso fit.
#[derive(Debug, Clone)]
pub struct RlassoFit {
    pub family: Family,
    pub coefficients: DVector<f64>,
    pub intercept: Option<f64>,
    /// Indices with nonzero coefficients, ascending.
    pub support: Vec<usize>,
    /// `y − intercept − Xβ̂` (response scale for the logistic family).
    pub residuals: DVector<f64>,
    pub loadings: DVector<f64>,
    pub lambda: f64,
    pub sigma_hat: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub post: bool,
    pub r2: f64,
    /// `NaN` when the degrees of freedom are exhausted.
    pub adj_r2: f64,
    /// Lasso solution before any post refit.
    pub lasso_coefficients: DVector<f64>,
    /// The residuals collapsed to zero during iteration.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl RlassoFit {
    /// Linear predictor `intercept + Xβ̂`.
    pub fn predict(&self, xnew: &DMatrix<f64>) -> Result<DVector<f64>> {
        if xnew.ncols() != self.coefficients.len() {
            return Err(Error::invalid(
                "predict",
                format!("expected {} columns, got {}", self.coefficients.len(), xnew.ncols()),
            ));
        }
        let mut out = xnew * &self.coefficients;
        if let Some(a) = self.intercept {
            out.add_scalar_mut(a);
        }
        Ok(out)
    }

    /// Fitted probabilities for a logistic fit, clipped to `[1e-6, 1 − 1e-6]`.
    pub fn predict_proba(&self, xnew: &DMatrix<f64>) -> Result<DVector<f64>> {
        if self.family != Family::Binomial {
            return Err(Error::invalid("predict", "probabilities require a logistic fit"));
        }
        Ok(self.predict(xnew)?.map(|eta| logit::sigmoid(eta).clamp(1e-6, 1.0 - 1e-6)))
    }

    pub fn num_selected(&self) -> usize {
        self.support.len()
    }
}

pub(crate) fn support_of(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect()
}
