//! Logistic Lasso with a rigorous penalty level.

use nalgebra::{DMatrix, DVector};

use super::shooting::soft_threshold;
use super::{support_of, Family, Homoscedastic, PenaltyConfig, RlassoFit};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, column_mean_squares, select_columns};
use crate::stats::norm_quantile;

const OP: &str = "rlassologit_fit";
const MAX_OUTER: usize = 100;
const WEIGHT_FLOOR: f64 = 1e-5;
const SEPARATION_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LogitOptions {
    /// Refit an unpenalized logistic regression on the selected support.
    pub post: bool,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn log1pexp(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

struct Solution {
    b0: f64,
    beta: DVector<f64>,
    converged: bool,
}

fn objective(x: &DMatrix<f64>, d: &DVector<f64>, b0: f64, beta: &DVector<f64>, thresholds: &[f64]) -> f64 {
    let eta = x * beta;
    let n = d.len() as f64;
    let nll: f64 = eta.iter().zip(d.iter()).map(|(&e, &di)| log1pexp(e + b0) - di * (e + b0)).sum::<f64>() / n;
    // thresholds hold λψ_j/n
    let pen: f64 = beta.iter().zip(thresholds).filter(|(b, _)| **b != 0.0).map(|(b, t)| t * b.abs()).sum();
    nll + pen
}

/// Proximal Newton: coordinate descent on the weighted quadratic model,
/// with step halving on the outer update.
fn solve(x: &DMatrix<f64>, d: &DVector<f64>, thresholds: &[f64], b0: f64, beta: DVector<f64>, cfg: &PenaltyConfig) -> Solution {
    let (n, p) = x.shape();
    let nf = n as f64;
    let (mut b0, mut beta) = (b0, beta);
    let mut obj = objective(x, d, b0, &beta, thresholds);
    for _ in 0..MAX_OUTER {
        let eta = (x * &beta).add_scalar(b0);
        let prob = eta.map(sigmoid);
        let w = prob.map(|q| (q * (1.0 - q)).max(WEIGHT_FLOOR));
        let z = DVector::from_fn(n, |i, _| eta[i] + (d[i] - prob[i]) / w[i]);
        let wsum = w.sum();
        let wx2: Vec<f64> = x.column_iter().map(|c| c.iter().zip(w.iter()).map(|(v, wi)| wi * v * v).sum::<f64>() / nf).collect();

        let (mut nb0, mut nb) = (b0, beta.clone());
        let mut r = &z - &eta;
        for _ in 0..cfg.max_pass {
            let delta0 = w.dot(&r) / wsum;
            nb0 += delta0;
            r.add_scalar_mut(-delta0);
            let mut max_change = delta0.abs();
            for j in 0..p {
                let col = x.column(j);
                let old = nb[j];
                let g = col.iter().zip(w.iter()).zip(r.iter()).map(|((v, wi), ri)| v * wi * ri).sum::<f64>() / nf;
                let new = soft_threshold(g + wx2[j] * old, thresholds[j]) / wx2[j];
                if new != old {
                    r.axpy(old - new, &col, 1.0);
                    nb[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            if max_change < cfg.tol_coef {
                break;
            }
        }

        let mut step = 1.0;
        let (mut cb0, mut cb, mut cobj);
        loop {
            cb0 = b0 + step * (nb0 - b0);
            cb = &beta + (&nb - &beta) * step;
            cobj = objective(x, d, cb0, &cb, thresholds);
            if cobj <= obj + 1e-12 * obj.abs() || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        if cobj > obj + 1e-12 * obj.abs() {
            // no descent along the Newton direction: at the optimum to working precision
            return Solution { b0, beta, converged: true };
        }
        let change = (cb0 - b0).abs().max((&cb - &beta).amax());
        b0 = cb0;
        beta = cb;
        obj = cobj;
        if change < 1e-9 {
            return Solution { b0, beta, converged: true };
        }
    }
    Solution { b0, beta, converged: false }
}

/// Logistic Lasso with `λ = (c/2)√n Φ⁻¹(1 − γ/(2p))` and `ψ_j = ½√E_n[x_j²]`.
///
/// A supplied `lambda_start` overrides the rule.
pub fn rlassologit_fit(x: &DMatrix<f64>, d: &DVector<f64>, cfg: &PenaltyConfig) -> Result<RlassoFit> {
    rlassologit_fit_with(x, d, cfg, LogitOptions::default())
}

pub fn rlassologit_fit_with(x: &DMatrix<f64>, d: &DVector<f64>, cfg: &PenaltyConfig, opts: LogitOptions) -> Result<RlassoFit> {
    cfg.validate(OP)?;
    let (n, p) = x.shape();
    if n < 2 || p == 0 {
        return Err(Error::invalid(OP, "need n >= 2 and at least one column"));
    }
    if d.len() != n {
        return Err(Error::invalid(OP, "outcome length differs from row count"));
    }
    if d.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(OP, "outcome must be coded 0/1"));
    }
    let ones = d.sum();
    if ones == 0.0 || ones == n as f64 {
        return Err(Error::invalid(OP, "outcome has a single class"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(OP, "non-finite values in input"));
    }
    let (xc, means) = center_columns(x);
    let sq = column_mean_squares(&xc);
    if let Some(j) = sq.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::invalid(OP, format!("column {j} is constant")));
    }
    let nf = n as f64;
    let lambda = match (cfg.homoscedastic, cfg.lambda_start) {
        (_, Some(l)) => l,
        (Homoscedastic::None, None) => unreachable!("validated"),
        _ => cfg.c / 2.0 * nf.sqrt() * norm_quantile(1.0 - cfg.gamma / (2.0 * p as f64)),
    };
    let loadings = sq.map(|s| 0.5 * s.sqrt());
    let thresholds: Vec<f64> = loadings.iter().map(|&w| if lambda.is_infinite() { f64::INFINITY } else { lambda * w / nf }).collect();

    let mean_d = ones / nf;
    let start = (mean_d / (1.0 - mean_d)).ln();
    let lasso = solve(&xc, d, &thresholds, start, DVector::zeros(p), cfg);
    let mut warnings = Vec::new();
    let mut converged = lasso.converged;
    let lasso_beta = lasso.beta.clone();
    let (mut b0, mut beta) = (lasso.b0, lasso.beta);

    if opts.post {
        let support = support_of(&beta);
        let xs = select_columns(&xc, &support);
        let init = DVector::from_iterator(support.len(), support.iter().map(|&j| beta[j]));
        let refit = solve(&xs, d, &vec![0.0; support.len()], b0, init, cfg);
        converged &= refit.converged;
        b0 = refit.b0;
        beta = DVector::zeros(p);
        for (k, &j) in support.iter().enumerate() {
            beta[j] = refit.beta[k];
        }
    }
    if !converged {
        warnings.push("logistic solver did not converge".to_string());
    }
    if beta.iter().any(|b| b.abs() > SEPARATION_BOUND) {
        let msg = format!("possible separation: a coefficient exceeds {SEPARATION_BOUND} in magnitude");
        log::warn!("{OP}: {msg}");
        warnings.push(msg);
    }

    let intercept = b0 - means.dot(&beta);
    let eta = (x * &beta).add_scalar(intercept);
    let prob = eta.map(|e| sigmoid(e).clamp(1e-6, 1.0 - 1e-6));
    Ok(RlassoFit {
        family: Family::Binomial,
        support: support_of(&beta),
        coefficients: beta,
        intercept: Some(intercept),
        residuals: d - prob,
        loadings,
        lambda,
        sigma_hat: f64::NAN,
        iterations_used: 1,
        converged,
        post: opts.post,
        r2: f64::NAN,
        adj_r2: f64::NAN,
        lasso_coefficients: lasso_beta,
        degenerate: false,
        warnings,
    })
}
