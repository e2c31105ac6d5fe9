//! Orthogonal inference on target coefficients after Lasso selection.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::sup_norm_draws;
use crate::dataio::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hc_covariance, hstack, least_squares, select_columns, with_intercept, HcKind};
use crate::rlasso::{rlasso_fit, PenaltyConfig};
use crate::simkit::{MultiplierKind, RngStream};
use crate::stats::{norm_quantile, order_stat_quantile, two_sided_p};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectMethod {
    #[default]
    PartiallingOut,
    DoubleSelection,
}

impl std::str::FromStr for EffectMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace(['-', ' '], "_").to_ascii_lowercase().as_str() {
            "partialling_out" | "po" => Ok(EffectMethod::PartiallingOut),
            "double_selection" | "ds" => Ok(EffectMethod::DoubleSelection),
            other => Err(Error::invalid("effects", format!("unknown method '{other}'"))),
        }
    }
}

/// Estimate for one target coefficient.
#[derive(Debug, Clone)]
pub struct EffectEstimate {
    pub target_name: String,
    pub alpha_hat: f64,
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub method: EffectMethod,
    /// Outcome residualized on the controls.
    pub residual_y: DVector<f64>,
    /// Target residualized on the controls.
    pub residual_d: DVector<f64>,
    /// Per-observation score divided by `E_n[ρᵈ²]`; mean zero.
    pub influence: DVector<f64>,
    /// Control columns used (selected for y, for d, or their union).
    pub selected_controls: Vec<usize>,
}

fn finish(
    target_name: String,
    method: EffectMethod,
    alpha_hat: f64,
    se: f64,
    residual_y: DVector<f64>,
    residual_d: DVector<f64>,
    influence: DVector<f64>,
    selected_controls: Vec<usize>,
) -> Result<EffectEstimate> {
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::estimation("effect", "standard error is zero or undefined"));
    }
    let t_stat = alpha_hat / se;
    Ok(EffectEstimate {
        target_name,
        alpha_hat,
        se,
        t_stat,
        p_value: two_sided_p(t_stat),
        method,
        residual_y,
        residual_d,
        influence,
        selected_controls,
    })
}

fn check_inputs(op: &'static str, x: &DMatrix<f64>, y: &DVector<f64>, d: &DVector<f64>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n || d.len() != n {
        return Err(Error::invalid(op, "y, d and controls differ in length"));
    }
    if n <= 2 {
        return Err(Error::invalid(op, "need more than 2 observations"));
    }
    Ok(())
}

fn residual_variance_floor(d: &DVector<f64>) -> f64 {
    let n = d.len() as f64;
    let m = d.mean();
    let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    1e-10 * var.max(1.0)
}

/// Residual-on-residual regression after post-Lasso partialling of `y` and `d`.
pub fn partialling_out_effect(
    x_controls: &DMatrix<f64>,
    y: &DVector<f64>,
    d: &DVector<f64>,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<EffectEstimate> {
    const OP: &str = "partialling_out_effect";
    check_inputs(OP, x_controls, y, d)?;
    let n = y.len() as f64;
    let (ry, rd, sel) = if x_controls.ncols() == 0 {
        (y.add_scalar(-y.mean()), d.add_scalar(-d.mean()), Vec::new())
    } else {
        let fy = rlasso_fit(x_controls, y, cfg, true, true, stream.substream(0))?;
        let fd = rlasso_fit(x_controls, d, cfg, true, true, stream.substream(1))?;
        let mut sel: Vec<usize> = fy.support.iter().chain(&fd.support).copied().collect();
        sel.sort_unstable();
        sel.dedup();
        (fy.residuals, fd.residuals, sel)
    };
    let edd = rd.norm_squared() / n;
    if edd < residual_variance_floor(d) {
        return Err(Error::estimation(OP, "no residual variation in target"));
    }
    let alpha = ry.dot(&rd) / n / edd;
    let influence = DVector::from_fn(ry.len(), |i, _| (ry[i] - alpha * rd[i]) * rd[i] / edd);
    let se = (influence.norm_squared() / n / n).sqrt();
    finish(String::new(), EffectMethod::PartiallingOut, alpha, se, ry, rd, influence, sel)
}

/// OLS of `y` on `d` and the union of controls selected for `y` and for `d`.
pub fn double_selection_effect(
    x_controls: &DMatrix<f64>,
    y: &DVector<f64>,
    d: &DVector<f64>,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<EffectEstimate> {
    double_selection_effect_with(x_controls, y, d, cfg, HcKind::Hc0, stream)
}

pub fn double_selection_effect_with(
    x_controls: &DMatrix<f64>,
    y: &DVector<f64>,
    d: &DVector<f64>,
    cfg: &PenaltyConfig,
    hc: HcKind,
    stream: RngStream,
) -> Result<EffectEstimate> {
    const OP: &str = "double_selection_effect";
    check_inputs(OP, x_controls, y, d)?;
    let n = y.len();
    let union = if x_controls.ncols() == 0 {
        Vec::new()
    } else {
        let fy = rlasso_fit(x_controls, y, cfg, true, true, stream.substream(0))?;
        let fd = rlasso_fit(x_controls, d, cfg, true, true, stream.substream(1))?;
        let mut u: Vec<usize> = fy.support.iter().chain(&fd.support).copied().collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    if union.len() + 2 >= n {
        return Err(Error::estimation(OP, "union support too large for OLS"));
    }
    let controls = with_intercept(&select_columns(x_controls, &union));
    let dcol = DMatrix::from_column_slice(n, 1, d.as_slice());
    let full = hstack(&[&dcol, &controls]);
    let ls = least_squares(&full, y);
    if ls.rank_deficient {
        return Err(Error::estimation(OP, "target is collinear with the selected controls"));
    }
    let alpha = ls.coefficients[0];
    let cov = hc_covariance(&full, &ls.residuals, hc).ok_or_else(|| Error::estimation(OP, "singular OLS design"))?;
    let se = cov[(0, 0)].sqrt();

    let rd = least_squares(&controls, d).residuals;
    let ry = least_squares(&controls, y).residuals;
    let nf = n as f64;
    let edd = rd.norm_squared() / nf;
    if edd < residual_variance_floor(d) {
        return Err(Error::estimation(OP, "no residual variation in target"));
    }
    let influence = DVector::from_fn(n, |i, _| rd[i] * ls.residuals[i] / edd);
    finish(String::new(), EffectMethod::DoubleSelection, alpha, se, ry, rd, influence, union)
}

/// Estimates for several targets plus their stacked influence functions.
#[derive(Debug, Clone)]
pub struct EffectsSet {
    pub estimates: Vec<EffectEstimate>,
    /// `n × k`, one column per successful estimate.
    pub influence: DMatrix<f64>,
    /// Targets that could not be estimated, with the reason.
    pub failures: Vec<(String, String)>,
    pub n: usize,
    pub k: usize,
}

impl EffectsSet {
    pub fn from_estimates(estimates: Vec<EffectEstimate>, failures: Vec<(String, String)>, n: usize) -> Self {
        let k = estimates.len();
        let mut influence = DMatrix::zeros(n, k);
        for (j, e) in estimates.iter().enumerate() {
            influence.set_column(j, &e.influence);
        }
        EffectsSet { estimates, influence, failures, n, k }
    }
}

/// Runs the single-target estimator for each listed column, using every
/// other column of `x` as a control.
pub fn effects_batch(
    x: &DesignMatrix,
    y: &DVector<f64>,
    target_indices: &[usize],
    method: EffectMethod,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<EffectsSet> {
    effects_batch_with(x, y, target_indices, method, cfg, HcKind::Hc0, stream)
}

pub fn effects_batch_with(
    x: &DesignMatrix,
    y: &DVector<f64>,
    target_indices: &[usize],
    method: EffectMethod,
    cfg: &PenaltyConfig,
    hc: HcKind,
    stream: RngStream,
) -> Result<EffectsSet> {
    const OP: &str = "effects_batch";
    let p = x.p();
    if target_indices.is_empty() {
        return Err(Error::invalid(OP, "no targets given"));
    }
    let mut seen = vec![false; p];
    for &j in target_indices {
        if j >= p {
            return Err(Error::invalid(OP, format!("target index {j} out of range")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(OP, format!("target index {j} listed twice")));
        }
    }
    let results: Vec<Result<EffectEstimate>> = target_indices
        .par_iter()
        .enumerate()
        .map(|(pos, &j)| {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let xc = select_columns(&x.x, &others);
            let d = DVector::from_column_slice(x.x.column(j).as_slice());
            let sub = stream.substream(pos as u64);
            let mut est = match method {
                EffectMethod::PartiallingOut => partialling_out_effect(&xc, y, &d, cfg, sub)?,
                EffectMethod::DoubleSelection => double_selection_effect_with(&xc, y, &d, cfg, hc, sub)?,
            };
            // report control indices in the caller's numbering
            est.selected_controls = est.selected_controls.iter().map(|&k| others[k]).collect();
            est.target_name = x.column_names[j].clone();
            Ok(est)
        })
        .collect();
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (res, &j) in results.into_iter().zip(target_indices) {
        match res {
            Ok(e) => estimates.push(e),
            Err(e) => {
                log::warn!("{OP}: target '{}' failed: {e}", x.column_names[j]);
                failures.push((x.column_names[j].clone(), e.to_string()));
            }
        }
    }
    Ok(EffectsSet::from_estimates(estimates, failures, x.n()))
}

/// Pointwise or simultaneous confidence intervals.
#[derive(Debug, Clone, Serialize)]
pub struct ConfidenceBand {
    pub level: f64,
    pub joint: bool,
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub critical_value: f64,
}

impl ConfidenceBand {
    pub fn contains_zero(&self, j: usize) -> bool {
        self.lower[j] <= 0.0 && 0.0 <= self.upper[j]
    }
}

/// Intervals `α̂_j ± crit·se_j`; the joint critical value is the bootstrap
/// quantile of the studentized sup statistic `max_j |E_n[g φ_j]| / ŝ_j`.
pub fn confidence_band(
    es: &EffectsSet,
    level: f64,
    joint: bool,
    num_boot: usize,
    kind: MultiplierKind,
    stream: RngStream,
) -> Result<ConfidenceBand> {
    const OP: &str = "confidence_band";
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(OP, "level must lie in (0, 1)"));
    }
    if es.estimates.is_empty() {
        return Err(Error::invalid(OP, "no estimates to cover"));
    }
    let critical_value = if joint {
        if num_boot == 0 {
            return Err(Error::invalid(OP, "num_boot must be at least 1"));
        }
        if num_boot < 100 {
            log::warn!("{OP}: num_boot={num_boot} gives a noisy critical value");
        }
        let n = es.n as f64;
        let mut m = es.influence.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            let mean = col.mean();
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            if !(sd > 0.0) {
                return Err(Error::estimation(OP, format!("influence of '{}' is constant", es.estimates[j].target_name)));
            }
            // E_n[g φ_j] / (sd_j/√n) = Σ_i g_i φ_ij / (√n sd_j)
            col.unscale_mut(n.sqrt() * sd);
        }
        let mut draws = sup_norm_draws(&m, num_boot, kind, stream);
        order_stat_quantile(&mut draws, level)
    } else {
        norm_quantile(1.0 - (1.0 - level) / 2.0)
    };
    Ok(ConfidenceBand {
        level,
        joint,
        names: es.estimates.iter().map(|e| e.target_name.clone()).collect(),
        lower: es.estimates.iter().map(|e| e.alpha_hat - critical_value * e.se).collect(),
        upper: es.estimates.iter().map(|e| e.alpha_hat + critical_value * e.se).collect(),
        critical_value,
    })
}
