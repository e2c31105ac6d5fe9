//! Instrumental-variables estimation with optional Lasso selection of
//! controls and instruments.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hstack, least_squares, with_intercept};
use crate::rlasso::{rlasso_fit, rlasso_fit_with, PenaltyConfig, RlassoFit, RlassoOptions};
use crate::simkit::RngStream;
use crate::stats::two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IvCovariance {
    /// HC0 sandwich.
    #[default]
    Robust,
    /// `σ̂²(Ŵ'Ŵ)⁻¹` with `σ̂² = e'e/(n − k)`.
    Homoscedastic,
}

/// Two-stage least squares with every coefficient reported.
#[derive(Debug, Clone)]
pub struct TslsFit {
    /// Endogenous columns first, then exogenous controls, then the intercept.
    pub coefficients: DVector<f64>,
    pub se: DVector<f64>,
    pub residuals: DVector<f64>,
}

impl TslsFit {
    pub fn t_stat(&self, j: usize) -> f64 {
        self.coefficients[j] / self.se[j]
    }
}

/// 2SLS of `y` on `(d, x, 1)` with instruments `(z, x, 1)`.
pub fn tsls(
    y: &DVector<f64>,
    d: &DMatrix<f64>,
    x: Option<&DMatrix<f64>>,
    z: &DMatrix<f64>,
    intercept: bool,
    covariance: IvCovariance,
) -> Result<TslsFit> {
    const OP: &str = "tsls";
    let n = y.len();
    let x_empty = DMatrix::zeros(n, 0);
    let x = x.unwrap_or(&x_empty);
    if d.nrows() != n || x.nrows() != n || z.nrows() != n {
        return Err(Error::invalid(OP, "inputs differ in row count"));
    }
    if d.ncols() == 0 {
        return Err(Error::invalid(OP, "no endogenous regressor"));
    }
    if z.ncols() < d.ncols() {
        return Err(Error::invalid(
            OP,
            format!("order condition fails: {} instruments for {} endogenous regressors", z.ncols(), d.ncols()),
        ));
    }
    let mut w = hstack(&[d, x]);
    let mut q = hstack(&[z, x]);
    if intercept {
        w = with_intercept(&w);
        q = with_intercept(&q);
    }
    let k = w.ncols();
    if n <= k {
        return Err(Error::invalid(OP, "more regressors than observations"));
    }
    // Ŵ = P_Q W, column by column
    let mut w_hat = DMatrix::zeros(n, k);
    for j in 0..k {
        let col = DVector::from_column_slice(w.column(j).as_slice());
        let fitted = &col - least_squares(&q, &col).residuals;
        w_hat.set_column(j, &fitted);
    }
    let ls = least_squares(&w_hat, y);
    if ls.rank_deficient {
        return Err(Error::estimation(OP, "projected design is rank deficient"));
    }
    let beta = ls.coefficients;
    let residuals = y - &w * &beta;
    let bread = (w_hat.transpose() * &w_hat)
        .try_inverse()
        .ok_or_else(|| Error::estimation(OP, "projected design is singular"))?;
    let cov = match covariance {
        IvCovariance::Robust => {
            let mut scaled = w_hat.clone();
            for (i, mut row) in scaled.row_iter_mut().enumerate() {
                row *= residuals[i];
            }
            let meat = scaled.transpose() * &scaled;
            &bread * meat * &bread
        }
        IvCovariance::Homoscedastic => &bread * (residuals.norm_squared() / (n - k) as f64),
    };
    let se = DVector::from_fn(k, |j, _| cov[(j, j)].max(0.0).sqrt());
    Ok(TslsFit { coefficients: beta, se, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IvRegime {
    None,
    SelectZ,
    SelectX,
    SelectXz,
}

/// Scalar-treatment IV estimate.
#[derive(Debug, Clone)]
pub struct IvFit {
    pub alpha_hat: f64,
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub regime: IvRegime,
    /// Selected control columns (indices into `x`).
    pub selected_x: Vec<usize>,
    /// Selected instrument columns (indices into `z`).
    pub selected_z: Vec<usize>,
    pub first_stage: Option<RlassoFit>,
    pub warnings: Vec<String>,
}

impl IvFit {
    fn from_tsls(fit: &TslsFit, regime: IvRegime) -> Result<Self> {
        let (alpha_hat, se) = (fit.coefficients[0], fit.se[0]);
        if !(se > 0.0) {
            return Err(Error::estimation("iv", "standard error is zero"));
        }
        let t_stat = alpha_hat / se;
        Ok(IvFit {
            alpha_hat,
            se,
            t_stat,
            p_value: two_sided_p(t_stat),
            regime,
            selected_x: Vec::new(),
            selected_z: Vec::new(),
            first_stage: None,
            warnings: Vec::new(),
        })
    }
}

fn column_matrix(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

fn fitted(fit: &RlassoFit, y: &DVector<f64>) -> DVector<f64> {
    y - &fit.residuals
}

/// Lasso selection among instruments with the controls always kept.
pub fn rlasso_iv_select_z(
    x: Option<&DMatrix<f64>>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<IvFit> {
    const OP: &str = "rlasso_iv_select_z";
    let kz = z.ncols();
    if kz == 0 {
        return Err(Error::invalid(OP, "no instruments"));
    }
    let kx = x.map_or(0, |m| m.ncols());
    let design = match x {
        Some(xm) => hstack(&[z, xm]),
        None => z.clone(),
    };
    let opts = RlassoOptions { post: true, intercept: true, unpenalized: (kz..kz + kx).collect() };
    let first = rlasso_fit_with(&design, d, cfg, &opts, stream.substream(0))?;
    let selected_z: Vec<usize> = first.support.iter().copied().filter(|&j| j < kz).collect();
    if selected_z.is_empty() {
        return Err(Error::estimation(OP, "identification lost: empty instrument selection"));
    }
    let d_hat = fitted(&first, d);
    let fit = tsls(y, &column_matrix(d), x, &column_matrix(&d_hat), true, IvCovariance::Robust)?;
    let mut out = IvFit::from_tsls(&fit, IvRegime::SelectZ)?;
    out.selected_x = (0..kx).collect();
    out.selected_z = selected_z;
    out.warnings = first.warnings.clone();
    out.first_stage = Some(first);
    Ok(out)
}

fn weak_first_stage(rd: &DVector<f64>, rz: &DMatrix<f64>) -> bool {
    let ls = least_squares(rz, rd);
    let tss = rd.norm_squared();
    if tss == 0.0 {
        return true;
    }
    let r2 = 1.0 - ls.residuals.norm_squared() / tss;
    let (n, k) = (rd.len() as f64, rz.ncols() as f64);
    let f = (r2 / k) / ((1.0 - r2).max(f64::MIN_POSITIVE) / (n - k).max(1.0));
    f < 1e-6
}

/// Post-Lasso partialling of `x` from `y`, `d` and each instrument, then
/// residual 2SLS.
pub fn rlasso_iv_select_x(
    x: Option<&DMatrix<f64>>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<IvFit> {
    const OP: &str = "rlasso_iv_select_x";
    if z.ncols() == 0 {
        return Err(Error::invalid(OP, "no instruments"));
    }
    let n = y.len();
    let mut selected = Vec::new();
    let mut first_stage = None;
    let mut warnings = Vec::new();
    let (ry, rd, rz) = match x.filter(|m| m.ncols() > 0) {
        None => {
            let (zc, _) = crate::linalg::center_columns(z);
            (y.add_scalar(-y.mean()), d.add_scalar(-d.mean()), zc)
        }
        Some(xm) => {
            let fy = rlasso_fit(xm, y, cfg, true, true, stream.substream(0))?;
            let fd = rlasso_fit(xm, d, cfg, true, true, stream.substream(1))?;
            let mut rz = DMatrix::zeros(n, z.ncols());
            selected.extend(&fy.support);
            selected.extend(&fd.support);
            for j in 0..z.ncols() {
                let zj = DVector::from_column_slice(z.column(j).as_slice());
                let fz = rlasso_fit(xm, &zj, cfg, true, true, stream.substream(2 + j as u64))?;
                selected.extend(&fz.support);
                rz.set_column(j, &fz.residuals);
            }
            warnings.extend(fy.warnings.iter().chain(&fd.warnings).cloned());
            let out = (fy.residuals.clone(), fd.residuals.clone(), rz);
            first_stage = Some(fd);
            out
        }
    };
    if weak_first_stage(&rd, &rz) {
        log::warn!("{OP}: weak first stage");
        warnings.push("weak first stage".into());
    }
    selected.sort_unstable();
    selected.dedup();
    let fit = tsls(&ry, &column_matrix(&rd), None, &rz, false, IvCovariance::Robust)?;
    let mut out = IvFit::from_tsls(&fit, IvRegime::SelectX)?;
    out.selected_x = selected;
    out.selected_z = (0..z.ncols()).collect();
    out.first_stage = first_stage;
    out.warnings = warnings;
    Ok(out)
}

/// Selection over both controls and instruments: the optimal instrument
/// `d̂` is built from `(x, z)`, then `y`, `d` and `d̂` are partialled on `x`.
pub fn rlasso_iv_select_xz(
    x: &DMatrix<f64>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<IvFit> {
    const OP: &str = "rlasso_iv_select_xz";
    let (kx, kz) = (x.ncols(), z.ncols());
    if kx == 0 || kz == 0 {
        return Err(Error::invalid(OP, "needs both controls and instruments"));
    }
    let design = hstack(&[x, z]);
    let first = rlasso_fit(&design, d, cfg, true, true, stream.substream(0))?;
    let selected_z: Vec<usize> = first.support.iter().filter(|&&j| j >= kx).map(|&j| j - kx).collect();
    if selected_z.is_empty() {
        return Err(Error::estimation(OP, "identification lost: empty instrument selection"));
    }
    let d_hat = fitted(&first, d);
    let fy = rlasso_fit(x, y, cfg, true, true, stream.substream(1))?;
    let fd = rlasso_fit(x, d, cfg, true, true, stream.substream(2))?;
    let fdh = rlasso_fit(x, &d_hat, cfg, true, true, stream.substream(3))?;
    let fit = tsls(&fy.residuals, &column_matrix(&fd.residuals), None, &column_matrix(&fdh.residuals), false, IvCovariance::Robust)?;
    let mut out = IvFit::from_tsls(&fit, IvRegime::SelectXz)?;
    let mut sel: Vec<usize> = first
        .support
        .iter()
        .filter(|&&j| j < kx)
        .chain(&fy.support)
        .chain(&fd.support)
        .chain(&fdh.support)
        .copied()
        .collect();
    sel.sort_unstable();
    sel.dedup();
    out.selected_x = sel;
    out.selected_z = selected_z;
    out.warnings = first.warnings.clone();
    out.first_stage = Some(first);
    Ok(out)
}

/// Dispatches to one of the four regimes.
pub fn rlasso_iv(
    x: Option<&DMatrix<f64>>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    select_x: bool,
    select_z: bool,
    cfg: &PenaltyConfig,
    stream: RngStream,
) -> Result<IvFit> {
    let x = x.filter(|m| m.ncols() > 0);
    match (select_x, select_z) {
        (false, false) => {
            let fit = tsls(y, &column_matrix(d), x, z, true, IvCovariance::Robust)?;
            let mut out = IvFit::from_tsls(&fit, IvRegime::None)?;
            out.selected_x = (0..x.map_or(0, |m| m.ncols())).collect();
            out.selected_z = (0..z.ncols()).collect();
            Ok(out)
        }
        (false, true) => rlasso_iv_select_z(x, d, y, z, cfg, stream),
        (true, false) => rlasso_iv_select_x(x, d, y, z, cfg, stream),
        (true, true) => match x {
            Some(xm) => rlasso_iv_select_xz(xm, d, y, z, cfg, stream),
            None => rlasso_iv_select_z(None, d, y, z, cfg, stream),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_instrument_is_ols() {
        let d = DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 4.0, 3.0, 6.0, 5.0]);
        let y = DVector::from_vec(vec![1.5, 2.0, 4.5, 3.0, 7.0, 4.0]);
        let iv = tsls(&y, &d, None, &d, true, IvCovariance::Robust).unwrap();
        let ols = least_squares(&with_intercept(&d), &y);
        assert!((iv.coefficients[0] - ols.coefficients[0]).abs() < 1e-10);
    }

    #[test]
    fn just_identified_wald_ratio() {
        let z = DMatrix::from_column_slice(6, 1, &[0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let d = DMatrix::from_column_slice(6, 1, &[0.2, 1.1, 0.4, 0.9, 1.3, 0.1]);
        let y = DVector::from_vec(vec![1.0, 2.5, 0.7, 2.2, 3.1, 0.4]);
        let iv = tsls(&y, &d, None, &z, true, IvCovariance::Robust).unwrap();
        let zc = z.column(0).add_scalar(-z.column(0).mean());
        let ratio = zc.dot(&y) / zc.dot(&d.column(0));
        assert!((iv.coefficients[0] - ratio).abs() < 1e-10);
    }

    #[test]
    fn order_condition_checked() {
        let d = DMatrix::from_element(5, 2, 1.0);
        let z = DMatrix::from_element(5, 1, 1.0);
        assert!(tsls(&DVector::zeros(5), &d, None, &z, true, IvCovariance::Robust).is_err());
    }
}
