use nalgebra::{DMatrix, DVector};

use super::penalty::{lambda_heteroscedastic_xdep, lambda_heteroscedastic_xindep, lambda_homoscedastic_xdep, lambda_homoscedastic_xindep};
use super::shooting::shooting_lasso;
use super::{support_of, Family, Homoscedastic, PenaltyConfig, RlassoFit};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, column_mean_squares, least_squares, select_columns};
use crate::simkit::RngStream;

const OP: &str = "rlasso_fit";
/// Residuals this small relative to the outcome scale count as a perfect fit.
const DEGENERATE_RATIO: f64 = 1e-10;
const INIT_COLUMNS: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RlassoOptions {
    /// Refit OLS on the selected support.
    pub post: bool,
    /// Fit an unpenalized intercept by centering.
    pub intercept: bool,
    /// Columns that carry no penalty.
    pub unpenalized: Vec<usize>,
}

/// Rigorous (post-)Lasso of `y` on `x`.
pub fn rlasso_fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &PenaltyConfig,
    post: bool,
    intercept: bool,
    stream: RngStream,
) -> Result<RlassoFit> {
    rlasso_fit_with(x, y, cfg, &RlassoOptions { post, intercept, unpenalized: Vec::new() }, stream)
}

struct Iterate {
    beta_lasso: DVector<f64>,
    beta: DVector<f64>,
    lambda: f64,
    loadings: DVector<f64>,
    sigma: f64,
}

struct Problem<'a> {
    xc: DMatrix<f64>,
    yc: DVector<f64>,
    sq: DVector<f64>,
    penalized: Vec<bool>,
    pen_idx: Vec<usize>,
    cfg: &'a PenaltyConfig,
    post: bool,
    stream: RngStream,
}

fn rms(v: &DVector<f64>) -> f64 {
    (v.norm_squared() / v.len() as f64).sqrt()
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.xc.nrows()
    }

    /// Post-Lasso (or plain Lasso) coefficients and residuals.
    fn refit(&self, beta_lasso: &DVector<f64>, warnings: &mut Vec<String>) -> (DVector<f64>, DVector<f64>) {
        if !self.post {
            let resid = &self.yc - &self.xc * beta_lasso;
            return (beta_lasso.clone(), resid);
        }
        let support = support_of(beta_lasso);
        let mut beta = DVector::zeros(beta_lasso.len());
        if support.is_empty() {
            return (beta, self.yc.clone());
        }
        let xs = select_columns(&self.xc, &support);
        let ls = least_squares(&xs, &self.yc);
        if support.len() >= self.n() || ls.rank_deficient {
            let msg = format!(
                "post-Lasso design with {} columns is rank deficient for n={}; using the pseudoinverse",
                support.len(),
                self.n()
            );
            log::warn!("{OP}: {msg}");
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        for (k, &j) in support.iter().enumerate() {
            beta[j] = ls.coefficients[k];
        }
        (beta, ls.residuals)
    }

    fn homoscedastic_loadings(&self) -> DVector<f64> {
        DVector::from_fn(self.sq.len(), |j, _| if self.penalized[j] { self.sq[j].sqrt() } else { 0.0 })
    }

    /// `None` when some penalized loading vanishes.
    fn loadings(&self, resid: &DVector<f64>) -> Option<DVector<f64>> {
        if self.cfg.homoscedastic != Homoscedastic::No {
            return Some(self.homoscedastic_loadings());
        }
        let n = self.n() as f64;
        let r2 = resid.map(|e| e * e);
        let mut out = DVector::zeros(self.sq.len());
        for &j in &self.pen_idx {
            let v = self.xc.column(j).iter().zip(r2.iter()).map(|(x, e)| x * x * e).sum::<f64>() / n;
            if !(v > 0.0) {
                return None;
            }
            out[j] = v.sqrt();
        }
        Some(out)
    }

    fn lambda(&self, resid: &DVector<f64>, loadings: &DVector<f64>, sigma: f64) -> Result<f64> {
        let cfg = self.cfg;
        let (n, p) = (self.n(), self.pen_idx.len());
        let normalized = || {
            let mut m = select_columns(&self.xc, &self.pen_idx);
            for (k, &j) in self.pen_idx.iter().enumerate() {
                m.column_mut(k).unscale_mut(loadings[j]);
            }
            m
        };
        match (cfg.homoscedastic, cfg.x_dependent) {
            (Homoscedastic::Yes, false) => lambda_homoscedastic_xindep(n, p, sigma, cfg.c, cfg.gamma),
            (Homoscedastic::No, false) => lambda_heteroscedastic_xindep(n, p, cfg.c, cfg.gamma),
            (Homoscedastic::Yes, true) => {
                lambda_homoscedastic_xdep(&normalized(), sigma, cfg.c, cfg.gamma, cfg.num_sim, self.stream)
            }
            (Homoscedastic::No, true) => {
                Ok(lambda_heteroscedastic_xdep(&normalized(), resid, cfg.c, cfg.gamma, cfg.num_sim, self.stream)?.lambda)
            }
            (Homoscedastic::None, _) => Ok(cfg.lambda_start.expect("validated")),
        }
    }

    fn lasso_step(&self, lambda: f64, loadings: DVector<f64>, sigma: f64, warm: Option<&DVector<f64>>, warnings: &mut Vec<String>) -> Result<Iterate> {
        let sh = shooting_lasso(&self.xc, &self.yc, lambda, &loadings, warm, self.cfg.shooting_options())?;
        if !sh.converged {
            let msg = format!("shooting solver hit max_pass={} without converging", self.cfg.max_pass);
            if !warnings.contains(&msg) {
                warnings.push(msg);
            }
        }
        let (beta, _) = self.refit(&sh.coefficients, warnings);
        Ok(Iterate { beta_lasso: sh.coefficients, beta, lambda, loadings, sigma })
    }

    /// OLS on the few columns most correlated with `y`, plus unpenalized ones.
    fn initial_residuals(&self) -> DVector<f64> {
        let yc = &self.yc;
        let ym = yc.mean();
        let ydev = yc.add_scalar(-ym);
        let ynorm = ydev.norm();
        let mut scored: Vec<(usize, f64)> = self
            .pen_idx
            .iter()
            .map(|&j| {
                let col = self.xc.column(j);
                let xm = col.mean();
                let xdev = col.add_scalar(-xm);
                let r = xdev.dot(&ydev) / (xdev.norm() * ynorm);
                (j, if r.is_finite() { r.abs() } else { 0.0 })
            })
            .collect();
        // stable sort keeps the lower index first on ties
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut cols: Vec<usize> = (0..self.sq.len()).filter(|&j| !self.penalized[j]).collect();
        cols.extend(scored.iter().take(INIT_COLUMNS).map(|(j, _)| *j));
        cols.sort_unstable();
        least_squares(&select_columns(&self.xc, &cols), yc).residuals
    }
}

/// [`rlasso_fit`] with unpenalized columns.
pub fn rlasso_fit_with(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    cfg: &PenaltyConfig,
    opts: &RlassoOptions,
    stream: RngStream,
) -> Result<RlassoFit> {
    cfg.validate(OP)?;
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::invalid(OP, "need at least 2 observations"));
    }
    if p == 0 {
        return Err(Error::invalid(OP, "design has no columns"));
    }
    if y.len() != n {
        return Err(Error::invalid(OP, format!("outcome has {} entries, design has {n} rows", y.len())));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid(OP, "non-finite values in input"));
    }
    let mut penalized = vec![true; p];
    for &j in &opts.unpenalized {
        if j >= p {
            return Err(Error::invalid(OP, format!("unpenalized index {j} out of range")));
        }
        penalized[j] = false;
    }

    let (xc, xmeans, yc, ymean) = if opts.intercept {
        let (xc, xm) = center_columns(x);
        let ym = y.mean();
        (xc, xm, y.add_scalar(-ym), ym)
    } else {
        (x.clone(), DVector::zeros(p), y.clone(), 0.0)
    };
    let sq = column_mean_squares(&xc);
    if let Some(j) = sq.iter().position(|&s| !(s > 0.0)) {
        let what = if opts.intercept { "is constant" } else { "is all zeros" };
        return Err(Error::invalid(OP, format!("column {j} {what}")));
    }
    let pen_idx: Vec<usize> = (0..p).filter(|&j| penalized[j]).collect();
    let prob = Problem { xc, yc, sq, penalized, pen_idx, cfg, post: opts.post, stream };

    let mut warnings = Vec::new();
    let mut converged = false;
    let mut degenerate = false;
    let mut iterations = 0;
    let scale_ref = rms(&prob.yc);

    let state = if scale_ref == 0.0 {
        // constant outcome: every slope is zero at any penalty
        degenerate = true;
        converged = true;
        let zero = DVector::zeros(p);
        Iterate { beta_lasso: zero.clone(), beta: zero, lambda: 0.0, loadings: prob.homoscedastic_loadings(), sigma: 0.0 }
    } else if prob.pen_idx.is_empty() {
        converged = true;
        iterations = 1;
        let beta = least_squares(&prob.xc, &prob.yc).coefficients;
        Iterate { beta_lasso: beta.clone(), beta, lambda: 0.0, loadings: DVector::zeros(p), sigma: 0.0 }
    } else if cfg.homoscedastic == Homoscedastic::None {
        converged = true;
        iterations = 1;
        let lambda = cfg.lambda_start.expect("validated");
        prob.lasso_step(lambda, prob.homoscedastic_loadings(), f64::NAN, None, &mut warnings)?
    } else {
        let mut resid = prob.initial_residuals();
        let mut current: Option<Iterate> = None;
        for k in 1..=cfg.max_iter {
            let sigma = rms(&resid);
            let loadings = if sigma <= DEGENERATE_RATIO * scale_ref { None } else { prob.loadings(&resid) };
            let Some(loadings) = loadings else {
                degenerate = true;
                break;
            };
            if let Some(prev) = &current {
                let dl = (&loadings - &prev.loadings).amax();
                let ds = if cfg.homoscedastic == Homoscedastic::Yes { (sigma - prev.sigma).abs() / prev.sigma } else { 0.0 };
                if dl < cfg.tol && ds < cfg.tol {
                    converged = true;
                    break;
                }
            }
            let lambda = prob.lambda(&resid, &loadings, sigma)?;
            let step = prob.lasso_step(lambda, loadings, sigma, current.as_ref().map(|c| &c.beta_lasso), &mut warnings)?;
            resid = &prob.yc - &prob.xc * &step.beta;
            current = Some(step);
            iterations = k;
        }
        if degenerate {
            let msg = "residuals vanished during iteration; fit is degenerate".to_string();
            log::warn!("{OP}: {msg}");
            warnings.push(msg);
        } else if !converged {
            log::debug!("{OP}: loadings still moving after max_iter={}", cfg.max_iter);
        }
        match current {
            Some(c) => c,
            None => {
                // perfect initial fit: fall back to the outcome scale as the noise scale
                let loadings = prob.homoscedastic_loadings();
                let lambda = lambda_homoscedastic_xindep(n, prob.pen_idx.len(), scale_ref, cfg.c, cfg.gamma)?;
                iterations = 1;
                prob.lasso_step(lambda, loadings, scale_ref, None, &mut warnings)?
            }
        }
    };

    let beta = state.beta;
    let support = support_of(&beta);
    let intercept = opts.intercept.then(|| ymean - xmeans.dot(&beta));
    let mut residuals = y - x * &beta;
    if let Some(a) = intercept {
        residuals.add_scalar_mut(-a);
    }
    let ssr = residuals.norm_squared();
    let sst = if opts.intercept { prob.yc.norm_squared() } else { y.norm_squared() };
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };
    let df = support.len() + usize::from(opts.intercept);
    let adj_r2 = if n > df {
        1.0 - (1.0 - r2) * (n - usize::from(opts.intercept)) as f64 / (n - df) as f64
    } else {
        f64::NAN
    };
    let sigma_hat = if state.sigma.is_finite() { state.sigma } else { rms(&residuals) };

    Ok(RlassoFit {
        family: Family::Gaussian,
        coefficients: beta,
        intercept,
        support,
        residuals,
        loadings: state.loadings,
        lambda: state.lambda,
        sigma_hat,
        iterations_used: iterations,
        converged,
        post: opts.post,
        r2,
        adj_r2,
        lasso_coefficients: state.beta_lasso,
        degenerate,
        warnings,
    })
}
