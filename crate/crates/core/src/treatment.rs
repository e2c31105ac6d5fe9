//! Treatment effects from doubly robust (orthogonal) scores with Lasso
//! nuisance estimates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bootstrap::multiplier_projections;
use crate::error::{Error, Result};
use crate::linalg::{select_columns, select_rows};
use crate::rlasso::{rlasso_fit, rlassologit_fit_with, LogitOptions, PenaltyConfig};
use crate::simkit::{MultiplierKind, RngStream};
use crate::stats::{sample_sd, two_sided_p};

const MIN_ARM: usize = 5;
const CLIP_WARN_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EffectType {
    Ate,
    Atet,
    Late,
    Latet,
}

impl std::str::FromStr for EffectType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ate" => Ok(EffectType::Ate),
            "atet" => Ok(EffectType::Atet),
            "late" => Ok(EffectType::Late),
            "latet" => Ok(EffectType::Latet),
            other => Err(Error::invalid("treat", format!("unknown effect '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropensityModel {
    /// Logistic Lasso.
    #[default]
    Logit,
    /// Linear probability post-Lasso.
    Linear,
}

#[derive(Debug, Clone)]
pub struct TreatmentOptions {
    pub outcome_cfg: PenaltyConfig,
    pub propensity_cfg: PenaltyConfig,
    /// Post-Lasso refits at every selection step.
    pub post: bool,
    pub propensity: PropensityModel,
    /// Propensities are clipped to `[clip_low, clip_high]`.
    pub clip_low: f64,
    pub clip_high: f64,
    pub bootstrap: Option<MultiplierKind>,
    pub n_rep: usize,
}

impl Default for TreatmentOptions {
    fn default() -> Self {
        TreatmentOptions {
            outcome_cfg: PenaltyConfig::default(),
            propensity_cfg: PenaltyConfig::default(),
            post: true,
            propensity: PropensityModel::Logit,
            clip_low: 0.01,
            clip_high: 0.99,
            bootstrap: None,
            n_rep: 500,
        }
    }
}

/// Fitted nuisance functions evaluated at every observation.
#[derive(Debug, Clone, Default)]
pub struct Nuisances {
    /// Outcome regression in the treated (or `z = 1`) arm.
    pub g1: Option<DVector<f64>>,
    /// Outcome regression in the untreated (or `z = 0`) arm.
    pub g0: Option<DVector<f64>>,
    /// Propensity of the treatment (ATE/ATET) or of the instrument (LATE/LATET).
    pub propensity: Option<DVector<f64>>,
    /// `P(d = 1 | z = 1, x)` and `P(d = 1 | z = 0, x)`.
    pub m1: Option<DVector<f64>>,
    pub m0: Option<DVector<f64>>,
    /// Propensity values moved by clipping.
    pub clipped: usize,
}

#[derive(Debug, Clone)]
pub struct TreatmentFit {
    pub effect: EffectType,
    pub alpha_hat: f64,
    pub se: f64,
    pub t_stat: f64,
    pub p_value: f64,
    /// Mean-zero influence values; `se = √(E_n ψ²/n)` without bootstrap.
    pub influence: DVector<f64>,
    pub bootstrap: Option<MultiplierKind>,
    pub boot_draws: Option<Vec<f64>>,
    pub nuisances: Nuisances,
    pub warnings: Vec<String>,
}

fn check_binary(op: &'static str, name: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::invalid(op, format!("{name} must be coded 0/1")));
    }
    Ok(())
}

fn arm_rows(t: &DVector<f64>, value: f64) -> Vec<usize> {
    (0..t.len()).filter(|&i| t[i] == value).collect()
}

fn check_arms(op: &'static str, name: &str, t: &DVector<f64>) -> Result<()> {
    for value in [0.0, 1.0] {
        let size = arm_rows(t, value).len();
        if size < MIN_ARM {
            return Err(Error::invalid(op, format!("{name}={value} arm has {size} observations; need at least {MIN_ARM}")));
        }
    }
    Ok(())
}

/// Columns of `x` that vary within `rows`.
fn varying_columns(x: &DMatrix<f64>, rows: &[usize]) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&j| {
            let first = x[(rows[0], j)];
            rows.iter().any(|&i| x[(i, j)] != first)
        })
        .collect()
}

/// Fits `target ~ x` on `rows` and predicts at every observation.
fn arm_regression(x: &DMatrix<f64>, target: &DVector<f64>, rows: &[usize], cfg: &PenaltyConfig, post: bool, stream: RngStream) -> Result<DVector<f64>> {
    let cols = varying_columns(x, rows);
    let ty = DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i]));
    if cols.is_empty() {
        return Ok(DVector::from_element(x.nrows(), ty.mean()));
    }
    let xa = select_columns(x, &cols);
    let fit = rlasso_fit(&select_rows(&xa, rows), &ty, cfg, post, true, stream)?;
    fit.predict(&xa)
}

/// Probability that `t = 1`, fitted on `rows` and evaluated everywhere.
/// Returns `None` for the clip count when `t` is constant on `rows`.
fn probability(x: &DMatrix<f64>, t: &DVector<f64>, rows: &[usize], opts: &TreatmentOptions, stream: RngStream) -> Result<(DVector<f64>, Option<usize>)> {
    let n = x.nrows();
    let tr = DVector::from_iterator(rows.len(), rows.iter().map(|&i| t[i]));
    let share = tr.mean();
    if share == 0.0 || share == 1.0 {
        return Ok((DVector::from_element(n, share), None));
    }
    let cols = varying_columns(x, rows);
    let raw = if cols.is_empty() {
        DVector::from_element(n, share)
    } else {
        let xa = select_columns(x, &cols);
        let xr = select_rows(&xa, rows);
        match opts.propensity {
            PropensityModel::Logit => {
                let fit = rlassologit_fit_with(&xr, &tr, &opts.propensity_cfg, LogitOptions { post: opts.post })?;
                fit.predict_proba(&xa)?
            }
            PropensityModel::Linear => rlasso_fit(&xr, &tr, &opts.propensity_cfg, opts.post, true, stream)?.predict(&xa)?,
        }
    };
    let mut clipped = 0;
    let out = raw.map(|q| {
        let c = q.clamp(opts.clip_low, opts.clip_high);
        if c != q {
            clipped += 1;
        }
        c
    });
    Ok((out, Some(clipped)))
}

fn validate_opts(op: &'static str, opts: &TreatmentOptions) -> Result<()> {
    if !(0.0 < opts.clip_low && opts.clip_low < opts.clip_high && opts.clip_high < 1.0) {
        return Err(Error::invalid(op, "clip bounds must satisfy 0 < low < high < 1"));
    }
    if opts.bootstrap.is_some() && opts.n_rep < 2 {
        return Err(Error::invalid(op, "nRep must be at least 2"));
    }
    Ok(())
}

fn common_checks(op: &'static str, x: &DMatrix<f64>, y: &DVector<f64>, d: &DVector<f64>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n || d.len() != n {
        return Err(Error::invalid(op, "x, d and y differ in length"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid(op, "non-finite values in input"));
    }
    check_binary(op, "treatment", d)
}

fn clip_warning(op: &'static str, clipped: usize, n: usize, warnings: &mut Vec<String>) {
    if clipped as f64 > CLIP_WARN_SHARE * n as f64 {
        let msg = format!("{clipped} of {n} propensities clipped");
        log::warn!("{op}: {msg}");
        warnings.push(msg);
    }
}

fn assemble(
    effect: EffectType,
    alpha_hat: f64,
    influence: DVector<f64>,
    nuisances: Nuisances,
    mut warnings: Vec<String>,
    opts: &TreatmentOptions,
    stream: RngStream,
) -> Result<TreatmentFit> {
    let n = influence.len() as f64;
    let (se, boot_draws) = match opts.bootstrap {
        None => ((influence.norm_squared() / n).sqrt() / n.sqrt(), None),
        Some(kind) => {
            let (se, draws) = bootstrap_se(&influence, kind, opts.n_rep, stream.substream(99))?;
            (se, Some(draws))
        }
    };
    if !(se > 0.0) {
        warnings.push("standard error is zero".into());
    }
    let t_stat = alpha_hat / se;
    Ok(TreatmentFit {
        effect,
        alpha_hat,
        se,
        t_stat,
        p_value: two_sided_p(t_stat),
        influence,
        bootstrap: opts.bootstrap,
        boot_draws,
        nuisances,
        warnings,
    })
}

/// Outcome regressions in both arms of `t` plus the propensity of `t`.
struct ArmFits {
    g1: DVector<f64>,
    g0: DVector<f64>,
    prop: DVector<f64>,
    clipped: usize,
}

fn arm_fits(x: &DMatrix<f64>, y: &DVector<f64>, t: &DVector<f64>, opts: &TreatmentOptions, stream: RngStream) -> Result<ArmFits> {
    let rows1 = arm_rows(t, 1.0);
    let rows0 = arm_rows(t, 0.0);
    let all: Vec<usize> = (0..t.len()).collect();
    let g1 = arm_regression(x, y, &rows1, &opts.outcome_cfg, opts.post, stream.substream(0))?;
    let g0 = arm_regression(x, y, &rows0, &opts.outcome_cfg, opts.post, stream.substream(1))?;
    let (prop, clipped) = probability(x, t, &all, opts, stream.substream(2))?;
    Ok(ArmFits { g1, g0, prop, clipped: clipped.unwrap_or(0) })
}

/// `E_n[ĝ₁ − ĝ₀ + d(y − ĝ₁)/m̂ − (1 − d)(y − ĝ₀)/(1 − m̂)]`.
pub fn rlasso_ate(x: &DMatrix<f64>, d: &DVector<f64>, y: &DVector<f64>, opts: &TreatmentOptions, stream: RngStream) -> Result<TreatmentFit> {
    const OP: &str = "rlasso_ate";
    validate_opts(OP, opts)?;
    common_checks(OP, x, y, d)?;
    check_arms(OP, "treatment", d)?;
    let n = y.len();
    let f = arm_fits(x, y, d, opts, stream)?;
    let mut warnings = Vec::new();
    clip_warning(OP, f.clipped, n, &mut warnings);
    let psi = DVector::from_fn(n, |i, _| {
        let (m, g1, g0) = (f.prop[i], f.g1[i], f.g0[i]);
        g1 - g0 + d[i] * (y[i] - g1) / m - (1.0 - d[i]) * (y[i] - g0) / (1.0 - m)
    });
    let alpha = psi.mean();
    let influence = psi.add_scalar(-alpha);
    let nuis = Nuisances { g1: Some(f.g1), g0: Some(f.g0), propensity: Some(f.prop), clipped: f.clipped, ..Default::default() };
    assemble(EffectType::Ate, alpha, influence, nuis, warnings, opts, stream)
}

/// ATET score `d(y − ĝ₀) − m̂(1 − d)(y − ĝ₀)/(1 − m̂)` for outcome `w`.
fn atet_score(w: &DVector<f64>, t: &DVector<f64>, g0: &DVector<f64>, m: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(w.len(), |i, _| {
        let r = w[i] - g0[i];
        t[i] * r - m[i] * (1.0 - t[i]) * r / (1.0 - m[i])
    })
}

/// `E_n[d(y − ĝ₀) − m̂(1 − d)(y − ĝ₀)/(1 − m̂)] / E_n[d]`.
pub fn rlasso_atet(x: &DMatrix<f64>, d: &DVector<f64>, y: &DVector<f64>, opts: &TreatmentOptions, stream: RngStream) -> Result<TreatmentFit> {
    const OP: &str = "rlasso_atet";
    validate_opts(OP, opts)?;
    common_checks(OP, x, y, d)?;
    check_arms(OP, "treatment", d)?;
    let n = y.len();
    let rows0 = arm_rows(d, 0.0);
    let all: Vec<usize> = (0..n).collect();
    let g0 = arm_regression(x, y, &rows0, &opts.outcome_cfg, opts.post, stream.substream(1))?;
    let (prop, clipped) = probability(x, d, &all, opts, stream.substream(2))?;
    let clipped = clipped.unwrap_or(0);
    let mut warnings = Vec::new();
    clip_warning(OP, clipped, n, &mut warnings);
    let psi = atet_score(y, d, &g0, &prop);
    let pd = d.mean();
    let alpha = psi.mean() / pd;
    let influence = (psi - d * alpha) / pd;
    let nuis = Nuisances { g0: Some(g0), propensity: Some(prop), clipped, ..Default::default() };
    assemble(EffectType::Atet, alpha, influence, nuis, warnings, opts, stream)
}

struct LateParts {
    mu1: DVector<f64>,
    mu0: DVector<f64>,
    m1: DVector<f64>,
    m0: DVector<f64>,
    p: DVector<f64>,
    clipped: usize,
}

fn late_parts(x: &DMatrix<f64>, d: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, opts: &TreatmentOptions, stream: RngStream, need_mu1: bool) -> Result<LateParts> {
    let rows1 = arm_rows(z, 1.0);
    let rows0 = arm_rows(z, 0.0);
    let all: Vec<usize> = (0..z.len()).collect();
    let n = z.len();
    let mu1 = if need_mu1 {
        arm_regression(x, y, &rows1, &opts.outcome_cfg, opts.post, stream.substream(0))?
    } else {
        DVector::zeros(n)
    };
    let mu0 = arm_regression(x, y, &rows0, &opts.outcome_cfg, opts.post, stream.substream(1))?;
    let (p, clip_p) = probability(x, z, &all, opts, stream.substream(2))?;
    let (m1, clip_1) = if need_mu1 { probability(x, d, &rows1, opts, stream.substream(3))? } else { (DVector::zeros(n), None) };
    let (m0, clip_0) = probability(x, d, &rows0, opts, stream.substream(4))?;
    let clipped = clip_p.unwrap_or(0) + clip_1.unwrap_or(0) + clip_0.unwrap_or(0);
    Ok(LateParts { mu1, mu0, m1, m0, p, clipped })
}

fn late_checks(op: &'static str, x: &DMatrix<f64>, d: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, opts: &TreatmentOptions) -> Result<()> {
    validate_opts(op, opts)?;
    common_checks(op, x, y, d)?;
    if z.len() != y.len() {
        return Err(Error::invalid(op, "instrument length differs"));
    }
    check_binary(op, "instrument", z)?;
    check_arms(op, "instrument", z)
}

/// Ratio of the ATE-form scores for `y` and for `d`, with `z` as the
/// assignment.
pub fn rlasso_late(
    x: &DMatrix<f64>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    opts: &TreatmentOptions,
    stream: RngStream,
) -> Result<TreatmentFit> {
    const OP: &str = "rlasso_late";
    late_checks(OP, x, d, y, z, opts)?;
    let n = y.len();
    let lp = late_parts(x, d, y, z, opts, stream, true)?;
    let mut warnings = Vec::new();
    clip_warning(OP, lp.clipped, n, &mut warnings);
    let aipw = |w: &DVector<f64>, h1: &DVector<f64>, h0: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            h1[i] - h0[i] + z[i] * (w[i] - h1[i]) / lp.p[i] - (1.0 - z[i]) * (w[i] - h0[i]) / (1.0 - lp.p[i])
        })
    };
    let num = aipw(y, &lp.mu1, &lp.mu0);
    let den = aipw(d, &lp.m1, &lp.m0);
    let eden = den.mean();
    if eden.abs() < 0.01 {
        return Err(Error::estimation(OP, "no compliers detected"));
    }
    let alpha = num.mean() / eden;
    let influence = (num - den * alpha) / eden;
    let nuis = Nuisances {
        g1: Some(lp.mu1),
        g0: Some(lp.mu0),
        propensity: Some(lp.p),
        m1: Some(lp.m1),
        m0: Some(lp.m0),
        clipped: lp.clipped,
    };
    assemble(EffectType::Late, alpha, influence, nuis, warnings, opts, stream)
}

/// Ratio of the ATET-form scores for `y` and for `d`, with `z` as the
/// assignment: the effect for compliers with `z = 1`.
pub fn rlasso_latet(
    x: &DMatrix<f64>,
    d: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    opts: &TreatmentOptions,
    stream: RngStream,
) -> Result<TreatmentFit> {
    const OP: &str = "rlasso_latet";
    late_checks(OP, x, d, y, z, opts)?;
    let n = y.len();
    let lp = late_parts(x, d, y, z, opts, stream, false)?;
    let mut warnings = Vec::new();
    clip_warning(OP, lp.clipped, n, &mut warnings);
    let num = atet_score(y, z, &lp.mu0, &lp.p);
    let den = atet_score(d, z, &lp.m0, &lp.p);
    let eden = den.mean();
    if (eden / z.mean()).abs() < 0.01 {
        return Err(Error::estimation(OP, "no compliers detected"));
    }
    let alpha = num.mean() / eden;
    let influence = (num - den * alpha) / eden;
    let nuis = Nuisances { g0: Some(lp.mu0), propensity: Some(lp.p), m0: Some(lp.m0), clipped: lp.clipped, ..Default::default() };
    assemble(EffectType::Latet, alpha, influence, nuis, warnings, opts, stream)
}

/// Standard deviation of `E_n[g ψ]` over `n_rep` multiplier draws.
pub fn bootstrap_se(influence: &DVector<f64>, kind: MultiplierKind, n_rep: usize, stream: RngStream) -> Result<(f64, Vec<f64>)> {
    if n_rep < 2 {
        return Err(Error::invalid("bootstrap_se", "nRep must be at least 2"));
    }
    let n = influence.len() as f64;
    let m = DMatrix::from_column_slice(influence.len(), 1, (influence / n).as_slice());
    let draws = multiplier_projections(&m, n_rep, kind, stream, |v| v[0]);
    Ok((sample_sd(&draws), draws))
}
