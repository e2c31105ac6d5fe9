//! Seeded random streams, bootstrap multipliers and synthetic designs.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::dataio::{DesignMatrix, Role};
use crate::error::{Error, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams are plain values. Bootstrap loops derive one sub-stream per
/// replicate so serial and parallel runs draw identical numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Child stream `index`, statistically independent of its parent and
    /// of every other child.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0xA5A5_5A5A))),
            stream_id: index,
        }
    }
}

/// Mean-zero, unit-variance weights for multiplier bootstraps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    /// Standard normal.
    #[default]
    Normal,
    /// Centered standard exponential, `E - 1`.
    Bayes,
    /// Rademacher, ±1 with equal probability.
    Wild,
}

impl std::str::FromStr for MultiplierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(MultiplierKind::Normal),
            "bayes" => Ok(MultiplierKind::Bayes),
            "wild" => Ok(MultiplierKind::Wild),
            other => Err(Error::invalid("draw_multipliers", format!("unknown multiplier kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for MultiplierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MultiplierKind::Normal => "normal",
            MultiplierKind::Bayes => "bayes",
            MultiplierKind::Wild => "wild",
        })
    }
}

/// Fills `out` with multipliers drawn from `rng`.
pub fn fill_multipliers<R: Rng + ?Sized>(kind: MultiplierKind, rng: &mut R, out: &mut [f64]) {
    match kind {
        MultiplierKind::Normal => out.iter_mut().for_each(|g| *g = StandardNormal.sample(rng)),
        MultiplierKind::Bayes => out.iter_mut().for_each(|g| {
            let e: f64 = Exp1.sample(rng);
            *g = e - 1.0;
        }),
        MultiplierKind::Wild => out
            .iter_mut()
            .for_each(|g| *g = if rng.random::<bool>() { 1.0 } else { -1.0 }),
    }
}

pub fn draw_multipliers(kind: MultiplierKind, m: usize, stream: RngStream) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("draw_multipliers", "m must be at least 1"));
    }
    let mut out = vec![0.0; m];
    fill_multipliers(kind, &mut stream.rng(), &mut out);
    Ok(out)
}

/// `n × p` matrix of iid standard normals.
pub fn standard_normal_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Settings for the sparse linear designs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDgpConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub beta_value: f64,
    pub noise_sd: f64,
    /// Envelope constant of the approximately sparse generator.
    pub decay_a_const: f64,
    /// Envelope exponent of the approximately sparse generator.
    pub decay_a: f64,
}

impl Default for SparseDgpConfig {
    fn default() -> Self {
        SparseDgpConfig { n: 100, p: 100, s: 3, beta_value: 5.0, noise_sd: 1.0, decay_a_const: 5.0, decay_a: 2.0 }
    }
}

impl SparseDgpConfig {
    pub fn validate(&self) -> Result<()> {
        const OP: &str = "gen_sparse_linear";
        if self.n == 0 {
            return Err(Error::invalid(OP, "n must be at least 1"));
        }
        if self.s == 0 || self.s > self.p {
            return Err(Error::invalid(OP, format!("need 1 <= s <= p, got s={} p={}", self.s, self.p)));
        }
        if !(self.noise_sd > 0.0) {
            return Err(Error::invalid(OP, "noise_sd must be positive"));
        }
        if !(self.decay_a > 0.5) {
            return Err(Error::invalid(OP, "decay exponent must exceed 1/2"));
        }
        Ok(())
    }
}

/// Synthetic draw: design, outcome and true coefficients.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub design: DesignMatrix,
    pub y: DVector<f64>,
    pub beta: DVector<f64>,
}

/// `y = Xβ + σε` with `X`, `ε` iid standard normal and `β = (b,…,b,0,…,0)`.
pub fn gen_sparse_linear(cfg: &SparseDgpConfig, stream: RngStream) -> Result<Simulated> {
    cfg.validate()?;
    let beta = DVector::from_fn(cfg.p, |j, _| if j < cfg.s { cfg.beta_value } else { 0.0 });
    Ok(linear_draw(cfg, beta, stream))
}

/// Same design as [`gen_sparse_linear`] with `β_j = A·j^(-a)` for every `j`.
pub fn gen_approx_sparse_linear(cfg: &SparseDgpConfig, stream: RngStream) -> Result<Simulated> {
    cfg.validate()?;
    let beta = DVector::from_fn(cfg.p, |j, _| cfg.decay_a_const * ((j + 1) as f64).powf(-cfg.decay_a));
    Ok(linear_draw(cfg, beta, stream))
}

fn linear_draw(cfg: &SparseDgpConfig, beta: DVector<f64>, stream: RngStream) -> Simulated {
    let mut rng = stream.rng();
    let x = standard_normal_matrix(cfg.n, cfg.p, &mut rng);
    let eps = standard_normal_vector(cfg.n, &mut rng);
    let y = &x * &beta + eps * cfg.noise_sd;
    Simulated { design: DesignMatrix::unnamed(x, Role::Control), y, beta }
}

/// Many-causes design: `p1` target columns `D`, `p2` control columns `W`,
/// `y = alpha1·D₁ + beta1·W₁ + ε`.
pub fn gen_causes_controls(
    n: usize,
    p1: usize,
    p2: usize,
    alpha1: f64,
    beta1: f64,
    stream: RngStream,
) -> Result<(DesignMatrix, DVector<f64>)> {
    if n == 0 || p1 == 0 || p2 == 0 {
        return Err(Error::invalid("gen_causes_controls", "n, p1 and p2 must be positive"));
    }
    let mut rng = stream.rng();
    let d = standard_normal_matrix(n, p1, &mut rng);
    let w = standard_normal_matrix(n, p2, &mut rng);
    let eps = standard_normal_vector(n, &mut rng);
    let y = d.column(0) * alpha1 + w.column(0) * beta1 + eps;
    let x = crate::linalg::hstack(&[&d, &w]);
    let mut dm = DesignMatrix::unnamed(x, Role::Control);
    for j in 0..p1 {
        dm.roles[j] = Role::Target;
    }
    Ok((dm, y))
}

/// Partially linear design `y = α d + x'β + ε`, `d = x'γ + v`.
///
/// The first `s` entries of both `β` and `γ` are `coef`; the rest are zero.
/// Regressors have Toeplitz correlation `rho^|j-k|`.
#[derive(Debug, Clone)]
pub struct PartiallyLinear {
    pub x: DMatrix<f64>,
    pub d: DVector<f64>,
    pub y: DVector<f64>,
    pub alpha: f64,
}

pub fn gen_partially_linear(
    n: usize,
    p: usize,
    s: usize,
    alpha: f64,
    coef: f64,
    rho: f64,
    stream: RngStream,
) -> PartiallyLinear {
    let mut rng = stream.rng();
    let x = toeplitz_normal(n, p, rho, &mut rng);
    let beta = DVector::from_fn(p, |j, _| if j < s { coef } else { 0.0 });
    let d = &x * &beta + standard_normal_vector(n, &mut rng);
    let y = &d * alpha + &x * &beta + standard_normal_vector(n, &mut rng);
    PartiallyLinear { x, d, y, alpha }
}

/// Rows iid `N(0, Σ)` with `Σ_jk = rho^|j-k|`, built as an AR(1) recursion.
pub fn toeplitz_normal<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let mut x = standard_normal_matrix(n, p, rng);
    let scale = (1.0 - rho * rho).max(0.0).sqrt();
    for i in 0..n {
        for j in 1..p {
            x[(i, j)] = rho * x[(i, j - 1)] + scale * x[(i, j)];
        }
    }
    x
}

/// Rows iid `N(0, Σ)` with `Σ_jk = rho` off the diagonal, `rho ≥ 0`.
pub fn equicorrelated_normal<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> DMatrix<f64> {
    let common = standard_normal_vector(n, rng);
    let mut x = standard_normal_matrix(n, p, rng);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = a * common[i] + b * x[(i, j)];
        }
    }
    x
}
