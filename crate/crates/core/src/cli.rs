//! Command-line front end.
//!
//! [`run`] parses arguments, executes one subcommand and returns the exit
//! code with the text destined for standard output and standard error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::dataio::{self, expand_design, load_csv, parse_column_list, Dataset, DesignMatrix, DesignSpec, NaPolicy, Role};
use crate::error::{Error, Result};
use crate::inference::{confidence_band, effects_batch_with, EffectMethod};
use crate::iv::rlasso_iv;
use crate::linalg::{select_columns, HcKind};
use crate::report;
use crate::rlasso::{rlasso_fit, sup_score_test, Homoscedastic, PenaltyConfig};
use crate::simkit::{gen_approx_sparse_linear, gen_causes_controls, gen_partially_linear, gen_sparse_linear, MultiplierKind, RngStream, SparseDgpConfig};
use crate::treatment::{rlasso_ate, rlasso_atet, rlasso_late, rlasso_latet, EffectType, PropensityModel, TreatmentOptions};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 12345;
/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "LASSOINF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lassoinf", version, about = "Rigorous Lasso estimation and post-selection inference")]
struct Cli {
    /// Worker threads (defaults to $LASSOINF_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lasso or post-Lasso fit with a sup-score test.
    Fit(FitArgs),
    /// Inference on one or more target coefficients.
    Effects(EffectsArgs),
    /// Instrumental-variables estimation with optional selection.
    Iv(IvArgs),
    /// ATE, ATET, LATE or LATET.
    Treat(TreatArgs),
    /// Joint significance test of all regressors.
    Supscore(SupscoreArgs),
    /// Write a synthetic dataset as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NaArg {
    Reject,
    Drop,
}

#[derive(Debug, Args)]
struct Common {
    /// Input CSV with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Handling of rows with missing cells.
    #[arg(long, value_enum, default_value = "reject")]
    na: NaArg,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DesignArgs {
    #[arg(long)]
    outcome: String,
    /// Control columns: names, ranges like x1..x100, or prefixes like x_*.
    /// Defaults to every column not used in another role.
    #[arg(long)]
    controls: Option<String>,
    /// Pairs to multiply, e.g. "a:b,a:c".
    #[arg(long, default_value = "")]
    interactions: String,
    /// Add all pairwise products among these columns.
    #[arg(long, default_value = "")]
    pairwise: String,
    #[arg(long)]
    no_intercept: bool,
}

#[derive(Debug, Args)]
struct PenaltyArgs {
    /// Penalty constant c (default 1.1 with post-Lasso, 0.5 otherwise).
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Noise model for the penalty: true, false or none (fixed --lambda).
    #[arg(long, default_value = "false")]
    homoscedastic: String,
    #[arg(long)]
    x_dependent: bool,
    /// Fixed penalty level; required with --homoscedastic none.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    num_sim: usize,
    #[arg(long, default_value_t = 15)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

impl PenaltyArgs {
    fn config(&self, post: bool) -> Result<PenaltyConfig> {
        let homoscedastic = match self.homoscedastic.to_ascii_lowercase().as_str() {
            "true" | "yes" => Homoscedastic::Yes,
            "false" | "no" => Homoscedastic::No,
            "none" => Homoscedastic::None,
            other => return Err(Error::invalid("cli", format!("--homoscedastic must be true, false or none, got '{other}'"))),
        };
        let base = if post { PenaltyConfig::default() } else { PenaltyConfig::lasso_default() };
        let cfg = PenaltyConfig {
            c: self.c.unwrap_or(base.c),
            gamma: self.gamma,
            homoscedastic,
            x_dependent: self.x_dependent,
            lambda_start: self.lambda,
            num_sim: self.num_sim,
            max_iter: self.max_iter,
            tol: self.tol,
            ..base
        };
        cfg.validate("cli")?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    /// Refit OLS on the selected variables.
    #[arg(long)]
    post: bool,
    #[arg(long, default_value_t = 1000)]
    num_boot: usize,
    /// Use raw columns in the sup-score statistic.
    #[arg(long)]
    raw_supscore: bool,
    #[arg(long)]
    no_supscore: bool,
}

#[derive(Debug, Args)]
struct EffectsArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    /// Target columns.
    #[arg(long)]
    targets: String,
    #[arg(long, default_value = "partialling-out")]
    method: String,
    /// Simultaneous intervals via the multiplier bootstrap.
    #[arg(long)]
    joint: bool,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 1000)]
    num_boot: usize,
    #[arg(long, default_value = "normal")]
    multiplier: String,
    /// HC1 instead of HC0 in double selection.
    #[arg(long)]
    hc1: bool,
    /// Include influence values in JSON output.
    #[arg(long)]
    influence: bool,
}

#[derive(Debug, Args)]
struct IvArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    /// Endogenous treatment column.
    #[arg(long)]
    treatment: String,
    #[arg(long)]
    instruments: String,
    /// Keep only instruments whose column mean exceeds this value.
    #[arg(long)]
    instrument_mean_above: Option<f64>,
    #[arg(long, overrides_with = "no_select_x")]
    select_x: bool,
    #[arg(long, overrides_with = "select_x")]
    no_select_x: bool,
    #[arg(long, overrides_with = "no_select_z")]
    select_z: bool,
    #[arg(long, overrides_with = "select_z")]
    no_select_z: bool,
}

#[derive(Debug, Args)]
struct TreatArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[command(flatten)]
    penalty: PenaltyArgs,
    #[arg(long, default_value = "ate")]
    effect: String,
    #[arg(long)]
    treatment: String,
    #[arg(long)]
    instrument: Option<String>,
    #[arg(long, default_value = "none")]
    bootstrap: String,
    #[arg(long, default_value_t = 500)]
    nrep: usize,
    #[arg(long, default_value = "logit")]
    propensity: String,
}

#[derive(Debug, Args)]
struct SupscoreArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    design: DesignArgs,
    #[arg(long, default_value_t = 1000)]
    num_boot: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    raw_supscore: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimKind {
    /// y = Xβ + ε with s equal coefficients.
    Sparse,
    /// Coefficients decaying as A·j^(-a).
    Approx,
    /// Many causes and many controls.
    Causes,
    /// Partially linear model with a target column d.
    Plm,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    kind: SimKind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 3)]
    s: usize,
    #[arg(long, default_value_t = 5.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    #[arg(long, default_value_t = 20)]
    p1: usize,
    #[arg(long, default_value_t = 20)]
    p2: usize,
    #[arg(long, default_value_t = 5.0)]
    decay_const: f64,
    #[arg(long, default_value_t = 2.0)]
    decay_exp: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Exit status and captured streams of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    CliOutput { code: 0, stdout: text, stderr: String::new() }
                }
                _ => CliOutput { code: 2, stdout: String::new(), stderr: text },
            };
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return CliOutput { code: 1, stdout: String::new(), stderr: format!("error: thread pool: {e}\n") },
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(stdout) => CliOutput { code: 0, stdout, stderr: String::new() },
        Err(e) => {
            let code = if matches!(e, Error::InvalidInput { op: "cli", .. }) { 2 } else { 1 };
            CliOutput { code, stdout: String::new(), stderr: format!("error: {e}\n") }
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::invalid("cli", msg)
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Fit(a) => cmd_fit(a),
        Command::Effects(a) => cmd_effects(a),
        Command::Iv(a) => cmd_iv(a),
        Command::Treat(a) => cmd_treat(a),
        Command::Supscore(a) => cmd_supscore(a),
        Command::Simulate(a) => cmd_simulate(a),
    }
}

fn load(common: &Common) -> Result<Dataset> {
    let policy = match common.na {
        NaArg::Reject => NaPolicy::Reject,
        NaArg::Drop => NaPolicy::DropRows,
    };
    let (ds, report) = load_csv(&common.input, policy)?;
    if report.dropped_rows > 0 {
        log::warn!("dropped {} incomplete row(s)", report.dropped_rows);
    }
    Ok(ds)
}

fn names(list: &str, ds: &Dataset) -> Result<Vec<String>> {
    parse_column_list(list, ds.names())
}

fn pairs(list: &str) -> Result<Vec<(String, String)>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            item.split_once(':')
                .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                .ok_or_else(|| usage(format!("interaction '{item}' is not of the form a:b")))
        })
        .collect()
}

/// Design spec from the shared flags plus subcommand-specific roles.
fn build_spec(ds: &Dataset, d: &DesignArgs, targets: Vec<String>, instruments: Vec<String>) -> Result<DesignSpec> {
    let mut controls = match &d.controls {
        Some(list) => names(list, ds)?,
        None => ds.names().to_vec(),
    };
    controls.retain(|c| !targets.contains(c) && !instruments.contains(c) && *c != d.outcome);
    let mut interactions = pairs(&d.interactions)?;
    interactions.extend(dataio::pairwise(&names(&d.pairwise, ds)?));
    Ok(DesignSpec {
        outcome: d.outcome.clone(),
        targets,
        controls,
        instruments,
        interactions,
        include_intercept: !d.no_intercept,
    })
}

fn emit(format: Format, table: String, value: Value) -> String {
    match format {
        Format::Table => table,
        Format::Json => {
            let mut obj = json!({ "schema_version": report::SCHEMA_VERSION });
            if let (Some(o), Value::Object(v)) = (obj.as_object_mut(), value) {
                o.extend(v);
            }
            let mut s = serde_json::to_string_pretty(&obj).expect("json values serialize");
            s.push('\n');
            s
        }
    }
}

fn removed_note(dm: &DesignMatrix) -> String {
    if dm.removed.is_empty() {
        String::new()
    } else {
        format!("Removed constant columns: {}\n", dm.removed.join(", "))
    }
}

fn cmd_fit(a: FitArgs) -> Result<String> {
    let ds = load(&a.common)?;
    let spec = build_spec(&ds, &a.design, Vec::new(), Vec::new())?;
    let dm = expand_design(&ds, &spec)?;
    let y = ds.vector(&spec.outcome)?;
    let cfg = a.penalty.config(a.post)?;
    let stream = RngStream::new(a.common.seed, 0);
    let fit = rlasso_fit(&dm.x, &y, &cfg, a.post, spec.include_intercept, stream.substream(0))?;
    let sup = if a.no_supscore {
        None
    } else {
        Some(sup_score_test(&dm.x, &y, a.num_boot, 0.05, !a.raw_supscore, stream.substream(1))?)
    };
    let table = removed_note(&dm) + &report::fit_summary(&dm.column_names, &fit, sup.as_ref());
    let mut value = report::fit_json(&dm.column_names, &fit, sup.as_ref());
    value["removed_columns"] = json!(dm.removed);
    Ok(emit(a.common.format, table, value))
}

fn cmd_effects(a: EffectsArgs) -> Result<String> {
    let ds = load(&a.common)?;
    let targets = names(&a.targets, &ds)?;
    if targets.is_empty() {
        return Err(usage("--targets is empty"));
    }
    let spec = build_spec(&ds, &a.design, targets, Vec::new())?;
    let dm = expand_design(&ds, &spec)?;
    let y = ds.vector(&spec.outcome)?;
    let method: EffectMethod = a.method.parse().map_err(|_| usage(format!("unknown --method '{}'", a.method)))?;
    let kind: MultiplierKind = a.multiplier.parse().map_err(|_| usage(format!("unknown --multiplier '{}'", a.multiplier)))?;
    let cfg = a.penalty.config(true)?;
    let target_idx = dm.indices_with_role(Role::Target);
    if target_idx.is_empty() {
        return Err(Error::estimation("effects", "every target column was removed as constant"));
    }
    let hc = if a.hc1 { HcKind::Hc1 } else { HcKind::Hc0 };
    let stream = RngStream::new(a.common.seed, 0);
    let es = effects_batch_with(&dm, &y, &target_idx, method, &cfg, hc, stream.substream(0))?;
    let band = if es.estimates.is_empty() {
        None
    } else {
        Some(confidence_band(&es, a.level, a.joint, a.num_boot, kind, stream.substream(1))?)
    };
    let mut table = removed_note(&dm) + &report::effects_summary(&es);
    if let Some(b) = &band {
        table.push('\n');
        table.push_str(&report::band_table(b));
    }
    let value = report::effects_json(&es, band.as_ref(), a.influence);
    Ok(emit(a.common.format, table, value))
}

fn cmd_iv(a: IvArgs) -> Result<String> {
    let ds = load(&a.common)?;
    let mut z_names = names(&a.instruments, &ds)?;
    if let Some(t) = a.instrument_mean_above {
        z_names = dataio::filter_by_column_mean(&ds, &z_names, t)?;
    }
    if z_names.is_empty() {
        return Err(usage("no instruments given"));
    }
    let spec = build_spec(&ds, &a.design, vec![a.treatment.clone()], z_names)?;
    let dm = expand_design(&ds, &spec)?;
    let y = ds.vector(&spec.outcome)?;
    let d_idx = dm.index_of(&a.treatment).ok_or_else(|| Error::estimation("iv", "treatment column is constant"))?;
    let d = DVector::from_column_slice(dm.x.column(d_idx).as_slice());
    let x_idx = dm.indices_with_role(Role::Control);
    let z_idx = dm.indices_with_role(Role::Instrument);
    if z_idx.is_empty() {
        return Err(Error::estimation("iv", "every instrument was removed as constant"));
    }
    let x = select_columns(&dm.x, &x_idx);
    let z = select_columns(&dm.x, &z_idx);
    let cfg = a.penalty.config(true)?;
    let fit = rlasso_iv(
        (!x_idx.is_empty()).then_some(&x),
        &d,
        &y,
        &z,
        a.select_x && !a.no_select_x,
        a.select_z && !a.no_select_z,
        &cfg,
        RngStream::new(a.common.seed, 0),
    )?;
    let x_names: Vec<String> = x_idx.iter().map(|&j| dm.column_names[j].clone()).collect();
    let zn: Vec<String> = z_idx.iter().map(|&j| dm.column_names[j].clone()).collect();
    let table = removed_note(&dm) + &report::iv_summary(&a.treatment, &fit);
    Ok(emit(a.common.format, table, report::iv_json(&a.treatment, &fit, &x_names, &zn)))
}

fn column(ds: &Dataset, name: &str) -> Result<DVector<f64>> {
    ds.vector(name).map_err(|_| usage(format!("unknown column '{name}'")))
}

fn cmd_treat(a: TreatArgs) -> Result<String> {
    let ds = load(&a.common)?;
    let effect: EffectType = a.effect.parse().map_err(|_| usage(format!("unknown --effect '{}'", a.effect)))?;
    let bootstrap = match a.bootstrap.as_str() {
        "none" => None,
        other => Some(other.parse::<MultiplierKind>().map_err(|_| usage(format!("unknown --bootstrap '{other}'")))?),
    };
    let propensity = match a.propensity.as_str() {
        "logit" => PropensityModel::Logit,
        "linear" => PropensityModel::Linear,
        other => return Err(usage(format!("unknown --propensity '{other}'"))),
    };
    let mut exclude = vec![a.treatment.clone()];
    exclude.extend(a.instrument.clone());
    let mut spec = build_spec(&ds, &a.design, Vec::new(), Vec::new())?;
    spec.controls.retain(|c| !exclude.contains(c));
    let dm = expand_design(&ds, &spec)?;
    let y = ds.vector(&spec.outcome)?;
    let d = column(&ds, &a.treatment)?;
    let cfg = a.penalty.config(true)?;
    let opts = TreatmentOptions {
        outcome_cfg: cfg.clone(),
        propensity_cfg: cfg,
        propensity,
        bootstrap,
        n_rep: a.nrep,
        ..Default::default()
    };
    let stream = RngStream::new(a.common.seed, 0);
    let instrument = || -> Result<DVector<f64>> {
        let name = a.instrument.as_deref().ok_or_else(|| usage("--instrument is required for LATE and LATET"))?;
        column(&ds, name)
    };
    let fit = match effect {
        EffectType::Ate => rlasso_ate(&dm.x, &d, &y, &opts, stream)?,
        EffectType::Atet => rlasso_atet(&dm.x, &d, &y, &opts, stream)?,
        EffectType::Late => rlasso_late(&dm.x, &d, &y, &instrument()?, &opts, stream)?,
        EffectType::Latet => rlasso_latet(&dm.x, &d, &y, &instrument()?, &opts, stream)?,
    };
    let table = removed_note(&dm) + &report::treatment_summary(&fit);
    Ok(emit(a.common.format, table, report::treatment_json(&fit)))
}

fn cmd_supscore(a: SupscoreArgs) -> Result<String> {
    let ds = load(&a.common)?;
    let spec = build_spec(&ds, &a.design, Vec::new(), Vec::new())?;
    let dm = expand_design(&ds, &spec)?;
    let y = ds.vector(&spec.outcome)?;
    let res = sup_score_test(&dm.x, &y, a.num_boot, a.alpha, !a.raw_supscore, RngStream::new(a.common.seed, 0))?;
    let mut table = report::sup_score_line(&res);
    table.push_str(&format!(
        " critical value at level {}: {}; {}\n",
        report::fmt_sig(1.0 - a.alpha, 3),
        report::fmt_sig(res.critical_value, 4),
        if res.reject { "reject" } else { "do not reject" }
    ));
    Ok(emit(a.common.format, table, json!({ "sup_score": report::sup_json(&res) })))
}

fn cmd_simulate(a: SimulateArgs) -> Result<String> {
    let stream = RngStream::new(a.seed, 0);
    let (names, cols): (Vec<String>, Vec<Vec<f64>>) = match a.kind {
        SimKind::Sparse | SimKind::Approx => {
            let cfg = SparseDgpConfig {
                n: a.n,
                p: a.p,
                s: a.s,
                beta_value: a.beta,
                noise_sd: a.noise,
                decay_a_const: a.decay_const,
                decay_a: a.decay_exp,
            };
            let sim = match a.kind {
                SimKind::Sparse => gen_sparse_linear(&cfg, stream)?,
                _ => gen_approx_sparse_linear(&cfg, stream)?,
            };
            with_outcome("y", &sim.y, "x", &sim.design.x)
        }
        SimKind::Causes => {
            let (dm, y) = gen_causes_controls(a.n, a.p1, a.p2, a.beta, a.beta, stream)?;
            let mut names = vec!["y".to_string()];
            names.extend((1..=a.p1).map(|j| format!("d{j}")));
            names.extend((1..=a.p2).map(|j| format!("w{j}")));
            let mut cols = vec![y.as_slice().to_vec()];
            cols.extend(dm.x.column_iter().map(|c| c.as_slice().to_vec()));
            (names, cols)
        }
        SimKind::Plm => {
            if a.s > a.p {
                return Err(usage("--s must not exceed --p"));
            }
            let sim = gen_partially_linear(a.n, a.p, a.s, a.beta, 1.0, 0.5, stream);
            let (mut names, mut cols) = with_outcome("y", &sim.y, "x", &sim.x);
            names.insert(1, "d".into());
            cols.insert(1, sim.d.as_slice().to_vec());
            (names, cols)
        }
    };
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    dataio::write_csv(&a.out, &names, &refs)?;
    Ok(format!("wrote {} rows x {} columns to {}\n", cols[0].len(), names.len(), a.out.display()))
}

fn with_outcome(yname: &str, y: &DVector<f64>, prefix: &str, x: &DMatrix<f64>) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut names = vec![yname.to_string()];
    names.extend((1..=x.ncols()).map(|j| format!("{prefix}{j}")));
    let mut cols = vec![y.as_slice().to_vec()];
    cols.extend(x.column_iter().map(|c| c.as_slice().to_vec()));
    (names, cols)
}
