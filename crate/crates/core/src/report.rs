//! Plain-text summaries and JSON encodings of estimation results.

use serde_json::{json, Value};

use crate::inference::{ConfidenceBand, EffectsSet};
use crate::iv::IvFit;
use crate::rlasso::{RlassoFit, SupScoreResult};
use crate::stats::significance_stars;
use crate::treatment::TreatmentFit;

pub const SCHEMA_VERSION: u32 = 1;

pub const SIGNIF_LEGEND: &str = "---\nSignif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1\n";

/// `x` rounded to `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NA".into() } else if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn fmt_p(p: f64) -> String {
    if p < 2e-16 {
        "<2e-16".into()
    } else if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        fmt_sig(p, 3)
    }
}

/// Right-aligned table with a left-aligned first column.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width = vec![0; cols];
    for (j, h) in header.iter().enumerate() {
        width[j] = h.chars().count();
    }
    for row in rows {
        for (j, cell) in row.iter().enumerate().take(cols) {
            width[j] = width[j].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>, out: &mut String| {
        for (j, cell) in cells.enumerate() {
            if j == 0 {
                out.push_str(&format!("{cell:<w$}", w = width[0]));
            } else if j < cols {
                out.push_str(&format!(" {cell:>w$}", w = width[j]));
            } else {
                out.push(' ');
                out.push_str(cell);
            }
        }
        out.push('\n');
    };
    line(&mut header.iter().copied(), &mut out);
    for row in rows {
        line(&mut row.iter().map(String::as_str), &mut out);
    }
    out
}

/// Rows of `(name, estimate, se, t, p)` in the usual regression layout.
pub fn coefficient_table(first: &str, labels: [&str; 4], rows: &[(String, f64, f64, f64, f64)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, est, se, t, p)| {
            vec![
                name.clone(),
                fmt_sig(*est, 4),
                fmt_sig(*se, 4),
                format!("{t:.3}"),
                fmt_p(*p),
                significance_stars(*p).to_string(),
            ]
        })
        .collect();
    let header = [first, labels[0], labels[1], labels[2], labels[3]];
    let mut out = render_table(&header, &body);
    out.push_str(SIGNIF_LEGEND);
    out
}

fn quantiles(v: &[f64]) -> [f64; 5] {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        // linear interpolation between order statistics
        let h = (s.len() - 1) as f64 * p;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    [s[0], q(0.25), q(0.5), q(0.75), s[s.len() - 1]]
}

pub fn fit_summary(names: &[String], fit: &RlassoFit, sup: Option<&SupScoreResult>) -> String {
    let n = fit.residuals.len();
    let mut out = String::new();
    out.push_str(&format!("Post-Lasso Estimation: {}\n\n", if fit.post { "TRUE" } else { "FALSE" }));
    out.push_str(&format!("Total number of variables: {}\n", names.len()));
    out.push_str(&format!("Number of selected variables: {}\n\n", fit.support.len()));
    out.push_str("Residuals:\n");
    let q = quantiles(fit.residuals.as_slice());
    let qs: Vec<String> = q.iter().map(|v| fmt_sig(*v, 4)).collect();
    out.push_str(&render_table(&["Min", "1Q", "Median", "3Q", "Max"], &[qs]));
    out.push('\n');
    let mut rows = Vec::new();
    if let Some(a) = fit.intercept {
        rows.push(vec!["(Intercept)".to_string(), fmt_sig(a, 4)]);
    }
    for &j in &fit.support {
        rows.push(vec![names[j].clone(), fmt_sig(fit.coefficients[j], 4)]);
    }
    out.push_str(&render_table(&["", "Estimate"], &rows));
    out.push('\n');
    let df = fit.support.len() + usize::from(fit.intercept.is_some());
    if n > df {
        let rse = (fit.residuals.norm_squared() / (n - df) as f64).sqrt();
        out.push_str(&format!("Residual standard error: {}\n", fmt_sig(rse, 4)));
    }
    out.push_str(&format!("Multiple R-squared: {}\n", fmt_sig(fit.r2, 4)));
    out.push_str(&format!("Adjusted R-squared: {}\n", fmt_sig(fit.adj_r2, 4)));
    if let Some(s) = sup {
        out.push_str("Joint significance test:\n");
        out.push_str(&sup_score_line(s));
    }
    for w in &fit.warnings {
        out.push_str(&format!("Warning: {w}\n"));
    }
    out
}

pub fn sup_score_line(s: &SupScoreResult) -> String {
    format!(
        " the sup score statistic for joint significance test is {} with a p-value of {}\n",
        fmt_sig(s.statistic, 4),
        fmt_sig(s.p_value, 4)
    )
}

pub fn effects_summary(es: &EffectsSet) -> String {
    let rows: Vec<_> = es
        .estimates
        .iter()
        .map(|e| (e.target_name.clone(), e.alpha_hat, e.se, e.t_stat, e.p_value))
        .collect();
    let mut out = String::from("Estimates and significance testing of the effect of target variables\n");
    out.push_str(&coefficient_table("", ["Estimate.", "Std. Error", "t value", "Pr(>|t|)"], &rows));
    for (name, err) in &es.failures {
        out.push_str(&format!("Failed: {name}: {err}\n"));
    }
    out
}

/// Percentage with up to three decimals and no trailing zeros.
fn pct(x: f64) -> String {
    let s = format!("{x:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn band_table(band: &ConfidenceBand) -> String {
    let lo = format!("{}%", pct(100.0 * (1.0 - band.level) / 2.0));
    let hi = format!("{}%", pct(100.0 * (1.0 + band.level) / 2.0));
    let rows: Vec<Vec<String>> = band
        .names
        .iter()
        .enumerate()
        .map(|(j, n)| vec![n.clone(), fmt_sig(band.lower[j], 4), fmt_sig(band.upper[j], 4)])
        .collect();
    let mut out = String::new();
    if band.joint {
        out.push_str(&format!("Joint confidence intervals (critical value {})\n", fmt_sig(band.critical_value, 4)));
    }
    out.push_str(&render_table(&["", &lo, &hi], &rows));
    out
}

pub fn iv_summary(name: &str, fit: &IvFit) -> String {
    let mut out = String::from("Estimates and significance testing of the effect of target variables\n");
    out.push_str(&coefficient_table(
        "",
        ["Estimate.", "Std. Error", "t value", "Pr(>|t|)"],
        &[(name.to_string(), fit.alpha_hat, fit.se, fit.t_stat, fit.p_value)],
    ));
    for w in &fit.warnings {
        out.push_str(&format!("Warning: {w}\n"));
    }
    out
}

pub fn treatment_summary(fit: &TreatmentFit) -> String {
    let mut out = String::from("Estimation and significance testing of the treatment effect\n");
    out.push_str(&format!("Type: {}\n", json!(fit.effect).as_str().unwrap_or_default()));
    out.push_str(&format!(
        "Bootstrap: {}\n",
        fit.bootstrap.map_or("not applicable".to_string(), |k| k.to_string())
    ));
    out.push_str(&coefficient_table(
        "",
        ["coeff.", "se.", "t-value", "p-value"],
        &[("TE".to_string(), fit.alpha_hat, fit.se, fit.t_stat, fit.p_value)],
    ));
    for w in &fit.warnings {
        out.push_str(&format!("Warning: {w}\n"));
    }
    out
}

fn num(x: f64) -> Value {
    // non-finite values become null
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn fit_json(names: &[String], fit: &RlassoFit, sup: Option<&SupScoreResult>) -> Value {
    let coefs: serde_json::Map<String, Value> =
        fit.support.iter().map(|&j| (names[j].clone(), num(fit.coefficients[j]))).collect();
    let loadings: serde_json::Map<String, Value> =
        names.iter().enumerate().map(|(j, n)| (n.clone(), num(fit.loadings[j]))).collect();
    json!({
        "family": fit.family,
        "post": fit.post,
        "intercept": fit.intercept.map(num),
        "coefficients": coefs,
        "support": fit.support.iter().map(|&j| names[j].clone()).collect::<Vec<_>>(),
        "lambda": num(fit.lambda),
        "loadings": loadings,
        "sigma_hat": num(fit.sigma_hat),
        "r2": num(fit.r2),
        "adj_r2": num(fit.adj_r2),
        "iterations": fit.iterations_used,
        "converged": fit.converged,
        "degenerate": fit.degenerate,
        "warnings": fit.warnings,
        "sup_score": sup.map(sup_json),
    })
}

pub fn sup_json(s: &SupScoreResult) -> Value {
    json!({
        "statistic": num(s.statistic),
        "critical_value": num(s.critical_value),
        "p_value": num(s.p_value),
        "num_boot": s.num_boot,
        "alpha": num(s.alpha),
        "reject": s.reject,
    })
}

pub fn effects_json(es: &EffectsSet, band: Option<&ConfidenceBand>, include_influence: bool) -> Value {
    let estimates: Vec<Value> = es
        .estimates
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let mut v = json!({
                "target": e.target_name,
                "method": e.method,
                "estimate": num(e.alpha_hat),
                "se": num(e.se),
                "t_stat": num(e.t_stat),
                "p_value": num(e.p_value),
            });
            if let Some(b) = band {
                v["lower"] = num(b.lower[j]);
                v["upper"] = num(b.upper[j]);
            }
            if include_influence {
                v["influence"] = Value::Array(e.influence.iter().map(|&x| num(x)).collect());
            }
            v
        })
        .collect();
    json!({
        "estimates": estimates,
        "failures": es.failures.iter().map(|(n, e)| json!({"target": n, "error": e})).collect::<Vec<_>>(),
        "band": band.map(|b| json!({"level": num(b.level), "joint": b.joint, "critical_value": num(b.critical_value)})),
    })
}

pub fn iv_json(name: &str, fit: &IvFit, x_names: &[String], z_names: &[String]) -> Value {
    json!({
        "treatment": name,
        "regime": fit.regime,
        "estimate": num(fit.alpha_hat),
        "se": num(fit.se),
        "t_stat": num(fit.t_stat),
        "p_value": num(fit.p_value),
        "selected_x": fit.selected_x.iter().map(|&j| x_names[j].clone()).collect::<Vec<_>>(),
        "selected_z": fit.selected_z.iter().map(|&j| z_names[j].clone()).collect::<Vec<_>>(),
        "warnings": fit.warnings,
    })
}

pub fn treatment_json(fit: &TreatmentFit) -> Value {
    json!({
        "effect": fit.effect,
        "estimate": num(fit.alpha_hat),
        "se": num(fit.se),
        "t_stat": num(fit.t_stat),
        "p_value": num(fit.p_value),
        "bootstrap": fit.bootstrap.map(|k| k.to_string()),
        "clipped_propensities": fit.nuisances.clipped,
        "warnings": fit.warnings,
    })
}
