//! Scalar statistics helpers shared by the estimators.

use statrs::distribution::{ContinuousCDF, Normal};

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal upper tail, `1 - Φ(x)`, without cancellation for large `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile `Φ⁻¹(p)`.
///
/// The statrs inverse is polished with two Newton steps on the CDF, which
/// brings the result to within a few ulps in the ranges used here.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let dist = std_normal();
    let mut x = dist.inverse_cdf(p);
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density <= 0.0 {
            break;
        }
        // work on the smaller tail to avoid cancellation in 1 - p
        let step = if p > 0.5 {
            ((1.0 - p) - norm_sf(x)) / density
        } else {
            (norm_cdf(x) - p) / density
        };
        x -= step;
    }
    x
}

/// Two-sided normal p-value for a t statistic.
pub fn two_sided_p(t: f64) -> f64 {
    (2.0 * norm_sf(t.abs())).min(1.0)
}

/// 1-based order-statistic rank `⌈m·prob⌉`, clamped to `[1, m]`.
pub fn order_stat_rank(m: usize, prob: f64) -> usize {
    let raw = (m as f64) * prob;
    // guard against 4500.000000000001 style round-off
    let rank = (raw - 1e-9).ceil().max(1.0) as usize;
    rank.min(m)
}

/// Empirical quantile as the `⌈m·prob⌉`-th order statistic. Sorts in place.
pub fn order_stat_quantile(values: &mut [f64], prob: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of empty sample");
    values.sort_by(|a, b| a.total_cmp(b));
    values[order_stat_rank(values.len(), prob) - 1]
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the `m - 1` divisor.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
}

/// Significance stars on the conventional legend
/// `0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1`.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_round_trips_through_cdf() {
        for &p in &[1e-8, 0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 0.9995, 1.0 - 1e-7] {
            let x = norm_quantile(p);
            let back = if p > 0.5 { 1.0 - norm_sf(x) } else { norm_cdf(x) };
            assert!((back - p).abs() < 1e-14 * p.max(1e-3), "p={p} x={x}");
        }
    }

    #[test]
    fn known_quantiles() {
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert_eq!(norm_quantile(0.5), 0.0);
    }

    #[test]
    fn order_stat_rank_handles_round_off() {
        assert_eq!(order_stat_rank(5000, 0.9), 4500);
        assert_eq!(order_stat_rank(1000, 0.95), 950);
        assert_eq!(order_stat_rank(10, 0.01), 1);
        assert_eq!(order_stat_rank(10, 1.0), 10);
    }

    #[test]
    fn stars_follow_legend() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.002), "**");
        assert_eq!(significance_stars(0.02), "*");
        assert_eq!(significance_stars(0.07), ".");
        assert_eq!(significance_stars(0.5), "");
    }
}
