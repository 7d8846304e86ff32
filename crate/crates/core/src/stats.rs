//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

/// Logistic function `1 / (1 + exp(-u))`, evaluated without overflow.
pub fn expit(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let z = u.exp();
        z / (1.0 + z)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(u))`.
pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// CDF of `N(0, sd^2)` at `x`.
pub fn normal_cdf(x: f64, sd: f64) -> f64 {
    Normal::new(0.0, sd)
        .expect("standard deviation must be positive and finite")
        .cdf(x)
}

/// Standard-normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value for a confidence level, e.g. 1.959964 at 0.95.
pub fn z_for_level(conf_level: f64) -> f64 {
    normal_quantile(1.0 - (1.0 - conf_level) / 2.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Variance with divisor `n`.
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Variance with divisor `n - 1`; `None` for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Type-7 (linear interpolation) quantile of already sorted values.
///
/// When `(n - 1) q` is within 1e-9 of an integer the matching order statistic
/// is returned unchanged.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level outside [0,1]");
    let h = (sorted.len() - 1) as f64 * q;
    let nearest = h.round();
    if (h - nearest).abs() < 1e-9 {
        return sorted[nearest as usize];
    }
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Type-7 quantile of unsorted values.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Formats a number with `digits` significant digits, in the spirit of R's
/// default print of a numeric data frame.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NA".into()
        } else if x > 0.0 {
            "Inf".into()
        } else {
            "-Inf".into()
        };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    // rounding may carry into a new digit (9.999995 -> 10.00000)
    let rounded: f64 = s.parse().unwrap_or(x);
    if decimals > 0 && rounded.abs() >= 10f64.powi(magnitude + 1) {
        format!("{:.*}", decimals - 1, x)
    } else {
        s
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from `(seed, index)`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
