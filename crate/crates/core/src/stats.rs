//! One-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// `D = maxᵢ max(i/n - F(x₍ᵢ₎), F(x₍ᵢ₎) - (i-1)/n)` over the sorted sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return domain("the K-S statistic needs at least one sample");
    }
    if samples.iter().any(|x| x.is_nan()) {
        return domain("samples contain NaN");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in s.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Kolmogorov tail `Q(λ) = 2Σ(-1)^{k-1}e^{-2k²λ²}`.
///
/// Below `λ = 1.18` the alternating series converges slowly, so the equivalent
/// theta-function form `1 - (√(2π)/λ)Σe^{-(2k-1)²π²/(8λ²)}` is used there.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            let term = (-j * j * c).exp();
            s += term;
            if term < 1e-16 * s {
                break;
            }
        }
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the finite-sample argument `(√n + 0.12 + 0.11/√n)·d`.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    if n == 0 || !(d > 0.0) {
        return 1.0;
    }
    let rn = (n as f64).sqrt();
    kolmogorov_q((rn + 0.12 + 0.11 / rn) * d.min(1.0))
}

pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let statistic = ks_statistic(samples, cdf)?;
    Ok(KsResult {
        statistic,
        p_value: ks_pvalue(statistic, samples.len()),
        n: samples.len(),
    })
}
