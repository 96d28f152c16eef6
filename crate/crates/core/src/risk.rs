//! Value at risk and expected shortfall of the terminal value, read as a loss:
//! closed forms from the fitted mixture, interpolation of the tabulated CDF,
//! and empirical estimates from samples.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sampler::{sample_tna, CdfTable, MixtureTruncatedNormal};
use crate::special::{log_norm_cdf, norm_pdf};

fn check_level(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("confidence level must lie in (0, 1), got {q}"));
    }
    Ok(())
}

/// `VaR_q`: the mixture quantile, lower branch for `q <= α`.
pub fn var_mixture(m: &MixtureTruncatedNormal, q: f64) -> Result<f64> {
    check_level(q)?;
    m.validate()?;
    sample_tna(m, q)
}

/// `CVaR_q = E[L | L >= VaR_q]` on the upper branch `q > α`.
pub fn cvar_mixture(m: &MixtureTruncatedNormal, q: f64) -> Result<f64> {
    check_level(q)?;
    m.validate()?;
    if q <= m.alpha {
        return Err(Error::UnsupportedRegime(format!(
            "expected shortfall has a closed form only above the lower mass: need q > alpha = {}, got {q}",
            m.alpha
        )));
    }
    let v = sample_tna(m, q)?;
    let z = (v - m.mu2) / m.sigma2;
    let upper = log_norm_cdf(m.mu2 / m.sigma2).exp();
    Ok(m.mu2 + m.sigma2 * (1.0 - m.alpha) / (upper * (1.0 - q)) * norm_pdf(z))
}

/// `VaR_q` by linear interpolation of a tabulated CDF.
pub fn var_from_cdf(table: &CdfTable, q: f64) -> Result<f64> {
    table.quantile(q)
}

/// Empirical `(VaR_q, CVaR_q)`: the order statistic at `⌈qn⌉` (1-based) and
/// the mean of the samples at or above it.
pub fn mc_var_cvar(samples: &[f64], q: f64) -> Result<(f64, f64)> {
    check_level(q)?;
    let n = samples.len();
    let need = (1.0 / (1.0 - q)).ceil();
    if (n as f64) < need {
        return domain(format!(
            "{n} samples leave the tail above level {q} empty; need at least {need}"
        ));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return domain("samples contain NaN");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let h = q * n as f64;
    // ⌈qn⌉, forgiving representation error when qn is an integer
    let rank = if (h - h.round()).abs() < 1e-9 {
        h.round()
    } else {
        h.ceil()
    } as usize;
    let var = s[rank.clamp(1, n) - 1];
    let tail = &s[s.partition_point(|x| *x < var)..];
    let cvar = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((var, cvar))
}

/// One row of a risk comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub confidence: f64,
    pub var_formula: f64,
    pub cvar_formula: f64,
    pub var_interp: f64,
    pub var_mc: f64,
    pub cvar_mc: f64,
}

impl RiskReport {
    pub const CSV_HEADER: &'static str =
        "confidence,var_formula,cvar_formula,var_interp,var_mc,cvar_mc";

    pub fn new(
        m: &MixtureTruncatedNormal,
        table: &CdfTable,
        samples: &[f64],
        q: f64,
    ) -> Result<Self> {
        let (var_mc, cvar_mc) = mc_var_cvar(samples, q)?;
        Ok(Self {
            confidence: q,
            var_formula: var_mixture(m, q)?,
            cvar_formula: cvar_mixture(m, q)?,
            var_interp: var_from_cdf(table, q)?,
            var_mc,
            cvar_mc,
        })
    }
}

/// Rows for every level with a positive closed-form VaR; levels at or below
/// the mixture's lower mass are dropped, as negative VaR is not reported.
pub fn risk_reports(
    m: &MixtureTruncatedNormal,
    table: &CdfTable,
    samples: &[f64],
    levels: &[f64],
) -> Result<Vec<RiskReport>> {
    let mut rows = Vec::new();
    for &q in levels {
        check_level(q)?;
        if q <= m.alpha || var_mixture(m, q)? <= 0.0 {
            continue;
        }
        rows.push(RiskReport::new(m, table, samples, q)?);
    }
    Ok(rows)
}

/// `n` evenly spaced levels from `α + 0.01` to `0.995`, both included.
pub fn confidence_grid(alpha: f64, n: usize) -> Vec<f64> {
    let (a, b) = (alpha + 0.01, 0.995);
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Mean squared difference of two equally long series.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::mixture_cdf;

    fn std_normal() -> MixtureTruncatedNormal {
        MixtureTruncatedNormal::new(0.5, 0.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn normal_var_and_shortfall() {
        let m = std_normal();
        assert!((var_mixture(&m, 0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((cvar_mixture(&m, 0.95).unwrap() - 2.062_712_807_968_767).abs() < 1e-9);
        assert_eq!(var_mixture(&m, 0.5).unwrap(), 0.0);
        assert!(matches!(
            cvar_mixture(&m, 0.5),
            Err(Error::UnsupportedRegime(_))
        ));
        assert!((mixture_cdf(var_mixture(&m, 0.3).unwrap(), &m) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn order_statistics() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(mc_var_cvar(&s, 0.95).unwrap(), (95.0, 97.5));
        assert_eq!(mc_var_cvar(&[2.5; 40], 0.9).unwrap(), (2.5, 2.5));
        assert!(mc_var_cvar(&s[..10], 0.95).is_err());
    }

    #[test]
    fn grid_ends() {
        let g = confidence_grid(0.2569, 100);
        assert_eq!(g.len(), 100);
        assert!((g[0] - 0.2669).abs() < 1e-15 && (g[99] - 0.995).abs() < 1e-15);
    }
}
