//! Sampling: the truncated-normal mixture and its fit, a tabulated
//! inverse-CDF oracle, and a lattice random walk for Monte-Carlo checks.
//!
//! Mixtures live in coordinates relative to the skew level, so the truncation
//! point is always 0; [`TnaFit::sample`] shifts back to the caller's frame.

mod fit;
mod table;
mod walk;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::special::{log_norm_cdf, norm_quantile_unchecked};

pub use fit::{fit_tna, fit_tna_to_table, FitConfig};
pub use table::{cdf_table, inverse_cdf_table, sample_oracle, CdfTable, InverseCdf};
pub use walk::{first_passage_times, simulate_full_paths, simulate_paths, PathSimConfig};

/// Paths or draws per independently seeded RNG stream. Fixed so output does
/// not depend on how many workers share the chunks.
pub(crate) const CHUNK: usize = 4096;

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Uniform on the open interval (0, 1).
pub(crate) fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTruncatedNormal {
    pub alpha: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
}

impl MixtureTruncatedNormal {
    pub fn new(alpha: f64, mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<Self> {
        let m = Self {
            alpha,
            mu1,
            sigma1,
            mu2,
            sigma2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return domain(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return domain(format!(
                "scales must be positive, got sigma1 = {}, sigma2 = {}",
                self.sigma1, self.sigma2
            ));
        }
        if !(self.mu1.is_finite()
            && self.mu2.is_finite()
            && self.sigma1.is_finite()
            && self.sigma2.is_finite())
        {
            return domain(format!("mixture parameters must be finite: {self:?}"));
        }
        Ok(())
    }
}

/// `H(x)`: mass `α` on a normal truncated to `(-∞, 0)` and `1 - α` on one
/// truncated to `(0, ∞)`.
pub fn mixture_cdf(x: f64, m: &MixtureTruncatedNormal) -> f64 {
    Prepared::new(m).cdf(x)
}

/// A mixture with its truncation masses precomputed, for repeated evaluation.
pub(crate) struct Prepared {
    m: MixtureTruncatedNormal,
    ln_f0: f64,
    ln_s0: f64,
}

impl Prepared {
    pub fn new(m: &MixtureTruncatedNormal) -> Self {
        Self {
            m: *m,
            ln_f0: log_norm_cdf(-m.mu1 / m.sigma1),
            ln_s0: log_norm_cdf(m.mu2 / m.sigma2),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let m = &self.m;
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 {
            // F(x)/F(0), as a difference of log-CDFs so far tails keep their digits
            let r = log_norm_cdf((x - m.mu1) / m.sigma1) - self.ln_f0;
            m.alpha * r.exp()
        } else {
            // 1 - S(x)/S(0) with S = 1 - G
            let r = log_norm_cdf(-(x - m.mu2) / m.sigma2) - self.ln_s0;
            m.alpha + (1.0 - m.alpha) * -r.exp_m1()
        }
    }
}

/// Inverse of [`mixture_cdf`]: the quasi-random sample for a uniform `u`.
pub fn sample_tna(m: &MixtureTruncatedNormal, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("u must lie in (0, 1), got {u}"));
    }
    Ok(sample_tna_unchecked(m, u))
}

// Quantile of N(0,1) at the level `p` whose complement `1 - p` is also known,
// using whichever side keeps the digits.
fn quantile_split(p: f64, p_comp: f64) -> f64 {
    if p <= 0.5 {
        norm_quantile_unchecked(p.max(f64::MIN_POSITIVE))
    } else {
        -norm_quantile_unchecked(p_comp.max(f64::MIN_POSITIVE))
    }
}

pub(crate) fn sample_tna_unchecked(m: &MixtureTruncatedNormal, u: f64) -> f64 {
    if u == m.alpha {
        return 0.0;
    }
    if u < m.alpha {
        let (f0, s0) = (
            log_norm_cdf(-m.mu1 / m.sigma1).exp(),
            log_norm_cdf(m.mu1 / m.sigma1).exp(),
        );
        let r = u / m.alpha;
        let p = r * f0;
        let comp = (1.0 - r) + r * s0;
        (m.mu1 + m.sigma1 * quantile_split(p, comp)).min(0.0)
    } else {
        let (g0, s0) = (
            log_norm_cdf(-m.mu2 / m.sigma2).exp(),
            log_norm_cdf(m.mu2 / m.sigma2).exp(),
        );
        let r = (u - m.alpha) / (1.0 - m.alpha);
        let comp = (1.0 - u) / (1.0 - m.alpha) * s0;
        let p = g0 + r * s0;
        (m.mu2 + m.sigma2 * quantile_split(p, comp)).max(0.0)
    }
}

/// `n` mixture draws, reproducible for a fixed seed.
pub fn sample_tna_many(m: &MixtureTruncatedNormal, n: usize, seed: u64) -> Result<Vec<f64>> {
    m.validate()?;
    let chunks = n.div_ceil(CHUNK);
    let out: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| sample_tna_unchecked(m, open_unit(&mut rng)))
                .collect()
        })
        .collect();
    Ok(out.concat())
}

/// Model and horizon a mixture was fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    #[serde(flatten)]
    pub params: ModelParams,
    pub t: f64,
}

/// A fitted mixture with its objective value and provenance, in the shape
/// written to fit files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TnaFit {
    #[serde(flatten)]
    pub mixture: MixtureTruncatedNormal,
    pub objective: f64,
    pub model: FitModel,
}

impl TnaFit {
    /// Mixture CDF in the caller's frame.
    pub fn cdf(&self, x: f64) -> f64 {
        mixture_cdf(x - self.model.params.skew_level, &self.mixture)
    }

    /// Draw for a uniform `u`, in the caller's frame.
    pub fn sample(&self, u: f64) -> Result<f64> {
        Ok(self.model.params.skew_level + sample_tna(&self.mixture, u)?)
    }

    pub fn sample_many(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let a = self.model.params.skew_level;
        let mut v = sample_tna_many(&self.mixture, n, seed)?;
        v.iter_mut().for_each(|x| *x += a);
        Ok(v)
    }
}

impl From<TnaFit> for Error {
    fn from(best: TnaFit) -> Self {
        Error::Fit {
            objective: best.objective,
            best: Box::new(best),
        }
    }
}
