//! Skew random walk on the lattice `a + kΔx`, `Δx = √(t/n)`: away from the
//! skew level the up-probability is `(1 + μΔx)/2` with the local drift, at it
//! `(1 + β)/2`.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::{chunk_rng, open_unit, CHUNK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSimConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Spread each terminal lattice atom uniformly over its cell so the
    /// terminal law has a density. At the skew level the cell side follows
    /// the skew probability.
    #[serde(default = "yes")]
    pub dither: bool,
}

fn yes() -> bool {
    true
}

impl PathSimConfig {
    pub fn new(n_steps: usize, n_paths: usize, seed: u64) -> Self {
        Self {
            n_steps,
            n_paths,
            seed,
            dither: true,
        }
    }

    pub fn step(&self, t: f64) -> f64 {
        (t / self.n_steps as f64).sqrt()
    }

    pub fn validate(&self, params: &ModelParams, t: f64) -> Result<()> {
        params
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::Config("n_steps and n_paths must be positive".into()));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {t}")));
        }
        let dx = self.step(t);
        let worst = params.mu_minus.abs().max(params.mu_plus.abs()) * dx;
        if worst > 1.0 {
            return Err(Error::Config(format!(
                "|mu|·dx = {worst} exceeds 1; use at least {} steps",
                (params.mu_minus.abs().max(params.mu_plus.abs()).powi(2) * t).ceil()
            )));
        }
        Ok(())
    }
}

/// Up-move thresholds on raw `u64` draws, indexed by `sign(k) + 1`.
struct Walker {
    thr: [u64; 3],
}

fn threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

impl Walker {
    fn new(params: &ModelParams, dx: f64) -> Self {
        Self {
            thr: [
                threshold(0.5 * (1.0 + params.mu_minus * dx)),
                threshold(0.5 * (1.0 + params.beta)),
                threshold(0.5 * (1.0 + params.mu_plus * dx)),
            ],
        }
    }

    #[inline]
    fn step(&self, k: i64, rng: &mut ChaCha8Rng) -> i64 {
        let up = (rng.next_u64() < self.thr[(k.signum() + 1) as usize]) as i64;
        k + 2 * up - 1
    }
}

fn start_index(params: &ModelParams, x0: f64, dx: f64) -> Result<i64> {
    if !x0.is_finite() {
        return Err(Error::Config(format!("start must be finite, got {x0}")));
    }
    Ok(((x0 - params.skew_level) / dx).round() as i64)
}

fn by_chunks<T: Send, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let out: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    out.into_iter().flatten().collect()
}

/// Terminal values of `n_paths` walks from `x0` (rounded to the lattice).
pub fn simulate_paths(
    params: &ModelParams,
    x0: f64,
    t: f64,
    sim: &PathSimConfig,
) -> Result<Vec<f64>> {
    sim.validate(params, t)?;
    let dx = sim.step(t);
    let k0 = start_index(params, x0, dx)?;
    let walker = Walker::new(params, dx);
    let a = params.skew_level;
    let right = 0.5 * (1.0 + params.beta);
    Ok(by_chunks(sim.n_paths, sim.seed, |rng| {
        let mut k = k0;
        for _ in 0..sim.n_steps {
            k = walker.step(k, rng);
        }
        let x = a + k as f64 * dx;
        if !sim.dither {
            return x;
        }
        let u = open_unit(rng);
        if k == 0 {
            if open_unit(rng) < right {
                x + u * dx
            } else {
                x - u * dx
            }
        } else {
            x + (2.0 * u - 1.0) * dx
        }
    }))
}

/// Whole lattice paths, `n_steps + 1` positions each, without dithering.
pub fn simulate_full_paths(
    params: &ModelParams,
    x0: f64,
    t: f64,
    sim: &PathSimConfig,
) -> Result<Vec<Vec<f64>>> {
    sim.validate(params, t)?;
    if sim.n_paths.saturating_mul(sim.n_steps + 1) > 50_000_000 {
        return Err(Error::Config(
            "full paths are capped at 5e7 stored positions".into(),
        ));
    }
    let dx = sim.step(t);
    let k0 = start_index(params, x0, dx)?;
    let walker = Walker::new(params, dx);
    let a = params.skew_level;
    Ok(by_chunks(sim.n_paths, sim.seed, |rng| {
        let mut k = k0;
        let mut path = Vec::with_capacity(sim.n_steps + 1);
        path.push(a + k as f64 * dx);
        for _ in 0..sim.n_steps {
            k = walker.step(k, rng);
            path.push(a + k as f64 * dx);
        }
        path
    }))
}

/// First time each walk from `x0` reaches `level` (both rounded to the
/// lattice), or `None` if it has not by `t`.
pub fn first_passage_times(
    params: &ModelParams,
    x0: f64,
    level: f64,
    t: f64,
    sim: &PathSimConfig,
) -> Result<Vec<Option<f64>>> {
    sim.validate(params, t)?;
    let dx = sim.step(t);
    let dt = t / sim.n_steps as f64;
    let k0 = start_index(params, x0, dx)?;
    let target = start_index(params, level, dx)?;
    let walker = Walker::new(params, dx);
    Ok(by_chunks(sim.n_paths, sim.seed, |rng| {
        let mut k = k0;
        for n in 0..sim.n_steps {
            if k == target {
                return Some(n as f64 * dt);
            }
            k = walker.step(k, rng);
        }
        (k == target).then_some(t)
    }))
}
