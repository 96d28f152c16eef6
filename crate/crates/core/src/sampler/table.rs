//! Tabulated CDF from the skew level, its interpolants and the inverse-CDF
//! sampling oracle.

use rayon::prelude::*;

use crate::density::cdf_origin;
use crate::error::{domain, Result};
use crate::model::ModelParams;
use crate::quadrature::QuadConfig;

use super::{chunk_rng, open_unit, CHUNK};

/// CDF values on a strictly increasing grid that contains the skew level.
///
/// Two interpolants are offered: piecewise linear, and monotone cubic
/// (Fritsch–Carlson) fitted separately on each side of the skew level, where
/// the density jumps and a single smooth cubic would overshoot.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    split: usize,
    slopes: Vec<f64>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return domain(format!(
            "a grid needs at least 2 points, got {}",
            grid.len()
        ));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return domain("grid points must be finite");
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return domain("grid must be strictly increasing");
    }
    Ok(())
}

/// Tabulates `x ↦ P(X_t <= x)` from the skew level on `grid` plus the skew
/// level itself. Evaluations run in parallel.
pub fn cdf_table(
    params: &ModelParams,
    t: f64,
    grid: &[f64],
    quad: &QuadConfig,
) -> Result<CdfTable> {
    check_grid(grid)?;
    params.validate()?;
    let a = params.skew_level;
    let mut xs = grid.to_vec();
    if let Err(i) = xs.binary_search_by(|x| x.total_cmp(&a)) {
        xs.insert(i, a);
    }
    let fs = xs
        .par_iter()
        .map(|&x| cdf_origin(t, x, params, quad))
        .collect::<Result<Vec<_>>>()?;
    CdfTable::new(xs, fs, a)
}

impl CdfTable {
    /// Wraps tabulated values. Tiny decreases from quadrature noise are
    /// flattened so the table is monotone.
    pub fn new(xs: Vec<f64>, mut fs: Vec<f64>, split_at: f64) -> Result<Self> {
        check_grid(&xs)?;
        if xs.len() != fs.len() {
            return domain("abscissae and values differ in length");
        }
        if fs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return domain("CDF values must lie in [0, 1]");
        }
        for i in 1..fs.len() {
            fs[i] = fs[i].max(fs[i - 1]);
        }
        let split = xs.partition_point(|x| *x < split_at).min(xs.len() - 1);
        let mut slopes = pchip_slopes(&xs[..=split], &fs[..=split]);
        let upper = pchip_slopes(&xs[split..], &fs[split..]);
        // the knot at the split carries the one-sided slope from each side;
        // keep the left one here and the right one after the list
        slopes.extend_from_slice(&upper[1..]);
        slopes.push(upper[0]);
        Ok(Self {
            xs,
            fs,
            split,
            slopes,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    fn segment(&self, x: f64) -> Option<usize> {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return None;
        }
        Some(self.xs.partition_point(|v| *v <= x) - 1)
    }

    fn clamp_end(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            self.fs[0]
        } else {
            self.fs[self.fs.len() - 1]
        }
    }

    /// Piecewise-linear interpolation, constant beyond the ends.
    pub fn linear(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => self.clamp_end(x),
            Some(i) => {
                let w = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                self.fs[i] + w * (self.fs[i + 1] - self.fs[i])
            }
        }
    }

    /// Monotone cubic interpolation, constant beyond the ends.
    pub fn pchip(&self, x: f64) -> f64 {
        let Some(i) = self.segment(x) else {
            return self.clamp_end(x);
        };
        let d0 = if i == self.split {
            self.slopes[self.slopes.len() - 1]
        } else {
            self.slopes[i]
        };
        let d1 = self.slopes[i + 1];
        let h = self.xs[i + 1] - self.xs[i];
        let s = (x - self.xs[i]) / h;
        let (f0, f1) = (self.fs[i], self.fs[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        (h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1).clamp(f0, f1)
    }

    /// Piecewise-linear inverse at level `u`; a tabulated value maps back to
    /// its own abscissa.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        let (lo, hi) = (self.fs[0], self.fs[self.fs.len() - 1]);
        if !(u >= lo && u <= hi) {
            return domain(format!(
                "level {u} lies outside the tabulated range [{lo}, {hi}]"
            ));
        }
        let i = self.fs.partition_point(|f| *f < u);
        if self.fs[i] == u || i == 0 {
            return Ok(self.xs[i]);
        }
        let (f0, f1) = (self.fs[i - 1], self.fs[i]);
        let w = (u - f0) / (f1 - f0);
        Ok(self.xs[i - 1] + w * (self.xs[i] - self.xs[i - 1]))
    }

    /// `(P(X < a), E[X²; X < a], E[X²; X > a], E[X], Var X)` relative to the
    /// split point `a`, by parts on the tabulated CDF with the trapezoid rule.
    pub(crate) fn moments(&self) -> (f64, f64, f64, f64, f64) {
        let a = self.xs[self.split];
        let k = self.split;
        let (xs, fs) = (&self.xs, &self.fs);
        let trap = |range: std::ops::Range<usize>, g: &dyn Fn(usize) -> f64| {
            range
                .map(|i| 0.5 * (g(i) + g(i + 1)) * (xs[i + 1] - xs[i]))
                .sum::<f64>()
        };
        let n = xs.len() - 1;
        // mass beyond the grid counts as atoms at its ends, which cancels the
        // boundary terms of the integration by parts
        let below = -trap(0..k, &|i| 2.0 * (xs[i] - a) * fs[i]);
        let above = trap(k..n, &|i| 2.0 * (xs[i] - a) * (1.0 - fs[i]));
        let mean = trap(k..n, &|i| 1.0 - fs[i]) - trap(0..k, &|i| fs[i]);
        let var = (below + above - mean * mean).max(0.0);
        (fs[k], below.max(0.0), above.max(0.0), mean, var)
    }
}

fn pchip_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (f[i + 1] - f[i]) / h[i]).collect();
    if n == 2 {
        return vec![del[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

/// Monotone inverse of a tabulated CDF, used as an exact-sampling oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCdf {
    pub table: CdfTable,
}

impl InverseCdf {
    /// Requires the table to cover all but `1e-6` of the mass at each end.
    pub fn from_table(table: CdfTable) -> Result<Self> {
        let (lo, hi) = (table.fs[0], table.fs[table.fs.len() - 1]);
        if lo > 1e-6 || hi < 1.0 - 1e-6 {
            return domain(format!(
                "grid does not span the distribution: CDF runs from {lo} to {hi} at the ends"
            ));
        }
        Ok(Self { table })
    }

    pub fn sample_many(&self, n: usize, seed: u64) -> Vec<f64> {
        let chunks = n.div_ceil(CHUNK);
        let out: Vec<Vec<f64>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = chunk_rng(seed, c);
                let len = CHUNK.min(n - c * CHUNK);
                (0..len).map(|_| self.draw(open_unit(&mut rng))).collect()
            })
            .collect();
        out.concat()
    }

    fn draw(&self, u: f64) -> f64 {
        let fs = &self.table.fs;
        let u = u.clamp(fs[0], fs[fs.len() - 1]);
        self.table.quantile(u).unwrap_or(f64::NAN)
    }
}

pub fn inverse_cdf_table(
    params: &ModelParams,
    t: f64,
    grid: &[f64],
    quad: &QuadConfig,
) -> Result<InverseCdf> {
    InverseCdf::from_table(cdf_table(params, t, grid, quad)?)
}

/// Oracle draw for `u ∈ (0, 1)`; levels beyond the tabulated range map to the
/// nearest end of the grid.
pub fn sample_oracle(inv: &InverseCdf, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return domain(format!("u must lie in (0, 1), got {u}"));
    }
    Ok(inv.draw(u))
}
