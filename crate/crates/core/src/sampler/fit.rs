//! Fitting the truncated-normal mixture to the tabulated CDF by minimising a
//! high quantile of the pointwise absolute error.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::quadrature::QuadConfig;

use super::table::{cdf_table, check_grid, CdfTable};
use super::{chunk_rng, FitModel, MixtureTruncatedNormal, Prepared, TnaFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub grid: Vec<f64>,
    pub objective_quantile: f64,
    pub multi_starts: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    /// Seeds the perturbed starting points beyond the first two.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grid: linspace(-20.0, 20.0, 2500),
            objective_quantile: 0.99,
            multi_starts: 8,
            max_iterations: 5000,
            convergence_tol: 1e-10,
            seed: 0,
        }
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.grid).map_err(|e| Error::Config(e.to_string()))?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.objective_quantile > 0.0 && self.objective_quantile <= 1.0) {
            return bad(format!(
                "objective quantile must lie in (0, 1], got {}",
                self.objective_quantile
            ));
        }
        if self.multi_starts == 0 || self.max_iterations == 0 {
            return bad("multi_starts and max_iterations must be positive".into());
        }
        if !(self.convergence_tol > 0.0) {
            return bad(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            ));
        }
        Ok(())
    }
}

// Local searches carried on past their first convergence.
const POLISHED: usize = 3;

// θ = (logit α, μ₁, ln σ₁, μ₂, ln σ₂)
type Theta = [f64; 5];

fn decode(th: &Theta) -> MixtureTruncatedNormal {
    MixtureTruncatedNormal {
        alpha: 1.0 / (1.0 + (-th[0]).exp()),
        mu1: th[1],
        sigma1: th[2].exp(),
        mu2: th[3],
        sigma2: th[4].exp(),
    }
}

fn encode(m: &MixtureTruncatedNormal) -> Theta {
    let a = m.alpha.clamp(1e-9, 1.0 - 1e-9);
    [
        (a / (1.0 - a)).ln(),
        m.mu1,
        m.sigma1.ln(),
        m.mu2,
        m.sigma2.ln(),
    ]
}

/// Linear-interpolation quantile of the absolute errors `|F(xᵢ) - H(xᵢ)|`.
struct Objective<'a> {
    xs: &'a [f64],
    fs: &'a [f64],
    q: f64,
    buf: Vec<f64>,
}

impl Objective<'_> {
    fn eval(&mut self, m: &MixtureTruncatedNormal) -> f64 {
        self.buf.clear();
        let h = Prepared::new(m);
        self.buf.extend(
            self.xs
                .iter()
                .zip(self.fs)
                .map(|(x, f)| (f - h.cdf(*x)).abs()),
        );
        if self.buf.iter().any(|e| e.is_nan()) {
            return f64::INFINITY;
        }
        quantile_linear(&mut self.buf, self.q)
    }
}

pub(crate) fn quantile_linear(v: &mut [f64], q: f64) -> f64 {
    let n = v.len();
    let h = (n - 1) as f64 * q;
    let k = (h.floor() as usize).min(n - 1);
    let (_, lo, rest) = v.select_nth_unstable_by(k, f64::total_cmp);
    let lo = *lo;
    if k + 1 >= n {
        return lo;
    }
    let hi = rest.iter().copied().fold(f64::INFINITY, f64::min);
    lo + (h - k as f64) * (hi - lo)
}

struct Simplex {
    best: Theta,
    value: f64,
    converged: bool,
}

fn nelder_mead<F: FnMut(&Theta) -> f64>(
    f: &mut F,
    start: Theta,
    step: Theta,
    max_iter: usize,
    tol: f64,
) -> Simplex {
    let mut pts = vec![start];
    for i in 0..5 {
        let mut p = start;
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..6).collect();
        order.sort_by(|a, b| vals[*a].total_cmp(&vals[*b]));
        let pts_s: Vec<Theta> = order.iter().map(|i| pts[*i]).collect();
        let vals_s: Vec<f64> = order.iter().map(|i| vals[*i]).collect();
        pts = pts_s;
        vals = vals_s;
        let spread = vals[5] - vals[0];
        let size = pts[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= tol * (vals[0].abs() + tol)) || size < 1e-12 {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 5];
        for p in &pts[..5] {
            for j in 0..5 {
                centroid[j] += p[j] / 5.0;
            }
        }
        let along = |c: f64| -> Theta {
            let mut r = [0.0; 5];
            for j in 0..5 {
                r[j] = centroid[j] + c * (pts[5][j] - centroid[j]);
            }
            r
        };
        let refl = along(-1.0);
        let fr = f(&refl);
        if fr < vals[0] {
            let exp = along(-2.0);
            let fe = f(&exp);
            if fe < fr {
                (pts[5], vals[5]) = (exp, fe);
            } else {
                (pts[5], vals[5]) = (refl, fr);
            }
        } else if fr < vals[4] {
            (pts[5], vals[5]) = (refl, fr);
        } else {
            let (con, fc) = if fr < vals[5] {
                let c = along(-0.5);
                (c, f(&c))
            } else {
                let c = along(0.5);
                (c, f(&c))
            };
            if fc < vals[5].min(fr) {
                (pts[5], vals[5]) = (con, fc);
            } else {
                let best = pts[0];
                for i in 1..6 {
                    for j in 0..5 {
                        pts[i][j] = best[j] + 0.5 * (pts[i][j] - best[j]);
                    }
                    vals[i] = f(&pts[i]);
                }
            }
        }
    }
    let i = (0..6)
        .min_by(|a, b| vals[*a].total_cmp(&vals[*b]))
        .unwrap_or(0);
    Simplex {
        best: pts[i],
        value: vals[i],
        converged,
    }
}

/// Fits the mixture to `P(X_t <= x)` from the skew level on `cfg.grid`
/// (offsets from the skew level).
pub fn fit_tna(params: &ModelParams, t: f64, cfg: &FitConfig, quad: &QuadConfig) -> Result<TnaFit> {
    cfg.validate()?;
    let a = params.skew_level;
    let grid: Vec<f64> = cfg.grid.iter().map(|x| x + a).collect();
    let table = cdf_table(params, t, &grid, quad)?;
    fit_tna_to_table(&table, FitModel { params: *params, t }, cfg)
}

/// The optimisation step of [`fit_tna`] on an already tabulated CDF; the
/// objective is taken over the table's abscissae that belong to `cfg.grid`.
pub fn fit_tna_to_table(table: &CdfTable, model: FitModel, cfg: &FitConfig) -> Result<TnaFit> {
    cfg.validate()?;
    let a = model.params.skew_level;
    let (mut xs, mut fs) = (
        Vec::with_capacity(cfg.grid.len()),
        Vec::with_capacity(cfg.grid.len()),
    );
    for (x, f) in table.xs.iter().zip(&table.fs) {
        let rel = x - a;
        if cfg.grid.binary_search_by(|g| g.total_cmp(&rel)).is_ok() {
            xs.push(rel);
            fs.push(*f);
        }
    }
    if xs.len() < 2 {
        return domain("the table shares fewer than two points with the fit grid");
    }
    let (f0, below, above, mean, var) = table.moments();
    let alpha0 = f0.clamp(1e-6, 1.0 - 1e-6);
    let sd = |m2: f64, mass: f64| {
        if mass > 1e-12 {
            (m2 / mass).sqrt().max(1e-3)
        } else {
            1.0
        }
    };
    let scale = var.sqrt().max(1e-3);
    let mut starts = vec![
        encode(&MixtureTruncatedNormal {
            alpha: alpha0,
            mu1: 0.0,
            sigma1: sd(below, f0),
            mu2: 0.0,
            sigma2: sd(above, 1.0 - f0),
        }),
        encode(&MixtureTruncatedNormal {
            alpha: alpha0,
            mu1: mean,
            sigma1: scale,
            mu2: mean,
            sigma2: scale,
        }),
    ];
    let mut rng = chunk_rng(cfg.seed, 0);
    while starts.len() < cfg.multi_starts {
        let mut th = starts[0];
        let jitter = [0.5, 0.5 * scale, 0.3, 0.5 * scale, 0.3];
        for (v, s) in th.iter_mut().zip(jitter) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += s * z;
        }
        starts.push(th);
    }
    starts.truncate(cfg.multi_starts);

    let mut obj = Objective {
        xs: &xs,
        fs: &fs,
        q: cfg.objective_quantile,
        buf: Vec::with_capacity(xs.len()),
    };
    let mut f = |th: &Theta| obj.eval(&decode(th));
    let step = [0.5, 0.25 * scale, 0.2, 0.25 * scale, 0.2];
    let mut runs: Vec<Simplex> = starts
        .into_iter()
        .map(|s| nelder_mead(&mut f, s, step, cfg.max_iterations, cfg.convergence_tol))
        .collect();
    runs.sort_by(|a, b| a.value.total_cmp(&b.value));
    runs.truncate(POLISHED);
    let mut best: Option<Simplex> = None;
    for mut run in runs {
        // restart from the incumbent until it stops improving; a fresh simplex
        // lets the search leave the kinks of the non-smooth objective
        for _ in 0..10 {
            let r = nelder_mead(
                &mut f,
                run.best,
                step,
                cfg.max_iterations,
                cfg.convergence_tol,
            );
            let improved = r.value < run.value - cfg.convergence_tol * run.value.abs();
            let converged = run.converged || r.converged;
            if r.value <= run.value {
                run = Simplex { converged, ..r };
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one start");
    let fit = TnaFit {
        mixture: decode(&best.best),
        objective: best.value,
        model,
    };
    if best.converged && fit.objective.is_finite() {
        Ok(fit)
    } else {
        Err(fit.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::mixture_cdf;

    #[test]
    fn quantile_interpolates_between_order_statistics() {
        let mut v: Vec<f64> = (1..=101).map(f64::from).rev().collect();
        assert_eq!(quantile_linear(&mut v, 0.99), 100.0);
        let mut v = vec![3.0, 1.0, 2.0, 4.0];
        assert!((quantile_linear(&mut v, 0.5) - 2.5).abs() < 1e-15);
        let mut v = vec![5.0];
        assert_eq!(quantile_linear(&mut v, 0.99), 5.0);
    }

    #[test]
    fn simplex_finds_a_quadratic_minimum() {
        let target = [0.3, -1.0, 2.0, 0.5, -0.25];
        let mut f = |x: &Theta| {
            x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b).powi(2) * 3.0)
                .sum::<f64>()
        };
        let r = nelder_mead(&mut f, [0.0; 5], [1.0; 5], 5000, 1e-14);
        assert!(r.converged);
        for (a, b) in r.best.iter().zip(&target) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn recovers_an_exact_mixture() {
        let truth = MixtureTruncatedNormal::new(0.3, -0.4, 1.1, 0.6, 0.8).unwrap();
        let cfg = FitConfig {
            grid: linspace(-8.0, 8.0, 400),
            ..FitConfig::default()
        };
        let mut xs = cfg.grid.clone();
        xs.push(0.0);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let fs = xs.iter().map(|x| mixture_cdf(*x, &truth)).collect();
        let table = CdfTable::new(xs, fs, 0.0).unwrap();
        let model = FitModel {
            params: ModelParams::new(0.0, 0.0, 0.0, 0.0).unwrap(),
            t: 1.0,
        };
        let fit = fit_tna_to_table(&table, model, &cfg).unwrap();
        assert!(fit.objective < 1e-6, "{fit:?}");
        assert!((fit.mixture.alpha - 0.3).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = FitConfig {
            objective_quantile: 0.0,
            ..FitConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = FitConfig {
            grid: vec![1.0, 0.0],
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
