//! Transition densities, the CDF from the skew point, the density jump and the
//! long-run limit.
//!
//! Every branch of the general density reduces to one kernel
//!
//! ```text
//! K(c₊, c₋) = ∫₀^∞ ∫₀ᵗ h(t-τ; (1+β)b + c₊, μ₊) h(τ; (1-β)b + c₋, -μ₋) dτ db
//! ```
//!
//! times an exponential prefactor, evaluated as nested adaptive quadratures
//! with everything combined in log space.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::ModelParams;
use crate::quadrature::{self, adapt, QuadConfig};
use crate::special::{erfc, erfcx, LN_SQRT_2PI, SQRT_2PI};

/// `h(t; x, μ) = |x|/√(2πt³)·exp(-(x+μt)²/2t)`.
pub fn h(t: f64, x: f64, mu: f64) -> Result<f64> {
    HArgs::new(t, x, mu).map(|a| a.value())
}

/// Arguments of [`h`], validated once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HArgs {
    pub t: f64,
    pub x: f64,
    pub mu: f64,
}

impl HArgs {
    pub fn new(t: f64, x: f64, mu: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("h needs t > 0, got {t}"));
        }
        if !(x.is_finite() && mu.is_finite()) {
            return domain(format!("h needs finite arguments, got x = {x}, mu = {mu}"));
        }
        Ok(Self { t, x, mu })
    }

    pub fn value(&self) -> f64 {
        if self.x == 0.0 {
            return 0.0;
        }
        ln_h(self.t, self.x.abs().ln() - LN_SQRT_2PI, self.x, self.mu).exp()
    }
}

// ln h with ln|x| - ln√(2π) precomputed by the caller.
#[inline]
fn ln_h(s: f64, ln_x_scaled: f64, x: f64, mu: f64) -> f64 {
    let d = x + mu * s;
    ln_x_scaled - 1.5 * s.ln() - d * d / (2.0 * s)
}

/// `∫₀^∞ e^{-qt} h(t; x, μ) dt`, zero at `x = 0`.
pub fn h_laplace(q: f64, x: f64, mu: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return domain(format!("h_laplace needs q > 0, got {q}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let root = (2.0 * q + mu * mu).sqrt();
    Ok((-(mu + x.signum() * root) * x).exp())
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("t must be positive and finite, got {t}"));
    }
    Ok(())
}

fn check_y(y: f64, what: &str) -> Result<()> {
    if !y.is_finite() {
        return domain(format!("{what} must be finite, got {y}"));
    }
    if y == 0.0 {
        return domain(format!(
            "{what} sits on the skew level where the density jumps; evaluate at a one-sided offset instead"
        ));
    }
    Ok(())
}

/// Time at which `h(·; a, μ)` peaks, with a curvature-based width.
fn h_mode(a: f64, mu: f64, exponent: f64) -> (f64, f64) {
    // d/ds [-k ln s - (a+μs)²/2s] = 0  ⇔  μ²s² + 2ks - a² = 0
    let k = exponent;
    let s = 2.0 * a * a / (2.0 * k + (4.0 * k * k + 4.0 * mu * mu * a * a).sqrt());
    let curv = k / (s * s) + mu * mu / s;
    (s, 1.0 / curv.sqrt())
}

/// Subdivision points around a peak at distance `mode` from its own end of
/// `(0, t)`: the mode, a few widths either side and geometric ladders.
fn peak_points(out: &mut Vec<f64>, t: f64, mode: f64, width: f64) {
    if !(mode > 0.0) || mode >= t {
        return;
    }
    out.push(mode);
    for k in [-8.0, -3.0, 3.0, 8.0] {
        let d = mode + k * width;
        if d > 0.0 && d < t {
            out.push(d);
        }
    }
    let mut d = mode * 4.0;
    while d < t {
        out.push(d);
        d *= 4.0;
    }
    let mut d = mode / 4.0;
    while d > mode * 1e-6 {
        out.push(d);
        d /= 16.0;
    }
}

fn inner_config(cfg: &QuadConfig) -> QuadConfig {
    QuadConfig {
        rel_tol: cfg.rel_tol * 0.1,
        abs_tol: cfg.abs_tol * 1e-2,
        ..*cfg
    }
}

/// Nested-quadrature driver shared by the density and CDF kernels.
struct Nested<'a> {
    t: f64,
    cfg: &'a QuadConfig,
    inner: QuadConfig,
    failed: Cell<bool>,
}

impl<'a> Nested<'a> {
    fn new(t: f64, cfg: &'a QuadConfig) -> Self {
        Self {
            t,
            cfg,
            inner: inner_config(cfg),
            failed: Cell::new(false),
        }
    }

    /// `∫₀ᵗ f(τ, t-τ) dτ` split at `t/2`; the right half runs in `s = t - τ`
    /// so a peak hugging either end is resolved in its own variable.
    /// `from_left` and `from_right` are suggested points measured from each end.
    fn inner<F: FnMut(f64, f64) -> f64>(
        &self,
        mut f: F,
        from_left: &[f64],
        from_right: &[f64],
    ) -> f64 {
        let t = self.t;
        let half = 0.5 * t;
        let side = |own: &[f64], other: &[f64]| {
            let mut pts: Vec<f64> = own
                .iter()
                .copied()
                .filter(|d| *d < half)
                .chain(
                    other
                        .iter()
                        .map(|d| t - d)
                        .filter(|d| *d > 0.0 && *d < half),
                )
                .chain([0.0, half])
                .collect();
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts
        };
        let left = adapt(
            &mut |tau: f64| f(tau, t - tau),
            &side(from_left, from_right),
            &self.inner,
        );
        let right = adapt(
            &mut |s: f64| f(t - s, s),
            &side(from_right, from_left),
            &self.inner,
        );
        if !(left.converged && right.converged) {
            self.failed.set(true);
        }
        left.value + right.value
    }

    fn outer<F, L>(&self, f: F, log_tail: L, knees: &[f64]) -> Result<f64>
    where
        F: FnMut(f64) -> f64,
        L: Fn(f64) -> f64,
    {
        let r = quadrature::integrate_semi_infinite_envelope(f, 0.0, log_tail, knees, self.cfg);
        match r {
            Ok(v) if !self.failed.get() => Ok(v.value),
            Ok(v) => Err(Error::Accuracy {
                estimate: v.value,
                err_estimate: v.err_estimate,
            }),
            Err(e) => Err(e),
        }
    }
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// `e^{ln_pref}·K(c₊, c₋)` for centred parameters.
fn kernel(
    t: f64,
    c_plus: f64,
    c_minus: f64,
    ln_pref: f64,
    p: &ModelParams,
    cfg: &QuadConfig,
) -> Result<f64> {
    let (bp, bm) = (1.0 + p.beta, 1.0 - p.beta);
    let (mp, mm) = (p.mu_plus, p.mu_minus);
    let nested = Nested::new(t, cfg);
    let integrand = |b: f64| -> f64 {
        let a = bp * b + c_plus;
        let bb = bm * b + c_minus;
        if a <= 0.0 || bb <= 0.0 {
            return 0.0;
        }
        let la = a.ln() - LN_SQRT_2PI;
        let lb = bb.ln() - LN_SQRT_2PI;
        let (mut right, mut left) = (Vec::with_capacity(32), Vec::with_capacity(32));
        let (sa, wa) = h_mode(a, mp, 1.5);
        peak_points(&mut right, t, sa, wa);
        let (sb, wb) = h_mode(bb, mm, 1.5);
        peak_points(&mut left, t, sb, wb);
        nested.inner(
            |tau: f64, s: f64| {
                if s <= 0.0 || tau <= 0.0 {
                    return 0.0;
                }
                (ln_pref + ln_h(s, la, a, mp) + ln_h(tau, lb, bb, -mm)).exp()
            },
            &left,
            &right,
        )
    };
    let log_tail = |b: f64| {
        let qa = pos(bp * b + c_plus - mp.abs() * t).powi(2);
        let qb = pos(bm * b + c_minus - mm.abs() * t).powi(2);
        ln_pref + 10.0 + (1.0 + t).ln() + (1.0 + b + c_plus + c_minus).ln()
            - (1.0 - p.beta.abs()).ln()
            - qa.max(qb) / (2.0 * t)
    };
    let knees = kernel_knees(t, c_plus, c_minus, p);
    nested.outer(integrand, log_tail, &knees)
}

// Outer breakpoints where either spatial argument crosses its drift scale, and
// where two inward drifts balance over the horizon.
fn kernel_knees(t: f64, c_plus: f64, c_minus: f64, p: &ModelParams) -> Vec<f64> {
    let (bp, bm) = (1.0 + p.beta, 1.0 - p.beta);
    let mut k = vec![
        (p.mu_plus.abs() * t - c_plus) / bp,
        (p.mu_minus.abs() * t - c_minus) / bm,
        (t.sqrt() - c_plus) / bp,
        (t.sqrt() - c_minus) / bm,
    ];
    if p.mu_plus < 0.0 && p.mu_minus > 0.0 {
        // a/|μ₊| + b/μ₋ = t
        let slope = bp / -p.mu_plus + bm / p.mu_minus;
        let off = c_plus / -p.mu_plus + c_minus / p.mu_minus;
        k.push((t - off) / slope);
    }
    k.retain(|v| *v > 0.0 && v.is_finite());
    k
}

fn centred(params: &ModelParams) -> Result<ModelParams> {
    params.validate()?;
    Ok(params.centered())
}

/// Density of `X_t` started at the skew level, at `y ≠` skew level.
pub fn transition_density_origin(
    t: f64,
    y: f64,
    params: &ModelParams,
    quad: &QuadConfig,
) -> Result<f64> {
    transition_density(t, params.skew_level, y, params, quad)
}

/// Density of `X_t` started at `x`, at `y ≠` skew level.
pub fn transition_density(
    t: f64,
    x: f64,
    y: f64,
    params: &ModelParams,
    quad: &QuadConfig,
) -> Result<f64> {
    check_t(t)?;
    quad.validate()?;
    if !x.is_finite() {
        return domain(format!("start must be finite, got {x}"));
    }
    let p = centred(params)?;
    let (x, y) = (x - params.skew_level, y - params.skew_level);
    check_y(y, "y")?;
    let (bp, bm) = (1.0 + p.beta, 1.0 - p.beta);
    let (mp, mm) = (p.mu_plus, p.mu_minus);
    let v = if y > 0.0 {
        let ln_pref = (2.0 * bp).ln() + 2.0 * mp * y;
        if x >= 0.0 {
            killed_gaussian(t, x, y, mp) + kernel(t, x + y, 0.0, ln_pref, &p, quad)?
        } else {
            kernel(t, y, -x, ln_pref, &p, quad)?
        }
    } else {
        let ln_pref = (2.0 * bm).ln() + 2.0 * mm * y;
        if x > 0.0 {
            kernel(t, x, -y, ln_pref, &p, quad)?
        } else {
            killed_gaussian(t, x, y, mm) + kernel(t, 0.0, -x - y, ln_pref, &p, quad)?
        }
    };
    Ok(v.max(0.0))
}

// Brownian motion with drift μ killed at 0, from x to y on the same side.
fn killed_gaussian(t: f64, x: f64, y: f64, mu: f64) -> f64 {
    let free = -(y - x - mu * t).powi(2) / (2.0 * t);
    let image = -2.0 * mu * x - (x + y - mu * t).powi(2) / (2.0 * t);
    // free ≥ image on the same side of the origin
    let diff = free.exp() * -(image - free).exp_m1();
    diff / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// One evaluation of the general transition density, bundled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEvalRequest {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub params: ModelParams,
    pub quad: QuadConfig,
}

impl DensityEvalRequest {
    pub fn evaluate(&self) -> Result<f64> {
        transition_density(self.t, self.x, self.y, &self.params, &self.quad)
    }
}

// exp(a + w²)·erfc(w) without overflow.
fn gauss_erfc(a: f64, w: f64) -> f64 {
    if w >= 0.0 {
        a.exp() * erfcx(w)
    } else {
        (a + w * w).exp() * erfc(w)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > -1.0 && beta < 1.0) {
        return domain(format!("beta must lie strictly inside (-1, 1), got {beta}"));
    }
    Ok(())
}

/// Closed-form density from the skew point when `μ₋ = μ₊ = μ`.
pub fn density_one_drift(t: f64, y: f64, mu: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    check_beta(beta)?;
    check_y(y, "y")?;
    let side = if y > 0.0 { 1.0 + beta } else { 1.0 - beta };
    let a = -(y - mu * t).powi(2) / (2.0 * t);
    let w = (y.abs() + beta * mu * t) / (2.0 * t).sqrt();
    let v = side / (SQRT_2PI * t.sqrt())
        * (a.exp() - 0.5 * beta * mu * SQRT_2PI * t.sqrt() * gauss_erfc(a, w));
    Ok(v.max(0.0))
}

/// Closed-form density from the skew point when `-μ₋ = μ₊ = μ`.
pub fn density_alternating(t: f64, y: f64, mu: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    check_beta(beta)?;
    check_y(y, "y")?;
    let side = if y > 0.0 { 1.0 + beta } else { 1.0 - beta };
    let a = -(y.abs() - mu * t).powi(2) / (2.0 * t);
    let w = (y.abs() + mu * t) / (2.0 * t).sqrt();
    let v = side / (SQRT_2PI * t.sqrt())
        * (a.exp() - 0.5 * mu * SQRT_2PI * t.sqrt() * gauss_erfc(a, w));
    Ok(v.max(0.0))
}

/// `p(t; 0, 0+) - p(t; 0, 0-)` by quadrature, with the default configuration.
pub fn density_jump(t: f64, params: &ModelParams) -> Result<f64> {
    density_jump_with(t, params, &QuadConfig::with_tolerances(1e-12, 1e-15))
}

pub fn density_jump_with(t: f64, params: &ModelParams, quad: &QuadConfig) -> Result<f64> {
    check_t(t)?;
    quad.validate()?;
    let p = centred(params)?;
    if p.beta == 0.0 {
        return Ok(0.0);
    }
    let k = kernel(t, 0.0, 0.0, (4.0 * p.beta.abs()).ln(), &p, quad)?;
    Ok(k * p.beta.signum())
}

/// Jump size in closed form for a single drift.
///
/// Note the factor `e^{(βμ)²t/2}` carried by `erfcx`: it is what the one-drift
/// density produces at `y → 0±`.
pub fn density_jump_equal_drift(t: f64, mu: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    check_beta(beta)?;
    let a = -mu * mu * t / 2.0;
    let w = beta * mu * (t / 2.0).sqrt();
    let lead = std::f64::consts::SQRT_2 * beta / (std::f64::consts::PI * t).sqrt();
    Ok(lead * (a.exp() - 0.5 * beta * mu * SQRT_2PI * t.sqrt() * gauss_erfc(a, w)))
}

/// Jump size in closed form for alternating drifts `-μ₋ = μ₊ = μ`.
pub fn density_jump_alternating(t: f64, mu: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    check_beta(beta)?;
    let lead = std::f64::consts::SQRT_2 * beta / (std::f64::consts::PI * t).sqrt();
    Ok(lead * (-mu * mu * t / 2.0).exp() - beta * mu * erfc(mu * (t / 2.0).sqrt()))
}

/// `lim_{t→∞} p(t; x, y)` for inward drifts `μ₋ > 0 > μ₊`.
pub fn stationary_density(y: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    if !(mm > 0.0 && mp < 0.0) {
        return domain(format!(
            "a stationary density needs mu_minus > 0 > mu_plus, got mu_minus = {mm}, mu_plus = {mp}"
        ));
    }
    let y = y - params.skew_level;
    check_y(y, "y")?;
    let (bp, bm) = (1.0 + params.beta, 1.0 - params.beta);
    let d = bp * mm - bm * mp;
    Ok(if y > 0.0 {
        -2.0 * bp * mp * mm / d * (2.0 * mp * y).exp()
    } else {
        -2.0 * bm * mp * mm / d * (2.0 * mm * y).exp()
    })
}

/// `P(X_t <= z)` for a start at the skew level.
pub fn cdf_origin(t: f64, z: f64, params: &ModelParams, quad: &QuadConfig) -> Result<f64> {
    check_t(t)?;
    quad.validate()?;
    let p = centred(params)?;
    let z = z - params.skew_level;
    if z.is_nan() {
        return domain("z must not be NaN");
    }
    if z == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if z == f64::INFINITY {
        return Ok(1.0);
    }
    let v = if z <= 0.0 {
        lower_mass(t, z, p.mu_minus, p.mu_plus, p.beta, quad)?
    } else {
        // mirror image X ↦ -X swaps the sides
        1.0 - lower_mass(t, -z, -p.mu_plus, -p.mu_minus, -p.beta, quad)?
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `P(X_t <= z)` for `z <= 0`, skew point at the origin.
fn lower_mass(t: f64, z: f64, mm: f64, mp: f64, beta: f64, cfg: &QuadConfig) -> Result<f64> {
    let (bp, bm) = (1.0 + beta, 1.0 - beta);
    let ln_side = (2.0 * bm).ln();
    let nested = Nested::new(t, cfg);
    let integrand = |b: f64| -> f64 {
        let a = bp * b;
        let c = bm * b - z;
        if a <= 0.0 {
            return 0.0;
        }
        let la = a.ln() - LN_SQRT_2PI;
        let ln_pref = ln_side + 2.0 * mm * bm * b;
        let (mut right, mut left) = (Vec::with_capacity(32), Vec::with_capacity(32));
        let (sa, wa) = h_mode(a, mp, 1.5);
        peak_points(&mut right, t, sa, wa);
        if c > 0.0 {
            let (sc, wc) = h_mode(c, mm, 0.5);
            peak_points(&mut left, t, sc, wc);
        }
        nested.inner(
            |tau: f64, s: f64| {
                if s <= 0.0 || tau <= 0.0 {
                    return 0.0;
                }
                let lh = ln_pref + ln_h(s, la, a, mp);
                let w = (c + mm * tau) / (2.0 * tau).sqrt();
                let g = 1.0 / (SQRT_2PI * tau.sqrt());
                if w >= 0.0 {
                    (lh - w * w).exp() * (g - 0.5 * mm * erfcx(w))
                } else {
                    lh.exp() * (g * (-w * w).exp() - 0.5 * mm * erfc(w))
                }
            },
            &left,
            &right,
        )
    };
    let log_tail = |b: f64| {
        let qa = pos(bp * b - mp.abs() * t).powi(2);
        let qc = pos(bm * b - z - mm.abs() * t).powi(2);
        ln_side + 2.0 * mm * bm * b + 10.0 + (1.0 + t).ln() + (1.0 + b).ln() + (1.0 + mm.abs()).ln()
            - (1.0 - beta.abs()).ln()
            - qa.max(qc) / (2.0 * t)
    };
    let fake = ModelParams {
        mu_minus: mm,
        mu_plus: mp,
        beta,
        skew_level: 0.0,
    };
    let knees = kernel_knees(t, 0.0, -z, &fake);
    nested.outer(integrand, log_tail, &knees)
}

/// `P_x(X_t <= z)` for a general start, by integrating the transition density.
///
/// Only the start at the skew level has a dedicated expression; this is plain
/// numerical integration and costs one nested quadrature per node.
pub fn cdf(t: f64, x: f64, z: f64, params: &ModelParams, quad: &QuadConfig) -> Result<f64> {
    if x == params.skew_level {
        return cdf_origin(t, z, params, quad);
    }
    check_t(t)?;
    params.validate()?;
    let a = params.skew_level;
    let spread = params.mu_minus.abs().max(params.mu_plus.abs()) * t + 12.0 * t.sqrt();
    let lo = x.min(a) - spread;
    let hi = x.max(a) + spread;
    if z <= lo {
        return Ok(0.0);
    }
    let upper = z.min(hi);
    let outer = QuadConfig {
        rel_tol: quad.rel_tol.max(1e-10),
        ..*quad
    };
    let mut err = None;
    let r = quadrature::integrate_with_points(
        |y| {
            if y == a {
                return 0.0;
            }
            transition_density(t, x, y, params, quad).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        },
        lo,
        upper,
        &[a, x],
        &outer,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(r.value.clamp(0.0, 1.0))
}
