//! Resolvent densities `q·∫ e^{-qt} P_x(X_t ∈ dy) dt`, free and killed at
//! one or two barriers.

use crate::density::transition_density_origin;
use crate::error::{domain, Result};
use crate::exit::{one_sided_hitting_laplace, two_sided_exit_down, two_sided_exit_up};
use crate::model::{check_q, roots_unchecked, ModelParams, Roots};
use crate::quadrature::{integrate_with_points, QuadConfig};

struct Resolvent {
    r: Roots,
    q: f64,
    beta: f64,
    mu_minus: f64,
    mu_plus: f64,
    d: f64,
}

impl Resolvent {
    fn new(params: &ModelParams, q: f64) -> Self {
        let r = roots_unchecked(params, q);
        let beta = params.beta;
        // (1+β)(μ₊+δ⁺) + (1-β)(δ⁻-μ₋), written through the stable roots
        let d = -(1.0 + beta) * r.rho1_plus + (1.0 - beta) * r.rho2_minus;
        Self {
            r,
            q,
            beta,
            mu_minus: params.mu_minus,
            mu_plus: params.mu_plus,
            d,
        }
    }

    // centred coordinates, y ≠ 0
    fn at(&self, x: f64, y: f64) -> f64 {
        let Self { r, q, beta, d, .. } = *self;
        let up = 2.0 * (1.0 + beta) * q / d;
        let down = 2.0 * (1.0 - beta) * q / d;
        match (x >= 0.0, y > 0.0) {
            (true, true) => {
                let (m, dl) = (self.mu_plus, r.delta_plus);
                let drift = m * (y - x);
                let near = drift - (y - x).abs() * dl;
                let far = drift - (x + y) * dl;
                q / dl * near.exp() * -(far - near).exp_m1() + up * far.exp()
            }
            (false, true) => up * (r.rho2_minus * x - r.rho2_plus * y).exp(),
            (true, false) => down * (r.rho1_plus * x - r.rho1_minus * y).exp(),
            (false, false) => {
                let (m, dl) = (self.mu_minus, r.delta_minus);
                let drift = m * (y - x);
                let near = drift - (y - x).abs() * dl;
                let far = drift + (x + y) * dl;
                q / dl * near.exp() * -(far - near).exp_m1() + down * far.exp()
            }
        }
    }
}

fn check_point(v: f64, what: &str) -> Result<()> {
    if !v.is_finite() {
        return domain(format!("{what} must be finite, got {v}"));
    }
    Ok(())
}

fn check_y(y: f64, params: &ModelParams) -> Result<()> {
    check_point(y, "y")?;
    if y == params.skew_level {
        return domain("the potential density jumps at the skew level; evaluate at y ≠ skew level");
    }
    Ok(())
}

/// Potential density from the skew level.
pub fn potential_density_origin(y: f64, params: &ModelParams, q: f64) -> Result<f64> {
    potential_density(params.skew_level, y, params, q)
}

/// Potential density from `x`.
pub fn potential_density(x: f64, y: f64, params: &ModelParams, q: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_point(x, "x")?;
    check_y(y, params)?;
    let a = params.skew_level;
    Ok(Resolvent::new(params, q).at(x - a, y - a))
}

/// Potential density of the process killed on leaving `(b_minus, b_plus)`.
///
/// Returned unclipped: outside the interval the value is zero up to rounding,
/// and small negative residue there is left visible.
pub fn potential_density_two_barriers(
    x: f64,
    y: f64,
    b_minus: f64,
    b_plus: f64,
    params: &ModelParams,
    q: f64,
) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_y(y, params)?;
    check_point(b_minus, "b_minus")?;
    check_point(b_plus, "b_plus")?;
    let a = params.skew_level;
    if !(b_minus < a && a < b_plus) {
        return domain(format!(
            "barriers must straddle the skew level: need {b_minus} < {a} < {b_plus}"
        ));
    }
    if !(b_minus <= x && x <= b_plus) {
        return domain(format!("start {x} lies outside [{b_minus}, {b_plus}]"));
    }
    let res = Resolvent::new(params, q);
    let down = two_sided_exit_down(x, b_minus, b_plus, params, q)?;
    let up = two_sided_exit_up(x, b_minus, b_plus, params, q)?;
    let (xc, yc) = (x - a, y - a);
    Ok(res.at(xc, yc) - down * res.at(b_minus - a, yc) - up * res.at(b_plus - a, yc))
}

/// Potential density of the process killed at `b_minus` below the skew level.
pub fn potential_density_one_barrier(
    x: f64,
    y: f64,
    b_minus: f64,
    params: &ModelParams,
    q: f64,
) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_y(y, params)?;
    check_point(b_minus, "b_minus")?;
    let a = params.skew_level;
    if !(b_minus < a) {
        return domain(format!(
            "barrier {b_minus} must lie below the skew level {a}"
        ));
    }
    if !(x >= b_minus && x.is_finite()) {
        return domain(format!("start {x} lies below the barrier {b_minus}"));
    }
    let res = Resolvent::new(params, q);
    let hit = one_sided_hitting_laplace(x, b_minus, params, q)?;
    Ok(res.at(x - a, y - a) - hit * res.at(b_minus - a, y - a))
}

/// Numerical Laplace transform `∫₀^{t_max} q e^{-qt} p(t; y) dt` of the
/// density from the skew level; a cross-check on the potential density.
///
/// The cut at `t_max` drops a fraction `e^{-q·t_max}` of the mass, so the
/// horizon must satisfy `q·t_max >= 25`.
pub fn laplace_density_oracle(y: f64, params: &ModelParams, q: f64, t_max: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_y(y, params)?;
    if !(t_max.is_finite() && q * t_max >= 25.0) {
        return domain(format!(
            "need q * t_max >= 25, got q = {q}, t_max = {t_max}"
        ));
    }
    let inner = QuadConfig::with_tolerances(1e-10, 1e-14);
    let outer = QuadConfig::with_tolerances(1e-9, 1e-13);
    let yc = (y - params.skew_level).abs();
    let mut pts: Vec<f64> = [
        yc * yc / 8.0,
        yc * yc / 2.0,
        yc * yc,
        1.0 / q,
        4.0 / q,
        10.0 / q,
    ]
    .into_iter()
    .filter(|p| *p > 0.0 && *p < t_max)
    .collect();
    pts.sort_by(f64::total_cmp);
    let mut err = None;
    let r = integrate_with_points(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            match transition_density_origin(t, y, params, &inner) {
                Ok(p) => q * (-q * t).exp() * p,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        t_max,
        &pts,
        &outer,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(r.value),
    }
}
