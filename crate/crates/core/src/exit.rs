//! Exit and hitting problems: Laplace transforms of first-passage times and
//! their `q → 0` limits (hitting probabilities, escape to ±∞, mean hitting
//! times).
//!
//! The `q → 0` quantities are closed forms of their own. Evaluating the
//! transforms at tiny `q` is ill-conditioned because one root of each
//! characteristic pair collapses to zero.

use crate::error::{domain, Error, Result};
use crate::model::{check_q, Basis, ModelParams};

fn check_finite(vals: &[f64]) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        domain(format!("coordinates must be finite: {vals:?}"))
    }
}

fn check_interval(x: f64, y: f64, z: f64) -> Result<()> {
    check_finite(&[x, y, z])?;
    if !(y <= x && x <= z) {
        return domain(format!("need y <= x <= z, got y = {y}, x = {x}, z = {z}"));
    }
    if y >= z {
        return domain(format!("need y < z, got y = {y}, z = {z}"));
    }
    Ok(())
}

/// `E_x[e^{-qτ_z}; τ_z < τ_y]` for `y <= x <= z`.
pub fn two_sided_exit_up(x: f64, y: f64, z: f64, params: &ModelParams, q: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_interval(x, y, z)?;
    if x == z {
        return Ok(1.0);
    }
    if x == y {
        return Ok(0.0);
    }
    let a = params.skew_level;
    let b = Basis::new(params, q);
    let (x, y, z) = (x - a, y - a, z - a);
    Ok(b.w(x, y).ratio(b.w(z, y)).clamp(0.0, 1.0))
}

/// `E_x[e^{-qτ_y}; τ_y < τ_z]` for `y <= x <= z`.
pub fn two_sided_exit_down(x: f64, y: f64, z: f64, params: &ModelParams, q: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_interval(x, y, z)?;
    if x == y {
        return Ok(1.0);
    }
    if x == z {
        return Ok(0.0);
    }
    let a = params.skew_level;
    let b = Basis::new(params, q);
    let (x, y, z) = (x - a, y - a, z - a);
    Ok(b.w(x, z).ratio(b.w(y, z)).clamp(0.0, 1.0))
}

/// `E_x[e^{-qτ_r}]` for any start and level.
///
/// From above the level the decreasing solution is the right one, from below
/// the increasing one; each case collapses to a ratio of that solution.
pub fn one_sided_hitting_laplace(x: f64, r: f64, params: &ModelParams, q: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    check_finite(&[x, r])?;
    if x == r {
        return Ok(1.0);
    }
    let a = params.skew_level;
    let b = Basis::new(params, q);
    let (x, r) = (x - a, r - a);
    let v = if x > r {
        b.g1(x).ratio(b.g1(r))
    } else {
        b.g2(x).ratio(b.g2(r))
    };
    Ok(v.clamp(0.0, 1.0))
}

/// `(P_x(X_t → +∞), P_x(X_t → -∞))` when both drifts point outward.
pub fn escape_probabilities(x: f64, params: &ModelParams) -> Result<(f64, f64)> {
    params.validate()?;
    check_finite(&[x])?;
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    if !(mp > 0.0 && mm < 0.0) {
        return domain(format!(
            "escape probabilities need mu_plus > 0 > mu_minus, got mu_minus = {mm}, mu_plus = {mp}"
        ));
    }
    let (bp, bm) = (1.0 + params.beta, 1.0 - params.beta);
    let d = bp * mp - bm * mm;
    let x = x - params.skew_level;
    if x <= 0.0 {
        let up = bp * mp * (-2.0 * mm * x).exp() / d;
        Ok((up, 1.0 - up))
    } else {
        let down = -bm * mm * (-2.0 * mp * x).exp() / d;
        Ok((1.0 - down, down))
    }
}

/// `P_x(τ_z < ∞)`.
///
/// Inward drifts (`μ₋ > 0 > μ₊`) make every level certain to be hit. Outward
/// drifts (`μ₊ > 0 > μ₋`) give the `q → 0` limits of the one-sided transform.
pub fn hitting_probability(x: f64, z: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    check_finite(&[x, z])?;
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    if mm > 0.0 && mp < 0.0 {
        return Ok(1.0);
    }
    if !(mp > 0.0 && mm < 0.0) {
        return Err(Error::UnsupportedRegime(format!(
            "hitting probability is derived for mu_minus > 0 > mu_plus or mu_plus > 0 > mu_minus; got mu_minus = {mm}, mu_plus = {mp}"
        )));
    }
    if x == z {
        return Ok(1.0);
    }
    let (bp, bm) = (1.0 + params.beta, 1.0 - params.beta);
    let d = bp * mp - bm * mm;
    let a = params.skew_level;
    let (x, z) = (x - a, z - a);
    let p = if x < z {
        if z <= 0.0 {
            // never leaves the lower half before reaching z
            (2.0 * mm * (z - x)).exp()
        } else if x <= 0.0 {
            bp * mp * (-2.0 * mm * x).exp() / (d + bm * mm * (-2.0 * mp * z).exp())
        } else {
            (d + bm * mm * (-2.0 * mp * x).exp()) / (d + bm * mm * (-2.0 * mp * z).exp())
        }
    } else if z > 0.0 {
        (-2.0 * mp * (x - z)).exp()
    } else if x >= 0.0 {
        -bm * mm * (-2.0 * mp * x).exp() / (d - bp * mp * (-2.0 * mm * z).exp())
    } else {
        (d - bp * mp * (-2.0 * mm * x).exp()) / (d - bp * mp * (-2.0 * mm * z).exp())
    };
    Ok(p.clamp(0.0, 1.0))
}

/// `E_x[τ_z]` for inward drifts `μ₋ > 0 > μ₊`.
///
/// A zero drift on the side that has to be crossed or travelled against makes
/// the mean infinite and is reported as `f64::INFINITY`. Zero-drift
/// configurations with a finite mean are not covered by the closed forms and
/// return [`Error::UnsupportedRegime`].
pub fn expected_hitting_time(x: f64, z: f64, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    check_finite(&[x, z])?;
    if x == z {
        return Ok(0.0);
    }
    let (mm, mp) = (params.mu_minus, params.mu_plus);
    let a = params.skew_level;
    let (x, z) = (x - a, z - a);
    let unsupported = || {
        Err(Error::UnsupportedRegime(format!(
            "expected hitting time is derived for mu_minus > 0 > mu_plus; got mu_minus = {mm}, mu_plus = {mp}, x = {x}, z = {z} (relative to the skew level)"
        )))
    };
    if mm == 0.0 || mp == 0.0 {
        if mm < 0.0 || mp > 0.0 {
            return unsupported();
        }
        if mm == 0.0 && mp == 0.0 {
            return Ok(f64::INFINITY);
        }
        if mp == 0.0 {
            return if x > z {
                Ok(f64::INFINITY)
            } else if z <= 0.0 {
                Ok((z - x) / mm)
            } else {
                unsupported()
            };
        }
        return if x < z {
            Ok(f64::INFINITY)
        } else if z >= 0.0 {
            Ok((x - z) / -mp)
        } else {
            unsupported()
        };
    }
    if !(mm > 0.0 && mp < 0.0) {
        return unsupported();
    }
    let (bp, bm) = (1.0 + params.beta, 1.0 - params.beta);
    let k = mm * bp - mp * bm;
    let t = if x < 0.0 && 0.0 < z {
        (2.0 * bp * (mm * mp * z - mp * mp * x) + k * ((-2.0 * mp * z).exp() - 1.0))
            / (2.0 * mm * mp * mp * bp)
    } else if 0.0 <= x && x < z {
        (2.0 * bp * mm * mp * (z - x) + k * ((-2.0 * mp * z).exp() - (-2.0 * mp * x).exp()))
            / (2.0 * mm * mp * mp * bp)
    } else if z <= 0.0 && 0.0 <= x {
        (2.0 * bm * (mm * mp * z - mm * mm * x) + k * (1.0 - (-2.0 * mm * z).exp()))
            / (2.0 * mm * mm * mp * bm)
    } else if z <= x && x <= 0.0 {
        (2.0 * mm * mp * bm * (z - x) + k * ((-2.0 * mm * x).exp() - (-2.0 * mm * z).exp()))
            / (2.0 * mm * mm * mp * bm)
    } else if x < z {
        // below the skew point the whole way up
        (z - x) / mm
    } else {
        // above the skew point the whole way down
        (x - z) / -mp
    };
    Ok(t)
}
