//! Model parameters, characteristic roots and the fundamental solutions of
//! `½g'' + μ(x)g' = qg` with the flux condition `(1+β)g'(0+) = (1-β)g'(0-)`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub beta: f64,
    #[serde(default)]
    pub skew_level: f64,
}

impl ModelParams {
    pub fn new(mu_minus: f64, mu_plus: f64, beta: f64, skew_level: f64) -> Result<Self> {
        let p = Self {
            mu_minus,
            mu_plus,
            beta,
            skew_level,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_minus, self.mu_plus, self.beta, self.skew_level];
        if all.iter().any(|v| !v.is_finite()) {
            return domain(format!("model parameters must be finite: {self:?}"));
        }
        if !(self.beta > -1.0 && self.beta < 1.0) {
            return domain(format!(
                "beta must lie strictly inside (-1, 1), got {}",
                self.beta
            ));
        }
        Ok(())
    }

    /// Same drifts and skewness with the skew point moved to the origin.
    pub(crate) fn centered(&self) -> Self {
        Self {
            skew_level: 0.0,
            ..*self
        }
    }
}

/// The four parameter sets used throughout the numerical experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    Model1,
    Model2,
    Model3,
    Model4,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Model1,
        Preset::Model2,
        Preset::Model3,
        Preset::Model4,
    ];

    pub fn params(self) -> ModelParams {
        let (mu_minus, mu_plus, beta) = match self {
            Preset::Model1 => (-0.1, 0.1, 0.3),
            Preset::Model2 => (2.0, -4.0, 0.7),
            Preset::Model3 => (1.0, 3.0, -0.1),
            Preset::Model4 => (-2.0, -3.0, 0.9),
        };
        ModelParams {
            mu_minus,
            mu_plus,
            beta,
            skew_level: 0.0,
        }
    }

    pub fn horizon(self) -> f64 {
        match self {
            Preset::Model1 | Preset::Model2 => 2.0,
            Preset::Model3 => 1.0,
            Preset::Model4 => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Model1 => "model1",
            Preset::Model2 => "model2",
            Preset::Model3 => "model3",
            Preset::Model4 => "model4",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roots {
    pub delta_minus: f64,
    pub delta_plus: f64,
    pub rho1_minus: f64,
    pub rho2_minus: f64,
    pub rho1_plus: f64,
    pub rho2_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub c1: f64,
    pub c2: f64,
}

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q.is_finite()) {
        return domain(format!("q must be positive and finite, got {q}"));
    }
    Ok(())
}

// Roots of ½ρ² + μρ - q = 0 written so that neither root suffers cancellation:
// the small-magnitude root comes from Vieta's product.
fn root_pair(mu: f64, q: f64) -> (f64, f64, f64) {
    let delta = mu.hypot((2.0 * q).sqrt());
    if mu >= 0.0 {
        let r1 = -(mu + delta);
        (delta, r1, -2.0 * q / r1)
    } else {
        let r2 = delta - mu;
        (delta, -2.0 * q / r2, r2)
    }
}

pub fn roots(params: &ModelParams, q: f64) -> Result<Roots> {
    params.validate()?;
    check_q(q)?;
    Ok(roots_unchecked(params, q))
}

pub(crate) fn roots_unchecked(params: &ModelParams, q: f64) -> Roots {
    let (delta_minus, rho1_minus, rho2_minus) = root_pair(params.mu_minus, q);
    let (delta_plus, rho1_plus, rho2_plus) = root_pair(params.mu_plus, q);
    Roots {
        delta_minus,
        delta_plus,
        rho1_minus,
        rho2_minus,
        rho1_plus,
        rho2_plus,
    }
}

pub fn coeffs(params: &ModelParams, q: f64) -> Result<Coeffs> {
    params.validate()?;
    check_q(q)?;
    let b = Basis::new(params, q);
    Ok(Coeffs { c1: b.c1, c2: b.c2 })
}

/// A positive or signed number stored as `m·e^e` so products of exponentials
/// with large exponents neither overflow nor underflow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Scaled {
    pub m: f64,
    pub e: f64,
}

impl Scaled {
    pub fn mul(self, o: Scaled) -> Scaled {
        Scaled {
            m: self.m * o.m,
            e: self.e + o.e,
        }
    }

    pub fn sub(self, o: Scaled) -> Scaled {
        if self.m == 0.0 {
            return Scaled { m: -o.m, e: o.e };
        }
        if o.m == 0.0 {
            return self;
        }
        let e = self.e.max(o.e);
        Scaled {
            m: self.m * (self.e - e).exp() - o.m * (o.e - e).exp(),
            e,
        }
    }

    pub fn ratio(self, o: Scaled) -> f64 {
        self.m / o.m * (self.e - o.e).exp()
    }

    pub fn value(self) -> f64 {
        self.m * self.e.exp()
    }
}

/// Roots plus c₁, c₂ and their complements, computed once per (params, q).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Basis {
    pub r: Roots,
    pub c1: f64,
    pub c2: f64,
    pub one_minus_c1: f64,
    pub one_minus_c2: f64,
}

impl Basis {
    pub fn new(params: &ModelParams, q: f64) -> Self {
        let r = roots_unchecked(params, q);
        let (bp, bm) = (1.0 + params.beta, 1.0 - params.beta);
        let span_minus = r.rho2_minus - r.rho1_minus;
        let span_plus = r.rho2_plus - r.rho1_plus;
        let c1 = (bp * r.rho1_plus - bm * r.rho1_minus) / (bm * span_minus);
        let c2 = (bp * r.rho2_plus - bm * r.rho2_minus) / (bp * span_plus);
        // 1 - c written out directly: both numerators are sums of positive terms
        let shared = bm * r.rho2_minus - bp * r.rho1_plus;
        Self {
            r,
            c1,
            c2,
            one_minus_c1: shared / (bm * span_minus),
            one_minus_c2: shared / (bp * span_plus),
        }
    }

    /// g₁ at a centred coordinate.
    pub fn g1(&self, x: f64) -> Scaled {
        let r = &self.r;
        if x > 0.0 {
            Scaled {
                m: 1.0,
                e: r.rho1_plus * x,
            }
        } else {
            Scaled {
                m: self.c1 * ((r.rho2_minus - r.rho1_minus) * x).exp() + self.one_minus_c1,
                e: r.rho1_minus * x,
            }
        }
    }

    /// g₂ at a centred coordinate.
    pub fn g2(&self, x: f64) -> Scaled {
        let r = &self.r;
        if x > 0.0 {
            Scaled {
                m: self.one_minus_c2 + self.c2 * ((r.rho1_plus - r.rho2_plus) * x).exp(),
                e: r.rho2_plus * x,
            }
        } else {
            Scaled {
                m: 1.0,
                e: r.rho2_minus * x,
            }
        }
    }

    pub fn w(&self, x: f64, y: f64) -> Scaled {
        self.g2(x).mul(self.g1(y)).sub(self.g1(x).mul(self.g2(y)))
    }
}

pub fn fundamental_solutions(x: f64, params: &ModelParams, q: f64) -> Result<(f64, f64)> {
    params.validate()?;
    check_q(q)?;
    let b = Basis::new(params, q);
    let xc = x - params.skew_level;
    Ok((b.g1(xc).value(), b.g2(xc).value()))
}

pub fn wronskian_form(x: f64, y: f64, params: &ModelParams, q: f64) -> Result<f64> {
    params.validate()?;
    check_q(q)?;
    let b = Basis::new(params, q);
    let a = params.skew_level;
    Ok(b.w(x - a, y - a).value())
}
