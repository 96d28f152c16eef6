//! The `validate` battery: each check reports its measured value and bound,
//! and checks that do not apply to the drift regime are marked skipped.

use rsbm_core::density::{
    cdf, density_alternating, density_jump, density_one_drift, stationary_density,
    transition_density, transition_density_origin,
};
use rsbm_core::exit::escape_probabilities;
use rsbm_core::potential::{laplace_density_oracle, potential_density_origin};
use rsbm_core::quadrature::{integrate_semi_infinite, integrate_with_points};
use rsbm_core::sampler::{cdf_table, fit_tna_to_table, CdfTable, FitConfig, FitModel, TnaFit};
use rsbm_core::stats::ks_test;
use rsbm_core::{Error, ModelParams, QuadConfig};
use serde::Serialize;

use crate::args::{Resolved, ValidateCmd};
use crate::{json, write_out, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Check {
    fn measured(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if value <= threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name,
            status,
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        }
    }

    // p-values pass when they are above the bound
    fn at_least(name: &'static str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if value > threshold {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name,
            status,
            value: Some(value),
            threshold: Some(threshold),
            detail: detail.into(),
        }
    }

    fn skipped(name: &'static str, why: impl Into<String>) -> Self {
        Self {
            name,
            status: Status::Skipped,
            value: None,
            threshold: None,
            detail: why.into(),
        }
    }

    fn failed(name: &'static str, e: &Error) -> Self {
        Self {
            name,
            status: Status::Fail,
            value: None,
            threshold: None,
            detail: e.to_string(),
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    model: &'a str,
    params: ModelParams,
    t: f64,
    x0: f64,
    checks: &'a [Check],
    passed: bool,
}

fn guard(name: &'static str, r: Result<Check, Error>) -> Check {
    r.unwrap_or_else(|e| Check::failed(name, &e))
}

fn normalization(m: &Resolved, quad: &QuadConfig) -> Result<Check, Error> {
    let a = m.params.skew_level;
    let mut err = None;
    let pts = [a, m.x0];
    let r = integrate_with_points(
        |y| {
            transition_density(m.t, m.x0, y, &m.params, quad).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        },
        a - 20.0,
        a + 20.0,
        &pts,
        quad,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    // the bound must be certified, so the integrator's own error estimate counts
    Ok(Check::measured(
        "normalization",
        (r.value - 1.0).abs() + r.err_estimate,
        1e-6,
        format!(
            "integral over the skew level ± 20 is {} with error estimate {}",
            r.value, r.err_estimate
        ),
    ))
}

fn cdf_tails(m: &Resolved, quad: &QuadConfig) -> Result<Check, Error> {
    let a = m.params.skew_level;
    let lo = cdf(m.t, m.x0, a - 20.0, &m.params, quad)?;
    let hi = cdf(m.t, m.x0, a + 20.0, &m.params, quad)?;
    Ok(Check::measured(
        "cdf_tails",
        lo.max(1.0 - hi),
        1e-8,
        format!("F(a - 20) = {lo}, F(a + 20) = {hi}"),
    ))
}

fn from_skew_level(m: &Resolved) -> bool {
    m.x0 == m.params.skew_level
}

fn laplace(m: &Resolved) -> Result<Check, Error> {
    let name = "laplace_consistency";
    if !from_skew_level(m) {
        return Ok(Check::skipped(
            name,
            "the transform check starts at the skew level",
        ));
    }
    let a = m.params.skew_level;
    let mut worst: f64 = 0.0;
    for q in [0.5, 1.0, 2.0] {
        for y in [-1.0, 0.5, 2.0] {
            let closed = potential_density_origin(a + y, &m.params, q)?;
            let numeric = laplace_density_oracle(a + y, &m.params, q, 40.0 / q)?;
            worst = worst.max((numeric - closed).abs() / closed);
        }
    }
    Ok(Check::measured(
        name,
        worst,
        1e-4,
        "max relative error over q in {0.5, 1, 2}, y - a in {-1, 0.5, 2}",
    ))
}

fn closed_form(m: &Resolved, quad: &QuadConfig) -> Result<Check, Error> {
    let name = "closed_form_agreement";
    let p = &m.params;
    let (mm, mp, b) = (p.mu_minus, p.mu_plus, p.beta);
    let closed: Box<dyn Fn(f64) -> rsbm_core::Result<f64>> = if mm == mp {
        Box::new(move |y| density_one_drift(m.t, y, mp, b))
    } else if mm == -mp {
        Box::new(move |y| density_alternating(m.t, y, mp, b))
    } else {
        return Ok(Check::skipped(name, "needs equal or opposite drifts"));
    };
    if !from_skew_level(m) {
        return Ok(Check::skipped(
            name,
            "the closed forms start at the skew level",
        ));
    }
    let mut worst: f64 = 0.0;
    for y in [-2.0, -1.0, -0.3, 0.3, 1.0, 2.0] {
        let numeric = transition_density_origin(m.t, p.skew_level + y, p, quad)?;
        worst = worst.max((numeric - closed(y)?).abs());
    }
    Ok(Check::measured(
        name,
        worst,
        1e-6,
        "max absolute error at six points",
    ))
}

fn jump(m: &Resolved, quad: &QuadConfig) -> Result<Check, Error> {
    let name = "density_jump";
    if !from_skew_level(m) {
        return Ok(Check::skipped(
            name,
            "the jump formula starts at the skew level",
        ));
    }
    let a = m.params.skew_level;
    let up = transition_density_origin(m.t, a + 1e-6, &m.params, quad)?;
    let down = transition_density_origin(m.t, a - 1e-6, &m.params, quad)?;
    let want = density_jump(m.t, &m.params)?;
    Ok(Check::measured(
        name,
        ((up - down) - want).abs(),
        1e-5,
        format!("one-sided difference {}, jump {want}", up - down),
    ))
}

fn stationary(m: &Resolved, quad: &QuadConfig) -> Result<Vec<Check>, Error> {
    let p = &m.params;
    if !(p.mu_minus > 0.0 && p.mu_plus < 0.0) {
        let why = "needs inward drifts mu_minus > 0 > mu_plus";
        return Ok(vec![
            Check::skipped("stationary_limit", why),
            Check::skipped("stationary_mass", why),
        ]);
    }
    let a = p.skew_level;
    let mut worst: f64 = 0.0;
    for y in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
        let late = transition_density(50.0, m.x0, a + y, p, quad)?;
        worst = worst.max((late - stationary_density(a + y, p)?).abs());
    }
    let c = ModelParams {
        skew_level: 0.0,
        ..*p
    };
    let cfg = QuadConfig::with_tolerances(1e-13, 1e-15);
    let side = |s: f64| {
        integrate_semi_infinite(
            |u| stationary_density(s * u.max(f64::MIN_POSITIVE), &c).unwrap_or(f64::NAN),
            0.0,
            &cfg,
        )
    };
    let mass = side(1.0)?.value + side(-1.0)?.value;
    Ok(vec![
        Check::measured(
            "stationary_limit",
            worst,
            1e-3,
            "sup |p(50; x0, y) - p(y)| at six points",
        ),
        Check::measured(
            "stationary_mass",
            (mass - 1.0).abs(),
            1e-10,
            format!("mass {mass}"),
        ),
    ])
}

fn escape(m: &Resolved) -> Result<Check, Error> {
    let name = "escape_probabilities";
    let p = &m.params;
    if !(p.mu_plus > 0.0 && p.mu_minus < 0.0) {
        return Ok(Check::skipped(
            name,
            "needs outward drifts mu_plus > 0 > mu_minus",
        ));
    }
    let (up, down) = escape_probabilities(m.x0, p)?;
    Ok(Check::measured(
        name,
        (up + down - 1.0).abs(),
        1e-12,
        format!("P(+inf) = {up}, P(-inf) = {down}"),
    ))
}

fn sup_error(table: &CdfTable, fit: &TnaFit, grid: &[f64]) -> f64 {
    let a = fit.model.params.skew_level;
    table
        .xs
        .iter()
        .zip(&table.fs)
        .filter(|(x, _)| grid.binary_search_by(|g| g.total_cmp(&(**x - a))).is_ok())
        .map(|(x, f)| (f - fit.cdf(*x)).abs())
        .fold(0.0, f64::max)
}

fn sampling(m: &Resolved, quad: &QuadConfig, n: usize, seed: u64) -> Vec<Check> {
    let names = ["fit_objective", "fit_sup_bound", "tna_ks"];
    let cfg = FitConfig::default();
    let a = m.params.skew_level;
    let grid: Vec<f64> = cfg.grid.iter().map(|x| x + a).collect();
    let table = match cdf_table(&m.params, m.t, &grid, quad) {
        Ok(t) => t,
        Err(e) => return names.iter().map(|n| Check::failed(n, &e)).collect(),
    };
    let model = FitModel {
        params: m.params,
        t: m.t,
    };
    let (fit, converged) = match fit_tna_to_table(&table, model, &cfg) {
        Ok(f) => (f, true),
        Err(Error::Fit { best, .. }) => (*best, false),
        Err(e) => return names.iter().map(|n| Check::failed(n, &e)).collect(),
    };
    let mut out = Vec::new();
    let mut obj = Check::measured(
        "fit_objective",
        fit.objective,
        0.01,
        format!("alpha = {}, converged = {converged}", fit.mixture.alpha),
    );
    if !converged {
        obj.status = Status::Fail;
    }
    out.push(obj);
    let sup = sup_error(&table, &fit, &cfg.grid);
    out.push(Check::measured(
        "fit_sup_bound",
        sup / fit.objective,
        2.0,
        format!("sup error {sup} over objective {}", fit.objective),
    ));
    if n == 0 {
        out.push(Check::skipped("tna_ks", "no samples requested"));
        return out;
    }
    let ks = fit
        .sample_many(n, seed)
        .and_then(|xs| ks_test(&xs, |x| table.pchip(x)));
    out.push(match ks {
        Ok(r) => Check::at_least(
            "tna_ks",
            r.p_value,
            0.05,
            format!("D = {}, n = {}", r.statistic, r.n),
        ),
        Err(e) => Check::failed("tna_ks", &e),
    });
    out
}

pub fn cmd_validate(c: &ValidateCmd) -> Result<(), Failure> {
    let m = c.model.resolve()?;
    let quad = c.quad.resolve()?;
    let mut checks = vec![
        guard("normalization", normalization(&m, &quad)),
        guard("cdf_tails", cdf_tails(&m, &quad)),
        guard("laplace_consistency", laplace(&m)),
        guard("closed_form_agreement", closed_form(&m, &quad)),
        guard("density_jump", jump(&m, &quad)),
    ];
    match stationary(&m, &quad) {
        Ok(v) => checks.extend(v),
        Err(e) => checks.push(Check::failed("stationary_limit", &e)),
    }
    checks.push(guard("escape_probabilities", escape(&m)));
    checks.extend(sampling(&m, &quad, c.n, c.seed));
    let passed = checks.iter().all(|c| c.status != Status::Fail);
    let report = Report {
        model: m.name,
        params: m.params,
        t: m.t,
        x0: m.x0,
        checks: &checks,
        passed,
    };
    write_out(c.out.as_deref(), &json(&report))?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| c.name)
            .collect();
        Err(Failure {
            code: 1,
            msg: format!("failed checks: {}", failed.join(", ")),
        })
    }
}
