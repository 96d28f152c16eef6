//! End-to-end acceptance run: one line per criterion.
//!
//! Criteria 5, 9 and 12 cannot be met in full (see the README); they are run as
//! written, reported as FAIL, and only an unexpected outcome on them changes
//! the exit status.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsbm_core::density::{
    density_alternating, density_jump, density_one_drift, stationary_density, transition_density,
    transition_density_origin,
};
use rsbm_core::exit::{escape_probabilities, expected_hitting_time};
use rsbm_core::potential::{laplace_density_oracle, potential_density_origin};
use rsbm_core::quadrature::{integrate, integrate_with_points};
use rsbm_core::risk::{confidence_grid, mc_var_cvar, mse, var_from_cdf, var_mixture};
use rsbm_core::sampler::{
    cdf_table, first_passage_times, fit_tna_to_table, simulate_paths, CdfTable, FitConfig,
    FitModel, PathSimConfig, TnaFit,
};
use rsbm_core::special::{erfcx, norm_cdf, norm_quantile};
use rsbm_core::stats::ks_test;
use rsbm_core::{ModelParams, Preset, QuadConfig, Result};

const EXPECTED_FAIL: [usize; 3] = [5, 9, 12];

fn params(mu_minus: f64, mu_plus: f64, beta: f64) -> ModelParams {
    ModelParams::new(mu_minus, mu_plus, beta, 0.0).unwrap()
}

fn tight() -> QuadConfig {
    QuadConfig::with_tolerances(1e-12, 1e-15)
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

struct Fitted {
    table: CdfTable,
    fit: TnaFit,
}

fn fitted(preset: Preset) -> &'static Fitted {
    static CACHE: [OnceLock<Fitted>; 4] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    let i = Preset::ALL.iter().position(|p| *p == preset).unwrap();
    CACHE[i].get_or_init(|| {
        let cfg = FitConfig::default();
        let p = preset.params();
        let table = cdf_table(&p, preset.horizon(), &cfg.grid, &QuadConfig::default()).unwrap();
        let model = FitModel {
            params: p,
            t: preset.horizon(),
        };
        let fit = match fit_tna_to_table(&table, model, &cfg) {
            Ok(f) => f,
            Err(rsbm_core::Error::Fit { best, .. }) => *best,
            Err(e) => panic!("fit for {}: {e}", preset.name()),
        };
        Fitted { table, fit }
    })
}

fn normalization() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for preset in Preset::ALL {
        let p = preset.params();
        let t = preset.horizon();
        let mut err = None;
        let r = integrate_with_points(
            |y| {
                transition_density_origin(t, y, &p, &QuadConfig::default()).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    f64::NAN
                })
            },
            -20.0,
            20.0,
            &[0.0],
            &QuadConfig::with_tolerances(1e-10, 1e-13),
        )?;
        if let Some(e) = err {
            return Err(e);
        }
        worst = worst.max((r.value - 1.0).abs());
    }
    verdict(
        worst <= 1e-6,
        format!("max |∫p - 1| = {worst:.2e} over the four presets"),
    )
}

fn laplace() -> Result<Verdict> {
    let p = Preset::Model1.params();
    let mut worst: f64 = 0.0;
    for q in [0.5, 1.0, 2.0] {
        for y in [-1.0, 0.5, 2.0] {
            let closed = potential_density_origin(y, &p, q)?;
            let numeric = laplace_density_oracle(y, &p, q, 40.0 / q)?;
            worst = worst.max((numeric - closed).abs() / closed);
        }
    }
    verdict(worst <= 1e-4, format!("max relative error {worst:.2e}"))
}

fn closed_forms() -> Result<Verdict> {
    let mut one: f64 = 0.0;
    let p = params(0.8, 0.8, 0.3);
    for y in [-3.0, -1.0, -0.25, 0.25, 1.0, 3.0] {
        one = one.max(
            (transition_density_origin(1.5, y, &p, &tight())?
                - density_one_drift(1.5, y, 0.8, 0.3)?)
            .abs(),
        );
    }
    let mut alt: f64 = 0.0;
    let p = params(-1.0, 1.0, 0.5);
    for y in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
        alt = alt.max(
            (transition_density_origin(2.0, y, &p, &tight())?
                - density_alternating(2.0, y, 1.0, 0.5)?)
            .abs(),
        );
    }
    verdict(
        one <= 1e-6 && alt <= 1e-6,
        format!("one drift {one:.2e}, alternating {alt:.2e}"),
    )
}

fn reductions() -> Result<Verdict> {
    let gauss = |t: f64, m: f64, y: f64| {
        (-(y - m).powi(2) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
    };
    let mut drift: f64 = 0.0;
    let (mu, t) = (0.5, 2.0);
    let p = params(mu, mu, 0.0);
    for (x, y) in [
        (0.0, 1.0),
        (0.0, -0.7),
        (0.6, 1.4),
        (0.6, -0.8),
        (-0.9, 0.3),
        (-0.9, -2.0),
    ] {
        drift =
            drift.max((transition_density(t, x, y, &p, &tight())? - gauss(t, x + mu * t, y)).abs());
    }
    let mut heat: f64 = 0.0;
    let free = params(0.0, 0.0, 0.0);
    for (x, y) in [(0.3, 0.9), (0.3, -0.4), (-0.6, 1.1), (-0.6, -0.2)] {
        heat = heat.max((transition_density(1.0, x, y, &free, &tight())? - gauss(1.0, x, y)).abs());
    }
    verdict(
        drift <= 1e-8 && heat <= 1e-8,
        format!("drifted Brownian {drift:.2e}, heat kernel (four branches) {heat:.2e}"),
    )
}

fn jump() -> Result<Verdict> {
    let gap = |p: &ModelParams, t: f64, eps: f64| -> Result<f64> {
        Ok(transition_density_origin(t, eps, p, &tight())?
            - transition_density_origin(t, -eps, p, &tight())?)
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for preset in [Preset::Model1, Preset::Model2] {
        let p = preset.params();
        let t = preset.horizon();
        let j = density_jump(t, &p)?;
        let (g1, g2) = (gap(&p, t, 1e-6)?, gap(&p, t, 2e-6)?);
        worst = worst.max((g1 - j).abs());
        // the gap grows linearly with the offset at the density's slopes; remove that term
        parts.push(format!(
            "{} {:.2e} (slope-corrected {:.1e})",
            preset.name(),
            (g1 - j).abs(),
            (2.0 * g1 - g2 - j).abs()
        ));
    }
    let mut special: f64 = 0.0;
    for (beta, t) in [(0.3, 2.0), (-0.6, 0.5), (0.9, 3.0)] {
        let want = 2f64.sqrt() * beta / (std::f64::consts::PI * t).sqrt();
        special = special.max((density_jump(t, &params(0.0, 0.0, beta))? - want).abs());
    }
    verdict(
        worst <= 1e-5 && special <= 1e-10,
        format!(
            "one-sided limits at ±1e-6: {}; driftless formula {special:.2e}",
            parts.join(", ")
        ),
    )
}

fn stationary() -> Result<Verdict> {
    let p = Preset::Model2.params();
    let mut worst: f64 = 0.0;
    for y in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
        worst = worst.max(
            (transition_density(50.0, 0.0, y, &p, &QuadConfig::default())?
                - stationary_density(y, &p)?)
            .abs(),
        );
    }
    let cfg = QuadConfig::with_tolerances(1e-13, 1e-15);
    let mass = integrate(
        |y| stationary_density(y.min(-1e-300), &p).unwrap(),
        -60.0,
        0.0,
        &cfg,
    )?
    .value
        + integrate(
            |y| stationary_density(y.max(1e-300), &p).unwrap(),
            0.0,
            60.0,
            &cfg,
        )?
        .value;
    let mass_err = (mass - 1.0).abs();
    verdict(
        worst < 1e-3 && mass_err <= 1e-10,
        format!("sup |p(50) - p_inf| = {worst:.2e}, |mass - 1| = {mass_err:.2e}"),
    )
}

fn escape_and_hitting() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sum_err: f64 = 0.0;
    for _ in 0..100 {
        let p = params(
            rng.gen_range(-5.0..-0.01),
            rng.gen_range(0.01..5.0),
            rng.gen_range(-0.99..0.99),
        );
        let (up, down) = escape_probabilities(rng.gen_range(-5.0..5.0), &p)?;
        sum_err = sum_err.max((up + down - 1.0).abs());
    }
    let p = params(1.0, -1.0, 0.0);
    let e = expected_hitting_time(0.0, 1.0, &p)?;
    let want = 1f64.exp().powi(2) - 2.0;
    let formula_err = (e - want).abs();

    let t = 80.0;
    let sim = PathSimConfig::new(200_000, 100_000, 17);
    let times = first_passage_times(&p, 0.0, 1.0, t, &sim)?;
    let censored = times.iter().filter(|s| s.is_none()).count();
    let v: Vec<f64> = times.iter().map(|s| s.unwrap_or(t)).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let se = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    let mc_ok = (mean - e).abs() <= 3.0 * se && censored == 0;
    verdict(
        sum_err <= 1e-12 && formula_err <= 1e-12 && mc_ok,
        format!(
            "escape sum {sum_err:.1e}; E[tau] = {e:.12} (e^2 - 2 off by {formula_err:.1e}); walk {mean:.4} ± {se:.4}, {censored} censored"
        ),
    )
}

fn fit_quality() -> Result<Verdict> {
    let mut objectives = Vec::new();
    for preset in Preset::ALL {
        objectives.push(fitted(preset).fit.objective);
    }
    let alpha = fitted(Preset::Model2).fit.mixture.alpha;
    let band = (0.2369..=0.2769).contains(&alpha);
    let worst = objectives.iter().copied().fold(0.0, f64::max);
    verdict(
        band && worst < 0.01,
        format!(
            "model2 alpha = {alpha:.4}; objectives {}",
            objectives
                .iter()
                .map(|o| format!("{o:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn sampling() -> Result<Verdict> {
    let mut counts = Vec::new();
    for preset in Preset::ALL {
        let f = fitted(preset);
        let mut passed = 0;
        let mut worst_d: f64 = 0.0;
        for rep in 0..10 {
            let xs = f.fit.sample_many(100_000, rep)?;
            let r = ks_test(&xs, |x| f.table.pchip(x))?;
            worst_d = worst_d.max(r.statistic);
            if r.p_value > 0.05 {
                passed += 1;
            }
        }
        counts.push((preset, passed, worst_d));
    }
    verdict(
        counts.iter().all(|c| c.1 >= 9),
        counts
            .iter()
            .map(|(p, k, d)| format!("{} {k}/10 (max D {d:.1e})", p.name()))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn risk() -> Result<Verdict> {
    let f = fitted(Preset::Model2);
    let m = &f.fit.mixture;
    let levels = confidence_grid(m.alpha, 100);
    let xs = f.fit.sample_many(100_000, 0)?;
    let mut formula = Vec::new();
    let mut interp = Vec::new();
    let mut mc = Vec::new();
    for &q in &levels {
        formula.push(var_mixture(m, q)?);
        interp.push(var_from_cdf(&f.table, q)?);
        mc.push(mc_var_cvar(&xs, q)?.0);
    }
    let (a, b) = (mse(&formula, &interp), mse(&mc, &interp));
    verdict(
        a <= 1e-4 && b <= 1e-4,
        format!("MSE formula {a:.2e}, Monte Carlo {b:.2e}"),
    )
}

fn weak_convergence() -> Result<Verdict> {
    let table = &fitted(Preset::Model1).table;
    let p = Preset::Model1.params();
    let mut passed = 0;
    let mut worst_d: f64 = 0.0;
    for seed in 0..10 {
        let xs = simulate_paths(&p, 0.0, 2.0, &PathSimConfig::new(4000, 100_000, seed))?;
        let r = ks_test(&xs, |x| table.pchip(x))?;
        worst_d = worst_d.max(r.statistic);
        if r.p_value > 0.01 {
            passed += 1;
        }
    }
    verdict(
        passed >= 9,
        format!("{passed}/10 seeds pass at 1% (max D {worst_d:.1e})"),
    )
}

fn special_functions() -> Result<Verdict> {
    let data = include_str!("data/erfcx.csv");
    let mut erfcx_err: f64 = 0.0;
    for line in data.lines().skip(1) {
        let (z, v) = line.split_once(',').unwrap();
        let (z, v): (f64, f64) = (z.parse().unwrap(), v.parse().unwrap());
        erfcx_err = erfcx_err.max((erfcx(z) - v).abs());
    }
    let mut q_err: f64 = 0.0;
    let mut first_bad = None;
    for i in 0..=1200 {
        let z = -6.0 + 0.01 * i as f64;
        let e = (norm_quantile(norm_cdf(z))? - z).abs();
        if e > 1e-9 && first_bad.is_none() {
            first_bad = Some(z);
        }
        q_err = q_err.max(e);
    }
    let bad = first_bad.map_or(String::new(), |z| format!(", above 1e-9 from z = {z:.2}"));
    verdict(
        erfcx_err <= 1e-12 && q_err <= 1e-9,
        format!("erfcx {erfcx_err:.1e}; quantile round trip {q_err:.1e}{bad}"),
    )
}

type Criterion = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 12] = [
        ("normalization", normalization),
        ("laplace consistency", laplace),
        ("closed-form agreement", closed_forms),
        ("degenerate reductions", reductions),
        ("jump size", jump),
        ("stationary limit", stationary),
        ("escape and hitting", escape_and_hitting),
        ("fit quality", fit_quality),
        ("sampling validity", sampling),
        ("risk accuracy", risk),
        ("simulator weak convergence", weak_convergence),
        ("special functions", special_functions),
    ];
    let mut surprises = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let k = i + 1;
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let expected = !EXPECTED_FAIL.contains(&k);
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if pass != expected {
            " (unexpected)"
        } else if !pass {
            " (known)"
        } else {
            ""
        };
        println!(
            "criterion {k:>2} {tag}{note} {name}: {detail} [{:.1}s]",
            start.elapsed().as_secs_f64()
        );
        if pass != expected {
            surprises.push(k);
        }
    }
    if surprises.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcomes: {surprises:?}");
        ExitCode::FAILURE
    }
}
