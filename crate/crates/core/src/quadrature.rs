//! Adaptive Gauss–Kronrod integration on finite and semi-infinite ranges.
//!
//! A 21-point Kronrod rule with its embedded 10-point Gauss rule gives a value
//! and an error estimate per segment; the segment with the largest estimate is
//! bisected until the global estimate meets tolerance or the budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Upper bound on the mass discarded when a semi-infinite range is cut.
    pub semi_infinite_truncation_tail: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            semi_infinite_truncation_tail: 1e-14,
        }
    }
}

impl QuadConfig {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.semi_infinite_truncation_tail > 0.0
            && self.max_subdivisions >= 1
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "quadrature tolerances must be positive and max_subdivisions >= 1: {self:?}"
            )))
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub err_estimate: f64,
}

/// Result of an adaptive run, successful or not.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Outcome {
    pub value: f64,
    pub err: f64,
    pub converged: bool,
}

impl Outcome {
    pub fn into_result(self) -> Result<Integral> {
        if self.converged {
            Ok(Integral {
                value: self.value,
                err_estimate: self.err,
            })
        } else {
            Err(Error::Accuracy {
                estimate: self.value,
                err_estimate: self.err,
            })
        }
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut err = err.abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    err
}

fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    let mut res_g = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let err = rescale_error(
        (res_k - res_g) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    (value, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Core adaptive loop over the segments delimited by `points` (sorted, at
/// least two entries).
pub(crate) fn adapt<F: FnMut(f64) -> f64>(f: &mut F, points: &[f64], cfg: &QuadConfig) -> Outcome {
    let mut heap = BinaryHeap::with_capacity(points.len() + 64);
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let (mut value, mut err) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = qk21(f, w[0], w[1]);
        value += v;
        err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    let mut count = heap.len().max(1);
    loop {
        if err <= cfg.target(value) || !value.is_finite() {
            break;
        }
        if count >= cfg.max_subdivisions {
            return Outcome {
                value,
                err,
                converged: false,
            };
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a
            || mid >= worst.b
            || (worst.b - worst.a) < 1e-15 * worst.a.abs().max(1e-300)
        {
            // cannot split further; keep its contribution as is
            frozen_value += worst.value;
            frozen_err += worst.err;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = qk21(f, worst.a, mid);
        let (v2, e2) = qk21(f, mid, worst.b);
        value += v1 + v2 - worst.value;
        err += e1 + e2 - worst.err;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        count += 1;
        if count % 64 == 0 {
            // refresh running sums to stop drift from repeated updates
            value = frozen_value + heap.iter().map(|s| s.value).sum::<f64>();
            err = frozen_err + heap.iter().map(|s| s.err).sum::<f64>();
        }
    }
    value = frozen_value + heap.iter().map(|s| s.value).sum::<f64>();
    err = frozen_err + heap.iter().map(|s| s.err).sum::<f64>();
    let converged = err <= cfg.target(value) && value.is_finite();
    Outcome {
        value,
        err,
        converged,
    }
}

/// Sorted breakpoints inside `(a, b)` with the endpoints attached.
pub(crate) fn breakpoints(a: f64, b: f64, interior: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(interior.len() + 2);
    pts.push(a);
    pts.extend(
        interior
            .iter()
            .copied()
            .filter(|p| *p > a && *p < b && p.is_finite()),
    );
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn check_range(a: f64, b: f64) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain(format!(
            "integration range must satisfy a <= b, got [{a}, {b}]"
        )));
    }
    Ok(())
}

pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<Integral> {
    integrate_with_points(&mut f, a, b, &[], cfg)
}

/// Like [`integrate`] with known trouble spots (peaks, kinks) registered as
/// initial subdivision points.
pub fn integrate_with_points<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    cfg: &QuadConfig,
) -> Result<Integral> {
    cfg.validate()?;
    check_range(a, b)?;
    if a == b {
        return Ok(Integral {
            value: 0.0,
            err_estimate: 0.0,
        });
    }
    adapt(&mut f, &breakpoints(a, b, points), cfg).into_result()
}

/// `∫_a^∞ f` through the substitution `x = a + u/(1-u)`.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    cfg: &QuadConfig,
) -> Result<Integral> {
    cfg.validate()?;
    if !a.is_finite() {
        return Err(Error::Domain(format!(
            "lower limit must be finite, got {a}"
        )));
    }
    let mut g = |u: f64| {
        let v = 1.0 - u;
        let y = f(a + u / v);
        if y == 0.0 {
            0.0
        } else {
            y / (v * v)
        }
    };
    adapt(&mut g, &[0.0, 0.5, 1.0], cfg).into_result()
}

/// Finds a cut-off `X >= a` with `log_tail(X) <= ln(tail)`, where `log_tail(x)`
/// bounds the log of the mass beyond `x`. Assumes `log_tail` eventually decreases.
pub(crate) fn truncation_point<L: Fn(f64) -> f64>(a: f64, log_tail: L, tail: f64) -> f64 {
    let target = tail.ln();
    if log_tail(a) <= target {
        return a;
    }
    let mut step = 1.0;
    let mut hi = a + step;
    let mut lo = a;
    while log_tail(hi) > target {
        lo = hi;
        step *= 2.0;
        hi = a + step;
        if step > 1e12 {
            return hi;
        }
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if log_tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * (1.0 + hi.abs()) {
            break;
        }
    }
    hi
}

/// `∫_a^∞ f` cut where a caller-supplied log tail bound drops below the
/// configured truncation tail, with optional interior breakpoints.
pub fn integrate_semi_infinite_envelope<F, L>(
    mut f: F,
    a: f64,
    log_tail: L,
    points: &[f64],
    cfg: &QuadConfig,
) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
    L: Fn(f64) -> f64,
{
    cfg.validate()?;
    let cut = truncation_point(a, log_tail, cfg.semi_infinite_truncation_tail);
    if cut <= a {
        return Ok(Integral {
            value: 0.0,
            err_estimate: 0.0,
        });
    }
    let r = adapt(&mut f, &breakpoints(a, cut, points), cfg);
    Outcome {
        err: r.err + cfg.semi_infinite_truncation_tail,
        ..r
    }
    .into_result()
}
