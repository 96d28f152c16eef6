//! Error functions and normal distribution helpers.
//!
//! `erfcx` is the workhorse: every product of the form `e^{A²}·erfc(A)` in the
//! density closed forms and the CDF integrand goes through it.

use crate::error::{Error, Result};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub const SQRT_PI: f64 = 1.772_453_850_905_516;
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// Chebyshev coefficients of ln(erfcx(z) / t) in s = 2t - 1, t = 2 / (2 + z), z >= 0.
const ERFCX_CHEB: [f64; 32] = [
    -0.651_326_859_890_854_717_1,
    0.641_969_792_356_490_260_3,
    0.019_476_473_204_185_836_31,
    -0.009_561_514_786_808_631_642,
    -0.000_946_595_344_482_036_866_3,
    0.000_366_839_497_852_761_451_9,
    0.000_042_523_324_806_907_771_65,
    -0.000_020_278_578_112_534_243_15,
    -1.624_290_004_647_025_513e-6,
    1.303_655_835_580_523_202e-6,
    1.562_644_172_206_614_318e-8,
    -8.523_809_591_492_654_252e-8,
    6.529_054_439_098_851_496e-9,
    5.059_343_495_551_468_942e-9,
    -9.913_641_564_930_330_867e-10,
    -2.273_651_222_931_835_856e-10,
    9.646_791_102_015_526_802e-11,
    2.394_038_083_039_114_745e-12,
    -6.886_027_526_497_553_398e-12,
    8.944_879_273_090_725_717e-13,
    3.130_921_399_342_958_078e-13,
    -1.127_082_236_136_725_237e-13,
    3.810_905_255_189_232_055e-16,
    7.106_097_613_609_236_988e-15,
    -1.523_028_201_457_104_304e-15,
    -9.457_494_571_291_234_001e-17,
    1.210_237_189_224_278_992e-16,
    -2.816_663_087_747_176_972e-17,
    5.003_005_559_445_901_654e-20,
    2.328_104_257_952_925_288e-18,
    -8.446_077_682_509_006_598e-19,
    7.376_840_893_227_907_329e-20,
];

fn erfcx_nonneg(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    let t = 2.0 / (2.0 + z);
    let s = 2.0 * t - 1.0;
    let s2 = 2.0 * s;
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in ERFCX_CHEB.iter().skip(1).rev() {
        let b0 = s2 * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    let series = s * b1 - b2 + ERFCX_CHEB[0];
    t * series.exp()
}

/// Scaled complementary error function `e^{z²}·erfc(z)`.
///
/// Finite for every finite `z >= -26`; overflows to infinity below that, where
/// the unscaled product itself is not representable.
pub fn erfcx(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        erfcx_nonneg(z)
    } else {
        2.0 * (z * z).exp() - erfcx_nonneg(-z)
    }
}

pub fn erfc(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z >= 0.0 {
        if z > 27.3 {
            0.0
        } else {
            erfcx_nonneg(z) * (-z * z).exp()
        }
    } else {
        2.0 - erfc(-z)
    }
}

pub fn erf(z: f64) -> f64 {
    1.0 - erfc(z)
}

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate deep into the lower tail.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z < 0.0 {
        let w = -z / SQRT_2;
        (0.5 * erfcx(w)).ln() - w * w
    } else {
        (-0.5 * erfc(z / SQRT_2)).ln_1p()
    }
}

// Acklam's rational approximation, relative error ~1.2e-9 before refinement.
const QA: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const QB: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const QC: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const QD: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

fn quantile_rational(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((QC[0] * q + QC[1]) * q + QC[2]) * q + QC[3]) * q + QC[4]) * q + QC[5])
            / ((((QD[0] * q + QD[1]) * q + QD[2]) * q + QD[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((QA[0] * r + QA[1]) * r + QA[2]) * r + QA[3]) * r + QA[4]) * r + QA[5]) * q
            / (((((QB[0] * r + QB[1]) * r + QB[2]) * r + QB[3]) * r + QB[4]) * r + 1.0)
    } else {
        -quantile_rational(1.0 - p)
    }
}

/// Inverse of [`norm_cdf`] on the open unit interval.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "norm_quantile needs 0 < p < 1, got {p}"
        )));
    }
    Ok(norm_quantile_unchecked(p))
}

pub(crate) fn norm_quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        // work in the lower tail so Φ(x) - p keeps its relative precision
        return -norm_quantile_unchecked(1.0 - p);
    }
    let x = quantile_rational(p);
    let pdf = norm_pdf(x);
    if pdf <= 0.0 {
        return x;
    }
    x - (norm_cdf(x) - p) / pdf
}
