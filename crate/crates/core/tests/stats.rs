use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsbm_core::sampler::{cdf_table, InverseCdf};
use rsbm_core::stats::{kolmogorov_q, ks_pvalue, ks_statistic, ks_test};
use rsbm_core::{Preset, QuadConfig};

#[test]
fn statistic_examples() {
    assert_eq!(ks_statistic(&[0.0], |x| 0.5 + x).unwrap(), 0.5);
    let n = 250;
    let s: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    assert!((ks_statistic(&s, |x| x).unwrap() - 0.5 / n as f64).abs() < 1e-15);
    assert!(ks_statistic(&[], |x| x).is_err());
    assert!(ks_statistic(&[f64::NAN], |x| x).is_err());
}

#[test]
fn uniform_draws_sit_below_the_critical_value() {
    let n = 100_000;
    let mut below = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if ks_statistic(&u, |x| x).unwrap() < 0.0061 {
            below += 1;
        }
    }
    assert!(below >= 16, "{below} of 20");
}

#[test]
fn tail_function_examples() {
    assert_eq!(ks_pvalue(0.0, 10_000), 1.0);
    // root of Q(λ) = 0.05 by bisection
    let (mut lo, mut hi) = (1.0, 2.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_q(mid) > 0.05 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - 1.3581).abs() < 1e-4, "{lo}");
    let p = ks_pvalue(0.0143, 10_000);
    assert!((p - 0.033).abs() < 0.002, "{p}");
    assert!(ks_pvalue(0.0143, 100_000) < 1e-15);
    assert!((kolmogorov_q(0.5) - 0.963_945_243_664_875).abs() < 1e-12);
}

#[test]
fn null_rejection_rate_is_near_five_percent() {
    let grid: Vec<f64> = (0..1000).map(|i| -20.0 + 40.0 * i as f64 / 999.0).collect();
    let table = cdf_table(&Preset::Model3.params(), 2.0, &grid, &QuadConfig::default()).unwrap();
    let inv = InverseCdf::from_table(table.clone()).unwrap();
    let reps = 200;
    let rejected = (0..reps)
        .filter(|r| {
            let xs = inv.sample_many(10_000, 1000 + r);
            ks_test(&xs, |x| table.pchip(x)).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / reps as f64;
    assert!((0.02..=0.09).contains(&rate), "{rate}");
}

proptest! {
    #[test]
    fn pvalue_decreases_in_d(n in 10usize..1_000_000, d in 1e-4..0.2f64, dd in 1e-5..0.01f64) {
        prop_assert!(ks_pvalue(d + dd, n) <= ks_pvalue(d, n));
        let (a, b) = (ks_pvalue(d, n), ks_pvalue(d + dd, n));
        prop_assert!(b < a || a == 0.0 || b == 0.0 || a == 1.0);
    }

    #[test]
    fn statistic_ignores_monotone_relabelling(seed in 0u64..1000, k in 0.2..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let cdf = |x: f64| x.clamp(0.0, 1.0).powf(1.3);
        let d = ks_statistic(&u, cdf).unwrap();
        // x ↦ e^{kx} on both samples and the CDF argument
        let w: Vec<f64> = u.iter().map(|x| (k * x).exp()).collect();
        let dw = ks_statistic(&w, |y: f64| cdf(y.ln() / k)).unwrap();
        prop_assert!((d - dw).abs() < 1e-12);
    }
}
