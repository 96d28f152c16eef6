use proptest::prelude::*;
use rsbm_core::exit::{
    escape_probabilities, expected_hitting_time, hitting_probability, one_sided_hitting_laplace,
    two_sided_exit_down, two_sided_exit_up,
};
use rsbm_core::sampler::{first_passage_times, PathSimConfig};
use rsbm_core::{Error, ModelParams, Preset};

fn params(mu_minus: f64, mu_plus: f64, beta: f64) -> ModelParams {
    ModelParams::new(mu_minus, mu_plus, beta, 0.0).unwrap()
}

#[test]
fn two_sided_anchors() {
    let free = params(0.0, 0.0, 0.0);
    let want = 0.5f64.sinh() / 1f64.sinh();
    assert!((two_sided_exit_up(0.5, 0.0, 1.0, &free, 0.5).unwrap() - want).abs() < 1e-14);
    assert!((two_sided_exit_down(0.5, 0.0, 1.0, &free, 0.5).unwrap() - want).abs() < 1e-14);
    assert!((want - 0.443_409_441_985_037).abs() < 1e-14);
    for p in Preset::ALL.map(Preset::params) {
        assert_eq!(two_sided_exit_up(1.0, -1.0, 1.0, &p, 0.7).unwrap(), 1.0);
        assert_eq!(two_sided_exit_up(-1.0, -1.0, 1.0, &p, 0.7).unwrap(), 0.0);
        assert_eq!(two_sided_exit_down(-1.0, -1.0, 1.0, &p, 0.7).unwrap(), 1.0);
        assert_eq!(two_sided_exit_down(1.0, -1.0, 1.0, &p, 0.7).unwrap(), 0.0);
    }
}

#[test]
fn two_sided_rejects_bad_intervals() {
    let p = Preset::Model1.params();
    assert!(matches!(
        two_sided_exit_up(0.0, 0.5, 1.0, &p, 1.0),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        two_sided_exit_up(2.0, 0.5, 1.0, &p, 1.0),
        Err(Error::Domain(_))
    ));
    assert!(matches!(
        two_sided_exit_down(1.0, 1.0, 1.0, &p, 1.0),
        Err(Error::Domain(_))
    ));
    assert!(two_sided_exit_down(0.0, -1.0, 1.0, &p, 0.0).is_err());
}

#[test]
fn one_sided_anchors() {
    let free = params(0.0, 0.0, 0.0);
    assert!(
        (one_sided_hitting_laplace(1.0, 0.0, &free, 0.5).unwrap() - (-1f64).exp()).abs() < 1e-15
    );
    for p in Preset::ALL.map(Preset::params) {
        for x in [-1.0, 0.0, 2.0] {
            assert_eq!(one_sided_hitting_laplace(x, x, &p, 0.3).unwrap(), 1.0);
        }
    }
}

// E[e^{-qτ}] by walk, with paths that have not arrived by t contributing at most e^{-qt}
fn mc_laplace(p: &ModelParams, x: f64, r: f64, q: f64, t: f64, sim: &PathSimConfig) -> (f64, f64) {
    let times = first_passage_times(p, x, r, t, sim).unwrap();
    let v: Vec<f64> = times
        .iter()
        .map(|s| s.map_or(0.0, |s| (-q * s).exp()))
        .collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, sd / n.sqrt())
}

#[test]
fn one_sided_matches_the_walk_for_model2() {
    let p = Preset::Model2.params();
    let want = one_sided_hitting_laplace(-1.0, 1.0, &p, 1.0).unwrap();
    assert!(want > 0.0 && want < 1.0);
    let (m, se) = mc_laplace(
        &p,
        -1.0,
        1.0,
        1.0,
        15.0,
        &PathSimConfig::new(6000, 20_000, 1),
    );
    assert!(
        (m - want).abs() < 3.0 * se + (-15f64).exp(),
        "mc {m} ± {se}, formula {want}"
    );
}

#[test]
fn escape_anchors() {
    let (up, down) = escape_probabilities(0.0, &params(-1.0, 1.0, 0.0)).unwrap();
    assert!((up - 0.5).abs() < 1e-15 && (down - 0.5).abs() < 1e-15);
    let (up, _) = escape_probabilities(0.0, &params(-2.0, 1.0, 0.3)).unwrap();
    assert!((up - 1.3 / 2.7).abs() < 1e-15);
    assert!(escape_probabilities(0.0, &params(2.0, -1.0, 0.3)).is_err());
    assert!(escape_probabilities(0.0, &params(-1.0, 0.0, 0.3)).is_err());
}

// Escape probability of the lattice walk from the skew level: after the first
// step, a walk with up-probability (1 + aΔx)/2 never returns with probability
// 2aΔx/(1 + aΔx).
fn lattice_escape_up(p: &ModelParams, dx: f64) -> f64 {
    let up = (1.0 + p.beta) * p.mu_plus * dx / (1.0 + p.mu_plus * dx);
    let down = (1.0 - p.beta) * -p.mu_minus * dx / (1.0 - p.mu_minus * dx);
    up / (up + down)
}

#[test]
fn escape_matches_the_walk() {
    let p = params(-2.0, 1.0, 0.3);
    let (want, _) = escape_probabilities(0.0, &p).unwrap();
    assert!((lattice_escape_up(&p, 1e-7) - want).abs() < 1e-6);

    // reaching +5 before t = 20 is escaping up, up to a return probability e^{-10}
    let sim = PathSimConfig::new(8000, 20_000, 2);
    let dx = sim.step(20.0);
    let times = first_passage_times(&p, 0.0, 5.0, 20.0, &sim).unwrap();
    let hit = times.iter().filter(|s| s.is_some()).count() as f64 / times.len() as f64;
    let se = (hit * (1.0 - hit) / times.len() as f64).sqrt();
    let lattice = lattice_escape_up(&p, dx);
    assert!(
        (hit - lattice).abs() < 3.0 * se,
        "walk {hit} ± {se}, lattice {lattice}, limit {want}"
    );
}

#[test]
fn hitting_anchors() {
    for (x, z) in [(0.0, 3.0), (-2.0, 1.0), (5.0, -5.0)] {
        assert_eq!(
            hitting_probability(x, z, &params(1.0, -1.0, 0.4)).unwrap(),
            1.0
        );
    }
    let out = params(-1.0, 1.0, 0.0);
    assert_eq!(hitting_probability(0.7, 0.7, &out).unwrap(), 1.0);
    assert!((hitting_probability(1.0, 0.0, &out).unwrap() - (-2f64).exp()).abs() < 1e-15);
    assert!(matches!(
        hitting_probability(0.0, 1.0, &params(1.0, 2.0, 0.0)),
        Err(Error::UnsupportedRegime(_))
    ));
}

#[test]
fn expected_time_anchors() {
    let p = params(1.0, -1.0, 0.0);
    let e = expected_hitting_time(0.0, 1.0, &p).unwrap();
    assert!((e - (1f64.exp().powi(2) - 2.0)).abs() < 1e-12);
    let skewed = params(1.5, -0.5, 0.35);
    for x in [-2.0, -0.5, 0.0, 0.7, 3.0] {
        assert_eq!(expected_hitting_time(x, x, &skewed).unwrap(), 0.0);
    }
    // coming down through a nearly driftless upper half
    assert!(expected_hitting_time(1.0, 0.0, &params(1.0, -1e-7, 0.0)).unwrap() > 1e6);
    assert_eq!(
        expected_hitting_time(1.0, 0.0, &params(1.0, 0.0, 0.0)).unwrap(),
        f64::INFINITY
    );
    assert_eq!(
        expected_hitting_time(0.0, 1.0, &params(0.0, 0.0, 0.2)).unwrap(),
        f64::INFINITY
    );
    assert!(matches!(
        expected_hitting_time(0.0, 1.0, &params(-1.0, -1.0, 0.0)),
        Err(Error::UnsupportedRegime(_))
    ));
}

#[test]
fn two_sided_tends_to_one_sided_as_the_floor_recedes() {
    let p = Preset::Model1.params();
    for (x, z, q) in [
        (0.0, 1.0, 0.5),
        (-1.0, 2.0, 1.0),
        (0.5, 0.8, 2.0),
        (-2.0, -0.5, 0.3),
    ] {
        let two = two_sided_exit_up(x, -30.0, z, &p, q).unwrap();
        let one = one_sided_hitting_laplace(x, z, &p, q).unwrap();
        assert!((two - one).abs() < 1e-6, "x = {x}, z = {z}, q = {q}");
    }
}

fn any_params() -> impl Strategy<Value = ModelParams> {
    (-3.0..3.0f64, -3.0..3.0f64, -0.95..0.95f64).prop_map(|(a, b, c)| params(a, b, c))
}

proptest! {
    #[test]
    fn exit_probabilities_share_at_most_unit_mass(
        p in any_params(), y in -3.0..-0.01f64, z in 0.01..3.0f64, u in 0.0..1.0f64, q in 1e-3..10.0f64,
    ) {
        let x = y + u * (z - y);
        let up = two_sided_exit_up(x, y, z, &p, q).unwrap();
        let down = two_sided_exit_down(x, y, z, &p, q).unwrap();
        prop_assert!((0.0..=1.0).contains(&up) && (0.0..=1.0).contains(&down));
        prop_assert!(up + down <= 1.0 + 1e-12);
    }

    // moderate drifts keep q·E[τ] small; tinier q is ill-conditioned
    #[test]
    fn exit_probabilities_exhaust_the_mass_as_q_vanishes(
        mm in -1.0..1.0f64, mp in -1.0..1.0f64, beta in -0.95..0.95f64,
        y in -3.0..-0.01f64, z in 0.01..3.0f64, u in 0.0..1.0f64,
    ) {
        let p = params(mm, mp, beta);
        let x = y + u * (z - y);
        let up = two_sided_exit_up(x, y, z, &p, 1e-8).unwrap();
        let down = two_sided_exit_down(x, y, z, &p, 1e-8).unwrap();
        prop_assert!((up + down - 1.0).abs() < 1e-4, "{} + {}", up, down);
    }

    #[test]
    fn one_sided_decreases_in_q(p in any_params(), x in -3.0..3.0f64, r in -3.0..3.0f64) {
        prop_assume!((x - r).abs() > 1e-3);
        let mut prev = one_sided_hitting_laplace(x, r, &p, 0.01).unwrap();
        for k in 1..40 {
            let q = 0.01 * 1.25f64.powi(k);
            let cur = one_sided_hitting_laplace(x, r, &p, q).unwrap();
            prop_assert!(cur <= prev && cur > 0.0 || cur == 0.0);
            prev = cur;
        }
    }

    #[test]
    fn escape_probabilities_sum_to_one(
        mm in -4.0..-0.01f64, mp in 0.01..4.0f64, beta in -0.99..0.99f64, x in -5.0..5.0f64,
    ) {
        let (up, down) = escape_probabilities(x, &params(mm, mp, beta)).unwrap();
        prop_assert!((0.0..=1.0).contains(&up) && (0.0..=1.0).contains(&down));
        prop_assert!((up + down - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hitting_in_the_outward_regime_is_a_probability(
        mm in -4.0..-0.01f64, mp in 0.01..4.0f64, beta in -0.99..0.99f64, x in -5.0..5.0f64, z in -5.0..5.0f64,
    ) {
        let v = hitting_probability(x, z, &params(mm, mp, beta)).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn expected_time_is_positive_in_the_inward_regime(
        mm in 0.05..4.0f64, mp in -4.0..-0.05f64, beta in -0.99..0.99f64, x in -5.0..5.0f64, z in -5.0..5.0f64,
    ) {
        prop_assume!(x != z);
        let e = expected_hitting_time(x, z, &params(mm, mp, beta)).unwrap();
        prop_assert!(e > 0.0 && e.is_finite());
    }
}
