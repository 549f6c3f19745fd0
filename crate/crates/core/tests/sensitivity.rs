use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbcert_core::sensitivity::{
    hybrid, pick_freeze_design, sobol_certified, sobol_meta_interval, sobol_point_estimate, PickFreezeSample,
};
use rbcert_core::ParameterBox;

fn linear(mu: &[f64]) -> f64 {
    mu[0] + 2.0 * mu[1]
}

/// Pick-freeze outputs of the linear model for input `i`.
fn linear_sample(m: usize, i: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let bx = ParameterBox::cube(2, 0.0, 1.0).unwrap();
    let (a, b) = pick_freeze_design(&bx, m, seed);
    let s = a.iter().map(|p| linear(p.coords())).collect();
    let sp = a.iter().zip(&b).map(|(pa, pb)| linear(hybrid(pa, pb, i).coords())).collect();
    (s, sp)
}

#[test]
fn independent_pairing_gives_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s: Vec<f64> = (0..10000).map(|_| rng.random::<f64>()).collect();
    let mut sp = s.clone();
    for k in (1..sp.len()).rev() {
        sp.swap(k, rng.random_range(0..=k));
    }
    assert!(sobol_point_estimate(&s, &sp).unwrap().abs() < 0.1);
}

#[test]
fn linear_model_first_index() {
    let (s, sp) = linear_sample(100_000, 0, 1);
    let est = sobol_point_estimate(&s, &sp).unwrap();
    assert!((est - 0.2).abs() < 0.03, "{est}");
}

#[test]
fn meta_interval_covers_truth_under_bounded_noise() {
    let eps = 0.005;
    let mut hits = 0;
    let reps = 200;
    for r in 0..reps {
        let (s, sp) = linear_sample(100_000, 0, 1000 + r);
        let mut noise = ChaCha8Rng::seed_from_u64(5000 + r);
        let mut jitter = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|x| x + noise.random_range(-eps..eps)).collect() };
        let m = s.len();
        let sample = PickFreezeSample {
            index: 0,
            mu_a: Vec::new(),
            mu_b: Vec::new(),
            s: jitter(s),
            s_prime: jitter(sp),
            eps: vec![eps; m],
            eps_prime: vec![eps; m],
        };
        let iv = sobol_meta_interval(&sample).unwrap();
        assert!(iv.converged);
        if iv.lo <= 0.2 && 0.2 <= iv.hi {
            hits += 1;
        }
    }
    assert!(hits as f64 >= 0.95 * reps as f64, "{hits}/{reps}");
}

#[test]
fn combined_interval_coverage_without_metamodel_error() {
    let reps = 100;
    let mut hits = 0;
    for r in 0..reps {
        let (s, sp) = linear_sample(500, 1, 77 + r);
        let res = sobol_certified(&PickFreezeSample::exact(1, s, sp), 0.05, 200, 0.0, r).unwrap();
        assert_eq!(res.meta_interval.0, res.meta_interval.1);
        if res.combined_interval.0 <= 0.8 && 0.8 <= res.combined_interval.1 {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits}/{reps}");
}

#[test]
fn default_risks_give_level_above_093() {
    let (s, sp) = linear_sample(1000, 0, 4);
    let mut sample = PickFreezeSample::exact(0, s, sp);
    sample.eps = vec![1e-4; 1000];
    sample.eps_prime = vec![1e-4; 1000];
    let res = sobol_certified(&sample, 0.05, 500, 1e-5, 9).unwrap();
    assert!(res.level > 0.93 && res.level < 0.95);
    assert_eq!(res.replicates, 500);
    let (lo, hi) = res.combined_interval;
    assert!(lo <= res.meta_interval.0 && res.meta_interval.1 <= hi);
    assert!(res.meta_interval.0 <= res.s_hat && res.s_hat <= res.meta_interval.1);
}

#[test]
fn large_bootstrap_risk_still_ordered() {
    let (s, sp) = linear_sample(300, 0, 6);
    let mut sample = PickFreezeSample::exact(0, s, sp);
    sample.eps = vec![0.01; 300];
    sample.eps_prime = vec![0.01; 300];
    let wide = sobol_certified(&sample, 0.05, 300, 1e-5, 2).unwrap();
    let narrow = sobol_certified(&sample, 0.99, 300, 1e-5, 2).unwrap();
    assert!(wide.combined_interval.0 <= narrow.combined_interval.0);
    assert!(narrow.combined_interval.1 <= wide.combined_interval.1);
    assert!(narrow.combined_interval.0 <= narrow.meta_interval.0);
    assert!(narrow.meta_interval.1 <= narrow.combined_interval.1);
}

#[test]
fn negative_estimates_are_not_clamped() {
    let s = vec![0.0, 1.0, 2.0, 3.0];
    let sp = vec![3.0, 2.0, 1.0, 0.0];
    assert!((sobol_point_estimate(&s, &sp).unwrap() + 1.0).abs() < 1e-15);
}

fn outputs(m: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-5.0..5.0f64, m), prop::collection::vec(-5.0..5.0f64, m))
}

fn with_eps(s: Vec<f64>, sp: Vec<f64>, eps: &[f64]) -> PickFreezeSample {
    let m = s.len();
    PickFreezeSample {
        index: 0,
        mu_a: Vec::new(),
        mu_b: Vec::new(),
        s,
        s_prime: sp,
        eps: eps[..m].to_vec(),
        eps_prime: eps[m..].to_vec(),
    }
}

fn spread(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).abs()).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_invariance((s, sp) in outputs(20), c in -100.0..100.0f64) {
        prop_assume!(spread(&s) > 1e-3);
        let base = sobol_point_estimate(&s, &sp).unwrap();
        let s2: Vec<f64> = s.iter().map(|x| x + c).collect();
        let sp2: Vec<f64> = sp.iter().map(|x| x + c).collect();
        let moved = sobol_point_estimate(&s2, &sp2).unwrap();
        prop_assert!((moved - base).abs() <= 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn scale_invariance((s, sp) in outputs(20), c in prop_oneof![-50.0..-0.02f64, 0.02..50.0f64]) {
        prop_assume!(spread(&s) > 1e-3);
        let base = sobol_point_estimate(&s, &sp).unwrap();
        let s2: Vec<f64> = s.iter().map(|x| x * c).collect();
        let sp2: Vec<f64> = sp.iter().map(|x| x * c).collect();
        let scaled = sobol_point_estimate(&s2, &sp2).unwrap();
        prop_assert!((scaled - base).abs() <= 1e-12 * base.abs().max(1.0));
    }

    #[test]
    fn containment_chain(
        (s, sp) in outputs(12),
        eps in prop::collection::vec(0.0..0.2f64, 24),
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&s) > 1.0);
        let sample = with_eps(s, sp, &eps);
        let est = sobol_point_estimate(&sample.s, &sample.s_prime).unwrap();
        let res = sobol_certified(&sample, 0.1, 100, 1e-5, seed).unwrap();
        prop_assert!(res.meta_interval.0 <= est && est <= res.meta_interval.1);
        prop_assert!(res.combined_interval.0 <= res.meta_interval.0);
        prop_assert!(res.meta_interval.1 <= res.combined_interval.1);
    }

    #[test]
    fn enlarging_eps_never_shrinks(
        (s, sp) in outputs(15),
        eps in prop::collection::vec(0.0..0.1f64, 30),
        grow in 1.0..3.0f64,
    ) {
        prop_assume!(spread(&s) > 1.0);
        let small = sobol_meta_interval(&with_eps(s.clone(), sp.clone(), &eps)).unwrap();
        let bigger: Vec<f64> = eps.iter().map(|e| e * grow).collect();
        let large = sobol_meta_interval(&with_eps(s, sp, &bigger)).unwrap();
        prop_assert!(large.lo <= small.lo + 1e-12 && small.hi <= large.hi + 1e-12,
            "{:?} vs {:?}", small, large);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical(
        (s, sp) in outputs(10),
        eps in prop::collection::vec(0.0..0.1f64, 20),
        seed in any::<u64>(),
    ) {
        prop_assume!(spread(&s) > 1.0);
        let sample = with_eps(s, sp, &eps);
        let a = sobol_certified(&sample, 0.05, 100, 1e-5, seed).unwrap();
        let b = sobol_certified(&sample, 0.05, 100, 1e-5, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
