use gansched_core::density::{tail_probability, SyntheticSet};
use gansched_core::scheduler::{argmax, softmax_policy, update_policy};
use gansched_core::specfun::{bessel_j0, integrate, marcum_q1, QuadratureSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn j0_is_even_and_bounded(x in -400.0f64..400.0) {
        let a = bessel_j0(x).unwrap();
        prop_assert_eq!(a, bessel_j0(-x).unwrap());
        prop_assert!(a.abs() <= 1.0);
    }

    #[test]
    fn q1_nonincreasing_in_b(a in 0.0f64..30.0, b1 in 0.0f64..30.0, db in 0.0f64..5.0) {
        let hi = marcum_q1(a, b1).unwrap();
        let lo = marcum_q1(a, b1 + db).unwrap();
        prop_assert!(lo <= hi + 1e-15);
        prop_assert!((0.0..=1.0).contains(&hi));
    }

    #[test]
    fn q1_nondecreasing_in_a(a in 0.0f64..30.0, da in 0.0f64..5.0, b in 0.0f64..30.0) {
        prop_assert!(marcum_q1(a + da, b).unwrap() + 1e-15 >= marcum_q1(a, b).unwrap());
    }

    #[test]
    fn integral_is_nonnegative_and_additive(c in 0.1f64..5.0, lo in 0.0f64..3.0, w in 0.1f64..10.0, t in 0.05f64..0.95) {
        let spec = QuadratureSpec::new(1e-13, 1e-11, 20_000).unwrap();
        let f = |x: f64| marcum_q1(c * x.sqrt(), 0.3).unwrap() * (-x).exp();
        let hi = lo + w;
        let mid = lo + t * w;
        let whole = integrate(f, lo, hi, &spec).unwrap();
        let split = integrate(f, lo, mid, &spec).unwrap() + integrate(f, mid, hi, &spec).unwrap();
        prop_assert!(whole >= 0.0);
        let tol = 2.0 * 2.0 * spec.abs_tol().max(spec.rel_tol() * whole.abs());
        prop_assert!((whole - split).abs() <= tol, "{} vs {}", whole, split);
    }

    #[test]
    fn tail_nonincreasing(samples in prop::collection::vec(0.0f64..10.0, 1..200), t1 in 0.0f64..10.0, dt in 0.0f64..3.0) {
        let a = tail_probability(&samples, t1).unwrap();
        let b = tail_probability(&samples, t1 + dt).unwrap();
        prop_assert!(b <= a);
        let set = SyntheticSet::new(samples.clone()).unwrap();
        prop_assert_eq!(set.tail_probability(t1), a);
    }

    #[test]
    fn softmax_preserves_argmax(alpha in prop::collection::vec(0.0f64..2.0, 1..12), xi in 1e-4f64..10.0) {
        let beta = softmax_policy(&alpha, xi);
        prop_assert!((beta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(beta.iter().all(|&p| p >= 0.0));
        prop_assert_eq!(argmax(&beta), argmax(&alpha));
    }

    #[test]
    fn cma_matches_batch_mean(seq in prop::collection::vec(prop::collection::vec(0.001f64..1.0, 5), 100)) {
        let betas: Vec<Vec<f64>> = seq.iter().map(|w| {
            let s: f64 = w.iter().sum();
            w.iter().map(|x| x / s).collect()
        }).collect();
        let mut pi = vec![0.2; 5];
        for (n, beta) in betas.iter().enumerate() {
            pi = update_policy(&pi, beta, n as u64 + 1);
            let batch: Vec<f64> = (0..5).map(|s| betas[..=n].iter().map(|b| b[s]).sum::<f64>() / (n + 1) as f64).collect();
            for (p, q) in pi.iter().zip(&batch) {
                prop_assert!((p - q).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rows_stay_distributions_after_many_updates() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut pi = vec![1.0 / 9.0; 9];
    for n in 1..=10_000u64 {
        let alpha: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0).collect();
        pi = update_policy(&pi, &softmax_policy(&alpha, 0.5 / n as f64), n);
    }
    assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(pi.iter().all(|&p| p >= 0.0));
}

#[test]
fn small_xi_concentrates_on_argmax() {
    let beta = softmax_policy(&[1.2, 1.19, 0.5, 1.0], 1e-6);
    assert!(beta[0] > 1.0 - 1e-6);
}
