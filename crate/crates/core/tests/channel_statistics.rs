use gansched_core::channel::{self, ChannelParams, QualityScheme};
use gansched_core::density::empirical_cdf;
use gansched_core::specfun::QuadratureSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn link(v: f64) -> ChannelParams {
    ChannelParams::new(v, 1e-3, channel::wavelength_from_carrier(2.625e9), 3, 3).unwrap()
}

fn within_binomial(hits: usize, n: usize, p: f64) -> bool {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    (hits as f64 / n as f64 - p).abs() <= 4.0 * sd
}

#[test]
fn conditional_law_matches_marcum_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let p = link(10.0);
    let h0 = channel::FadingCoefficient::new(0.4, -0.3);
    let n = 200_000;
    for tau in 1..=3 {
        let draws: Vec<f64> = (0..n).map(|_| channel::draw_conditional(&h0, &p, tau, &mut rng).unwrap().gain()).collect();
        for t in [0.05, 0.1, 0.2, 0.3, 0.5] {
            let want = channel::success_prob_given_h0(&h0, &p, tau, t).unwrap();
            let hits = draws.iter().filter(|&&g| g >= t).count();
            assert!(within_binomial(hits, n, want), "tau {tau} t {t}: {} vs {want}", hits as f64 / n as f64);
        }
    }
}

#[test]
fn marginal_gain_is_unit_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let p = link(5.0);
    let n = 100_000;
    let gains: Vec<f64> = (0..n)
        .map(|_| {
            let h0 = channel::draw_initial(&mut rng);
            channel::draw_conditional(&h0, &p, 2, &mut rng).unwrap().gain()
        })
        .collect();
    let d = empirical_cdf(&gains).unwrap().ks_distance_to(|x| -(-x).exp_m1());
    assert!(d <= 1.63 / (n as f64).sqrt(), "ks {d}");
}

#[test]
fn quality_conditioned_law_matches_interval_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let scheme = QualityScheme::new(vec![1.0]).unwrap();
    let quad = QuadratureSpec::default();
    let p = link(10.0);
    let n = 200_000;
    for b in 0..2 {
        let mut draws = Vec::with_capacity(n);
        while draws.len() < n {
            let h0 = channel::draw_initial(&mut rng);
            if scheme.quantize(h0.gain()) == b {
                draws.push(channel::draw_conditional(&h0, &p, 1, &mut rng).unwrap().gain());
            }
        }
        for t in [0.2, 0.5, 1.0] {
            let want = channel::success_prob_given_quality(b, &scheme, &p, 1, t, &quad).unwrap();
            let hits = draws.iter().filter(|&&g| g >= t).count();
            assert!(within_binomial(hits, n, want), "b {b} t {t}");
        }
    }
}

#[test]
fn correlation_decays_within_the_slot() {
    for v in [5.0, 10.0] {
        let p = link(v);
        let rho: Vec<f64> = (1..=3).map(|tau| channel::correlation(&p, tau)).collect();
        assert!(rho.windows(2).all(|w| w[1] < w[0]));
        assert!(rho.iter().all(|&r| r > 0.0 && r < 1.0));
    }
    assert!(channel::correlation(&link(5.0), 1) > channel::correlation(&link(10.0), 1));
}
