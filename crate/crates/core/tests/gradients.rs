use gansched_core::gan::{self, Mlp, OutputActivation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

const STEP: f64 = 1e-5;

fn nets(rng: &mut ChaCha8Rng) -> (Mlp, Mlp) {
    let mut g = Mlp::glorot(&[4, 8, 1], 0.2, OutputActivation::Tanh, rng).unwrap();
    let mut d = Mlp::glorot(&[1, 24, 1], 0.2, OutputActivation::Sigmoid, rng).unwrap();
    for p in g.parameters_mut().iter_mut().chain(d.parameters_mut()) {
        *p += rng.random_range(-0.3..0.3);
    }
    (g, d)
}

fn batch(rng: &mut ChaCha8Rng, l: usize) -> (Vec<f64>, Vec<f64>) {
    let real = (0..l).map(|_| rng.random_range(-1.0..0.0)).collect();
    let noise = (0..4 * l).map(|_| rng.sample(Exp1)).collect();
    (real, noise)
}

fn worst_relative(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

fn central<F: FnMut(&mut [f64], usize, f64)>(n: usize, mut eval: F) -> Vec<f64> {
    (0..n).map(|i| {
        let mut out = [0.0; 1];
        eval(&mut out, i, STEP);
        let plus = out[0];
        eval(&mut out, i, -STEP);
        (plus - out[0]) / (2.0 * STEP)
    }).collect()
}

#[test]
fn discriminator_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (g, d) = nets(&mut rng);
        let (real, noise) = batch(&mut rng, 20);
        let analytic = gan::discriminator_gradient(&d, &g, &real, &noise).unwrap();
        let numeric = central(d.num_parameters(), |out, i, h| {
            let mut p = d.clone();
            p.parameters_mut()[i] += h;
            out[0] = gan::discriminator_loss(&p, &g, &real, &noise).unwrap();
        });
        worst = worst.max(worst_relative(&analytic, &numeric));
    }
    println!("discriminator worst relative error {worst:.3e}");
    assert!(worst < 1e-6);
}

#[test]
fn generator_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (g, d) = nets(&mut rng);
        let (_, noise) = batch(&mut rng, 20);
        let analytic = gan::generator_gradient(&d, &g, &noise).unwrap();
        let numeric = central(g.num_parameters(), |out, i, h| {
            let mut p = g.clone();
            p.parameters_mut()[i] += h;
            out[0] = gan::generator_loss(&d, &p, &noise).unwrap();
        });
        worst = worst.max(worst_relative(&analytic, &numeric));
    }
    println!("generator worst relative error {worst:.3e}");
    assert!(worst < 1e-6);
}
