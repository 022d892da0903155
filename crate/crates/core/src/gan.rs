//! A small generative adversarial network for one-dimensional gain
//! distributions.
//!
//! Both players are fully connected perceptrons with leaky-rectifier hidden
//! layers. The generator maps a vector of i.i.d. `Exp(1)` noise through a
//! `tanh` output onto `[-1, 1]`; the discriminator maps a normalized gain to a
//! probability through a sigmoid. Training alternates several discriminator
//! Adam steps on the minimax objective with one generator Adam step on the
//! non-saturating objective `-log d(g(z))`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::Exp1;

use crate::{Error, Result};

/// Probabilities inside logarithms are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]`.
pub const LOG_CLAMP: f64 = 1e-12;

/// Negative-side slope of the leaky rectifier.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// Activation applied at the output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Tanh,
    Sigmoid,
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Tanh => libm::tanh(z),
            OutputActivation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation value.
    fn derivative_from_value(self, y: f64) -> f64 {
        match self {
            OutputActivation::Tanh => 1.0 - y * y,
            OutputActivation::Sigmoid => y * (1.0 - y),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Fully connected perceptron with a flat parameter vector.
///
/// Parameters are laid out layer by layer: the `out x in` weight matrix in
/// row-major order followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    leaky_slope: f64,
    output: OutputActivation,
}

impl Mlp {
    /// Network with every weight and bias set to zero.
    pub fn zeros(layer_sizes: &[usize], leaky_slope: f64, output: OutputActivation) -> Result<Self> {
        let count = parameter_count(layer_sizes)?;
        Self::from_parameters(layer_sizes, vec![0.0; count], leaky_slope, output)
    }

    pub fn from_parameters(
        layer_sizes: &[usize],
        params: Vec<f64>,
        leaky_slope: f64,
        output: OutputActivation,
    ) -> Result<Self> {
        let count = parameter_count(layer_sizes)?;
        if params.len() != count {
            return Err(Error::Shape { expected: count, found: params.len() });
        }
        if !(leaky_slope > 0.0 && leaky_slope < 1.0) {
            return Err(Error::InvalidParameter("leaky slope must lie in (0, 1)"));
        }
        Ok(Self { layer_sizes: layer_sizes.to_vec(), params, leaky_slope, output })
    }

    /// Glorot-uniform weights `U(-sqrt(6/(fan_in+fan_out)), +...)`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        leaky_slope: f64,
        output: OutputActivation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, leaky_slope, output)?;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let (w, _) = net.layer_offsets(l);
            for p in &mut net.params[w..w + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn leaky_slope(&self) -> f64 {
        self.leaky_slope
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated nonempty")
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offsets of the weight block and bias block of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for i in 0..l {
            off += self.layer_sizes[i + 1] * (self.layer_sizes[i] + 1);
        }
        (off, off + self.layer_sizes[l + 1] * self.layer_sizes[l])
    }

    /// Forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new(self);
        self.forward_tape(input, &mut tape)?;
        Ok(tape.activations[self.num_layers()].clone())
    }

    fn forward_tape(&self, input: &[f64], tape: &mut Tape) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), found: input.len() });
        }
        tape.activations[0].copy_from_slice(input);
        let last = self.num_layers() - 1;
        let mut off = 0;
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (prev, rest) = tape.activations.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            let weights = &self.params[off..off + n_in * n_out];
            let biases = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            for j in 0..n_out {
                let row = &weights[j * n_in..(j + 1) * n_in];
                let z = biases[j] + row.iter().zip(a_in).map(|(w, a)| w * a).sum::<f64>();
                a_out[j] = if l == last {
                    self.output.apply(z)
                } else if z >= 0.0 {
                    z
                } else {
                    self.leaky_slope * z
                };
                tape.pre[l][j] = z;
            }
            off += n_out * (n_in + 1);
        }
        Ok(())
    }

    /// Backpropagates `dL/dz` of the output layer's pre-activation through the
    /// recorded pass, accumulating `dL/dparams` into `grad` and writing
    /// `dL/dinput` into `tape.input_grad`.
    fn backward_tape(&self, tape: &mut Tape, output_pre_grad: &[f64], grad: &mut [f64]) {
        let layers = self.num_layers();
        tape.delta[layers - 1].copy_from_slice(output_pre_grad);
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let a_in = &tape.activations[l];
            for j in 0..n_out {
                let d = tape.delta[l][j];
                grad[b_off + j] += d;
                let row = &mut grad[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_in) {
                    *g += d * a;
                }
            }
            // gradient with respect to this layer's input activations
            let target = if l == 0 { &mut tape.input_grad } else { &mut tape.scratch };
            target[..n_in].iter_mut().for_each(|v| *v = 0.0);
            for j in 0..n_out {
                let d = tape.delta[l][j];
                let row = &self.params[w_off + j * n_in..w_off + (j + 1) * n_in];
                for (t, w) in target[..n_in].iter_mut().zip(row) {
                    *t += d * w;
                }
            }
            if l > 0 {
                for i in 0..n_in {
                    let slope = if tape.pre[l - 1][i] >= 0.0 { 1.0 } else { self.leaky_slope };
                    tape.delta[l - 1][i] = tape.scratch[i] * slope;
                }
            }
        }
    }
}

fn parameter_count(layer_sizes: &[usize]) -> Result<usize> {
    if layer_sizes.len() < 2 {
        return Err(Error::Shape { expected: 2, found: layer_sizes.len() });
    }
    if layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidParameter("layer sizes must be positive"));
    }
    Ok(layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum())
}

/// Activations and deltas of one forward/backward pass.
#[derive(Debug, Clone)]
struct Tape {
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    input_grad: Vec<f64>,
}

impl Tape {
    fn new(net: &Mlp) -> Self {
        let sizes = &net.layer_sizes;
        let widest = sizes.iter().copied().max().unwrap_or(1);
        Self {
            activations: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            delta: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            scratch: vec![0.0; widest],
            input_grad: vec![0.0; sizes[0]],
        }
    }

    fn output(&self) -> f64 {
        self.activations.last().expect("nonempty")[0]
    }
}

fn clamp_probability(d: f64) -> f64 {
    d.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

/// `d log(clamp(d)) / du` for a sigmoid output `d = sigmoid(u)`.
fn dlog_d(d: f64) -> f64 {
    if d < LOG_CLAMP || d > 1.0 - LOG_CLAMP { 0.0 } else { 1.0 - d }
}

/// `d log(1 - clamp(d)) / du` for a sigmoid output `d = sigmoid(u)`.
fn dlog_one_minus_d(d: f64) -> f64 {
    if d < LOG_CLAMP || d > 1.0 - LOG_CLAMP { 0.0 } else { -d }
}

fn check_discriminator(disc: &Mlp) -> Result<()> {
    if disc.input_dim() != 1 {
        return Err(Error::Shape { expected: 1, found: disc.input_dim() });
    }
    if disc.output_dim() != 1 {
        return Err(Error::Shape { expected: 1, found: disc.output_dim() });
    }
    if disc.output != OutputActivation::Sigmoid {
        return Err(Error::InvalidParameter("discriminator output must be a sigmoid"));
    }
    Ok(())
}

fn check_generator(generator: &Mlp) -> Result<()> {
    if generator.output_dim() != 1 {
        return Err(Error::Shape { expected: 1, found: generator.output_dim() });
    }
    if generator.output != OutputActivation::Tanh {
        return Err(Error::InvalidParameter("generator output must be tanh"));
    }
    Ok(())
}

fn check_noise(generator: &Mlp, noise: &[f64], batch: usize) -> Result<()> {
    let want = generator.input_dim() * batch;
    if noise.len() != want {
        return Err(Error::Shape { expected: want, found: noise.len() });
    }
    Ok(())
}

/// Generator output `g(z)` in `(-1, 1)`.
pub fn generator_forward(generator: &Mlp, z: &[f64]) -> Result<f64> {
    check_generator(generator)?;
    generator.forward(z).map(|v| v[0])
}

/// Discriminator output `d(x)` in `(0, 1)`.
pub fn discriminator_forward(disc: &Mlp, x: f64) -> Result<f64> {
    check_discriminator(disc)?;
    disc.forward(&[x]).map(|v| v[0])
}

/// Discriminator loss `-(1/L) sum [log d(x_l) + log(1 - d(g(z_l)))]`.
///
/// `noise` holds `L` noise vectors back to back.
pub fn discriminator_loss(disc: &Mlp, generator: &Mlp, real: &[f64], noise: &[f64]) -> Result<f64> {
    check_discriminator(disc)?;
    check_generator(generator)?;
    check_noise(generator, noise, real.len())?;
    let mut total = 0.0;
    for (x, z) in real.iter().zip(noise.chunks(generator.input_dim())) {
        let fake = generator_forward(generator, z)?;
        total += libm::log(clamp_probability(discriminator_forward(disc, *x)?));
        total += libm::log(1.0 - clamp_probability(discriminator_forward(disc, fake)?));
    }
    Ok(-total / real.len() as f64)
}

/// Non-saturating generator loss `-(1/L) sum log d(g(z_l))`.
pub fn generator_loss(disc: &Mlp, generator: &Mlp, noise: &[f64]) -> Result<f64> {
    check_discriminator(disc)?;
    check_generator(generator)?;
    let mut total = 0.0;
    let mut count = 0;
    for z in noise.chunks(generator.input_dim()) {
        let fake = generator_forward(generator, z)?;
        total += libm::log(clamp_probability(discriminator_forward(disc, fake)?));
        count += 1;
    }
    if count == 0 || noise.len() % generator.input_dim() != 0 {
        return Err(Error::Shape { expected: generator.input_dim(), found: noise.len() });
    }
    Ok(-total / count as f64)
}

/// Reusable buffers for gradient evaluation on a generator/discriminator pair.
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    gen_tape: Tape,
    disc_tape: Tape,
}

impl GradientWorkspace {
    pub fn new(disc: &Mlp, generator: &Mlp) -> Self {
        Self { gen_tape: Tape::new(generator), disc_tape: Tape::new(disc) }
    }

    /// Accumulates the discriminator gradient into `grad` (overwritten).
    pub fn discriminator_gradient(
        &mut self,
        disc: &Mlp,
        generator: &Mlp,
        real: &[f64],
        noise: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        check_discriminator(disc)?;
        check_generator(generator)?;
        check_noise(generator, noise, real.len())?;
        if grad.len() != disc.num_parameters() {
            return Err(Error::Shape { expected: disc.num_parameters(), found: grad.len() });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let scale = -1.0 / real.len() as f64;
        for (x, z) in real.iter().zip(noise.chunks(generator.input_dim())) {
            disc.forward_tape(&[*x], &mut self.disc_tape)?;
            let d = self.disc_tape.output();
            disc.backward_tape(&mut self.disc_tape, &[scale * dlog_d(d)], grad);

            generator.forward_tape(z, &mut self.gen_tape)?;
            let fake = self.gen_tape.output();
            disc.forward_tape(&[fake], &mut self.disc_tape)?;
            let d = self.disc_tape.output();
            disc.backward_tape(&mut self.disc_tape, &[scale * dlog_one_minus_d(d)], grad);
        }
        Ok(())
    }

    /// Accumulates the non-saturating generator gradient into `grad` (overwritten).
    pub fn generator_gradient(
        &mut self,
        disc: &Mlp,
        generator: &Mlp,
        noise: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        check_discriminator(disc)?;
        check_generator(generator)?;
        let dim = generator.input_dim();
        if noise.is_empty() || noise.len() % dim != 0 {
            return Err(Error::Shape { expected: dim, found: noise.len() });
        }
        if grad.len() != generator.num_parameters() {
            return Err(Error::Shape { expected: generator.num_parameters(), found: grad.len() });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let batch = noise.len() / dim;
        let scale = -1.0 / batch as f64;
        let mut unused = vec![0.0; disc.num_parameters()];
        for z in noise.chunks(dim) {
            generator.forward_tape(z, &mut self.gen_tape)?;
            let fake = self.gen_tape.output();
            disc.forward_tape(&[fake], &mut self.disc_tape)?;
            let d = self.disc_tape.output();
            disc.backward_tape(&mut self.disc_tape, &[scale * dlog_d(d)], &mut unused);
            let dx = self.disc_tape.input_grad[0];
            let dz = dx * OutputActivation::Tanh.derivative_from_value(fake);
            generator.backward_tape(&mut self.gen_tape, &[dz], grad);
        }
        Ok(())
    }
}

/// Gradient of [`discriminator_loss`] with respect to the discriminator parameters.
pub fn discriminator_gradient(disc: &Mlp, generator: &Mlp, real: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; disc.num_parameters()];
    GradientWorkspace::new(disc, generator).discriminator_gradient(disc, generator, real, noise, &mut grad)?;
    Ok(grad)
}

/// Gradient of [`generator_loss`] with respect to the generator parameters.
pub fn generator_gradient(disc: &Mlp, generator: &Mlp, noise: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; generator.num_parameters()];
    GradientWorkspace::new(disc, generator).generator_gradient(disc, generator, noise, &mut grad)?;
    Ok(grad)
}

/// Adam optimizer state with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    step_size: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    timestep: u64,
}

impl AdamState {
    pub const EPSILON: f64 = 1e-8;

    pub fn new(num_params: usize, step_size: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(step_size > 0.0) {
            return Err(Error::InvalidParameter("Adam step size must be positive"));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::InvalidParameter("Adam decay rates must lie in [0, 1)"));
        }
        Ok(Self {
            step_size,
            beta1,
            beta2,
            epsilon: Self::EPSILON,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            timestep: 0,
        })
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One Adam update of `params` along `-grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n {
            return Err(Error::Shape { expected: n, found: params.len() });
        }
        if grad.len() != n {
            return Err(Error::Shape { expected: n, found: grad.len() });
        }
        self.timestep += 1;
        let t = self.timestep as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for i in 0..n {
            let g = grad[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            params[i] -= self.step_size * (m / c1) / (libm::sqrt(v / c2) + self.epsilon);
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
    state.step(params, grad)
}

/// Affine map of `[0, cap]` onto `[-1, 1]`; gains above `cap` saturate.
pub fn normalize(gain: f64, cap: f64) -> f64 {
    2.0 * gain.min(cap) / cap - 1.0
}

/// Inverse of [`normalize`], clamped below at zero gain.
pub fn denormalize(x: f64, cap: f64) -> f64 {
    ((x + 1.0) * 0.5 * cap).max(0.0)
}

/// Hyperparameters of one GAN training run.
#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub epochs: usize,
    pub critic_steps: usize,
    pub batch_size: usize,
    pub noise_dim: usize,
    pub generator_hidden: usize,
    pub discriminator_hidden: usize,
    pub synthetic_count: usize,
    /// Floor of the normalization cap. The cap used for a data set is the
    /// larger of this and the data set's largest gain.
    pub normalization_cap: f64,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub leaky_slope: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            critic_steps: 5,
            batch_size: 20,
            noise_dim: 4,
            generator_hidden: 8,
            discriminator_hidden: 24,
            synthetic_count: 10_000_000,
            normalization_cap: 40.0,
            step_size: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.critic_steps == 0 || self.batch_size == 0 || self.noise_dim == 0 {
            return Err(Error::InvalidParameter("critic steps, batch size and noise dimension must be positive"));
        }
        if self.generator_hidden == 0 || self.discriminator_hidden == 0 {
            return Err(Error::InvalidParameter("hidden layers must be nonempty"));
        }
        if self.synthetic_count == 0 {
            return Err(Error::InvalidParameter("synthetic count must be positive"));
        }
        if !(self.normalization_cap > 0.0) || !self.normalization_cap.is_finite() {
            return Err(Error::InvalidParameter("normalization cap must be positive"));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidParameter("leaky slope must lie in (0, 1)"));
        }
        AdamState::new(0, self.step_size, self.beta1, self.beta2).map(|_| ())
    }

    /// Smallest data set accepted by [`train`]: one round of critic batches.
    pub fn min_samples(&self) -> usize {
        self.critic_steps * self.batch_size
    }

    pub fn generator_layers(&self) -> [usize; 3] {
        [self.noise_dim, self.generator_hidden, 1]
    }

    pub fn discriminator_layers(&self) -> [usize; 3] {
        [1, self.discriminator_hidden, 1]
    }
}

/// A trained generator together with the cap that maps its output to gains.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGenerator {
    generator: Mlp,
    normalization_cap: f64,
}

impl TrainedGenerator {
    pub fn new(generator: Mlp, normalization_cap: f64) -> Result<Self> {
        check_generator(&generator)?;
        if !(normalization_cap > 0.0) || !normalization_cap.is_finite() {
            return Err(Error::InvalidParameter("normalization cap must be positive"));
        }
        Ok(Self { generator, normalization_cap })
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn normalization_cap(&self) -> f64 {
        self.normalization_cap
    }

    /// Draws `count` synthetic gains.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        self.sample_into(count, rng, &mut out);
        out
    }

    /// Appends `count` synthetic gains to `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, count: usize, rng: &mut R, out: &mut Vec<f64>) {
        let mut tape = Tape::new(&self.generator);
        let mut z = vec![0.0; self.generator.input_dim()];
        out.reserve(count);
        for _ in 0..count {
            fill_noise(&mut z, rng);
            self.generator.forward_tape(&z, &mut tape).expect("noise sized to the generator");
            out.push(denormalize(tape.output(), self.normalization_cap));
        }
    }
}

/// Draws `count` synthetic gains from a trained generator.
pub fn sample<R: Rng + ?Sized>(generator: &TrainedGenerator, count: usize, rng: &mut R) -> Vec<f64> {
    generator.sample(count, rng)
}

fn fill_noise<R: Rng + ?Sized>(buf: &mut [f64], rng: &mut R) {
    for v in buf.iter_mut() {
        *v = rng.sample(Exp1);
    }
}

/// State of an in-progress GAN training run.
#[derive(Debug, Clone)]
pub struct GanTrainer {
    config: GanConfig,
    generator: Mlp,
    discriminator: Mlp,
    gen_adam: AdamState,
    disc_adam: AdamState,
    workspace: GradientWorkspace,
}

impl GanTrainer {
    /// Fresh Glorot-initialised networks and zeroed optimizer moments.
    pub fn new<R: Rng + ?Sized>(config: &GanConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let generator = Mlp::glorot(
            &config.generator_layers(),
            config.leaky_slope,
            OutputActivation::Tanh,
            rng,
        )?;
        let discriminator = Mlp::glorot(
            &config.discriminator_layers(),
            config.leaky_slope,
            OutputActivation::Sigmoid,
            rng,
        )?;
        let gen_adam =
            AdamState::new(generator.num_parameters(), config.step_size, config.beta1, config.beta2)?;
        let disc_adam = AdamState::new(
            discriminator.num_parameters(),
            config.step_size,
            config.beta1,
            config.beta2,
        )?;
        let workspace = GradientWorkspace::new(&discriminator, &generator);
        Ok(Self { config: config.clone(), generator, discriminator, gen_adam, disc_adam, workspace })
    }

    pub fn generator(&self) -> &Mlp {
        &self.generator
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    /// Runs `epochs` passes over `data`, which must already be normalized to
    /// `[-1, 1]`. The slice is reshuffled at the start of every epoch.
    pub fn run_epochs<R: Rng + ?Sized>(
        &mut self,
        data: &mut [f64],
        epochs: usize,
        rng: &mut R,
    ) -> Result<()> {
        let (c, l) = (self.config.critic_steps, self.config.batch_size);
        if data.len() < c * l {
            return Err(Error::Sizing { needed: c * l, available: data.len() });
        }
        let rounds = data.len() / (c * l);
        let dim = self.generator.input_dim();
        let mut noise = vec![0.0; l * dim];
        let mut disc_grad = vec![0.0; self.discriminator.num_parameters()];
        let mut gen_grad = vec![0.0; self.generator.num_parameters()];
        for _ in 0..epochs {
            data.shuffle(rng);
            for j in 0..rounds {
                for i in 0..c {
                    let start = (j * c + i) * l;
                    fill_noise(&mut noise, rng);
                    self.workspace.discriminator_gradient(
                        &self.discriminator,
                        &self.generator,
                        &data[start..start + l],
                        &noise,
                        &mut disc_grad,
                    )?;
                    self.disc_adam.step(self.discriminator.parameters_mut(), &disc_grad)?;
                }
                fill_noise(&mut noise, rng);
                self.workspace.generator_gradient(
                    &self.discriminator,
                    &self.generator,
                    &noise,
                    &mut gen_grad,
                )?;
                self.gen_adam.step(self.generator.parameters_mut(), &gen_grad)?;
            }
        }
        Ok(())
    }

    pub fn into_generator(self, normalization_cap: f64) -> Result<TrainedGenerator> {
        TrainedGenerator::new(self.generator, normalization_cap)
    }
}

/// Normalization cap for a data set: the configured floor or the largest gain.
pub fn normalization_cap_for(samples: &[f64], floor: f64) -> f64 {
    samples.iter().copied().fold(floor, f64::max)
}

/// Trains a GAN on observed gains and returns its generator.
pub fn train<R: Rng + ?Sized>(samples: &[f64], config: &GanConfig, rng: &mut R) -> Result<TrainedGenerator> {
    train_with_discriminator(samples, config, rng).map(|(g, _)| g)
}

/// Like [`train`], also returning the final discriminator.
pub fn train_with_discriminator<R: Rng + ?Sized>(
    samples: &[f64],
    config: &GanConfig,
    rng: &mut R,
) -> Result<(TrainedGenerator, Mlp)> {
    config.validate()?;
    if samples.len() < config.min_samples() {
        return Err(Error::Sizing { needed: config.min_samples(), available: samples.len() });
    }
    if let Some(bad) = samples.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(Error::Domain { what: "training gain", value: *bad });
    }
    let cap = normalization_cap_for(samples, config.normalization_cap);
    let mut data: Vec<f64> = samples.iter().map(|&g| normalize(g, cap)).collect();
    let mut trainer = GanTrainer::new(config, rng)?;
    trainer.run_epochs(&mut data, config.epochs, rng)?;
    let disc = trainer.discriminator.clone();
    Ok((trainer.into_generator(cap)?, disc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn leaky(z: f64) -> f64 {
        if z >= 0.0 { z } else { 0.2 * z }
    }

    #[test]
    fn zero_networks_give_neutral_outputs() {
        let generator = Mlp::zeros(&[4, 8, 1], 0.2, OutputActivation::Tanh).unwrap();
        let disc = Mlp::zeros(&[1, 24, 1], 0.2, OutputActivation::Sigmoid).unwrap();
        assert_eq!(generator_forward(&generator, &[0.3, 1.2, 4.0, 0.1]).unwrap(), 0.0);
        assert_eq!(discriminator_forward(&disc, -0.7).unwrap(), 0.5);
        assert_eq!(generator.num_parameters(), 8 * 5 + 9);
        assert_eq!(disc.num_parameters(), 24 * 2 + 25);
    }

    #[test]
    fn generator_forward_by_hand() {
        // one active path: z0 -> h0 (w=2, b=-1) -> out (w=0.5, b=0.1)
        let mut generator = Mlp::zeros(&[4, 8, 1], 0.2, OutputActivation::Tanh).unwrap();
        let p = generator.parameters_mut();
        p[0] = 2.0; // W1[0][0]
        p[32] = -1.0; // b1[0]
        p[40] = 0.5; // W2[0][0]
        p[48] = 0.1; // b2[0]
        for z0 in [0.25, 1.5] {
            let want = libm::tanh(0.5 * leaky(2.0 * z0 - 1.0) + 0.1);
            let got = generator_forward(&generator, &[z0, 9.0, 9.0, 9.0]).unwrap();
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn discriminator_forward_by_hand() {
        let disc = Mlp::from_parameters(
            &[1, 1, 1],
            alloc::vec![1.5, -0.5, 2.0, 0.25],
            0.2,
            OutputActivation::Sigmoid,
        )
        .unwrap();
        for x in [-1.0, 0.0, 0.8] {
            let want = 1.0 / (1.0 + libm::exp(-(2.0 * leaky(1.5 * x - 0.5) + 0.25)));
            assert!((discriminator_forward(&disc, x).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn output_ranges_hold_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let generator = Mlp::glorot(&[4, 8, 1], 0.2, OutputActivation::Tanh, &mut rng).unwrap();
        let disc = Mlp::glorot(&[1, 24, 1], 0.2, OutputActivation::Sigmoid, &mut rng).unwrap();
        for _ in 0..10_000 {
            let z: [f64; 4] = core::array::from_fn(|_| rng.sample(Exp1));
            let g = generator_forward(&generator, &z).unwrap();
            assert!(g > -1.0 && g < 1.0);
            let d = discriminator_forward(&disc, g).unwrap();
            assert!(d > 0.0 && d < 1.0);
        }
    }

    #[test]
    fn shape_errors_are_structural() {
        let generator = Mlp::zeros(&[4, 8, 1], 0.2, OutputActivation::Tanh).unwrap();
        let disc = Mlp::zeros(&[1, 24, 1], 0.2, OutputActivation::Sigmoid).unwrap();
        assert!(matches!(generator_forward(&generator, &[1.0, 2.0]), Err(Error::Shape { .. })));
        assert!(matches!(discriminator_forward(&generator, 0.0), Err(Error::Shape { .. })));
        assert!(discriminator_gradient(&disc, &generator, &[0.1, 0.2], &[0.0; 4]).is_err());
        assert!(Mlp::from_parameters(&[1, 2, 1], alloc::vec![0.0; 3], 0.2, OutputActivation::Tanh).is_err());
        assert!(Mlp::zeros(&[1, 2, 1], 1.5, OutputActivation::Tanh).is_err());
    }

    #[test]
    fn identical_samples_average_to_single_sample_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let generator = Mlp::glorot(&[4, 8, 1], 0.2, OutputActivation::Tanh, &mut rng).unwrap();
        let disc = Mlp::glorot(&[1, 24, 1], 0.2, OutputActivation::Sigmoid, &mut rng).unwrap();
        let z = [0.4, 1.1, 0.2, 2.5];
        let single = discriminator_gradient(&disc, &generator, &[0.3], &z).unwrap();
        let noise: Vec<f64> = z.iter().cycle().take(20).copied().collect();
        let batch = discriminator_gradient(&disc, &generator, &[0.3; 5], &noise).unwrap();
        for (a, b) in single.iter().zip(&batch) {
            assert!((a - b).abs() < 1e-14);
        }
        let single = generator_gradient(&disc, &generator, &z).unwrap();
        let batch = generator_gradient(&disc, &generator, &noise).unwrap();
        for (a, b) in single.iter().zip(&batch) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_discriminator_has_stationary_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let generator = Mlp::glorot(&[4, 8, 1], 0.2, OutputActivation::Tanh, &mut rng).unwrap();
        let mut disc = Mlp::glorot(&[1, 24, 1], 0.2, OutputActivation::Sigmoid, &mut rng).unwrap();
        // zero the output layer so d = 0.5 everywhere with zero input sensitivity
        let n = disc.num_parameters();
        disc.parameters_mut()[n - 25..].iter_mut().for_each(|p| *p = 0.0);
        let noise: Vec<f64> = (0..80).map(|_| rng.sample(Exp1)).collect();
        let real: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = discriminator_gradient(&disc, &generator, &real, &noise).unwrap();
        // gradient of -[log d + log(1-d)] at d = 1/2 vanishes in the output bias
        assert!(g[n - 1].abs() < 1e-15);
        assert!(g[..n - 25].iter().all(|v| *v == 0.0));
        let gg = generator_gradient(&disc, &generator, &noise).unwrap();
        assert!(gg.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters() {
        let mut st = AdamState::new(3, 0.003, 0.9, 0.999).unwrap();
        let mut p = [1.0, -2.0, 0.5];
        adam_step(&mut p, &[0.0; 3], &mut st).unwrap();
        assert_eq!(p, [1.0, -2.0, 0.5]);
        assert_eq!(st.timestep(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_step_size() {
        for scale in [1e-3, 1.0, 1e4] {
            let mut st = AdamState::new(2, 0.003, 0.9, 0.999).unwrap();
            let mut p = [0.0, 0.0];
            st.step(&mut p, &[scale, -scale]).unwrap();
            assert!((p[0] + 0.003).abs() < 1e-7);
            assert!((p[1] - 0.003).abs() < 1e-7);
        }
    }

    #[test]
    fn adam_two_steps_by_hand() {
        // g1 = 1, g2 = -2 on a scalar starting at 1
        let (psi, b1, b2, eps) = (0.003, 0.9, 0.999, 1e-8);
        let m1 = 0.1;
        let v1 = 0.001;
        let x1 = 1.0 - psi * (m1 / 0.1) / ((v1 / 0.001_f64).sqrt() + eps);
        let m2 = b1 * m1 + 0.1 * -2.0;
        let v2 = b2 * v1 + 0.001 * 4.0;
        let x2 = x1 - psi * (m2 / (1.0 - 0.81)) / ((v2 / (1.0 - 0.998001_f64)).sqrt() + eps);
        let mut st = AdamState::new(1, psi, b1, b2).unwrap();
        let mut p = [1.0];
        st.step(&mut p, &[1.0]).unwrap();
        assert!((p[0] - x1).abs() < 1e-15);
        st.step(&mut p, &[-2.0]).unwrap();
        assert!((p[0] - x2).abs() < 1e-15);
    }

    #[test]
    fn adam_validates() {
        assert!(AdamState::new(1, 0.0, 0.9, 0.999).is_err());
        assert!(AdamState::new(1, 0.1, 1.0, 0.999).is_err());
        assert!(AdamState::new(1, 0.1, 0.9, -0.1).is_err());
        let mut st = AdamState::new(2, 0.1, 0.9, 0.999).unwrap();
        assert!(st.step(&mut [0.0; 3], &[0.0; 3]).is_err());
    }

    #[test]
    fn normalization_round_trip() {
        assert_eq!(normalize(0.0, 40.0), -1.0);
        assert_eq!(normalize(40.0, 40.0), 1.0);
        assert_eq!(normalize(55.0, 40.0), 1.0);
        assert_eq!(denormalize(-1.2, 40.0), 0.0);
        for i in 0..=1000 {
            let g = 40.0 * i as f64 / 1000.0;
            assert!((denormalize(normalize(g, 40.0), 40.0) - g).abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_generator_samples_are_constant() {
        let mut generator = Mlp::zeros(&[4, 8, 1], 0.2, OutputActivation::Tanh).unwrap();
        let n = generator.num_parameters();
        generator.parameters_mut()[n - 1] = 0.3; // output bias
        let trained = TrainedGenerator::new(generator, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let want = denormalize(libm::tanh(0.3), 10.0);
        assert!(trained.sample(100, &mut rng).iter().all(|&g| g == want));
    }

    #[test]
    fn zero_epochs_leave_initialisation() {
        let config = GanConfig { epochs: 0, ..GanConfig::default() };
        let samples: Vec<f64> = (0..200).map(|i| i as f64 / 100.0).collect();
        let trained = train(&samples, &config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let init = GanTrainer::new(&config, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(trained.generator(), init.generator());
        assert_eq!(trained.normalization_cap(), 40.0);
    }

    #[test]
    fn too_few_samples_is_a_sizing_error() {
        let config = GanConfig::default();
        let err = train(&[1.0; 99], &config, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, Error::Sizing { needed: 100, available: 99 });
        assert!(train(&[-1.0; 100], &config, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn cap_tracks_largest_gain() {
        assert_eq!(normalization_cap_for(&[1.0, 3.0], 40.0), 40.0);
        assert_eq!(normalization_cap_for(&[1.0, 73.0], 40.0), 73.0);
    }
}
