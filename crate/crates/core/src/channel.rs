//! Time-correlated Rayleigh fading between the controller and one actuator.
//!
//! The coefficient at the observation instant `tau = 0` is circularly
//! symmetric complex Gaussian with unit power. At a later instant the
//! coefficient is `h = rho * h0 + n` where `rho = J0(2 pi v I tau / lambda)`
//! and `n` has independent real and imaginary parts of standard deviation
//! `sigma = sqrt(1/2 - rho^2/2)`. Conditioned on `h0` the gain is therefore
//! Rician and its exceedance probability is a Marcum Q-function.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::specfun::{self, QuadratureSpec};
use crate::{Error, Result};

/// Speed of light used to convert a carrier frequency to a wavelength, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Width above the lower edge at which an unbounded quantization interval is
/// truncated for quadrature. The neglected mass is `e^{-40}` relative.
pub const UNBOUNDED_INTERVAL_SPAN: f64 = 40.0;

/// Carrier wavelength in metres for a carrier frequency in hertz.
pub fn wavelength_from_carrier(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}

/// Converts decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    libm::pow(10.0, db / 10.0)
}

/// Spectral efficiency needed to deliver a payload within one transmission.
pub fn spectral_efficiency(payload_bits: f64, bandwidth_hz: f64, duration_s: f64) -> f64 {
    payload_bits / (bandwidth_hz * duration_s)
}

/// Minimum channel gain for a scheduled transmission to carry `eta`
/// bits/s/Hz at linear SNR `gamma`: `(2^eta - 1) / gamma`.
pub fn threshold(eta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Domain { what: "SNR", value: gamma });
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::Domain { what: "spectral efficiency", value: eta });
    }
    Ok(libm::expm1(eta * LN_2) / gamma)
}

/// Physical constants of one actuator's link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    velocity: f64,
    instant_interval: f64,
    wavelength: f64,
    num_instants: usize,
    deadline: usize,
}

impl ChannelParams {
    pub fn new(
        velocity: f64,
        instant_interval: f64,
        wavelength: f64,
        num_instants: usize,
        deadline: usize,
    ) -> Result<Self> {
        if !(velocity >= 0.0) || !velocity.is_finite() {
            return Err(Error::InvalidParameter("velocity must be finite and nonnegative"));
        }
        if !(instant_interval > 0.0) || !instant_interval.is_finite() {
            return Err(Error::InvalidParameter("instant interval must be positive"));
        }
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::InvalidParameter("wavelength must be positive"));
        }
        if num_instants == 0 {
            return Err(Error::InvalidParameter("a slot needs at least one instant"));
        }
        if deadline == 0 || deadline > num_instants {
            return Err(Error::InvalidParameter("deadline must lie in 1..=num_instants"));
        }
        Ok(Self { velocity, instant_interval, wavelength, num_instants, deadline })
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn instant_interval(&self) -> f64 {
        self.instant_interval
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn num_instants(&self) -> usize {
        self.num_instants
    }

    pub fn deadline(&self) -> usize {
        self.deadline
    }

    /// Argument `2 pi v I tau / lambda` of the correlation function.
    pub fn doppler_phase(&self, tau: usize) -> f64 {
        2.0 * PI * self.velocity * self.instant_interval * tau as f64 / self.wavelength
    }
}

/// Correlation `rho = J0(2 pi v I tau / lambda)` between the coefficients at
/// instants `0` and `tau`.
pub fn correlation(params: &ChannelParams, tau: usize) -> f64 {
    // the phase is finite because every field of `params` is
    specfun::bessel_j0(params.doppler_phase(tau)).unwrap_or(0.0)
}

/// Per-component standard deviation of the innovation at instant `tau`.
pub fn sigma(params: &ChannelParams, tau: usize) -> f64 {
    let rho = correlation(params, tau);
    libm::sqrt((0.5 - 0.5 * rho * rho).max(0.0))
}

/// A complex fading coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingCoefficient {
    pub re: f64,
    pub im: f64,
}

impl FadingCoefficient {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// Power gain `|h|^2`.
    pub fn gain(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn magnitude(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

/// Draws the coefficient at the observation instant: unit-power Rayleigh.
pub fn draw_initial<R: Rng + ?Sized>(rng: &mut R) -> FadingCoefficient {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    FadingCoefficient::new(FRAC_1_SQRT_2 * re, FRAC_1_SQRT_2 * im)
}

/// Draws the coefficient at instant `tau` given the one observed at `tau = 0`.
pub fn draw_conditional<R: Rng + ?Sized>(
    h0: &FadingCoefficient,
    params: &ChannelParams,
    tau: usize,
    rng: &mut R,
) -> Result<FadingCoefficient> {
    check_instant(params, tau)?;
    let rho = correlation(params, tau);
    let s = sigma(params, tau);
    if s == 0.0 {
        return Ok(FadingCoefficient::new(rho * h0.re, rho * h0.im));
    }
    let nre: f64 = rng.sample(StandardNormal);
    let nim: f64 = rng.sample(StandardNormal);
    Ok(FadingCoefficient::new(rho * h0.re + s * nre, rho * h0.im + s * nim))
}

fn check_instant(params: &ChannelParams, tau: usize) -> Result<()> {
    if tau == 0 || tau > params.num_instants {
        return Err(Error::Domain { what: "instant", value: tau as f64 });
    }
    Ok(())
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::Domain { what: "gain threshold", value: threshold });
    }
    Ok(())
}

/// `(Q1, 1 - Q1)` for the exceedance of `threshold` given the initial gain.
fn exceedance_given_gain(rho: f64, s: f64, gain0: f64, threshold: f64) -> Result<(f64, f64)> {
    if s == 0.0 {
        let hit = rho * rho * gain0 >= threshold;
        return Ok(if hit { (1.0, 0.0) } else { (0.0, 1.0) });
    }
    let a = libm::fabs(rho) * libm::sqrt(gain0) / s;
    let b = libm::sqrt(threshold) / s;
    specfun::marcum_pair(a, b)
}

/// `Pr(|h_tau|^2 >= threshold | h_0)`.
pub fn success_prob_given_h0(
    h0: &FadingCoefficient,
    params: &ChannelParams,
    tau: usize,
    threshold: f64,
) -> Result<f64> {
    if tau == 0 {
        return Err(Error::Domain { what: "instant", value: 0.0 });
    }
    check_threshold(threshold)?;
    let (rho, s) = (correlation(params, tau), sigma(params, tau));
    exceedance_given_gain(rho, s, h0.gain(), threshold).map(|(q, _)| q)
}

/// `Pr(|h_tau|^2 < threshold | h_0)`, accurate in relative terms when small.
pub fn outage_given_h0(
    h0: &FadingCoefficient,
    params: &ChannelParams,
    tau: usize,
    threshold: f64,
) -> Result<f64> {
    if tau == 0 {
        return Err(Error::Domain { what: "instant", value: 0.0 });
    }
    check_threshold(threshold)?;
    let (rho, s) = (correlation(params, tau), sigma(params, tau));
    exceedance_given_gain(rho, s, h0.gain(), threshold).map(|(_, p)| p)
}

/// Partition of `[0, inf)` into quality levels by ascending gain boundaries.
///
/// Level `b` covers `[boundaries[b-1], boundaries[b])`; a gain equal to a
/// boundary belongs to the upper level.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityScheme {
    boundaries: Vec<f64>,
}

impl QualityScheme {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter("quality boundaries must be finite and positive"));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("quality boundaries must be strictly increasing"));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Number of quality levels, `|B_k|`.
    pub fn num_levels(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Lower edge and (if bounded) upper edge of level `b`.
    pub fn interval(&self, b: usize) -> Result<(f64, Option<f64>)> {
        if b >= self.num_levels() {
            return Err(Error::Domain { what: "quality level", value: b as f64 });
        }
        let lo = if b == 0 { 0.0 } else { self.boundaries[b - 1] };
        Ok((lo, self.boundaries.get(b).copied()))
    }

    /// Quality level of an observed gain.
    pub fn quantize(&self, gain: f64) -> usize {
        self.boundaries.partition_point(|&edge| edge <= gain)
    }

    /// `Pr(lo <= |h_0|^2 < hi)` under unit-power Rayleigh fading.
    pub fn level_probability(&self, b: usize) -> Result<f64> {
        let (lo, hi) = self.interval(b)?;
        let upper = hi.map_or(0.0, |h| libm::exp(-h));
        Ok(libm::exp(-lo) - upper)
    }
}

/// Free-function form of [`QualityScheme::quantize`].
pub fn quantize(gain: f64, scheme: &QualityScheme) -> usize {
    scheme.quantize(gain)
}

/// `Pr(|h_tau|^2 < threshold | B = b)`: the initial-gain-conditioned outage
/// averaged over the exponential density restricted to level `b`.
///
/// The integral is computed directly on the outage (rather than as one minus
/// the success) so that values far below `1e-12` keep their relative accuracy.
pub fn outage_given_quality(
    b: usize,
    scheme: &QualityScheme,
    params: &ChannelParams,
    tau: usize,
    threshold: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if tau == 0 {
        return Err(Error::Domain { what: "instant", value: 0.0 });
    }
    check_threshold(threshold)?;
    let (lo, hi) = scheme.interval(b)?;
    let hi = hi.unwrap_or(lo + UNBOUNDED_INTERVAL_SPAN);
    let width = hi - lo;
    // both numerator and denominator carry a factor e^{-lo}, which cancels
    let mass = -libm::expm1(-width);
    if threshold == 0.0 {
        return Ok(0.0);
    }
    let (rho, s) = (correlation(params, tau), sigma(params, tau));

    if s == 0.0 {
        // static channel: outage iff rho^2 x < threshold
        let cut = (threshold / (rho * rho)).min(hi);
        if cut <= lo {
            return Ok(0.0);
        }
        return Ok(-libm::expm1(-(cut - lo)) / mass);
    }

    let scale = libm::fabs(rho) / s;
    let b_arg = libm::sqrt(threshold) / s;
    let mut failure = None;
    let integral = specfun::integrate(
        |x| match specfun::marcum_q1_complement(scale * libm::sqrt(x.max(0.0)), b_arg) {
            Ok(p) => p * libm::exp(-(x - lo)),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        quad,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((integral? / mass).clamp(0.0, 1.0))
}

/// `Pr(|h_tau|^2 >= threshold | B = b)`.
pub fn success_prob_given_quality(
    b: usize,
    scheme: &QualityScheme,
    params: &ChannelParams,
    tau: usize,
    threshold: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    outage_given_quality(b, scheme, params, tau, threshold, quad).map(|p| 1.0 - p)
}
