//! Derived experiment structures: links, schedules, thresholds and the
//! closed-form reference schedules.

use gansched_core::channel::{self, ChannelParams, QualityScheme};
use gansched_core::density::{self, OutageTable, QualitySpace, SuccessModel};
use gansched_core::scheduler::{self, SchedulingVector};

use crate::config::ExperimentConfig;

/// Everything the online loop and the reports share for one configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub links: Vec<ChannelParams>,
    pub scheme: QualityScheme,
    pub space: QualitySpace,
    pub schedules: Vec<SchedulingVector>,
    /// Probability of each quality level of a single actuator.
    pub level_probabilities: Vec<f64>,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> gansched_core::Result<Self> {
        let wavelength = channel::wavelength_from_carrier(config.carrier_hz);
        let links = config
            .velocities
            .iter()
            .zip(&config.deadlines)
            .map(|(&v, &d)| {
                ChannelParams::new(v, config.instant_interval_s, wavelength, config.num_instants, d)
            })
            .collect::<gansched_core::Result<Vec<_>>>()?;
        let scheme = QualityScheme::new(config.quality_boundaries.clone())?;
        let space = QualitySpace::new(vec![scheme.num_levels(); links.len()])?;
        let schedules = scheduler::enumerate_schedules(&config.deadlines, config.max_simultaneous)?;
        let level_probabilities =
            (0..scheme.num_levels()).map(|b| scheme.level_probability(b)).collect::<gansched_core::Result<_>>()?;
        Ok(Self { links, scheme, space, schedules, level_probabilities })
    }

    pub fn num_actuators(&self) -> usize {
        self.links.len()
    }

    /// Probability of observing the quality vector with index `b`.
    pub fn quality_probability(&self, b: usize) -> f64 {
        self.space.vector(b).iter().map(|&l| self.level_probabilities[l]).product()
    }

    /// Closed-form outage of every cell at `threshold`.
    pub fn analytic_outages(
        &self,
        config: &ExperimentConfig,
        threshold: f64,
    ) -> gansched_core::Result<OutageTable> {
        OutageTable::analytic(&self.links, &self.scheme, threshold, &config.quadrature)
    }

    /// Per-actuator outage under a uniform draw over the feasible schedules.
    pub fn baseline_outages(
        &self,
        model: &dyn SuccessModel,
        quality: &[usize],
    ) -> gansched_core::Result<Vec<f64>> {
        let weights = vec![1.0 / self.schedules.len() as f64; self.schedules.len()];
        self.mixture_outages(model, quality, &weights)
    }

    /// Per-actuator outage when the schedule is drawn from `weights`.
    pub fn mixture_outages(
        &self,
        model: &dyn SuccessModel,
        quality: &[usize],
        weights: &[f64],
    ) -> gansched_core::Result<Vec<f64>> {
        let mut total = vec![0.0; self.num_actuators()];
        for (s, &w) in self.schedules.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (t, p) in total.iter_mut().zip(density::outages(model, quality, s)?) {
                *t += w * p;
            }
        }
        Ok(total)
    }
}

/// Gain threshold for a payload in bytes at an SNR in dB.
pub fn gain_threshold(config: &ExperimentConfig, snr_db: f64, payload_bytes: f64) -> gansched_core::Result<f64> {
    channel::threshold(config.eta(payload_bytes), channel::db_to_linear(snr_db))
}

/// Exhaustive best schedule for quality vector `quality` under `model`, with
/// per-actuator outage at the chosen instants.
pub fn oracle_optimal_with(
    setup: &Setup,
    model: &dyn SuccessModel,
    quality: &[usize],
) -> gansched_core::Result<(usize, Vec<f64>)> {
    let alpha = setup
        .schedules
        .iter()
        .map(|s| density::alpha_hat(model, quality, s))
        .collect::<gansched_core::Result<Vec<_>>>()?;
    let best = scheduler::argmax(&alpha);
    Ok((best, density::outages(model, quality, &setup.schedules[best])?))
}

/// Closed-form optimal schedule at the configured online operating point.
pub fn oracle_optimal(
    config: &ExperimentConfig,
    quality: &[usize],
) -> gansched_core::Result<(SchedulingVector, Vec<f64>)> {
    let setup = Setup::new(config)?;
    let threshold = gain_threshold(config, config.online_snr_db, config.online_payload_bytes)?;
    let model = setup.analytic_outages(config, threshold)?;
    let (best, outages) = oracle_optimal_with(&setup, &model, quality)?;
    Ok((setup.schedules[best].clone(), outages))
}

/// Independent seed for a named sub-stream of the master seed.
pub fn stream_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x6a09_e667_f3bc_c909;
    for &t in tags {
        state = splitmix(state ^ splitmix(t.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    splitmix(state)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_setup_shape() {
        let setup = Setup::new(&ExperimentConfig::default()).unwrap();
        assert_eq!(setup.schedules.len(), 9);
        assert_eq!(setup.space.len(), 4);
        let total: f64 = (0..4).map(|b| setup.quality_probability(b)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_schedules_follow_the_quality() {
        let c = ExperimentConfig::default();
        let (good, good_out) = oracle_optimal(&c, &[1, 1]).unwrap();
        assert_eq!(good.instants()[1], 1);
        assert!((good_out[1].log10() + 6.56).abs() < 0.07);
        let (bad, bad_out) = oracle_optimal(&c, &[0, 0]).unwrap();
        assert_eq!(bad.instants()[1], 3);
        assert!((bad_out[1].log10() + 3.90).abs() < 0.07);
    }

    #[test]
    fn static_channel_ties_break_to_the_first_instant() {
        let c = ExperimentConfig {
            velocities: vec![0.0],
            deadlines: vec![3],
            report_actuator: 1,
            ..ExperimentConfig::default()
        };
        let (s, _) = oracle_optimal(&c, &[0]).unwrap();
        assert_eq!(s.instants(), &[1]);
    }

    #[test]
    fn baseline_is_the_instant_average() {
        let c = ExperimentConfig::default();
        let setup = Setup::new(&c).unwrap();
        let t = gain_threshold(&c, 20.0, 20.0).unwrap();
        let model = setup.analytic_outages(&c, t).unwrap();
        for q in setup.space.vectors() {
            let base = setup.baseline_outages(&model, &q).unwrap();
            for k in 0..2 {
                let avg = (1..=3)
                    .map(|tau| model.outage(density::Cell::new(k, tau, q[k])).unwrap())
                    .sum::<f64>()
                    / 3.0;
                assert!((base[k] - avg).abs() <= 1e-15 * avg.max(1e-300) + 1e-20);
            }
        }
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(1, &[0, 1]), stream_seed(1, &[1, 0]));
        assert_ne!(stream_seed(1, &[0]), stream_seed(2, &[0]));
        assert_eq!(stream_seed(7, &[3, 4]), stream_seed(7, &[3, 4]));
    }
}
