//! Table and figure data.

use gansched_core::channel::{self, ChannelParams};
use gansched_core::density::{EmpiricalCdf, OutageTable};
use gansched_core::gan::{self, GanConfig};
use gansched_core::scheduler::SchedulingVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::experiment::{self, Setup};
use crate::online::{self, OnlineError, QualityRecord, RunMetrics};

const FIG1_DATA_STREAM: u64 = 10;
const FIG1_GAN_STREAM: u64 = 11;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Model(#[from] gansched_core::Error),
    #[error("online run at {snr_db} dB, {payload_bytes} bytes: {source}")]
    Online {
        snr_db: f64,
        payload_bytes: f64,
        #[source]
        source: OnlineError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub quality: usize,
    pub instant: usize,
    pub outage: f64,
}

/// Closed-form conditional outage of the report actuator at the online
/// operating point, for every quality level and every listed instant.
pub fn table1_report(config: &ExperimentConfig) -> Result<Vec<Table1Row>, ReportError> {
    let k = config.report_actuator - 1;
    let horizon = config.table1_instants.iter().copied().max().unwrap_or(1);
    let link = ChannelParams::new(
        config.velocities[k],
        config.instant_interval_s,
        channel::wavelength_from_carrier(config.carrier_hz),
        horizon,
        horizon,
    )?;
    let scheme = channel::QualityScheme::new(config.quality_boundaries.clone())?;
    let t = experiment::gain_threshold(config, config.online_snr_db, config.online_payload_bytes)?;
    let mut rows = Vec::new();
    for b in 0..scheme.num_levels() {
        for &tau in &config.table1_instants {
            let outage = channel::outage_given_quality(b, &scheme, &link, tau, t, &config.quadrature)?;
            rows.push(Table1Row { quality: b, instant: tau, outage });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub quality: Vec<usize>,
    pub schedule_id: usize,
    pub schedule: SchedulingVector,
    pub outages: Vec<f64>,
}

/// Closed-form optimal schedule for every quality vector.
pub fn oracle_report(config: &ExperimentConfig) -> Result<Vec<OracleRow>, ReportError> {
    let setup = Setup::new(config)?;
    let t = experiment::gain_threshold(config, config.online_snr_db, config.online_payload_bytes)?;
    let model = setup.analytic_outages(config, t)?;
    setup
        .space
        .vectors()
        .map(|q| {
            let (id, outages) = experiment::oracle_optimal_with(&setup, &model, &q)?;
            Ok(OracleRow { schedule: setup.schedules[id].clone(), quality: q, schedule_id: id, outages })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageRow {
    pub payload_bytes: f64,
    pub snr_db: f64,
    /// 0-based actuator index.
    pub actuator: usize,
    pub quality: usize,
    pub optimal: f64,
    /// Closed-form outage at the policy's argmax schedule.
    pub proposed: f64,
    /// Closed-form outage averaged over the policy.
    pub proposed_mixture: f64,
    /// Estimated outage at the argmax schedule, floored.
    pub predicted: f64,
    pub predicted_below_floor: bool,
    pub baseline: f64,
    pub frames: u64,
}

/// Final-frame outages of one actuator given its own quality level, averaged
/// over the other actuators' qualities.
pub fn summarize(
    config: &ExperimentConfig,
    setup: &Setup,
    metrics: &RunMetrics,
    actuator: usize,
) -> Vec<OutageRow> {
    let finals = metrics.final_qualities();
    (0..setup.scheme.num_levels())
        .map(|level| {
            let mut acc = [0.0; 5];
            let mut mass = 0.0;
            for r in finals.iter().filter(|r| r.quality[actuator] == level) {
                let w = setup.quality_probability(r.quality_index);
                mass += w;
                let fields = pick(r, actuator);
                for (a, f) in acc.iter_mut().zip(fields) {
                    *a += w * f;
                }
            }
            let [optimal, proposed, mixture, predicted, baseline] = acc.map(|a| a / mass);
            let below = predicted < config.prediction_floor;
            OutageRow {
                payload_bytes: metrics.payload_bytes,
                snr_db: metrics.snr_db,
                actuator,
                quality: level,
                optimal,
                proposed,
                proposed_mixture: mixture,
                predicted: if below { config.prediction_floor } else { predicted },
                predicted_below_floor: below,
                baseline,
                frames: metrics.frames_run,
            }
        })
        .collect()
}

fn pick(r: &QualityRecord, k: usize) -> [f64; 5] {
    [r.optimal[k], r.achieved[k], r.mixture[k], r.predicted[k], r.baseline[k]]
}

/// Runs the online loop for every payload and SNR and summarizes the report
/// actuator.
pub fn sweep_report(
    config: &ExperimentConfig,
    payloads: &[f64],
    observer: &mut dyn FnMut(f64, f64, &RunMetrics),
) -> Result<Vec<OutageRow>, ReportError> {
    let setup = Setup::new(config)?;
    let k = config.report_actuator - 1;
    let mut rows = Vec::new();
    for &payload in payloads {
        for &snr in &config.snr_db {
            let m = online::run_online_at(config, snr, payload, &mut |m| observer(snr, payload, m))
                .map_err(|source| ReportError::Online { snr_db: snr, payload_bytes: payload, source })?;
            rows.extend(summarize(config, &setup, &m, k));
        }
    }
    Ok(rows)
}

/// Predicted and achieved outage versus SNR for every configured payload.
pub fn fig2_report(
    config: &ExperimentConfig,
    observer: &mut dyn FnMut(f64, f64, &RunMetrics),
) -> Result<Vec<OutageRow>, ReportError> {
    sweep_report(config, &config.payload_bytes, observer)
}

/// Proposed versus baseline outage versus SNR at the online payload.
pub fn fig3_report(
    config: &ExperimentConfig,
    observer: &mut dyn FnMut(f64, f64, &RunMetrics),
) -> Result<Vec<OutageRow>, ReportError> {
    sweep_report(config, &[config.online_payload_bytes], observer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub series: &'static str,
    pub samples: usize,
    pub epochs: usize,
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Ks {
    pub samples: usize,
    pub epochs: usize,
    pub ks_empirical: f64,
    /// Largest CDF gap to the closed form over the grid points.
    pub ks_analytic_grid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Report {
    pub grid: Vec<f64>,
    pub curves: Vec<CdfCurve>,
    pub ks: Vec<Fig1Ks>,
    /// Synthetic draws behind each GAN curve as `(samples, epochs, draws)`.
    pub synthetic: Vec<(usize, usize, Vec<f64>)>,
}

/// Conditional gains of one cell drawn directly from the channel model.
pub fn draw_cell_gains(
    link: &ChannelParams,
    scheme: &channel::QualityScheme,
    instant: usize,
    quality: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> gansched_core::Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let h0 = channel::draw_initial(rng);
        if scheme.quantize(h0.gain()) == quality {
            out.push(channel::draw_conditional(&h0, link, instant, rng)?.gain());
        }
    }
    Ok(out)
}

/// Empirical, closed-form and GAN CDFs of the report actuator's
/// `(fig1_instant, fig1_quality)` cell for every sample-size and epoch count.
pub fn fig1_report(config: &ExperimentConfig) -> Result<Fig1Report, ReportError> {
    let setup = Setup::new(config)?;
    let k = config.report_actuator - 1;
    let link = &setup.links[k];
    let (tau, b) = (config.fig1_instant, config.fig1_quality);
    let largest = config.fig1_samples.iter().copied().max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(experiment::stream_seed(config.seed, &[FIG1_DATA_STREAM]));
    let data = draw_cell_gains(link, &setup.scheme, tau, b, largest, &mut rng)?;

    let mut sorted = data.clone();
    sorted.sort_by(f64::total_cmp);
    let top = sorted[((sorted.len() as f64 * 0.999) as usize).min(sorted.len() - 1)].max(1e-9);
    let grid: Vec<f64> = (0..config.fig1_grid).map(|i| top * i as f64 / (config.fig1_grid - 1) as f64).collect();
    let analytic = grid
        .iter()
        .map(|&x| channel::outage_given_quality(b, &setup.scheme, link, tau, x, &config.quadrature))
        .collect::<gansched_core::Result<Vec<_>>>()?;

    let mut curves = vec![CdfCurve { series: "analytic", samples: 0, epochs: 0, cdf: analytic.clone() }];
    let mut ks = Vec::new();
    let mut synthetic = Vec::new();
    for (si, &n) in config.fig1_samples.iter().enumerate() {
        let subset = &data[..n];
        let empirical = EmpiricalCdf::new(subset)?;
        curves.push(CdfCurve { series: "empirical", samples: n, epochs: 0, cdf: grid.iter().map(|&x| empirical.eval(x)).collect() });
        for (ei, &epochs) in config.fig1_epochs.iter().enumerate() {
            let gan_config = GanConfig { epochs, ..config.gan.clone() };
            let mut grng = ChaCha8Rng::seed_from_u64(experiment::stream_seed(
                config.seed,
                &[FIG1_GAN_STREAM, si as u64, ei as u64],
            ));
            let g = gan::train(subset, &gan_config, &mut grng)?;
            let draws = g.sample(config.fig1_synthetic, &mut grng);
            let cdf = EmpiricalCdf::new(&draws)?;
            let on_grid: Vec<f64> = grid.iter().map(|&x| cdf.eval(x)).collect();
            let gap = on_grid.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ks.push(Fig1Ks { samples: n, epochs, ks_empirical: cdf.ks_distance(&empirical), ks_analytic_grid: gap });
            curves.push(CdfCurve { series: "gan", samples: n, epochs, cdf: on_grid });
            synthetic.push((n, epochs, draws));
        }
    }
    Ok(Fig1Report { grid, curves, ks, synthetic })
}

/// Closed-form outage table at the online operating point.
pub fn analytic_table(config: &ExperimentConfig) -> Result<OutageTable, ReportError> {
    let setup = Setup::new(config)?;
    let t = experiment::gain_threshold(config, config.online_snr_db, config.online_payload_bytes)?;
    Ok(setup.analytic_outages(config, t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AlphaSource;

    #[test]
    fn table1_rows_cover_levels_and_instants() {
        let rows = table1_report(&ExperimentConfig::default()).unwrap();
        assert_eq!(rows.len(), 8);
        let find = |b, t| rows.iter().find(|r| r.quality == b && r.instant == t).unwrap().outage.log10();
        assert!((find(1, 1) + 6.56).abs() < 0.07);
        assert!((find(0, 2) + 3.81).abs() < 0.07);
        assert!((find(0, 500) + 3.95).abs() < 0.02);
    }

    #[test]
    fn oracle_summary_marginalizes_the_other_actuator() {
        let c = ExperimentConfig { frames: 1, slots: 200, alpha_source: AlphaSource::Oracle, ..ExperimentConfig::default() };
        let setup = Setup::new(&c).unwrap();
        let m = online::run_online(&c).unwrap();
        let rows = summarize(&c, &setup, &m, 1);
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!((r.proposed - r.optimal).abs() <= 1e-12 * r.optimal);
            assert!(r.proposed <= r.baseline);
        }
    }

    #[test]
    fn fig1_report_is_structurally_complete() {
        let mut c = ExperimentConfig { fig1_samples: vec![200], fig1_epochs: vec![1, 2], fig1_synthetic: 1000, fig1_grid: 20, ..ExperimentConfig::default() };
        c.gan.synthetic_count = 1000;
        let r = fig1_report(&c).unwrap();
        assert_eq!(r.curves.len(), 1 + 1 + 2);
        assert!(r.curves.iter().all(|cv| cv.cdf.len() == 20));
        assert_eq!(r.ks.len(), 2);
        let analytic = &r.curves[0].cdf;
        assert!(analytic.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(*analytic.last().unwrap() > 0.99);
    }
}
