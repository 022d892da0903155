//! The online loop: per-slot scheduling from the current policy, sample
//! collection, per-frame GAN training and the policy update.

use std::collections::BTreeMap;

use gansched_core::channel;
use gansched_core::density::{
    AlphaTable, Cell, EmpiricalCdf, OutageTable, SampleStore, SuccessModel,
};
use gansched_core::gan::{self, TrainedGenerator};
use gansched_core::scheduler::{self, PolicyTable, SchedulingVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{AlphaSource, ExperimentConfig};
use crate::experiment::{self, Setup};

const SLOT_STREAM: u64 = 1;
const GAN_STREAM: u64 = 2;
const SAMPLE_CHUNK: usize = 1 << 20;

/// Outcome for one quality vector at the end of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityRecord {
    pub frame: u64,
    pub quality_index: usize,
    pub quality: Vec<usize>,
    /// Index of the most probable schedule in the updated policy row.
    pub argmax_schedule: usize,
    /// Per-actuator outage at the argmax schedule according to the estimate.
    pub predicted: Vec<f64>,
    /// Closed-form outage at the argmax schedule.
    pub achieved: Vec<f64>,
    /// Closed-form outage averaged over the updated policy row.
    pub mixture: Vec<f64>,
    /// Closed-form outage of the best schedule.
    pub optimal: Vec<f64>,
    /// Closed-form outage of the uniform random schedule.
    pub baseline: Vec<f64>,
    /// Updated policy row.
    pub policy: Vec<f64>,
}

/// Estimate for one (actuator, instant, quality) cell at the end of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub frame: u64,
    pub cell: Cell,
    pub samples: usize,
    pub predicted_outage: f64,
    pub analytic_outage: f64,
    /// KS distance between synthetic and observed gains (GAN mode only).
    pub ks: Option<f64>,
}

/// Observed transmissions in one frame for one actuator and quality level.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotCounts {
    pub frame: u64,
    pub actuator: usize,
    pub quality: usize,
    pub attempts: u64,
    pub failures: u64,
}

#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub snr_db: f64,
    pub payload_bytes: f64,
    pub threshold: f64,
    pub schedules: Vec<SchedulingVector>,
    pub qualities: Vec<QualityRecord>,
    pub cells: Vec<CellRecord>,
    pub counts: Vec<SlotCounts>,
    pub frames_run: u64,
    pub stopped_early: bool,
    pub policy: PolicyTable,
    pub store: SampleStore,
    /// Generators of the last completed frame (GAN mode).
    pub generators: BTreeMap<Cell, TrainedGenerator>,
}

impl RunMetrics {
    /// Records of the last completed frame, one per quality vector.
    pub fn final_qualities(&self) -> &[QualityRecord] {
        let n = self.policy.num_rows();
        &self.qualities[self.qualities.len().saturating_sub(n)..]
    }
}

#[derive(Debug, thiserror::Error)]
#[error("frame {frame} failed: {source}")]
pub struct OnlineError {
    pub frame: u64,
    pub partial: Box<RunMetrics>,
    #[source]
    pub source: gansched_core::Error,
}

/// Runs the loop at the configured online operating point.
pub fn run_online(config: &ExperimentConfig) -> Result<RunMetrics, OnlineError> {
    run_online_at(config, config.online_snr_db, config.online_payload_bytes, &mut |_| {})
}

/// Runs the loop at a given SNR and payload, calling `observer` after every
/// completed frame.
pub fn run_online_at(
    config: &ExperimentConfig,
    snr_db: f64,
    payload_bytes: f64,
    observer: &mut dyn FnMut(&RunMetrics),
) -> Result<RunMetrics, OnlineError> {
    let fail = |frame, partial, source| OnlineError { frame, partial: Box::new(partial), source };
    let setup = match Setup::new(config) {
        Ok(s) => s,
        Err(e) => return Err(fail(0, empty_metrics(config, snr_db, payload_bytes, 0.0, Vec::new()), e)),
    };
    let threshold = match experiment::gain_threshold(config, snr_db, payload_bytes) {
        Ok(t) => t,
        Err(e) => return Err(fail(0, empty_metrics(config, snr_db, payload_bytes, 0.0, setup.schedules), e)),
    };
    let mut metrics = empty_metrics(config, snr_db, payload_bytes, threshold, setup.schedules.clone());
    let analytic = match setup.analytic_outages(config, threshold) {
        Ok(a) => a,
        Err(e) => return Err(fail(0, metrics, e)),
    };
    let optimal = match optimal_outages(&setup, &analytic) {
        Ok(o) => o,
        Err(e) => return Err(fail(0, metrics, e)),
    };

    for n in 1..=config.frames as u64 {
        if let Err(e) = run_frame(config, &setup, &analytic, &optimal, threshold, n, &mut metrics) {
            return Err(fail(n, metrics, e));
        }
        observer(&metrics);
        if metrics.stopped_early {
            break;
        }
    }
    Ok(metrics)
}

fn empty_metrics(
    config: &ExperimentConfig,
    snr_db: f64,
    payload_bytes: f64,
    threshold: f64,
    schedules: Vec<SchedulingVector>,
) -> RunMetrics {
    let levels = config.quality_boundaries.len() + 1;
    let rows = levels.pow(config.num_actuators() as u32);
    RunMetrics {
        snr_db,
        payload_bytes,
        threshold,
        policy: PolicyTable::uniform(rows, schedules.len().max(1)).expect("nonempty table"),
        schedules,
        qualities: Vec::new(),
        cells: Vec::new(),
        counts: Vec::new(),
        frames_run: 0,
        stopped_early: false,
        store: SampleStore::new(config.num_actuators(), config.num_instants, levels),
        generators: BTreeMap::new(),
    }
}

fn optimal_outages(setup: &Setup, analytic: &OutageTable) -> gansched_core::Result<Vec<Vec<f64>>> {
    setup
        .space
        .vectors()
        .map(|q| experiment::oracle_optimal_with(setup, analytic, &q).map(|(_, o)| o))
        .collect()
}

fn run_frame(
    config: &ExperimentConfig,
    setup: &Setup,
    analytic: &OutageTable,
    optimal: &[Vec<f64>],
    threshold: f64,
    n: u64,
    metrics: &mut RunMetrics,
) -> gansched_core::Result<()> {
    let k_count = setup.num_actuators();
    let levels = setup.scheme.num_levels();
    let mut attempts = vec![0u64; k_count * levels];
    let mut failures = vec![0u64; k_count * levels];
    let mut rng = ChaCha8Rng::seed_from_u64(experiment::stream_seed(config.seed, &[SLOT_STREAM, n]));
    let mut h0 = Vec::with_capacity(k_count);
    let mut quality = vec![0usize; k_count];
    for _ in 0..config.slots {
        h0.clear();
        for q in quality.iter_mut() {
            let h = channel::draw_initial(&mut rng);
            *q = setup.scheme.quantize(h.gain());
            h0.push(h);
        }
        let b = setup.space.index_of(&quality)?;
        let s = scheduler::sample_schedule(metrics.policy.row(b), &setup.schedules, &mut rng);
        for (k, &tau) in s.instants().iter().enumerate() {
            let h = channel::draw_conditional(&h0[k], &setup.links[k], tau, &mut rng)?;
            let gain = h.gain();
            metrics.store.push(Cell::new(k, tau, quality[k]), gain)?;
            attempts[k * levels + quality[k]] += 1;
            if gain < threshold {
                failures[k * levels + quality[k]] += 1;
            }
        }
    }
    metrics.store.finish_frame();
    for k in 0..k_count {
        for l in 0..levels {
            metrics.counts.push(SlotCounts {
                frame: n,
                actuator: k,
                quality: l,
                attempts: attempts[k * levels + l],
                failures: failures[k * levels + l],
            });
        }
    }

    let estimate = match config.alpha_source {
        AlphaSource::Oracle => {
            for (cell, p) in analytic.iter() {
                metrics.cells.push(CellRecord {
                    frame: n,
                    cell,
                    samples: metrics.store.samples(cell).map(<[f64]>::len).unwrap_or(0),
                    predicted_outage: p,
                    analytic_outage: p,
                    ks: None,
                });
            }
            analytic.clone()
        }
        AlphaSource::Gan => gan_estimate(config, analytic, threshold, n, metrics)?,
    };

    let alpha = AlphaTable::build(&estimate, &setup.space, &setup.schedules)?;
    let previous = metrics.policy.clone();
    let xi = config.xi.value(n);
    for b in 0..setup.space.len() {
        let beta = scheduler::softmax_policy(alpha.row(b), xi);
        metrics.policy.update_row(b, &beta)?;
    }
    metrics.policy.advance();
    metrics.frames_run = n;

    for (b, q) in setup.space.vectors().enumerate() {
        let row = metrics.policy.row(b).to_vec();
        let best = scheduler::argmax(&row);
        let s = &setup.schedules[best];
        metrics.qualities.push(QualityRecord {
            frame: n,
            quality_index: b,
            predicted: gansched_core::density::outages(&estimate, &q, s)?,
            achieved: gansched_core::density::outages(analytic, &q, s)?,
            mixture: setup.mixture_outages(analytic, &q, &row)?,
            optimal: optimal[b].clone(),
            baseline: setup.baseline_outages(analytic, &q)?,
            argmax_schedule: best,
            quality: q,
            policy: row,
        });
    }
    if config.stop_tolerance > 0.0 && previous.max_abs_difference(&metrics.policy) < config.stop_tolerance {
        metrics.stopped_early = true;
    }
    Ok(())
}

fn gan_estimate(
    config: &ExperimentConfig,
    analytic: &OutageTable,
    threshold: f64,
    n: u64,
    metrics: &mut RunMetrics,
) -> gansched_core::Result<OutageTable> {
    let mut table = OutageTable::new();
    let mut generators = BTreeMap::new();
    let cells: Vec<Cell> = analytic.iter().map(|(c, _)| c).collect();
    let mut buffer = Vec::with_capacity(SAMPLE_CHUNK.min(config.gan.synthetic_count));
    for (i, cell) in cells.into_iter().enumerate() {
        let observed = metrics.store.samples(cell)?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(experiment::stream_seed(config.seed, &[GAN_STREAM, n, i as u64]));
        let trained = gan::train(observed, &config.gan, &mut rng)?;

        let mut below = 0usize;
        let mut remaining = config.gan.synthetic_count;
        let mut ks = None;
        while remaining > 0 {
            let take = remaining.min(SAMPLE_CHUNK);
            buffer.clear();
            trained.sample_into(take, &mut rng, &mut buffer);
            below += buffer.iter().filter(|&&g| g < threshold).count();
            if ks.is_none() {
                let head = &buffer[..config.ks_synthetic.min(buffer.len())];
                ks = Some(EmpiricalCdf::new(head)?.ks_distance(&EmpiricalCdf::new(observed)?));
            }
            remaining -= take;
        }
        let predicted = below as f64 / config.gan.synthetic_count as f64;
        table.insert(cell, predicted)?;
        metrics.cells.push(CellRecord {
            frame: n,
            cell,
            samples: observed.len(),
            predicted_outage: predicted,
            analytic_outage: analytic.outage(cell)?,
            ks,
        });
        generators.insert(cell, trained);
    }
    metrics.generators = generators;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(source: AlphaSource) -> ExperimentConfig {
        let mut c = ExperimentConfig { slots: 1500, frames: 2, alpha_source: source, ..ExperimentConfig::default() };
        c.gan.epochs = 2;
        c.gan.synthetic_count = 20_000;
        c.ks_synthetic = 5_000;
        c
    }

    #[test]
    fn store_grows_by_slots_per_actuator() {
        let c = small(AlphaSource::Oracle);
        let m = run_online(&c).unwrap();
        for k in 0..2 {
            assert_eq!(m.store.actuator_total(k), 2 * 1500);
        }
        assert_eq!(m.frames_run, 2);
        assert_eq!(m.qualities.len(), 2 * 4);
        for r in &m.qualities {
            assert!((r.policy.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_frame_fills_every_cell() {
        let c = ExperimentConfig { frames: 1, alpha_source: AlphaSource::Oracle, ..ExperimentConfig::default() };
        let m = run_online(&c).unwrap();
        assert!(m.store.cells().all(|cell| !m.store.samples(cell).unwrap().is_empty()));
    }

    #[test]
    fn replay_is_deterministic() {
        let c = small(AlphaSource::Gan);
        let a = run_online(&c).unwrap();
        let b = run_online(&c).unwrap();
        assert_eq!(a.qualities, b.qualities);
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.counts, b.counts);
        assert!(a.cells.iter().all(|r| r.ks.is_some()));
    }

    #[test]
    fn frame_failure_returns_partial_metrics() {
        let mut c = small(AlphaSource::Gan);
        c.slots = 60;
        let err = run_online(&c).unwrap_err();
        assert_eq!(err.frame, 1);
        assert_eq!(err.partial.store.frame(), 1);
        assert!(matches!(err.source, gansched_core::Error::Sizing { .. }));
    }

    #[test]
    fn stop_rule_ends_the_run() {
        let c = ExperimentConfig {
            frames: 50,
            slots: 100,
            stop_tolerance: 1e-3,
            alpha_source: AlphaSource::Oracle,
            ..ExperimentConfig::default()
        };
        let m = run_online(&c).unwrap();
        assert!(m.stopped_early);
        assert!(m.frames_run < 50);
    }
}
