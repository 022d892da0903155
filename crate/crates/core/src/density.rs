//! Sample sets, tail estimates and the per-schedule success sums.
//!
//! Actuators are indexed from 0, instants from 1 (instant 0 is the observation
//! instant) and quality levels from 0.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::{self, ChannelParams, QualityScheme};
use crate::gan::TrainedGenerator;
use crate::scheduler::SchedulingVector;
use crate::specfun::QuadratureSpec;
use crate::{Error, Result};

/// One (actuator, instant, quality) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub actuator: usize,
    pub instant: usize,
    pub quality: usize,
}

impl Cell {
    pub fn new(actuator: usize, instant: usize, quality: usize) -> Self {
        Self { actuator, instant, quality }
    }
}

/// Observed gains per cell, accumulated over frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    num_actuators: usize,
    num_instants: usize,
    num_levels: usize,
    cells: Vec<Vec<f64>>,
    frame: u64,
}

impl SampleStore {
    pub fn new(num_actuators: usize, num_instants: usize, num_levels: usize) -> Self {
        Self {
            num_actuators,
            num_instants,
            num_levels,
            cells: (0..num_actuators * num_instants * num_levels).map(|_| Vec::new()).collect(),
            frame: 0,
        }
    }

    fn index(&self, cell: Cell) -> Result<usize> {
        let Cell { actuator, instant, quality } = cell;
        if actuator >= self.num_actuators
            || instant == 0
            || instant > self.num_instants
            || quality >= self.num_levels
        {
            return Err(Error::MissingCell { actuator, instant, quality });
        }
        Ok((actuator * self.num_instants + (instant - 1)) * self.num_levels + quality)
    }

    /// Appends one observed gain.
    pub fn push(&mut self, cell: Cell, gain: f64) -> Result<()> {
        if !(gain >= 0.0) || !gain.is_finite() {
            return Err(Error::Domain { what: "observed gain", value: gain });
        }
        let i = self.index(cell)?;
        self.cells[i].push(gain);
        Ok(())
    }

    pub fn samples(&self, cell: Cell) -> Result<&[f64]> {
        self.index(cell).map(|i| self.cells[i].as_slice())
    }

    /// Total number of gains stored for one actuator.
    pub fn actuator_total(&self, actuator: usize) -> usize {
        let per = self.num_instants * self.num_levels;
        self.cells[actuator * per..(actuator + 1) * per].iter().map(Vec::len).sum()
    }

    /// Number of completed frames.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn finish_frame(&mut self) {
        self.frame += 1;
    }

    /// All cells in (actuator, instant, quality) order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (t, l) = (self.num_instants, self.num_levels);
        (0..self.num_actuators)
            .flat_map(move |k| (1..=t).flat_map(move |tau| (0..l).map(move |b| Cell::new(k, tau, b))))
    }

    pub fn num_actuators(&self) -> usize {
        self.num_actuators
    }

    pub fn num_instants(&self) -> usize {
        self.num_instants
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }
}

/// Fraction of `samples` at or above `threshold`.
pub fn tail_probability(samples: &[f64], threshold: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Sizing { needed: 1, available: 0 });
    }
    let hits = samples.iter().filter(|&&g| g >= threshold).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// A synthetic sample set kept sorted so tail queries are logarithmic.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    sorted: Vec<f64>,
}

impl SyntheticSet {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Sizing { needed: 1, available: 0 });
        }
        samples.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    /// Draws `count` samples from a trained generator.
    pub fn from_generator<R: Rng + ?Sized>(
        generator: &TrainedGenerator,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(generator.sample(count, rng))
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn as_sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples at or above `threshold`.
    pub fn tail_probability(&self, threshold: f64) -> f64 {
        let below = self.sorted.partition_point(|&g| g < threshold);
        (self.sorted.len() - below) as f64 / self.sorted.len() as f64
    }

    /// Number of samples strictly below `threshold`.
    pub fn count_below(&self, threshold: f64) -> usize {
        self.sorted.partition_point(|&g| g < threshold)
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Sizing { needed: 1, available: 0 });
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// `F(x) = #{samples <= x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// Two-sample Kolmogorov-Smirnov statistic, the supremum of `|F_a - F_b|`
    /// over the merged jump points.
    pub fn ks_distance(&self, other: &EmpiricalCdf) -> f64 {
        let (a, b) = (&self.sorted, &other.sorted);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0, 0);
        let mut worst: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let x = if a[i] <= b[j] { a[i] } else { b[j] };
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            worst = worst.max(libm::fabs(i as f64 / na - j as f64 / nb));
        }
        worst
    }

    /// One-sample KS statistic against a continuous CDF, checking both sides
    /// of every jump.
    pub fn ks_distance_to<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        let mut worst: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let before = i as f64 / n;
            while i < self.sorted.len() && self.sorted[i] == x {
                i += 1;
            }
            let after = i as f64 / n;
            let f = cdf(x);
            worst = worst.max(libm::fabs(f - before)).max(libm::fabs(after - f));
        }
        worst
    }
}

/// Builds the empirical CDF of `samples`.
pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// Two-sample KS distance.
pub fn ks_distance(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    a.ks_distance(b)
}

/// Per-cell success probability of a scheduled transmission, conditioned on
/// the actuator's own quality level.
pub trait SuccessModel {
    fn success(&self, cell: Cell) -> Result<f64>;

    /// Complement of [`success`](Self::success); models that can evaluate it
    /// without cancellation override this.
    fn outage(&self, cell: Cell) -> Result<f64> {
        self.success(cell).map(|s| 1.0 - s)
    }
}

/// Per-cell outage probabilities held in a table, filled either from the
/// closed-form conditional law or from any other estimate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutageTable {
    outages: BTreeMap<Cell, f64>,
}

impl OutageTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tabulates the closed-form outage of every cell. `links[k]` describes
    /// actuator `k`; only instants up to each deadline are included.
    pub fn analytic(
        links: &[ChannelParams],
        scheme: &QualityScheme,
        threshold: f64,
        quad: &QuadratureSpec,
    ) -> Result<Self> {
        let mut table = Self::new();
        for (k, link) in links.iter().enumerate() {
            for tau in 1..=link.deadline() {
                for b in 0..scheme.num_levels() {
                    let p = channel::outage_given_quality(b, scheme, link, tau, threshold, quad)?;
                    table.insert(Cell::new(k, tau, b), p)?;
                }
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, cell: Cell, outage: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&outage) {
            return Err(Error::Domain { what: "outage probability", value: outage });
        }
        self.outages.insert(cell, outage);
        Ok(())
    }

    pub fn get(&self, cell: Cell) -> Option<f64> {
        self.outages.get(&cell).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        self.outages.iter().map(|(c, p)| (*c, *p))
    }

    pub fn len(&self) -> usize {
        self.outages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outages.is_empty()
    }

    fn lookup(&self, cell: Cell) -> Result<f64> {
        self.get(cell).ok_or(Error::MissingCell {
            actuator: cell.actuator,
            instant: cell.instant,
            quality: cell.quality,
        })
    }
}

impl SuccessModel for OutageTable {
    fn success(&self, cell: Cell) -> Result<f64> {
        self.lookup(cell).map(|p| 1.0 - p)
    }

    fn outage(&self, cell: Cell) -> Result<f64> {
        self.lookup(cell)
    }
}

/// Success probabilities estimated from synthetic sample sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    sets: BTreeMap<Cell, SyntheticSet>,
    threshold: f64,
}

impl SyntheticModel {
    pub fn new(sets: BTreeMap<Cell, SyntheticSet>, threshold: f64) -> Self {
        Self { sets, threshold }
    }

    /// Samples `count` synthetic gains from every generator.
    pub fn from_generators<R: Rng + ?Sized>(
        generators: &BTreeMap<Cell, TrainedGenerator>,
        threshold: f64,
        count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut sets = BTreeMap::new();
        for (cell, g) in generators {
            sets.insert(*cell, SyntheticSet::from_generator(g, count, rng)?);
        }
        Ok(Self { sets, threshold })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(&self, threshold: f64) -> Self {
        Self { sets: self.sets.clone(), threshold }
    }

    pub fn set(&self, cell: Cell) -> Option<&SyntheticSet> {
        self.sets.get(&cell)
    }

    pub fn sets(&self) -> &BTreeMap<Cell, SyntheticSet> {
        &self.sets
    }
}

impl SuccessModel for SyntheticModel {
    fn success(&self, cell: Cell) -> Result<f64> {
        self.sets.get(&cell).map(|s| s.tail_probability(self.threshold)).ok_or(Error::MissingCell {
            actuator: cell.actuator,
            instant: cell.instant,
            quality: cell.quality,
        })
    }

    fn outage(&self, cell: Cell) -> Result<f64> {
        let set = self.sets.get(&cell).ok_or(Error::MissingCell {
            actuator: cell.actuator,
            instant: cell.instant,
            quality: cell.quality,
        })?;
        Ok(set.count_below(self.threshold) as f64 / set.len() as f64)
    }
}

/// Sum over actuators of the success probability at each actuator's
/// scheduled instant, each conditioned on that actuator's own quality.
pub fn alpha_hat<M: SuccessModel + ?Sized>(
    model: &M,
    quality: &[usize],
    schedule: &SchedulingVector,
) -> Result<f64> {
    let instants = schedule.instants();
    if quality.len() != instants.len() {
        return Err(Error::Shape { expected: instants.len(), found: quality.len() });
    }
    let mut total = 0.0;
    for (k, (&tau, &b)) in instants.iter().zip(quality).enumerate() {
        total += model.success(Cell::new(k, tau, b))?;
    }
    Ok(total)
}

/// Per-actuator outage at each scheduled instant.
pub fn outages<M: SuccessModel + ?Sized>(
    model: &M,
    quality: &[usize],
    schedule: &SchedulingVector,
) -> Result<Vec<f64>> {
    let instants = schedule.instants();
    if quality.len() != instants.len() {
        return Err(Error::Shape { expected: instants.len(), found: quality.len() });
    }
    instants
        .iter()
        .zip(quality)
        .enumerate()
        .map(|(k, (&tau, &b))| model.outage(Cell::new(k, tau, b)))
        .collect()
}

/// Enumerates quality vectors in mixed-radix order, the first actuator most
/// significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualitySpace {
    levels: Vec<usize>,
}

impl QualitySpace {
    pub fn new(levels: Vec<usize>) -> Result<Self> {
        if levels.is_empty() || levels.contains(&0) {
            return Err(Error::InvalidParameter("every actuator needs at least one quality level"));
        }
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_actuators(&self) -> usize {
        self.levels.len()
    }

    pub fn index_of(&self, quality: &[usize]) -> Result<usize> {
        if quality.len() != self.levels.len() {
            return Err(Error::Shape { expected: self.levels.len(), found: quality.len() });
        }
        let mut idx = 0;
        for (&b, &n) in quality.iter().zip(&self.levels) {
            if b >= n {
                return Err(Error::Domain { what: "quality level", value: b as f64 });
            }
            idx = idx * n + b;
        }
        Ok(idx)
    }

    pub fn vector(&self, mut index: usize) -> Vec<usize> {
        let mut out = alloc::vec![0; self.levels.len()];
        for (slot, &n) in out.iter_mut().zip(&self.levels).rev() {
            *slot = index % n;
            index /= n;
        }
        out
    }

    pub fn vectors(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(|i| self.vector(i))
    }
}

/// `alpha_hat` for every (quality vector, schedule) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTable {
    space: QualitySpace,
    num_schedules: usize,
    values: Vec<f64>,
}

impl AlphaTable {
    pub fn build<M: SuccessModel + ?Sized>(
        model: &M,
        space: &QualitySpace,
        schedules: &[SchedulingVector],
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(space.len() * schedules.len());
        for b in space.vectors() {
            for s in schedules {
                values.push(alpha_hat(model, &b, s)?);
            }
        }
        Ok(Self { space: space.clone(), num_schedules: schedules.len(), values })
    }

    pub fn space(&self) -> &QualitySpace {
        &self.space
    }

    /// Values for quality vector index `b` over all schedules.
    pub fn row(&self, b: usize) -> &[f64] {
        &self.values[b * self.num_schedules..(b + 1) * self.num_schedules]
    }

    pub fn get(&self, b: usize, s: usize) -> f64 {
        self.values[b * self.num_schedules + s]
    }

    pub fn num_schedules(&self) -> usize {
        self.num_schedules
    }
}
