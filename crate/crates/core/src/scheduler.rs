//! Schedule enumeration, the entropy-regularized softmax policy and its
//! cumulative-moving-average update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// Scheduled instant (1-based) of every actuator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchedulingVector {
    instants: Vec<usize>,
}

impl SchedulingVector {
    pub fn new(instants: Vec<usize>) -> Self {
        Self { instants }
    }

    pub fn instants(&self) -> &[usize] {
        &self.instants
    }

    pub fn num_actuators(&self) -> usize {
        self.instants.len()
    }

    /// Checks deadlines and the per-instant transmission limit.
    pub fn is_feasible(&self, deadlines: &[usize], max_simultaneous: usize) -> bool {
        if self.instants.len() != deadlines.len() {
            return false;
        }
        if self.instants.iter().zip(deadlines).any(|(&t, &d)| t == 0 || t > d) {
            return false;
        }
        let horizon = deadlines.iter().copied().max().unwrap_or(0);
        let mut load = vec![0usize; horizon + 1];
        for &t in &self.instants {
            load[t] += 1;
            if load[t] > max_simultaneous {
                return false;
            }
        }
        true
    }

    /// The binary assignment matrix, `K` rows of `horizon` entries.
    pub fn to_matrix(&self, horizon: usize) -> Vec<Vec<u8>> {
        self.instants
            .iter()
            .map(|&t| (1..=horizon).map(|tau| u8::from(tau == t)).collect())
            .collect()
    }
}

/// All feasible schedules in lexicographic order of `(tau_1, tau_2, ...)`.
pub fn enumerate_schedules(deadlines: &[usize], max_simultaneous: usize) -> Result<Vec<SchedulingVector>> {
    if deadlines.is_empty() {
        return Err(Error::InvalidParameter("at least one actuator is required"));
    }
    if max_simultaneous == 0 {
        return Err(Error::InvalidParameter("max_simultaneous must be at least 1"));
    }
    if deadlines.contains(&0) {
        return Err(Error::InvalidParameter("deadlines must be at least 1"));
    }
    let horizon = deadlines.iter().copied().max().unwrap_or(0);
    let mut load = vec![0usize; horizon + 1];
    let mut current = Vec::with_capacity(deadlines.len());
    let mut out = Vec::new();
    extend(deadlines, max_simultaneous, &mut load, &mut current, &mut out);
    if out.is_empty() {
        return Err(Error::Infeasible);
    }
    Ok(out)
}

fn extend(
    deadlines: &[usize],
    cap: usize,
    load: &mut [usize],
    current: &mut Vec<usize>,
    out: &mut Vec<SchedulingVector>,
) {
    let k = current.len();
    if k == deadlines.len() {
        out.push(SchedulingVector::new(current.clone()));
        return;
    }
    for tau in 1..=deadlines[k] {
        if load[tau] < cap {
            load[tau] += 1;
            current.push(tau);
            extend(deadlines, cap, load, current, out);
            current.pop();
            load[tau] -= 1;
        }
    }
}

/// `beta_s ∝ exp(alpha_s / xi)`.
pub fn softmax_policy(alpha: &[f64], xi: f64) -> Vec<f64> {
    let top = alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut beta: Vec<f64> = alpha.iter().map(|&a| libm::exp((a - top) / xi)).collect();
    let total: f64 = beta.iter().sum();
    for b in &mut beta {
        *b /= total;
    }
    beta
}

/// Expected sum success plus `xi` times the entropy of `beta`.
pub fn regularized_objective(beta: &[f64], alpha: &[f64], xi: f64) -> f64 {
    beta.iter()
        .zip(alpha)
        .map(|(&b, &a)| if b > 0.0 { b * a - xi * b * libm::log(b) } else { 0.0 })
        .sum()
}

/// `pi + (beta - pi) / n`, written into `pi`.
pub fn update_policy_in_place(pi: &mut [f64], beta: &[f64], n: u64) {
    let w = 1.0 / n as f64;
    for (p, &b) in pi.iter_mut().zip(beta) {
        *p += (b - *p) * w;
    }
}

/// `pi + (beta - pi) / n`.
pub fn update_policy(pi: &[f64], beta: &[f64], n: u64) -> Vec<f64> {
    let mut next = pi.to_vec();
    update_policy_in_place(&mut next, beta, n);
    next
}

/// Index of the largest entry, the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Categorical draw over indices.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probabilities.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Draws a schedule from a policy row laid out in the order of `schedules`.
pub fn sample_schedule<'a, R: Rng + ?Sized>(
    policy_row: &[f64],
    schedules: &'a [SchedulingVector],
    rng: &mut R,
) -> &'a SchedulingVector {
    &schedules[sample_index(policy_row, rng)]
}

/// Uniform draw over the feasible schedules.
pub fn random_baseline<'a, R: Rng + ?Sized>(schedules: &'a [SchedulingVector], rng: &mut R) -> &'a SchedulingVector {
    &schedules[rng.random_range(0..schedules.len())]
}

/// Decay law of the entropy weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiSchedule {
    /// `xi0 / n`.
    Harmonic { xi0: f64 },
    /// `xi0 * rate^n`.
    Exponential { xi0: f64, rate: f64 },
}

impl Default for XiSchedule {
    fn default() -> Self {
        XiSchedule::Harmonic { xi0: 0.5 }
    }
}

impl XiSchedule {
    pub fn harmonic(xi0: f64) -> Result<Self> {
        if !(xi0 > 0.0) || !xi0.is_finite() {
            return Err(Error::Domain { what: "xi0", value: xi0 });
        }
        Ok(XiSchedule::Harmonic { xi0 })
    }

    pub fn exponential(xi0: f64, rate: f64) -> Result<Self> {
        if !(xi0 > 0.0) || !xi0.is_finite() {
            return Err(Error::Domain { what: "xi0", value: xi0 });
        }
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Domain { what: "xi decay rate", value: rate });
        }
        Ok(XiSchedule::Exponential { xi0, rate })
    }

    /// Value at frame `n >= 1`, floored at the smallest positive normal.
    pub fn value(&self, n: u64) -> f64 {
        let n = n.max(1);
        let v = match *self {
            XiSchedule::Harmonic { xi0 } => xi0 / n as f64,
            XiSchedule::Exponential { xi0, rate } => xi0 * libm::pow(rate, n as f64),
        };
        v.max(f64::MIN_POSITIVE)
    }
}

/// Free-function form of [`XiSchedule::value`].
pub fn xi_value(schedule: &XiSchedule, n: u64) -> f64 {
    schedule.value(n)
}

/// One probability row per quality vector over a shared schedule list.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    num_schedules: usize,
    rows: Vec<f64>,
    frame: u64,
}

impl PolicyTable {
    /// Uniform rows at frame 1.
    pub fn uniform(num_rows: usize, num_schedules: usize) -> Result<Self> {
        if num_rows == 0 || num_schedules == 0 {
            return Err(Error::InvalidParameter("policy table needs at least one row and one schedule"));
        }
        let p = 1.0 / num_schedules as f64;
        Ok(Self { num_schedules, rows: vec![p; num_rows * num_schedules], frame: 1 })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len() / self.num_schedules
    }

    pub fn num_schedules(&self) -> usize {
        self.num_schedules
    }

    /// Current frame index `n`.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.rows[b * self.num_schedules..(b + 1) * self.num_schedules]
    }

    /// Applies the CMA step to row `b` with the current frame index.
    pub fn update_row(&mut self, b: usize, beta: &[f64]) -> Result<()> {
        if beta.len() != self.num_schedules {
            return Err(Error::Shape { expected: self.num_schedules, found: beta.len() });
        }
        let n = self.frame;
        let row = &mut self.rows[b * self.num_schedules..(b + 1) * self.num_schedules];
        update_policy_in_place(row, beta, n);
        Ok(())
    }

    /// Advances `n` and returns the new value.
    pub fn advance(&mut self) -> u64 {
        self.frame += 1;
        self.frame
    }

    pub fn argmax(&self, b: usize) -> usize {
        argmax(self.row(b))
    }

    /// Largest absolute entry difference between two tables of equal shape.
    pub fn max_abs_difference(&self, other: &PolicyTable) -> f64 {
        self.rows.iter().zip(&other.rows).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max)
    }
}
