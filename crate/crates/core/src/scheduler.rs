//! Greedy device scheduling.
//!
//! All schedulers search for a large set `S` and a unit-norm receiver `c`
//! such that every scheduled device meets its error constraint
//! `F_k(c) = φ_k² − γ |h_kᴴc|² ≤ 0`. Starting from the full set, each
//! iteration sets `c` to the dominant eigenvector of `Σ_{k∈S} w_k h_k h_kᴴ`
//! and drops the worst device until the remaining set is feasible. The
//! weights `w_k` follow the subset-cutting rule: devices currently violating
//! their constraint get `δ`, the others `1 − δ`.

use num_complex::Complex64;
use rand::Rng;

use crate::coordination::check_weights;
use crate::error::{Error, Result};
use crate::numerics::{
    dominant_eigenpair, inner, random_unit_vector, ComplexMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Slack on the analytic feasibility boundary `F_k ≤ 0`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Subset-cutting weight rule `Π(x) = δ` if `x > 0`, else `1 − δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPolicy {
    delta: f64,
}

impl WeightPolicy {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn weight(&self, indicator: f64) -> f64 {
        if indicator > 0.0 {
            self.delta
        } else {
            1.0 - self.delta
        }
    }

    /// Weights for every device: `Π(F_k)` on `active`, zero elsewhere.
    pub fn weights(&self, indicators: &[f64], active: &[usize]) -> Vec<f64> {
        let mut w = vec![0.0; indicators.len()];
        for &k in active {
            w[k] = self.weight(indicators[k]);
        }
        w
    }
}

impl Default for WeightPolicy {
    fn default() -> Self {
        Self { delta: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Pure backward elimination.
    Backward,
    /// Backward elimination with re-insertion of removed devices.
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    /// Error tolerance `γ` on linear scale.
    pub gamma: f64,
    pub policy: WeightPolicy,
    pub mode: Mode,
    /// Record a [`SchedulerState`] per iteration.
    pub trace: bool,
}

impl SchedulerConfig {
    pub fn new(gamma: f64, policy: WeightPolicy) -> Self {
        Self {
            gamma,
            policy,
            mode: Mode::Backward,
            trace: false,
        }
    }

    pub fn bidirectional(mut self) -> Self {
        self.mode = Mode::Bidirectional;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }
}

/// Snapshot of one scheduler iteration, taken after the receiver update.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    /// 1-based iteration index.
    pub t: usize,
    /// Active set the receiver was computed for.
    pub active: Vec<usize>,
    pub weights: Vec<f64>,
    pub receiver: Vec<Complex64>,
    pub indicators: Vec<f64>,
    /// `max_{k∈S} F_k`.
    pub max_indicator: f64,
    /// Device removed at the end of this iteration, if any.
    pub removed: Option<usize>,
    /// Devices put back during this iteration.
    pub reinserted: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleStatus {
    Scheduled,
    /// Every device was eliminated.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    pub status: ScheduleStatus,
    /// Scheduled devices in ascending order.
    pub devices: Vec<usize>,
    /// Unit-norm receiver; for an empty outcome, the last receiver computed.
    pub receiver: Vec<Complex64>,
    pub iterations: usize,
    pub trace: Vec<SchedulerState>,
}

impl ScheduleOutcome {
    pub fn size(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }
}

/// `F_k(c) = φ_k² − γ |h_kᴴc|²` for every device.
pub fn constraint_indicators(h: &ComplexMatrix, c: &[Complex64], phi: &[f64], gamma: f64) -> Vec<f64> {
    (0..h.cols())
        .map(|k| phi[k] * phi[k] - gamma * inner(&h.column(k), c).norm_sqr())
        .collect()
}

/// Whether `c` certifies every device in `devices`.
pub fn is_feasible(h: &ComplexMatrix, c: &[Complex64], devices: &[usize], phi: &[f64], gamma: f64) -> bool {
    let f = constraint_indicators(h, c, phi, gamma);
    devices.iter().all(|&k| f[k] <= FEASIBILITY_TOL)
}

/// Dominant eigenvector of `Σ_k w_k h_k h_kᴴ`, i.e. the leading left
/// singular vector of `H diag(sqrt(w))`.
///
/// A power iteration that exhausts its budget still returns its iterate: any
/// unit vector is a valid receiver, and feasibility is checked separately.
pub fn weighted_receiver(h: &ComplexMatrix, weights: &[f64]) -> Result<Vec<Complex64>> {
    let n = h.rows();
    let mut g = ComplexMatrix::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let col = h.column(k);
        for i in 0..n {
            let wi = w * col[i];
            for j in 0..n {
                g[(i, j)] += wi * col[j].conj();
            }
        }
    }
    match dominant_eigenpair(&g, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(pair) => Ok(pair.vector),
        Err(Error::NoConvergence { vector, iterations, .. }) => {
            log::debug!("receiver power iteration stopped after {iterations} iterations");
            Ok(vector)
        }
        Err(e) => Err(e),
    }
}

/// `argmax_{k∈S} F_k`, ties going to the smallest device index.
pub fn next_removal_index(indicators: &[f64], active: &[usize]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for &k in active {
        best = match best {
            Some(b) if indicators[k] < indicators[b] || (indicators[k] == indicators[b] && k > b) => Some(b),
            _ => Some(k),
        };
    }
    best.ok_or(Error::EmptySet("no device left to remove"))
}

fn validate(h: &ComplexMatrix, phi: &[f64], gamma: f64) -> Result<()> {
    if phi.len() != h.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} devices",
            phi.len(),
            h.cols()
        )));
    }
    check_weights(phi)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn max_over(indicators: &[f64], active: &[usize]) -> f64 {
    active.iter().map(|&k| indicators[k]).fold(f64::NEG_INFINITY, f64::max)
}

/// Shared elimination loop. `pick` chooses the device to drop.
fn eliminate(
    h: &ComplexMatrix,
    phi: &[f64],
    config: &SchedulerConfig,
    pick: &mut dyn FnMut(&[f64], &[usize]) -> Result<usize>,
) -> Result<ScheduleOutcome> {
    validate(h, phi, config.gamma)?;
    let k_total = h.cols();
    let policy = config.policy;
    let guard = 4 * k_total;
    let mut active: Vec<usize> = (0..k_total).collect();
    let mut removed: Vec<usize> = Vec::new();
    let mut indicators = vec![1.0; k_total];
    let mut trace = Vec::new();
    let mut t = 0;
    loop {
        t += 1;
        let weights = policy.weights(&indicators, &active);
        let mut c = weighted_receiver(h, &weights)?;
        indicators = constraint_indicators(h, &c, phi, config.gamma);

        let mut reinserted = Vec::new();
        if config.mode == Mode::Bidirectional && !removed.is_empty() {
            removed.sort_unstable();
            for j in removed.clone() {
                let mut trial = active.clone();
                trial.push(j);
                trial.sort_unstable();
                let mut w = policy.weights(&indicators, &trial);
                w[j] = policy.weight(0.0);
                let c_trial = weighted_receiver(h, &w)?;
                let f_trial = constraint_indicators(h, &c_trial, phi, config.gamma);
                if f_trial[j] <= 0.0 {
                    active = trial;
                    removed.retain(|&r| r != j);
                    reinserted.push(j);
                    c = c_trial;
                    indicators = f_trial;
                }
            }
        }

        let delta_max = max_over(&indicators, &active);
        let feasible = delta_max <= FEASIBILITY_TOL;
        let removal = if feasible || t >= guard {
            None
        } else {
            Some(pick(&indicators, &active)?)
        };
        if config.trace {
            trace.push(SchedulerState {
                t,
                active: active.clone(),
                weights,
                receiver: c.clone(),
                indicators: indicators.clone(),
                max_indicator: delta_max,
                removed: removal,
                reinserted,
            });
        }
        if feasible {
            return Ok(outcome(ScheduleStatus::Scheduled, active, c, t, trace));
        }
        match removal {
            None => {
                // Iteration guard hit: keep whatever the current receiver certifies.
                log::debug!("scheduler stopped at the {guard}-iteration guard");
                let kept: Vec<usize> = active
                    .into_iter()
                    .filter(|&k| indicators[k] <= FEASIBILITY_TOL)
                    .collect();
                let status = if kept.is_empty() {
                    ScheduleStatus::Empty
                } else {
                    ScheduleStatus::Scheduled
                };
                return Ok(outcome(status, kept, c, t, trace));
            }
            Some(i) => {
                active.retain(|&k| k != i);
                removed.push(i);
                if active.is_empty() {
                    return Ok(outcome(ScheduleStatus::Empty, active, c, t, trace));
                }
            }
        }
    }
}

fn outcome(
    status: ScheduleStatus,
    devices: Vec<usize>,
    receiver: Vec<Complex64>,
    iterations: usize,
    trace: Vec<SchedulerState>,
) -> ScheduleOutcome {
    ScheduleOutcome {
        status,
        devices,
        receiver,
        iterations,
        trace,
    }
}

/// Runs the matching-pursuit scheduler configured by `config`.
pub fn run_scheduler(h: &ComplexMatrix, phi: &[f64], config: &SchedulerConfig) -> Result<ScheduleOutcome> {
    eliminate(h, phi, config, &mut |f, s| next_removal_index(f, s))
}

/// Greedy backward elimination.
pub fn schedule_mp(h: &ComplexMatrix, phi: &[f64], gamma: f64, policy: WeightPolicy) -> Result<ScheduleOutcome> {
    run_scheduler(h, phi, &SchedulerConfig::new(gamma, policy))
}

/// Backward elimination that also puts removed devices back.
///
/// After each receiver update, every removed device `j` (ascending index) is
/// tried: the receiver is recomputed with `j` added at weight `1 − δ`, and if
/// `j` meets its constraint under that receiver it stays in. The loop is
/// capped at `4K` iterations.
pub fn schedule_mp_bidirectional(
    h: &ComplexMatrix,
    phi: &[f64],
    gamma: f64,
    policy: WeightPolicy,
) -> Result<ScheduleOutcome> {
    run_scheduler(h, phi, &SchedulerConfig::new(gamma, policy).bidirectional())
}

/// Baseline: same loop as [`schedule_mp`] but the removed device is drawn
/// uniformly from the active set.
pub fn schedule_random<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    phi: &[f64],
    gamma: f64,
    policy: WeightPolicy,
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    let config = SchedulerConfig::new(gamma, policy);
    eliminate(h, phi, &config, &mut |_, s| Ok(s[rng.random_range(0..s.len())]))
}

/// Largest subset certified by a pool of candidate receivers.
///
/// See [`exhaustive_oracle_with_receivers`]; the pool here also contains the
/// receivers of [`schedule_mp`] and [`schedule_mp_bidirectional`] at the
/// default policy.
pub fn exhaustive_oracle<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    phi: &[f64],
    gamma: f64,
    candidates: usize,
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    exhaustive_oracle_with_receivers(h, phi, gamma, candidates, &[], rng)
}

/// Enumerates subsets from largest to smallest and returns the first one
/// certified by some receiver in the pool.
///
/// The pool holds `candidates` random unit vectors, the receivers of the two
/// matching-pursuit schedulers, `extra` and, per subset, the dominant
/// eigenvector for uniform weights plus `candidates` random positive
/// weightings of that subset. Requires `K ≤ 12`.
pub fn exhaustive_oracle_with_receivers<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    phi: &[f64],
    gamma: f64,
    candidates: usize,
    extra: &[Vec<Complex64>],
    rng: &mut R,
) -> Result<ScheduleOutcome> {
    validate(h, phi, gamma)?;
    let k_total = h.cols();
    if k_total > 12 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive search supports at most 12 devices, got {k_total}"
        )));
    }
    if extra.iter().any(|c| c.len() != h.rows()) {
        return Err(Error::DimensionMismatch("extra receiver has the wrong length".into()));
    }
    let policy = WeightPolicy::default();
    let mp = schedule_mp(h, phi, gamma, policy)?;
    let bi = schedule_mp_bidirectional(h, phi, gamma, policy)?;

    let mut pool: Vec<Vec<Complex64>> = vec![mp.receiver.clone(), bi.receiver.clone()];
    pool.extend(extra.iter().cloned());
    pool.extend((0..candidates).map(|_| random_unit_vector(h.rows(), rng)));
    let masks: Vec<u32> = pool.iter().map(|c| feasible_mask(h, c, phi, gamma)).collect();

    let mut subsets: Vec<u32> = (1..(1u32 << k_total)).collect();
    subsets.sort_by_key(|&s| (std::cmp::Reverse(s.count_ones()), s.reverse_bits()));
    for s in subsets {
        if let Some(i) = masks.iter().position(|&m| m & s == s) {
            return Ok(oracle_outcome(s, pool[i].clone()));
        }
        let members: Vec<usize> = (0..k_total).filter(|&k| s >> k & 1 == 1).collect();
        for trial in 0..=candidates {
            let mut w = vec![0.0; k_total];
            for &k in &members {
                w[k] = if trial == 0 { 1.0 } else { rng.random_range(f64::EPSILON..1.0) };
            }
            let c = weighted_receiver(h, &w)?;
            if feasible_mask(h, &c, phi, gamma) & s == s {
                return Ok(oracle_outcome(s, c));
            }
        }
    }
    Ok(ScheduleOutcome {
        status: ScheduleStatus::Empty,
        devices: Vec::new(),
        receiver: mp.receiver,
        iterations: 0,
        trace: Vec::new(),
    })
}

fn feasible_mask(h: &ComplexMatrix, c: &[Complex64], phi: &[f64], gamma: f64) -> u32 {
    constraint_indicators(h, c, phi, gamma)
        .iter()
        .enumerate()
        .filter(|(_, f)| **f <= FEASIBILITY_TOL)
        .fold(0u32, |m, (k, _)| m | 1 << k)
}

fn oracle_outcome(mask: u32, receiver: Vec<Complex64>) -> ScheduleOutcome {
    ScheduleOutcome {
        status: ScheduleStatus::Scheduled,
        devices: (0..32).filter(|&k| mask >> k & 1 == 1).collect(),
        receiver,
        iterations: 0,
        trace: Vec::new(),
    }
}
