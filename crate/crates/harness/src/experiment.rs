//! Monte-Carlo execution of an [`ExperimentSpec`].

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use otasched::channel::{sample_geometry, sample_iid_gaussian, sample_rician, RicianParams};
use otasched::fedavg::{
    local_ls_fit, partition_heterogeneous, run_ota_fl_with_models, FlScheduler, LinearDataset, OtaFlConfig,
};
use otasched::irs::{effective_channel, schedule_mp_tuned, IrsChannelModel, PhaseVector, TuningConfig};
use otasched::scheduler::{
    exhaustive_oracle_with_receivers, schedule_mp, schedule_mp_bidirectional, schedule_random, ScheduleOutcome,
    ScheduleStatus, WeightPolicy,
};
use otasched::{db_to_linear, ComplexMatrix};

use crate::config::{ExperimentKind, ExperimentSpec, Variant};
use crate::output::{ResultRow, AGGREGATE};
use crate::seeding::{child_rng, child_seed, substream};
use crate::HarnessError;

/// Trials per runtime cell excluded from timing.
pub const WARM_UP_TRIALS: usize = 3;

const DATA_STREAM: u64 = u64::MAX;
const CHANNEL_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, PartialEq)]
struct TrialResult {
    size: f64,
    runtime: f64,
    extra1: f64,
    extra2: f64,
}

/// Runs the experiment on `threads` workers (0 picks the hardware default).
///
/// Rows are grouped by grid point, then variant, then trial, with each
/// group's aggregate row last. Everything except timing columns is a pure
/// function of the spec.
pub fn run_experiment(spec: &ExperimentSpec, threads: usize) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::RuntimeScaling => run_runtime_scaling(spec),
        ExperimentKind::OtaFl => with_pool(threads, || run_ota_fl_sweep(spec)),
        _ => with_pool(threads, || run_sweep(spec)),
    }
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {threads}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

fn grid(spec: &ExperimentSpec) -> Vec<(f64, f64)> {
    spec.gamma_db
        .iter()
        .flat_map(|&g| spec.delta.iter().map(move |&d| (g, d)))
        .collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn size_of(out: &ScheduleOutcome) -> f64 {
    out.size() as f64
}

fn empty_flag(out: &ScheduleOutcome) -> f64 {
    if out.status == ScheduleStatus::Empty {
        1.0
    } else {
        0.0
    }
}

enum Instance {
    Plain(ComplexMatrix),
    Irs(IrsChannelModel),
}

fn sample_instance(spec: &ExperimentSpec, rng: &mut ChaCha8Rng) -> Result<Instance, HarnessError> {
    let (n, k) = (spec.antennas, spec.devices);
    if spec.variants.iter().any(|v| matches!(v, Variant::MpTuned | Variant::MpFrozen)) {
        return Ok(Instance::Irs(IrsChannelModel::sample_iid(
            n,
            k,
            spec.elements,
            spec.irs.cascade_variance,
            rng,
        )));
    }
    if spec.kind == ExperimentKind::RicianGammaSweep {
        let geo = sample_geometry(k, spec.rician.inner_radius, spec.rician.outer_radius, rng)?;
        let params = RicianParams::standard(n, k, rng);
        return Ok(Instance::Plain(sample_rician(&geo, &params, rng)?));
    }
    Ok(Instance::Plain(sample_iid_gaussian(n, k, rng)))
}

/// Every variant on one channel draw.
fn run_trial(spec: &ExperimentSpec, gamma: f64, delta: f64, g: u64, t: u64) -> Result<Vec<TrialResult>, HarnessError> {
    let seed = child_seed(spec.seed, g, t);
    let mut rng = child_rng(spec.seed, g, t);
    let policy = WeightPolicy::new(delta)?;
    let phi = vec![1.0; spec.devices];
    let instance = sample_instance(spec, &mut rng)?;
    let mu0 = PhaseVector::ones(spec.elements);
    let h = match &instance {
        Instance::Plain(h) => h.clone(),
        Instance::Irs(model) => effective_channel(model, &mu0)?,
    };

    let mut outs: Vec<(Variant, ScheduleOutcome, f64)> = Vec::new();
    for &variant in &spec.variants {
        let (out, secs) = match variant {
            Variant::Mp | Variant::MpFrozen => {
                let (o, s) = timed(|| schedule_mp(&h, &phi, gamma, policy));
                (o?, s)
            }
            Variant::Bidirectional => {
                let (o, s) = timed(|| schedule_mp_bidirectional(&h, &phi, gamma, policy));
                (o?, s)
            }
            Variant::Random => {
                let mut r = substream(seed, 1);
                let (o, s) = timed(|| schedule_random(&h, &phi, gamma, policy, &mut r));
                (o?, s)
            }
            Variant::MpTuned => {
                let Instance::Irs(model) = &instance else {
                    unreachable!("IRS variants always sample an IRS model")
                };
                let tuning = TuningConfig {
                    alt_max: spec.irs.alt_max,
                    bcd_sweeps: spec.irs.bcd_sweeps,
                };
                let (o, s) = timed(|| schedule_mp_tuned(model, &phi, gamma, policy, &mu0, tuning));
                (o?.0, s)
            }
            Variant::Oracle => continue,
        };
        outs.push((variant, out, secs));
    }

    let oracle = if spec.kind == ExperimentKind::OracleCompare || spec.variants.contains(&Variant::Oracle) {
        let extra: Vec<_> = outs.iter().map(|(_, o, _)| o.receiver.clone()).collect();
        let mut r = substream(seed, 2);
        let (o, s) = timed(|| exhaustive_oracle_with_receivers(&h, &phi, gamma, spec.oracle.candidates, &extra, &mut r));
        Some((o?, s))
    } else {
        None
    };

    let compare = spec.kind == ExperimentKind::OracleCompare;
    let mut results = Vec::with_capacity(spec.variants.len());
    for &variant in &spec.variants {
        let (out, secs) = if variant == Variant::Oracle {
            let (o, s) = oracle.as_ref().expect("oracle computed above");
            (o, *s)
        } else {
            let (_, o, s) = outs.iter().find(|(v, _, _)| *v == variant).expect("variant computed above");
            (o, *s)
        };
        let (extra1, extra2) = match (&oracle, compare) {
            (Some((best, _)), true) => (size_of(best), if best.size() == out.size() { 1.0 } else { 0.0 }),
            _ => (out.iterations as f64, empty_flag(out)),
        };
        results.push(TrialResult {
            size: size_of(out),
            runtime: secs,
            extra1,
            extra2,
        });
    }
    Ok(results)
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct RowKey<'a> {
    spec: &'a ExperimentSpec,
    variant: Variant,
    gamma_db: f64,
    delta: f64,
    k: usize,
    n: usize,
}

impl RowKey<'_> {
    fn row(&self, trial: i64, mean_s: f64, std_s: f64, runtime_s: f64, extra1: f64, extra2: f64) -> ResultRow {
        ResultRow {
            experiment: self.spec.name.clone(),
            variant: self.variant.name().to_string(),
            gamma_db: self.gamma_db,
            delta: self.delta,
            k: self.k,
            n: self.n,
            m: self.spec.elements,
            trial,
            mean_s,
            std_s,
            runtime_s,
            extra1,
            extra2,
        }
    }
}

fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    let points = grid(spec);
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|g| (0..spec.trials).map(move |t| (g, t)))
        .collect();
    let results: Vec<Vec<TrialResult>> = tasks
        .par_iter()
        .map(|&(g, t)| {
            let (gamma_db, delta) = points[g];
            run_trial(spec, db_to_linear(gamma_db), delta, g as u64, t as u64)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(results.len() * spec.variants.len() + points.len() * spec.variants.len());
    for (g, &(gamma_db, delta)) in points.iter().enumerate() {
        let block = &results[g * spec.trials..(g + 1) * spec.trials];
        for (v, &variant) in spec.variants.iter().enumerate() {
            let key = RowKey {
                spec,
                variant,
                gamma_db,
                delta,
                k: spec.devices,
                n: spec.antennas,
            };
            let trials: Vec<&TrialResult> = block.iter().map(|r| &r[v]).collect();
            for (t, r) in trials.iter().enumerate() {
                rows.push(key.row(t as i64, r.size, 0.0, r.runtime, r.extra1, r.extra2));
            }
            let sizes: Vec<f64> = trials.iter().map(|r| r.size).collect();
            let runtimes: Vec<f64> = trials.iter().map(|r| r.runtime).collect();
            let e1: Vec<f64> = trials.iter().map(|r| r.extra1).collect();
            let e2: Vec<f64> = trials.iter().map(|r| r.extra2).collect();
            rows.push(key.row(AGGREGATE, mean(&sizes), std_dev(&sizes), mean(&runtimes), mean(&e1), mean(&e2)));
        }
    }
    Ok(rows)
}

/// Times the schedulers on a `(K, N, γ, δ)` grid, sequentially so that
/// measurements do not compete for cores.
///
/// The first [`WARM_UP_TRIALS`] trials per cell are run but not reported.
/// Aggregate rows carry the mean runtime in `runtime_s`, the median in
/// `extra1` and the number of timed trials in `extra2`.
pub fn run_runtime_scaling(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    spec.validate()?;
    let grid_spec = spec
        .runtime
        .as_ref()
        .ok_or_else(|| HarnessError::Validation(vec!["runtime: table required".into()]))?;
    let mut rows = Vec::new();
    let mut g = 0u64;
    for &k in &grid_spec.devices {
        for &n in &grid_spec.antennas {
            for &(gamma_db, delta) in &grid(spec) {
                let cell = ExperimentSpec {
                    devices: k,
                    antennas: n,
                    kind: ExperimentKind::GammaSweep,
                    runtime: None,
                    ..spec.clone()
                };
                let results: Vec<Vec<TrialResult>> = (0..spec.trials)
                    .map(|t| run_trial(&cell, db_to_linear(gamma_db), delta, g, t as u64))
                    .collect::<Result<_, _>>()?;
                for (v, &variant) in spec.variants.iter().enumerate() {
                    let key = RowKey {
                        spec,
                        variant,
                        gamma_db,
                        delta,
                        k,
                        n,
                    };
                    let timed: Vec<&TrialResult> = results.iter().skip(WARM_UP_TRIALS).map(|r| &r[v]).collect();
                    for (i, r) in timed.iter().enumerate() {
                        rows.push(key.row((i + WARM_UP_TRIALS) as i64, r.size, 0.0, r.runtime, r.extra1, r.extra2));
                    }
                    let sizes: Vec<f64> = timed.iter().map(|r| r.size).collect();
                    let runtimes: Vec<f64> = timed.iter().map(|r| r.runtime).collect();
                    rows.push(key.row(
                        AGGREGATE,
                        mean(&sizes),
                        std_dev(&sizes),
                        mean(&runtimes),
                        median(&runtimes),
                        timed.len() as f64,
                    ));
                }
                g += 1;
            }
        }
    }
    Ok(rows)
}

struct FlTrial {
    /// Indexed by grid point, then variant.
    results: Vec<Vec<TrialResult>>,
}

fn fl_trial(spec: &ExperimentSpec, points: &[(f64, f64)], t: u64) -> Result<FlTrial, HarnessError> {
    let fl = &spec.fl;
    let (k, n) = (spec.devices, spec.antennas);
    let mut data_rng = child_rng(spec.seed, DATA_STREAM, t);
    let theta_star = DVector::from_fn(fl.dim, |_, _| data_rng.sample::<f64, _>(StandardNormal));
    let partition = partition_heterogeneous(fl.samples, k, fl.eps0, fl.eps1, &mut data_rng)?;
    let train = LinearDataset::synthetic(fl.samples, &theta_star, fl.label_noise, &mut data_rng)?;
    let test = LinearDataset::synthetic(fl.test_samples, &theta_star, fl.label_noise, &mut data_rng)?;
    let locals = partition
        .indices
        .iter()
        .map(|idx| local_ls_fit(&train.subset(idx)?, fl.ridge))
        .collect::<Result<Vec<_>, _>>()?;
    let phi = partition.proportional_weights();

    let mut results = Vec::with_capacity(points.len());
    for &(gamma_db, delta) in points {
        let mut per_variant = Vec::with_capacity(spec.variants.len());
        for &variant in &spec.variants {
            let config = OtaFlConfig {
                rounds: fl.rounds,
                gamma: db_to_linear(gamma_db),
                policy: WeightPolicy::new(delta)?,
                scheduler: if variant == Variant::Bidirectional {
                    FlScheduler::Bidirectional
                } else {
                    FlScheduler::MatchingPursuit
                },
                power: fl.power,
                noise_variance: fl.noise_variance,
                ridge: fl.ridge,
            };
            // Channels and noise are shared across grid points so the
            // comparison along γ is paired.
            let mut chan_rng = child_rng(spec.seed, CHANNEL_STREAM, t);
            let mut noise_rng = child_rng(spec.seed, NOISE_STREAM, t);
            let mut sampler = || Ok(sample_iid_gaussian(n, k, &mut chan_rng));
            let (trace, secs) = timed(|| run_ota_fl_with_models(&config, &locals, &phi, &test, &mut sampler, &mut noise_rng));
            let trace = trace?;
            let scheduled: Vec<f64> = trace.rounds.iter().map(|r| r.scheduled as f64).collect();
            per_variant.push(TrialResult {
                size: mean(&scheduled),
                runtime: secs,
                extra1: trace.final_loss().unwrap_or(f64::NAN),
                extra2: trace.perfect_loss,
            });
        }
        results.push(per_variant);
    }
    Ok(FlTrial { results })
}

/// OTA federated averaging over the γ grid, one dataset per trial.
///
/// Per-trial rows: mean scheduled devices per round, final test loss
/// (`extra1`) and the perfect-FL test loss (`extra2`). Aggregate rows: mean
/// OTA loss (`extra1`) and `ζ = mean loss_fl / mean loss_ota` (`extra2`).
fn run_ota_fl_sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, HarnessError> {
    let points = grid(spec);
    let trials: Vec<FlTrial> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| fl_trial(spec, &points, t))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (g, &(gamma_db, delta)) in points.iter().enumerate() {
        for (v, &variant) in spec.variants.iter().enumerate() {
            let key = RowKey {
                spec,
                variant,
                gamma_db,
                delta,
                k: spec.devices,
                n: spec.antennas,
            };
            let rs: Vec<&TrialResult> = trials.iter().map(|tr| &tr.results[g][v]).collect();
            for (t, r) in rs.iter().enumerate() {
                rows.push(key.row(t as i64, r.size, 0.0, r.runtime, r.extra1, r.extra2));
            }
            let sizes: Vec<f64> = rs.iter().map(|r| r.size).collect();
            let runtimes: Vec<f64> = rs.iter().map(|r| r.runtime).collect();
            let ota: Vec<f64> = rs.iter().map(|r| r.extra1).collect();
            let perfect: Vec<f64> = rs.iter().map(|r| r.extra2).collect();
            let zeta = otasched::fedavg::ota_efficiency(mean(&ota), mean(&perfect)).unwrap_or(f64::NAN);
            rows.push(key.row(AGGREGATE, mean(&sizes), std_dev(&sizes), mean(&runtimes), mean(&ota), zeta));
        }
    }
    Ok(rows)
}
