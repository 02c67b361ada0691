//! Federated averaging of linear least-squares models over an AirComp uplink.
//!
//! Every device fits `β ≈ aᵀθ` on its local data. Per round the PS draws a
//! channel, schedules devices, and receives the weighted average of the
//! scheduled local models through the noisy multiple-access channel, one
//! coordinate per symbol interval.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::coordination::{aircomp_round, Schedule};
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;
use crate::scheduler::{schedule_mp, schedule_mp_bidirectional, weighted_receiver, WeightPolicy};

/// Data pairs `(β_i, a_i)`; row `i` of `features` is `a_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDataset {
    features: DMatrix<f64>,
    targets: DVector<f64>,
}

impl LinearDataset {
    pub fn new(features: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::InvalidParameter("feature dimension must be positive".into()));
        }
        if features.nrows() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows but {} targets",
                features.nrows(),
                targets.len()
            )));
        }
        if features.iter().chain(targets.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("dataset contains non-finite values".into()));
        }
        Ok(Self { features, targets })
    }

    /// `samples` pairs with `a ~ N(0, I_D)` and `β = aᵀθ* + noise_std · N(0, 1)`.
    pub fn synthetic<R: Rng + ?Sized>(samples: usize, theta_star: &DVector<f64>, noise_std: f64, rng: &mut R) -> Result<Self> {
        let dim = theta_star.len();
        let features = DMatrix::from_fn(samples, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let noise = DVector::from_fn(samples, |_, _| noise_std * rng.sample::<f64, _>(StandardNormal));
        let targets = &features * theta_star + noise;
        Self::new(features, targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::DimensionMismatch(format!("sample index {i} out of range")));
        }
        Ok(Self {
            features: self.features.select_rows(indices),
            targets: self.targets.select_rows(indices),
        })
    }

    /// Mean squared prediction error of `θ`.
    pub fn mse(&self, theta: &DVector<f64>) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (&self.features * theta - &self.targets).norm_squared() / self.len() as f64
    }
}

/// Disjoint local datasets `𝔻_k` given as sample indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub indices: Vec<Vec<usize>>,
    /// Sizes `L̃_k` before the remainder is spread over devices.
    pub drawn_sizes: Vec<usize>,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        self.indices.iter().map(Vec::len).collect()
    }

    pub fn devices(&self) -> usize {
        self.indices.len()
    }

    /// `φ_k = L_k / Σ_j L_j`.
    pub fn proportional_weights(&self) -> Vec<f64> {
        let sizes = self.sizes();
        let total: usize = sizes.iter().sum();
        sizes.iter().map(|&l| l as f64 / total as f64).collect()
    }
}

/// Size-skewed split of `total` samples over `devices`.
///
/// A random `⌈K/2⌉` of the devices draw `L̃_k` uniformly from
/// `[L/K, L/K + ε₁]`, the rest from `[ε₀, ε₁]`; then
/// `L_k = L̃_k + ⌊(L − Σ L̃_j) / K⌋` and samples are assigned without
/// replacement.
pub fn partition_heterogeneous<R: Rng + ?Sized>(
    total: usize,
    devices: usize,
    eps0: f64,
    eps1: f64,
    rng: &mut R,
) -> Result<Partition> {
    if devices == 0 {
        return Err(Error::InvalidParameter("need at least one device".into()));
    }
    if !(eps0 > 0.0 && eps0 < eps1) {
        return Err(Error::InvalidParameter(format!("need 0 < eps0 < eps1, got {eps0}, {eps1}")));
    }
    let mut order: Vec<usize> = (0..devices).collect();
    order.shuffle(rng);
    let mut high = vec![false; devices];
    for &k in &order[..devices.div_ceil(2)] {
        high[k] = true;
    }
    let share = total as f64 / devices as f64;
    let drawn: Vec<usize> = high
        .iter()
        .map(|&hi| {
            let x = if hi {
                rng.random_range(share..=share + eps1)
            } else {
                rng.random_range(eps0..=eps1)
            };
            x.floor() as usize
        })
        .collect();
    let drawn_total: usize = drawn.iter().sum();
    if drawn_total > total {
        return Err(Error::InvalidParameter(format!(
            "drawn sizes sum to {drawn_total}, exceeding the {total} available samples"
        )));
    }
    let extra = (total - drawn_total) / devices;
    let mut pool: Vec<usize> = (0..total).collect();
    pool.shuffle(rng);
    let mut next = 0;
    let indices = drawn
        .iter()
        .map(|&l| {
            let chunk = pool[next..next + l + extra].to_vec();
            next += l + extra;
            chunk
        })
        .collect();
    Ok(Partition {
        indices,
        drawn_sizes: drawn,
    })
}

/// Minimizer of `‖Aθ − β‖² + ridge ‖θ‖²` via the normal equations.
pub fn local_ls_fit(data: &LinearDataset, ridge: f64) -> Result<DVector<f64>> {
    if data.is_empty() {
        return Err(Error::EmptySet("local dataset is empty"));
    }
    if !(ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be non-negative, got {ridge}")));
    }
    let a = data.features();
    let mut gram = a.transpose() * a;
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    let rhs = a.transpose() * data.targets();
    gram.cholesky()
        .map(|ch| ch.solve(&rhs))
        .ok_or(Error::Degenerate("normal equations are singular; use a positive ridge"))
}

/// `Σ_{k∈S} φ_k θ_k`.
pub fn federated_average(models: &[DVector<f64>], phi: &[f64], devices: &[usize]) -> Result<DVector<f64>> {
    if devices.is_empty() {
        return Err(Error::EmptySet("nothing to aggregate"));
    }
    if phi.len() != models.len() || devices.iter().any(|&k| k >= models.len()) {
        return Err(Error::DimensionMismatch("weights, models and device indices disagree".into()));
    }
    let dim = models[devices[0]].len();
    let mut out = DVector::zeros(dim);
    for &k in devices {
        if models[k].len() != dim {
            return Err(Error::DimensionMismatch("local models differ in dimension".into()));
        }
        out.axpy(phi[k], &models[k], 1.0);
    }
    Ok(out)
}

/// One OTA aggregation: coordinate `d` of the result is the real part of an
/// AirComp round over `(θ_{k,d})_k`.
pub fn ota_fl_round<R: Rng + ?Sized>(
    models: &[DVector<f64>],
    h: &ComplexMatrix,
    schedule: &Schedule,
    noise_variance: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if models.len() != h.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} local models for {} devices",
            models.len(),
            h.cols()
        )));
    }
    let dim = models.first().map_or(0, |m| m.len());
    let mut out = DVector::zeros(dim);
    let mut column = vec![0.0; models.len()];
    for d in 0..dim {
        for (k, m) in models.iter().enumerate() {
            column[k] = m[d];
        }
        out[d] = aircomp_round(h, schedule, &column, noise_variance, rng)?.re;
    }
    Ok(out)
}

/// `ζ = loss_fl / loss_ota`.
pub fn ota_efficiency(loss_ota: f64, loss_fl: f64) -> Result<f64> {
    if !(loss_ota > 0.0 && loss_fl > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "losses must be positive, got ota = {loss_ota}, fl = {loss_fl}"
        )));
    }
    Ok(loss_fl / loss_ota)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlScheduler {
    MatchingPursuit,
    Bidirectional,
    /// Every device, receiver matched to the uniformly weighted channel Gram.
    /// Stands in for `γ = ∞`.
    Everyone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OtaFlConfig {
    pub rounds: usize,
    pub gamma: f64,
    pub policy: WeightPolicy,
    pub scheduler: FlScheduler,
    pub power: f64,
    pub noise_variance: f64,
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub scheduled: usize,
    pub test_loss: f64,
    /// `loss_fl / test_loss` for this round.
    pub zeta: f64,
    /// The schedule was empty and the previous model was kept.
    pub carried_over: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub rounds: Vec<RoundRecord>,
    pub models: Vec<DVector<f64>>,
    /// Test loss of noiseless, full-participation averaging.
    pub perfect_loss: f64,
    pub perfect_model: DVector<f64>,
}

impl LearningTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.test_loss)
    }
}

/// Runs `config.rounds` rounds of OTA federated averaging.
///
/// Local models are least-squares fits on each device's data; the global
/// model starts at zero. Each round calls `sample_channel` for a fresh
/// realization, schedules with `φ_k = L_k / Σ L_j`, and aggregates with the
/// weights renormalized over the scheduled set. `rng` drives receiver noise
/// only, so paired runs can share channel draws.
pub fn run_ota_fl<R: Rng + ?Sized>(
    config: &OtaFlConfig,
    train: &LinearDataset,
    test: &LinearDataset,
    partition: &Partition,
    mut sample_channel: impl FnMut() -> Result<ComplexMatrix>,
    rng: &mut R,
) -> Result<LearningTrace> {
    let locals = partition
        .indices
        .iter()
        .map(|idx| local_ls_fit(&train.subset(idx)?, config.ridge))
        .collect::<Result<Vec<_>>>()?;
    run_ota_fl_with_models(config, &locals, &partition.proportional_weights(), test, &mut sample_channel, rng)
}

/// [`run_ota_fl`] with precomputed local models and global weights.
pub fn run_ota_fl_with_models<R: Rng + ?Sized>(
    config: &OtaFlConfig,
    locals: &[DVector<f64>],
    phi: &[f64],
    test: &LinearDataset,
    sample_channel: &mut dyn FnMut() -> Result<ComplexMatrix>,
    rng: &mut R,
) -> Result<LearningTrace> {
    let k_total = locals.len();
    if k_total == 0 || phi.len() != k_total {
        return Err(Error::DimensionMismatch("need one weight per local model".into()));
    }
    let everyone: Vec<usize> = (0..k_total).collect();
    let perfect_model = federated_average(locals, phi, &everyone)?;
    let perfect_loss = test.mse(&perfect_model);

    let mut model = DVector::zeros(test.dim());
    let mut rounds = Vec::with_capacity(config.rounds);
    let mut models = Vec::with_capacity(config.rounds);
    for round in 1..=config.rounds {
        let h = sample_channel()?;
        if h.cols() != k_total {
            return Err(Error::DimensionMismatch("channel sampler returned the wrong device count".into()));
        }
        let (devices, receiver) = match config.scheduler {
            FlScheduler::MatchingPursuit => {
                let out = schedule_mp(&h, phi, config.gamma, config.policy)?;
                (out.devices, out.receiver)
            }
            FlScheduler::Bidirectional => {
                let out = schedule_mp_bidirectional(&h, phi, config.gamma, config.policy)?;
                (out.devices, out.receiver)
            }
            FlScheduler::Everyone => (everyone.clone(), weighted_receiver(&h, &vec![1.0; k_total])?),
        };
        let carried_over = devices.is_empty();
        if !carried_over {
            let mass: f64 = devices.iter().map(|&k| phi[k]).sum();
            let mut renormalized = vec![0.0; k_total];
            for &k in &devices {
                renormalized[k] = phi[k] / mass;
            }
            // Devices outside S never transmit; give them a dummy positive weight.
            let weights: Vec<f64> = renormalized.iter().map(|&w| if w > 0.0 { w } else { 1.0 }).collect();
            let schedule = Schedule::zero_forcing(&h, &receiver, &devices, &weights, config.power)?;
            model = ota_fl_round(locals, &h, &schedule, config.noise_variance, rng)?;
        }
        let test_loss = test.mse(&model);
        rounds.push(RoundRecord {
            round,
            scheduled: devices.len(),
            test_loss,
            zeta: if test_loss > 0.0 { perfect_loss / test_loss } else { 1.0 },
            carried_over,
        });
        models.push(model.clone());
    }
    Ok(LearningTrace {
        rounds,
        models,
        perfect_loss,
        perfect_model,
    })
}
