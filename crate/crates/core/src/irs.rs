//! Joint scheduling and phase tuning for IRS-aided uplinks.
//!
//! With an IRS of `M` passive elements the end-to-end channel of device `k`
//! is `h_k(μ) = h⁰_k + T diag(G_k) μ`, where `μ` lives on the unit circle
//! per element. The scheduler of [`crate::scheduler`] is extended with an
//! inner loop that alternates between the receiver `c` (dominant eigenvector)
//! and the phases `μ` (block coordinate ascent on a unit-modulus quadratic).

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, inner, ComplexMatrix};
use crate::scheduler::{
    constraint_indicators, next_removal_index, weighted_receiver, ScheduleOutcome, ScheduleStatus, WeightPolicy,
    FEASIBILITY_TOL,
};

/// Coordinates with `|b_m|` at or below this are left untouched by BCD.
const BCD_FLOOR: f64 = 1e-12;
const UNIT_TOL: f64 = 1e-10;
/// Relative change of the inner objective that ends the alternation.
pub const ALTERNATION_TOL: f64 = 1e-8;
pub const DEFAULT_ALT_MAX: usize = 50;
pub const DEFAULT_BCD_SWEEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct IrsChannelModel {
    /// `N x K` direct channels `h⁰_k`.
    pub direct: ComplexMatrix,
    /// PS–IRS matrix `T`, stored by column: `ps_irs[m]` has length `N`.
    pub ps_irs: Vec<Vec<Complex64>>,
    /// Cascade gains: `cascade[k][m]` is the `m`-th diagonal entry of `G_k`.
    pub cascade: Vec<Vec<Complex64>>,
}

impl IrsChannelModel {
    pub fn new(direct: ComplexMatrix, ps_irs: Vec<Vec<Complex64>>, cascade: Vec<Vec<Complex64>>) -> Result<Self> {
        let model = Self {
            direct,
            ps_irs,
            cascade,
        };
        model.validate()?;
        Ok(model)
    }

    /// A model without IRS.
    pub fn without_irs(direct: ComplexMatrix) -> Self {
        let k = direct.cols();
        Self {
            direct,
            ps_irs: Vec::new(),
            cascade: vec![Vec::new(); k],
        }
    }

    /// I.i.d. model: `h⁰`, `T` with `CN(0, 1)` entries, cascades `CN(0, cascade_variance)`.
    pub fn sample_iid<R: Rng + ?Sized>(
        antennas: usize,
        devices: usize,
        elements: usize,
        cascade_variance: f64,
        rng: &mut R,
    ) -> Self {
        let direct = crate::channel::sample_iid_gaussian(antennas, devices, rng);
        let ps_irs = (0..elements)
            .map(|_| (0..antennas).map(|_| complex_gaussian(rng, 1.0)).collect())
            .collect();
        let cascade = (0..devices)
            .map(|_| (0..elements).map(|_| complex_gaussian(rng, cascade_variance)).collect())
            .collect();
        Self {
            direct,
            ps_irs,
            cascade,
        }
    }

    pub fn antennas(&self) -> usize {
        self.direct.rows()
    }

    pub fn devices(&self) -> usize {
        self.direct.cols()
    }

    pub fn elements(&self) -> usize {
        self.ps_irs.len()
    }

    fn validate(&self) -> Result<()> {
        let (n, m) = (self.antennas(), self.elements());
        if self.ps_irs.iter().any(|t| t.len() != n) {
            return Err(Error::DimensionMismatch(format!("every column of T needs {n} entries")));
        }
        if self.cascade.len() != self.devices() || self.cascade.iter().any(|g| g.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "need {} cascade vectors of length {m}",
                self.devices()
            )));
        }
        Ok(())
    }

    /// `Tᴴ c`.
    fn reflect_receiver(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.ps_irs.iter().map(|t| inner(t, c)).collect()
    }
}

/// Element phases `μ`, each on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<Complex64>);

impl PhaseVector {
    pub fn new(phases: Vec<Complex64>) -> Result<Self> {
        if let Some(z) = phases.iter().find(|z| (z.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::InvalidParameter(format!("phase {z} is not unit modulus")));
        }
        Ok(Self(phases))
    }

    pub fn ones(elements: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); elements])
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `μᴴ Q μ + 2 Re{μᴴ a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub q: ComplexMatrix,
    pub a: Vec<Complex64>,
}

impl QuadraticForm {
    pub fn evaluate(&self, mu: &[Complex64]) -> f64 {
        if mu.is_empty() {
            return 0.0;
        }
        inner(mu, &self.q.mul_vec(mu)).re + 2.0 * inner(mu, &self.a).re
    }

    fn size(&self) -> usize {
        self.a.len()
    }
}

/// `H(μ)` with columns `h⁰_k + T diag(G_k) μ`.
pub fn effective_channel(model: &IrsChannelModel, mu: &PhaseVector) -> Result<ComplexMatrix> {
    model.validate()?;
    if mu.len() != model.elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {} elements",
            mu.len(),
            model.elements()
        )));
    }
    let mut h = model.direct.clone();
    for (k, g) in model.cascade.iter().enumerate() {
        for (m, t) in model.ps_irs.iter().enumerate() {
            let coeff = g[m] * mu.0[m];
            for (n, tn) in t.iter().enumerate() {
                h[(n, k)] += tn * coeff;
            }
        }
    }
    Ok(h)
}

/// Quadratic in `μ` with
/// `μᴴQμ + 2Re{μᴴa} + Σ w_k |h⁰_kᴴc|² = Σ w_k |h_k(μ)ᴴc|²`.
///
/// With `b_k = G_kᴴ Tᴴ c` and `s_k = h⁰_kᴴ c`: `Q = Σ w_k b_k b_kᴴ` and
/// `a = Σ w_k b_k s_k*`.
pub fn build_quadratic(c: &[Complex64], weights: &[f64], model: &IrsChannelModel) -> Result<QuadraticForm> {
    model.validate()?;
    if c.len() != model.antennas() || weights.len() != model.devices() {
        return Err(Error::DimensionMismatch("receiver or weights do not match the model".into()));
    }
    let m = model.elements();
    let tc = model.reflect_receiver(c);
    let mut q = ComplexMatrix::zeros(m.max(1), m.max(1));
    let mut a = vec![Complex64::new(0.0, 0.0); m];
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let b: Vec<Complex64> = (0..m).map(|i| model.cascade[k][i].conj() * tc[i]).collect();
        let s = inner(&model.direct.column(k), c);
        for i in 0..m {
            a[i] += w * b[i] * s.conj();
            for j in 0..m {
                q[(i, j)] += w * b[i] * b[j].conj();
            }
        }
    }
    Ok(QuadraticForm { q, a })
}

/// One coordinate step: `μ_m ← b_m / |b_m|` with
/// `b_m = a_m + Σ_{m'≠m} Q_{mm'} μ_{m'}`.
pub fn bcd_coordinate_update(form: &QuadraticForm, mu: &mut PhaseVector, m: usize) {
    let mut b = form.a[m];
    for (j, z) in mu.0.iter().enumerate() {
        if j != m {
            b += form.q[(m, j)] * z;
        }
    }
    let r = b.norm();
    if r > BCD_FLOOR {
        mu.0[m] = b / r;
    }
}

/// `sweeps` passes of coordinate ascent over `m = 0, 1, …, M − 1`.
pub fn bcd_phase_update(form: &QuadraticForm, mu: &PhaseVector, sweeps: usize) -> Result<PhaseVector> {
    if mu.len() != form.size() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for a quadratic of size {}",
            mu.len(),
            form.size()
        )));
    }
    let mut out = mu.clone();
    for _ in 0..sweeps {
        for m in 0..out.len() {
            bcd_coordinate_update(form, &mut out, m);
        }
    }
    Ok(out)
}

/// `Φ − γ Σ w_k |h_kᴴc|²` with `Φ = Σ w_k φ_k²`, for unit `c`.
fn inner_objective(h: &ComplexMatrix, c: &[Complex64], weights: &[f64], phi: &[f64], gamma: f64) -> f64 {
    weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(k, w)| w * (phi[k] * phi[k] - gamma * inner(&h.column(k), c).norm_sqr()))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuningConfig {
    pub alt_max: usize,
    pub bcd_sweeps: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            alt_max: DEFAULT_ALT_MAX,
            bcd_sweeps: DEFAULT_BCD_SWEEPS,
        }
    }
}

/// Matching-pursuit scheduling with joint receiver and phase tuning.
///
/// The outer loop is the backward elimination of
/// [`crate::scheduler::schedule_mp`]. Within an iteration, `c` and `μ` are
/// alternated until the inner objective changes by less than
/// [`ALTERNATION_TOL`] relative, or `alt_max` alternations. Constraint
/// indicators are then evaluated on `H(μ)`. With `M = 0` the output equals
/// `schedule_mp` on the direct channels bit for bit.
pub fn schedule_mp_tuned(
    model: &IrsChannelModel,
    phi: &[f64],
    gamma: f64,
    policy: WeightPolicy,
    mu0: &PhaseVector,
    tuning: TuningConfig,
) -> Result<(ScheduleOutcome, PhaseVector)> {
    model.validate()?;
    let k_total = model.devices();
    if phi.len() != k_total {
        return Err(Error::DimensionMismatch(format!("{} weights for {k_total} devices", phi.len())));
    }
    crate::coordination::check_weights(phi)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if tuning.alt_max == 0 {
        return Err(Error::InvalidParameter("alt_max must be at least 1".into()));
    }
    let tunable = model.elements() > 0 && model.cascade.iter().flatten().any(|g| g.norm_sqr() > 0.0);

    let mut mu = mu0.clone();
    let mut h = effective_channel(model, &mu)?;
    let mut active: Vec<usize> = (0..k_total).collect();
    let mut indicators = vec![1.0; k_total];
    let mut t = 0;
    loop {
        t += 1;
        let weights = policy.weights(&indicators, &active);
        let mut c = weighted_receiver(&h, &weights)?;
        if tunable {
            let mut previous = inner_objective(&h, &c, &weights, phi, gamma);
            for _ in 0..tuning.alt_max {
                let form = build_quadratic(&c, &weights, model)?;
                mu = bcd_phase_update(&form, &mu, tuning.bcd_sweeps)?;
                h = effective_channel(model, &mu)?;
                c = weighted_receiver(&h, &weights)?;
                let current = inner_objective(&h, &c, &weights, phi, gamma);
                let scale = previous.abs().max(f64::MIN_POSITIVE);
                let settled = (previous - current).abs() <= ALTERNATION_TOL * scale;
                previous = current;
                if settled {
                    break;
                }
            }
        }
        indicators = constraint_indicators(&h, &c, phi, gamma);
        let worst = active.iter().map(|&k| indicators[k]).fold(f64::NEG_INFINITY, f64::max);
        if worst <= FEASIBILITY_TOL {
            return Ok((outcome(ScheduleStatus::Scheduled, active, c, t), mu));
        }
        let i = next_removal_index(&indicators, &active)?;
        active.retain(|&k| k != i);
        if active.is_empty() {
            return Ok((outcome(ScheduleStatus::Empty, active, c, t), mu));
        }
    }
}

fn outcome(status: ScheduleStatus, devices: Vec<usize>, receiver: Vec<Complex64>, iterations: usize) -> ScheduleOutcome {
    ScheduleOutcome {
        status,
        devices,
        receiver,
        iterations,
        trace: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_unit_vector;
    use crate::scheduler::{is_feasible, schedule_mp};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_phases<R: Rng>(m: usize, rng: &mut R) -> PhaseVector {
        PhaseVector::new((0..m).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))).collect())
            .unwrap()
    }

    #[test]
    fn phase_vector_validation() {
        assert!(PhaseVector::new(vec![Complex64::new(0.5, 0.0)]).is_err());
        assert!(PhaseVector::new(vec![Complex64::new(0.0, 1.0)]).is_ok());
        assert_eq!(PhaseVector::ones(3).len(), 3);
    }

    #[test]
    fn effective_channel_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = IrsChannelModel::sample_iid(3, 4, 0, 1.0, &mut rng);
        assert_eq!(effective_channel(&model, &PhaseVector::ones(0)).unwrap(), model.direct);

        let mut model = IrsChannelModel::sample_iid(3, 4, 5, 1.0, &mut rng);
        model.cascade = vec![vec![Complex64::new(0.0, 0.0); 5]; 4];
        let mu = random_phases(5, &mut rng);
        assert_eq!(effective_channel(&model, &mu).unwrap(), model.direct);
    }

    #[test]
    fn effective_channel_scalar_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = IrsChannelModel::sample_iid(2, 2, 3, 0.5, &mut rng);
        let mu = random_phases(3, &mut rng);
        let h = effective_channel(&model, &mu).unwrap();
        for n in 0..2 {
            for k in 0..2 {
                let mut expected = model.direct[(n, k)];
                for m in 0..3 {
                    expected += model.ps_irs[m][n] * model.cascade[k][m] * mu.as_slice()[m];
                }
                assert!((h[(n, k)] - expected).norm() < 1e-14);
            }
        }
        assert!(effective_channel(&model, &PhaseVector::ones(2)).is_err());
    }

    #[test]
    fn quadratic_expansion_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = IrsChannelModel::sample_iid(3, 4, 5, 0.8, &mut rng);
        let c = random_unit_vector(3, &mut rng);
        let w = [0.95, 0.05, 0.0, 0.95];
        let form = build_quadratic(&c, &w, &model).unwrap();
        assert!(form.q.hermitian_asymmetry() < 1e-12);
        let direct: f64 = (0..4).map(|k| w[k] * inner(&model.direct.column(k), &c).norm_sqr()).sum();
        for _ in 0..100 {
            let mu = random_phases(5, &mut rng);
            let h = effective_channel(&model, &mu).unwrap();
            let lhs = form.evaluate(mu.as_slice()) + direct;
            let rhs: f64 = (0..4).map(|k| w[k] * inner(&h.column(k), &c).norm_sqr()).sum();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
    }

    #[test]
    fn quadratic_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = IrsChannelModel::sample_iid(2, 1, 3, 1.0, &mut rng);
        model.direct = ComplexMatrix::zeros(2, 1);
        let c = random_unit_vector(2, &mut rng);
        let form = build_quadratic(&c, &[0.7], &model).unwrap();
        assert!(form.a.iter().all(|z| z.norm() == 0.0));
        let b: Vec<Complex64> = (0..3).map(|m| model.cascade[0][m].conj() * inner(&model.ps_irs[m], &c)).collect();
        for i in 0..3 {
            for j in 0..3 {
                assert!((form.q[(i, j)] - 0.7 * b[i] * b[j].conj()).norm() < 1e-14);
            }
        }
        let zero = build_quadratic(&c, &[0.0], &model).unwrap();
        assert_eq!(zero.q.frobenius_norm(), 0.0);
    }

    #[test]
    fn bcd_closed_form_cases() {
        let a = vec![Complex64::new(3.0, 4.0), Complex64::new(0.0, -2.0)];
        let form = QuadraticForm {
            q: ComplexMatrix::zeros(2, 2),
            a: a.clone(),
        };
        let mu = bcd_phase_update(&form, &PhaseVector::ones(2), 1).unwrap();
        for m in 0..2 {
            assert!((mu.as_slice()[m] - a[m] / a[m].norm()).norm() < 1e-14);
        }
        let single = QuadraticForm {
            q: ComplexMatrix::from_diagonal(&[5.0]),
            a: vec![Complex64::new(-1.0, 1.0)],
        };
        let mu = bcd_phase_update(&single, &PhaseVector::ones(1), 1).unwrap();
        assert!((mu.as_slice()[0] - Complex64::new(-1.0, 1.0) / 2f64.sqrt()).norm() < 1e-14);
    }

    #[test]
    fn bcd_never_decreases_the_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let model = IrsChannelModel::sample_iid(4, 6, 8, 1.0, &mut rng);
            let c = random_unit_vector(4, &mut rng);
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
            let form = build_quadratic(&c, &w, &model).unwrap();
            let mut mu = random_phases(8, &mut rng);
            let mut value = form.evaluate(mu.as_slice());
            let scale = form.q.frobenius_norm() + crate::numerics::norm(&form.a);
            for _ in 0..5 {
                for m in 0..8 {
                    bcd_coordinate_update(&form, &mut mu, m);
                    let next = form.evaluate(mu.as_slice());
                    assert!(next >= value - 1e-12 * scale);
                    value = next;
                }
            }
            assert!(mu.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn m0_tuning_is_plain_matching_pursuit() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = IrsChannelModel::sample_iid(4, 10, 0, 1.0, &mut rng);
            let phi = vec![1.0; 10];
            let gamma = crate::db_to_linear(-1.0);
            let (tuned, mu) = schedule_mp_tuned(&model, &phi, gamma, WeightPolicy::default(), &PhaseVector::ones(0), TuningConfig::default()).unwrap();
            let plain = schedule_mp(&model.direct, &phi, gamma, WeightPolicy::default()).unwrap();
            assert_eq!(tuned.devices, plain.devices);
            assert_eq!(tuned.receiver, plain.receiver);
            assert!(mu.is_empty());
        }
    }

    #[test]
    fn tuned_output_is_certified_and_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let model = IrsChannelModel::sample_iid(4, 10, 8, 0.5, &mut rng);
            let phi = vec![1.0; 10];
            let gamma = crate::db_to_linear(-3.0);
            let (out, mu) = schedule_mp_tuned(&model, &phi, gamma, WeightPolicy::default(), &PhaseVector::ones(8), TuningConfig::default()).unwrap();
            let h = effective_channel(&model, &mu).unwrap();
            assert!(is_feasible(&h, &out.receiver, &out.devices, &phi, gamma));
            assert!(mu.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-10));
        }
    }
}
