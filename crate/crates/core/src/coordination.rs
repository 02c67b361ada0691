//! Zero-forcing AirComp coordination.
//!
//! Each scheduled device inverts its effective scalar channel `h_kᴴc` so the
//! PS observes `Σ φ_k θ_k` plus filtered noise. The power factor `η` is the
//! largest value for which every scheduled device stays within its budget.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, inner, norm, ComplexMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Per-device transmit power budget `P`.
    pub power: f64,
    /// Receiver noise variance `σ²`.
    pub noise_variance: f64,
    /// Aggregation weights `φ_k`, one per device.
    pub weights: Vec<f64>,
}

impl SystemParams {
    pub fn new(power: f64, noise_variance: f64, weights: Vec<f64>) -> Result<Self> {
        if !(power > 0.0) || !(noise_variance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need P > 0 and sigma^2 >= 0, got P = {power}, sigma^2 = {noise_variance}"
            )));
        }
        check_weights(&weights)?;
        Ok(Self {
            power,
            noise_variance,
            weights,
        })
    }

    /// Error tolerance `γ = P ε / σ²` for a target computation error `ε`.
    pub fn gamma(&self, epsilon: f64) -> f64 {
        self.power * epsilon / self.noise_variance
    }
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("aggregation weights must be positive and finite".into()));
    }
    Ok(())
}

/// A coordinated uplink: who transmits, how the PS combines, and how each
/// device scales its symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub devices: Vec<usize>,
    pub receiver: Vec<Complex64>,
    pub power_factor: f64,
    /// Transmit weight of `devices[i]` at position `i`.
    pub transmit_weights: Vec<Complex64>,
}

impl Schedule {
    /// Zero-forcing schedule with `η = η_ZF`.
    pub fn zero_forcing(h: &ComplexMatrix, c: &[Complex64], devices: &[usize], phi: &[f64], power: f64) -> Result<Self> {
        let eta = zf_power_factor(h, c, devices, phi, power)?;
        let psi = zf_transmit_weights(h, c, devices, phi, eta)?;
        Ok(Self {
            devices: devices.to_vec(),
            receiver: c.to_vec(),
            power_factor: eta,
            transmit_weights: psi,
        })
    }
}

fn check_inputs(h: &ComplexMatrix, c: &[Complex64], devices: &[usize], phi: &[f64]) -> Result<()> {
    if devices.is_empty() {
        return Err(Error::EmptySet("no scheduled devices"));
    }
    if c.len() != h.rows() {
        return Err(Error::DimensionMismatch(format!(
            "receiver has length {} but there are {} antennas",
            c.len(),
            h.rows()
        )));
    }
    if phi.len() != h.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} devices",
            phi.len(),
            h.cols()
        )));
    }
    if let Some(&k) = devices.iter().find(|&&k| k >= h.cols()) {
        return Err(Error::DimensionMismatch(format!("device index {k} out of range")));
    }
    Ok(())
}

/// `h_kᴴ c`, rejecting exact orthogonality.
fn effective_gain(h: &ComplexMatrix, c: &[Complex64], k: usize) -> Result<Complex64> {
    let g = inner(&h.column(k), c);
    if g.norm_sqr() == 0.0 {
        return Err(Error::OrthogonalChannel { device: k });
    }
    Ok(g)
}

/// `η_ZF = P min_{k∈S} |h_kᴴc|² / φ_k²`.
pub fn zf_power_factor(h: &ComplexMatrix, c: &[Complex64], devices: &[usize], phi: &[f64], power: f64) -> Result<f64> {
    check_inputs(h, c, devices, phi)?;
    let mut eta = f64::INFINITY;
    for &k in devices {
        let g = effective_gain(h, c, k)?;
        eta = eta.min(power * g.norm_sqr() / (phi[k] * phi[k]));
    }
    Ok(eta)
}

/// `ψ_k = sqrt(η) φ_k h_kᴴc / |h_kᴴc|²`, listed in the order of `devices`.
pub fn zf_transmit_weights(
    h: &ComplexMatrix,
    c: &[Complex64],
    devices: &[usize],
    phi: &[f64],
    eta: f64,
) -> Result<Vec<Complex64>> {
    check_inputs(h, c, devices, phi)?;
    let root = eta.sqrt();
    devices
        .iter()
        .map(|&k| {
            let g = effective_gain(h, c, k)?;
            Ok(root * phi[k] * g / g.norm_sqr())
        })
        .collect()
}

/// MSE of the zero-forcing AirComp estimate,
/// `(σ²/P) max_{k∈S} φ_k² ‖c‖² / |h_kᴴc|²`.
pub fn computation_error(
    h: &ComplexMatrix,
    c: &[Complex64],
    devices: &[usize],
    phi: &[f64],
    noise_variance: f64,
    power: f64,
) -> Result<f64> {
    check_inputs(h, c, devices, phi)?;
    let c2 = norm(c).powi(2);
    let mut worst = 0.0f64;
    for &k in devices {
        let g = effective_gain(h, c, k)?;
        worst = worst.max(phi[k] * phi[k] * c2 / g.norm_sqr());
    }
    Ok(noise_variance / power * worst)
}

/// Simulates one AirComp symbol interval.
///
/// `local_values[k]` is the value held by device `k`; only scheduled devices
/// transmit. Returns `cᴴ y / sqrt(η)` with `y = Σ ψ_k θ_k h_k + ξ`.
pub fn aircomp_round<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    schedule: &Schedule,
    local_values: &[f64],
    noise_variance: f64,
    rng: &mut R,
) -> Result<Complex64> {
    if local_values.len() != h.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{} local values for {} devices",
            local_values.len(),
            h.cols()
        )));
    }
    if schedule.transmit_weights.len() != schedule.devices.len() || schedule.receiver.len() != h.rows() {
        return Err(Error::DimensionMismatch("schedule is inconsistent with the channel".into()));
    }
    let n = h.rows();
    let mut y: Vec<Complex64> = if noise_variance > 0.0 {
        (0..n).map(|_| complex_gaussian(rng, noise_variance)).collect()
    } else {
        vec![Complex64::new(0.0, 0.0); n]
    };
    for (&k, &psi) in schedule.devices.iter().zip(&schedule.transmit_weights) {
        let x = psi * local_values[k];
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += x * h[(i, k)];
        }
    }
    Ok(inner(&schedule.receiver, &y) / schedule.power_factor.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_iid_gaussian;
    use crate::numerics::{normalized, random_unit_vector};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, k: usize) -> (ComplexMatrix, Vec<Complex64>, Vec<f64>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_iid_gaussian(n, k, &mut rng);
        let c = random_unit_vector(n, &mut rng);
        let phi: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.5)).collect();
        (h, c, phi, rng)
    }

    #[test]
    fn matched_filter_single_device() {
        let (h, _, _, _) = instance(1, 3, 1);
        let c = normalized(&h.column(0)).unwrap();
        let h2 = norm(&h.column(0)).powi(2);
        assert_relative_eq!(zf_power_factor(&h, &c, &[0], &[1.0], 2.0).unwrap(), 2.0 * h2, max_relative = 1e-12);
        assert_relative_eq!(
            computation_error(&h, &c, &[0], &[1.0], 0.3, 2.0).unwrap(),
            0.3 / (2.0 * h2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn power_factor_takes_the_minimum() {
        let h = ComplexMatrix::from_row_major(1, 2, vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)]).unwrap();
        let c = [Complex64::new(1.0, 0.0)];
        assert_relative_eq!(zf_power_factor(&h, &c, &[0, 1], &[1.0, 1.0], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn enumeration_oracles() {
        let (h, c, phi, _) = instance(2, 4, 6);
        let s = [0, 2, 3, 5];
        let (p, s2) = (1.7, 0.4);
        let ratios: Vec<f64> = s
            .iter()
            .map(|&k| {
                let mut g = Complex64::new(0.0, 0.0);
                for i in 0..4 {
                    g += h[(i, k)].conj() * c[i];
                }
                g.norm_sqr() / (phi[k] * phi[k])
            })
            .collect();
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        assert_relative_eq!(zf_power_factor(&h, &c, &s, &phi, p).unwrap(), p * min_ratio, max_relative = 1e-12);
        assert_relative_eq!(
            computation_error(&h, &c, &s, &phi, s2, p).unwrap(),
            s2 / p / min_ratio,
            max_relative = 1e-12
        );
        let eta = zf_power_factor(&h, &c, &s, &phi, p).unwrap();
        let psi = zf_transmit_weights(&h, &c, &s, &phi, eta).unwrap();
        let max_power = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        assert!(psi.iter().all(|z| z.norm_sqr() <= p * (1.0 + 1e-9)));
        assert_relative_eq!(max_power, p, max_relative = 1e-12);
    }

    #[test]
    fn channel_inversion_identity() {
        let (h, c, phi, _) = instance(3, 3, 5);
        let s = [0, 1, 2, 3, 4];
        let eta = 0.37;
        let psi = zf_transmit_weights(&h, &c, &s, &phi, eta).unwrap();
        for (i, &k) in s.iter().enumerate() {
            let v = psi[i] / eta.sqrt() * inner(&c, &h.column(k));
            assert!((v - phi[k]).norm() < 1e-10);
        }
    }

    #[test]
    fn error_is_scale_invariant_in_receiver() {
        let (h, c, phi, _) = instance(4, 3, 4);
        let c2: Vec<Complex64> = c.iter().map(|z| 2.0 * z).collect();
        let e1 = computation_error(&h, &c, &[0, 1, 3], &phi, 1.0, 1.0).unwrap();
        let e2 = computation_error(&h, &c2, &[0, 1, 3], &phi, 1.0, 1.0).unwrap();
        assert_relative_eq!(e1, e2, max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_channel_is_an_error() {
        let h = ComplexMatrix::from_row_major(2, 2, vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        let c = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(
            zf_power_factor(&h, &c, &[0, 1], &[1.0, 1.0], 1.0),
            Err(Error::OrthogonalChannel { device: 0 })
        ));
        assert!(computation_error(&h, &c, &[1], &[1.0, 1.0], 1.0, 1.0).is_ok());
        assert!(zf_power_factor(&h, &c, &[], &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn noiseless_round_is_exact() {
        let (h, c, phi, mut rng) = instance(5, 4, 6);
        let s = vec![1, 2, 4];
        let sched = Schedule::zero_forcing(&h, &c, &s, &phi, 1.0).unwrap();
        let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let target: f64 = s.iter().map(|&k| phi[k] * theta[k]).sum();
        let est = aircomp_round(&h, &sched, &theta, 0.0, &mut rng).unwrap();
        assert!((est - target).norm() < 1e-9);
    }

    #[test]
    fn noise_only_round_has_predicted_variance() {
        let (h, c, phi, mut rng) = instance(6, 3, 4);
        let s = vec![0, 1, 2, 3];
        let sched = Schedule::zero_forcing(&h, &c, &s, &phi, 1.0).unwrap();
        let zeros = vec![0.0; 4];
        let draws = 100_000;
        let mse: f64 = (0..draws)
            .map(|_| aircomp_round(&h, &sched, &zeros, 0.5, &mut rng).unwrap().norm_sqr())
            .sum::<f64>()
            / draws as f64;
        let expected = computation_error(&h, &c, &s, &phi, 0.5, 1.0).unwrap();
        assert!((mse / expected - 1.0).abs() < 0.05, "{mse} vs {expected}");
        assert_relative_eq!(expected, 0.5 / sched.power_factor, max_relative = 1e-12);
    }
}
