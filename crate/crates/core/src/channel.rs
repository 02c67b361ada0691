//! Channel realizations.
//!
//! Two generators are provided: i.i.d. `CN(0, 1)` entries, and a geometric
//! model where devices sit in an annulus around a PS equipped with a uniform
//! linear array. The geometric model combines distance-based path loss with
//! Rician small-scale fading whose scattered part has a Gaussian angular
//! spread around the nominal angle of arrival.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{complex_gaussian, hermitian_sqrt, ComplexMatrix};

/// `N x K` matrix whose column `k` is the uplink channel `h_k`.
pub type ChannelRealization = ComplexMatrix;

/// I.i.d. `CN(0, 1)` channel matrix.
pub fn sample_iid_gaussian<R: Rng + ?Sized>(antennas: usize, devices: usize, rng: &mut R) -> ChannelRealization {
    ComplexMatrix::from_fn(antennas, devices, |_, _| complex_gaussian(rng, 1.0))
}

/// Specular ULA response `[1, u, u², …]` with `u = exp(j 2π d sin θ)`.
pub fn array_response(theta: f64, antennas: usize, spacing: f64) -> Vec<Complex64> {
    let phase = 2.0 * PI * spacing * theta.sin();
    (0..antennas)
        .map(|n| Complex64::from_polar(1.0, phase * n as f64))
        .collect()
}

/// Spatial covariance of the scattered component under a Gaussian angular
/// spread of standard deviation `spread` (radians) around `theta`.
///
/// The lower triangle is written as the exact conjugate of the upper one, so
/// the result is Hermitian bit for bit.
pub fn spatial_covariance(theta: f64, spread: f64, antennas: usize, spacing: f64) -> ComplexMatrix {
    let phase = 2.0 * PI * spacing * theta.sin();
    let mut r = ComplexMatrix::zeros(antennas, antennas);
    for n in 0..antennas {
        r[(n, n)] = Complex64::new(1.0, 0.0);
        for m in 0..n {
            let lag = (n - m) as f64;
            let x = PI * lag * spacing * theta.cos();
            let decay = (-2.0 * spread * spread * x * x).exp();
            let z = Complex64::from_polar(decay, phase * lag);
            r[(n, m)] = z;
            r[(m, n)] = z.conj();
        }
    }
    r
}

/// Distance-dependent path loss `PL₀ (l / l₀)^(-α)`.
pub fn path_loss(distance: f64, exponent: f64, reference_loss: f64, reference_distance: f64) -> Result<f64> {
    if !(distance > 0.0) || !(reference_distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "distances must be positive (l = {distance}, l0 = {reference_distance})"
        )));
    }
    Ok(reference_loss * (distance / reference_distance).powf(-exponent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGeometry {
    /// Distance of each device from the PS in meters.
    pub distances: Vec<f64>,
    /// Azimuth angle of arrival of each device in `[0, 2π)`.
    pub angles: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl NetworkGeometry {
    pub fn devices(&self) -> usize {
        self.distances.len()
    }

    pub fn min_distance(&self) -> f64 {
        self.distances.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Places `devices` uniformly over the area of the annulus `[R_in, R_out]`.
pub fn sample_geometry<R: Rng + ?Sized>(
    devices: usize,
    inner_radius: f64,
    outer_radius: f64,
    rng: &mut R,
) -> Result<NetworkGeometry> {
    if !(inner_radius > 0.0 && inner_radius < outer_radius) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < R_in < R_out, got R_in = {inner_radius}, R_out = {outer_radius}"
        )));
    }
    let (r2_in, r2_out) = (inner_radius * inner_radius, outer_radius * outer_radius);
    let mut distances = Vec::with_capacity(devices);
    let mut angles = Vec::with_capacity(devices);
    for _ in 0..devices {
        let u: f64 = rng.random();
        let r = (u * (r2_out - r2_in) + r2_in).sqrt();
        distances.push(r.clamp(inner_radius, outer_radius));
        angles.push(rng.random_range(0.0..2.0 * PI));
    }
    Ok(NetworkGeometry {
        distances,
        angles,
        inner_radius,
        outer_radius,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RicianParams {
    pub antennas: usize,
    /// Antenna spacing in wavelengths.
    pub spacing: f64,
    /// Linear Rician factor per device.
    pub rician_factors: Vec<f64>,
    /// Angular standard deviation per device, radians.
    pub angular_spread: Vec<f64>,
    pub path_loss_exponent: f64,
    pub reference_loss: f64,
    /// Reference distance; `None` uses the distance of the closest device.
    pub reference_distance: Option<f64>,
}

impl RicianParams {
    /// The network used throughout the experiments: 3 dB Rician factor, half
    /// wavelength spacing, path-loss exponent 3, and per-device angular spread
    /// drawn uniformly from 12 to 15 degrees.
    pub fn standard<R: Rng + ?Sized>(antennas: usize, devices: usize, rng: &mut R) -> Self {
        let spread = (0..devices)
            .map(|_| rng.random_range(12.0f64..=15.0).to_radians())
            .collect();
        Self {
            antennas,
            spacing: 0.5,
            rician_factors: vec![crate::db_to_linear(3.0); devices],
            angular_spread: spread,
            path_loss_exponent: 3.0,
            reference_loss: 1.0,
            reference_distance: None,
        }
    }

    fn validate(&self, devices: usize) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::InvalidParameter("antenna count must be positive".into()));
        }
        if self.rician_factors.len() != devices || self.angular_spread.len() != devices {
            return Err(Error::DimensionMismatch(format!(
                "{devices} devices but {} Rician factors and {} angular spreads",
                self.rician_factors.len(),
                self.angular_spread.len()
            )));
        }
        if self.rician_factors.iter().any(|k| !(*k >= 0.0)) {
            return Err(Error::InvalidParameter("Rician factors must be non-negative".into()));
        }
        if self.angular_spread.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidParameter("angular spreads must be non-negative".into()));
        }
        if !(self.spacing > 0.0) || !(self.path_loss_exponent > 0.0) {
            return Err(Error::InvalidParameter("spacing and path-loss exponent must be positive".into()));
        }
        Ok(())
    }
}

/// Draws `h_k = sqrt(PL(l_k)) [sqrt(κ/(1+κ)) ḡ_k + sqrt(1/(1+κ)) R_k^{1/2} z]`.
pub fn sample_rician<R: Rng + ?Sized>(
    geometry: &NetworkGeometry,
    params: &RicianParams,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let devices = geometry.devices();
    params.validate(devices)?;
    if devices == 0 {
        return Err(Error::EmptySet("geometry has no devices"));
    }
    let n = params.antennas;
    let l0 = params.reference_distance.unwrap_or_else(|| geometry.min_distance());
    let mut h = ComplexMatrix::zeros(n, devices);
    for k in 0..devices {
        let theta = geometry.angles[k];
        let kappa = params.rician_factors[k];
        let gain = path_loss(geometry.distances[k], params.path_loss_exponent, params.reference_loss, l0)?.sqrt();
        let los = array_response(theta, n, params.spacing);
        let root = hermitian_sqrt(&spatial_covariance(theta, params.angular_spread[k], n, params.spacing))?;
        let z: Vec<Complex64> = (0..n).map(|_| complex_gaussian(rng, 1.0)).collect();
        let scattered = root.mul_vec(&z);
        let (a, b) = if kappa.is_infinite() {
            (1.0, 0.0)
        } else {
            ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
        };
        let column: Vec<Complex64> = los
            .iter()
            .zip(&scattered)
            .map(|(l, s)| gain * (a * l + b * s))
            .collect();
        h.set_column(k, &column);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, norm};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_device(distance: f64, theta: f64) -> NetworkGeometry {
        NetworkGeometry {
            distances: vec![distance],
            angles: vec![theta],
            inner_radius: 1.0,
            outer_radius: 100.0,
        }
    }

    fn params(n: usize, kappa: f64, spread: f64) -> RicianParams {
        RicianParams {
            antennas: n,
            spacing: 0.5,
            rician_factors: vec![kappa],
            angular_spread: vec![spread],
            path_loss_exponent: 3.0,
            reference_loss: 1.0,
            reference_distance: None,
        }
    }

    #[test]
    fn iid_entries_have_unit_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 100_000;
        let power: f64 = (0..draws)
            .map(|_| sample_iid_gaussian(1, 1, &mut rng)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((power - 1.0).abs() < 0.02, "{power}");
    }

    #[test]
    fn iid_is_deterministic_and_shaped() {
        let a = sample_iid_gaussian(2, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_iid_gaussian(2, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert_eq!((a.rows(), a.cols()), (2, 3));
    }

    #[test]
    fn array_response_closed_forms() {
        for z in array_response(0.0, 3, 0.5) {
            assert_relative_eq!(z.re, 1.0);
            assert_relative_eq!(z.im, 0.0);
        }
        let g = array_response(PI / 2.0, 2, 0.5);
        assert_relative_eq!(g[1].re, -1.0, epsilon = 1e-12);
        assert!(g[1].im.abs() < 1e-12);
        let g = array_response(PI / 6.0, 2, 0.5);
        assert!(g[1].re.abs() < 1e-12);
        assert_relative_eq!(g[1].im, 1.0, epsilon = 1e-12);
        assert!(array_response(1.234, 7, 0.3).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn covariance_structure() {
        let r = spatial_covariance(0.8, 0.2, 5, 0.5);
        for i in 0..5 {
            assert_eq!(r[(i, i)], Complex64::new(1.0, 0.0));
            for j in 0..5 {
                assert_eq!(r[(i, j)], r[(j, i)].conj());
            }
        }
        // Zero spread collapses to the rank-one specular covariance.
        let g = array_response(0.8, 4, 0.5);
        let r = spatial_covariance(0.8, 0.0, 4, 0.5);
        for i in 0..4 {
            for j in 0..4 {
                assert!((r[(i, j)] - g[i] * g[j].conj()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn covariance_entry_matches_closed_form() {
        let (theta, spread, d) = (PI / 4.0, 0.2, 0.5);
        let r = spatial_covariance(theta, spread, 3, d);
        // Entry (0, 2): u^{-2} exp(-2 ς² (2π d cos θ)²).
        let lag = -2.0f64;
        let expected = Complex64::from_polar(
            (-2.0 * spread * spread * (PI * lag * d * theta.cos()).powi(2)).exp(),
            2.0 * PI * d * theta.sin() * lag,
        );
        assert!((r[(0, 2)] - expected).norm() < 1e-14);
    }

    #[test]
    fn path_loss_values() {
        assert_relative_eq!(path_loss(10.0, 3.0, 2.5, 10.0).unwrap(), 2.5);
        assert_relative_eq!(path_loss(20.0, 3.0, 1.0, 10.0).unwrap(), 0.125);
        assert_relative_eq!(path_loss(30.0, 3.0, 1.0, 10.0).unwrap(), 1.0 / 27.0, epsilon = 1e-15);
        assert!(path_loss(0.0, 3.0, 1.0, 10.0).is_err());
        assert!(path_loss(-1.0, 3.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn geometry_is_area_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (r_in, r_out) = (10.0, 100.0);
        let geo = sample_geometry(100_000, r_in, r_out, &mut rng).unwrap();
        assert!(geo.distances.iter().all(|l| (r_in..=r_out).contains(l)));
        assert!(geo.angles.iter().all(|a| (0.0..2.0 * PI).contains(a)));
        for r in [20.0, 50.0, 80.0] {
            let empirical = geo.distances.iter().filter(|&&l| l <= r).count() as f64 / 1e5;
            let exact = (r * r - r_in * r_in) / (r_out * r_out - r_in * r_in);
            assert!((empirical - exact).abs() < 0.01, "r={r}: {empirical} vs {exact}");
        }
        let a = sample_geometry(5, r_in, r_out, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = sample_geometry(5, r_in, r_out, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert!(sample_geometry(3, 10.0, 10.0, &mut rng).is_err());
    }

    #[test]
    fn pure_line_of_sight_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = sample_rician(&single_device(15.0, 0.6), &params(4, 1e9, 0.2), &mut rng).unwrap();
        let g = array_response(0.6, 4, 0.5);
        for n in 0..4 {
            assert!((h[(n, 0)] - g[n]).norm() < 1e-3);
        }
    }

    #[test]
    fn scattered_component_has_target_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (theta, spread, n) = (0.9, 0.25, 3);
        let geo = single_device(20.0, theta);
        let p = params(n, 0.0, spread);
        let draws = 100_000;
        let mut acc = ComplexMatrix::zeros(n, n);
        for _ in 0..draws {
            let g = sample_rician(&geo, &p, &mut rng).unwrap().column(0);
            for i in 0..n {
                for j in 0..n {
                    acc[(i, j)] += g[i] * g[j].conj() / draws as f64;
                }
            }
        }
        let r = spatial_covariance(theta, spread, n, 0.5);
        let err = acc.sub(&r).frobenius_norm() / r.frobenius_norm();
        assert!(err < 0.05, "relative covariance error {err}");
    }

    #[test]
    fn zero_spread_scattering_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let theta = 0.4;
        let g_bar = array_response(theta, 3, 0.5);
        let geo = single_device(20.0, theta);
        for _ in 0..100 {
            let g = sample_rician(&geo, &params(3, 0.0, 0.0), &mut rng).unwrap().column(0);
            // Every draw is a scalar multiple of the array response.
            let proj = inner(&g_bar, &g).norm() / (norm(&g_bar) * norm(&g));
            assert_relative_eq!(proj, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn rician_power_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 6;
        let geo = single_device(30.0, 1.1);
        let p = params(n, crate::db_to_linear(3.0), 13f64.to_radians());
        let draws = 100_000;
        let power: f64 = (0..draws)
            .map(|_| norm(&sample_rician(&geo, &p, &mut rng).unwrap().column(0)).powi(2))
            .sum::<f64>()
            / draws as f64;
        assert!((power / n as f64 - 1.0).abs() < 0.02, "{power}");
    }

    #[test]
    fn path_loss_uses_closest_device_as_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let geo = NetworkGeometry {
            distances: vec![10.0, 20.0],
            angles: vec![0.3, 0.3],
            inner_radius: 10.0,
            outer_radius: 100.0,
        };
        let mut p = params(2, 1e12, 0.0);
        p.rician_factors = vec![1e12; 2];
        p.angular_spread = vec![0.0; 2];
        let h = sample_rician(&geo, &p, &mut rng).unwrap();
        assert_relative_eq!(norm(&h.column(0)).powi(2), 2.0, epsilon = 1e-6);
        assert_relative_eq!(norm(&h.column(1)).powi(2), 2.0 * 0.125, epsilon = 1e-6);
        assert!(h.is_finite());
    }

    #[test]
    fn standard_params_follow_network_table() {
        let p = RicianParams::standard(6, 20, &mut ChaCha8Rng::seed_from_u64(1));
        assert_relative_eq!(p.rician_factors[0], 10f64.powf(0.3));
        assert!(p
            .angular_spread
            .iter()
            .all(|s| (12f64.to_radians()..=15f64.to_radians()).contains(s)));
    }
}
