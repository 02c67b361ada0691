use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otasched::channel::sample_iid_gaussian;
use otasched::coordination::{aircomp_round, computation_error, zf_power_factor, zf_transmit_weights, Schedule};
use otasched::numerics::random_unit_vector;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn error_grows_with_the_set(seed in 0u64..1_000_000, k in 1usize..12, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_iid_gaussian(n, k, &mut rng);
        let c = random_unit_vector(n, &mut rng);
        let phi: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let s2: Vec<usize> = (0..k).collect();
        let s1: Vec<usize> = s2.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        prop_assume!(!s1.is_empty());
        let e1 = computation_error(&h, &c, &s1, &phi, 0.7, 1.3).unwrap();
        let e2 = computation_error(&h, &c, &s2, &phi, 0.7, 1.3).unwrap();
        prop_assert!(e1 <= e2);
    }

    #[test]
    fn zf_is_exact_and_power_feasible(seed in 0u64..1_000_000, k in 1usize..12, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = sample_iid_gaussian(n, k, &mut rng);
        let c = random_unit_vector(n, &mut rng);
        let phi: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..2.0)).collect();
        let s: Vec<usize> = (0..k).collect();
        let p = rng.random_range(0.1..10.0);
        let eta = zf_power_factor(&h, &c, &s, &phi, p).unwrap();
        let psi = zf_transmit_weights(&h, &c, &s, &phi, eta).unwrap();
        let powers: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        prop_assert!(powers.iter().all(|&x| x <= p * (1.0 + 1e-9)));
        prop_assert!(powers.iter().any(|&x| (x / p - 1.0).abs() < 1e-9));

        let sched = Schedule::zero_forcing(&h, &c, &s, &phi, p).unwrap();
        let theta: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let target: f64 = s.iter().map(|&j| phi[j] * theta[j]).sum();
        let est = aircomp_round(&h, &sched, &theta, 0.0, &mut rng).unwrap();
        prop_assert!((est - target).norm() <= 1e-9 * (1.0 + target.abs()));
    }
}

#[test]
fn empirical_mse_matches_computation_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..3 {
        let h = sample_iid_gaussian(4, 8, &mut rng);
        let c = random_unit_vector(4, &mut rng);
        let phi: Vec<f64> = (0..8).map(|_| rng.random_range(0.5..1.5)).collect();
        let s = vec![0, 2, 3, 6];
        let sched = Schedule::zero_forcing(&h, &c, &s, &phi, 2.0).unwrap();
        let theta: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: f64 = s.iter().map(|&j| phi[j] * theta[j]).sum();
        let rounds = 100_000;
        let mse = (0..rounds)
            .map(|_| (aircomp_round(&h, &sched, &theta, 0.3, &mut rng).unwrap() - target).norm_sqr())
            .sum::<f64>()
            / rounds as f64;
        let predicted = computation_error(&h, &c, &s, &phi, 0.3, 2.0).unwrap();
        // Standard error of the mean of an exponential variable is mean/sqrt(n).
        let band = 3.0 * predicted / (rounds as f64).sqrt();
        assert!((mse - predicted).abs() <= band, "{mse} vs {predicted}");
    }
}
