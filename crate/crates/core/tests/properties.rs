use dftbeam::geometry::{
    channel_vector, dft_codebook, dft_vector, element_ranges, run_sweep, steering_vector, ArrayConfig, PolarPosition,
};
use dftbeam::mle::{log_likelihood, simulate_amplitudes, true_amp_factor, AmplitudeObservation, MleParams};
use dftbeam::pattern::{beamwidth_closed, distance_from_width, gain_discrete, s_from_rho};
use dftbeam::specfun::{erf_complex, i1_over_i0};
use dftbeam::train::cluster_indices;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg() -> ArrayConfig {
    ArrayConfig::default()
}

fn small_cfg() -> ArrayConfig {
    ArrayConfig::half_wavelength(64, 100e9).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn erf_is_odd_and_conjugate_symmetric(re in -4.2f64..4.2, im in -4.2f64..4.2) {
        let z = Complex64::new(re, im);
        prop_assume!(z.norm() <= 6.0);
        let f = erf_complex(z).unwrap();
        let odd = erf_complex(-z).unwrap() + f;
        let conj = erf_complex(z.conj()).unwrap() - f.conj();
        let scale = f.norm().max(1.0);
        prop_assert!(odd.norm() <= 1e-12 * scale, "odd {odd}");
        prop_assert!(conj.norm() <= 1e-12 * scale, "conj {conj}");
    }

    #[test]
    fn bessel_ratio_sandwich(x in 10.0f64..1e4) {
        let r = i1_over_i0(x).unwrap();
        prop_assert!((r - (1.0 - 0.5 / x)).abs() <= 0.5 / (x * x));
    }

    #[test]
    fn codewords_have_unit_norm(theta in -1.0f64..1.0, r in 0.8f64..400.0, phi in -1.0f64..1.0) {
        let c = cfg();
        let b = steering_vector(&c, &PolarPosition::new(theta, r).unwrap());
        prop_assert!((b.norm() - 1.0).abs() < 1e-12);
        prop_assert!((dft_vector(&c, phi).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn element_ranges_mirror(theta in -1.0f64..1.0, r in 0.8f64..400.0) {
        let c = cfg();
        let a = element_ranges(&c, &PolarPosition::new(theta, r).unwrap());
        let b = element_ranges(&c, &PolarPosition::new(-theta, r).unwrap());
        let n = a.len();
        for i in 0..n {
            prop_assert!((a[i] - b[n - 1 - i]).abs() <= 1e-12 * r);
        }
    }

    #[test]
    fn far_field_limit(theta in -0.99f64..0.99) {
        let c = small_cfg();
        let b = steering_vector(&c, &PolarPosition::new(theta, 1e6).unwrap());
        let a = dft_vector(&c, theta);
        for (x, y) in b.weights.iter().zip(&a.weights) {
            prop_assert!((x / y).arg().abs() < 1e-3);
        }
    }

    #[test]
    fn noiseless_sweep_matches_discrete_gain(theta in -0.9f64..0.9, r in 3.0f64..100.0) {
        let c = small_cfg();
        let pos = PolarPosition::new(theta, r).unwrap();
        let book = dft_codebook(&c, 64).unwrap();
        let sweep = run_sweep(&c, &pos, &book, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let scale = (c.n_elements as f64).sqrt() * c.path_gain(r);
        for (z, phi) in sweep.amplitudes.iter().zip(&sweep.angles) {
            let g = gain_discrete(&c, theta, r, *phi).unwrap() * scale;
            prop_assert!((z - g).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn width_inversion_round_trip(theta in -0.95f64..0.95, r in 6.0f64..393.0) {
        let c = cfg();
        let w = beamwidth_closed(&c, theta, r, 0.5).unwrap();
        let back = distance_from_width(&c, theta, w, s_from_rho(0.5).unwrap()).unwrap();
        prop_assert!((back / r - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn clusters_partition_the_threshold_set(
        z in prop::collection::vec(0.0f64..1.0, 1..200),
        rho in 0.0f64..1.0,
        gap in 1usize..6,
    ) {
        let set = cluster_indices(&z, rho, gap).unwrap();
        let mut all: Vec<usize> = set.clusters.iter().flatten().copied().collect();
        let expected: Vec<usize> = (0..z.len()).filter(|&i| z[i] > rho).collect();
        prop_assert!(set.clusters.iter().all(|c| !c.is_empty()));
        prop_assert!(all.windows(2).all(|w| w[0] < w[1]));
        all.sort_unstable();
        prop_assert_eq!(all, expected);
        for pair in set.clusters.windows(2) {
            prop_assert!(pair[1][0] - pair[0][pair[0].len() - 1] > gap);
        }
    }

    #[test]
    fn likelihood_ignores_index_order(seed in 0u64..1000, shift in 1usize..63) {
        let c = small_cfg();
        let truth = MleParams {
            theta: 0.1,
            range_m: 4.0,
            amp_factor: true_amp_factor(&c),
            noise_power: 1e-8,
        };
        let angles = dftbeam::geometry::dft_angles(64);
        let obs = simulate_amplitudes(&c, &truth, &angles, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut z = obs.z.clone();
        let mut a = obs.angles.clone();
        z.rotate_left(shift);
        a.rotate_left(shift);
        z.swap(0, 1);
        a.swap(0, 1);
        let shuffled = AmplitudeObservation::new(z, a).unwrap();
        let l1 = log_likelihood(&obs, &c, &truth).unwrap();
        let l2 = log_likelihood(&shuffled, &c, &truth).unwrap();
        prop_assert!((l1 - l2).abs() <= 1e-9 * l1.abs().max(1.0));
    }
}

#[test]
fn channel_norm_follows_path_gain() {
    let c = cfg();
    let h = channel_vector(&c, &PolarPosition::new(0.0, 5.0).unwrap());
    let norm = h.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let expected = (c.n_elements as f64).sqrt() * c.wavelength_m / (4.0 * std::f64::consts::PI * 5.0);
    assert!((norm / expected - 1.0).abs() < 1e-12);
}
