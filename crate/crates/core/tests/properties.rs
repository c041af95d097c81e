use std::f64::consts::PI;

use nalgebra::Vector3;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cns_core::analysis::{energy, energy_norm_sq, gn_exponent, high_freq_energy, Lebesgue};
use cns_core::fieldio::FieldFile;
use cns_core::semigroup::{fit_decay_slope, log_times, mode_exponential};
use cns_core::spectral::frequency_split;
use cns_core::{derive_coefficients, FrequencyCutoff, Grid, IdealGas, ModeSymbol, PhysicalParams, SpectralField};

fn field(seed: u64, k_max: f64) -> SpectralField {
    let grid = Grid::new(8, PI).unwrap();
    SpectralField::random_smooth(&grid, &mut ChaCha8Rng::seed_from_u64(seed), k_max, 1.0)
}

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.1f64..5.0, -0.5f64..2.0, 0.1f64..5.0, 0.5f64..3.0, 0.2f64..5.0, 0.2f64..5.0).prop_map(
        |(mu, l, kappa, c_v, rho_inf, theta_inf)| PhysicalParams {
            mu,
            lambda: l * mu,
            kappa,
            c_v,
            rho_inf,
            theta_inf,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mode_propagator_is_a_contraction(
        p in params(), r in 0.0f64..20.0, t in 0.0f64..50.0,
        u in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let c = derive_coefficients(&p, &IdealGas::new(1.0)).unwrap();
        let e = mode_exponential(&ModeSymbol::new(&c, r), t).unwrap();
        let u = Vector3::from(u);
        prop_assert!((e.acoustic * u).norm() <= u.norm() * (1.0 + 1e-14));
        prop_assert!(e.shear <= 1.0);
    }

    #[test]
    fn mode_propagator_composes(p in params(), r in 0.0f64..5.0, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let c = derive_coefficients(&p, &IdealGas::new(1.0)).unwrap();
        let sym = ModeSymbol::new(&c, r);
        let lhs = mode_exponential(&sym, s + t).unwrap().acoustic;
        let rhs = mode_exponential(&sym, s).unwrap().acoustic * mode_exponential(&sym, t).unwrap().acoustic;
        prop_assert!((lhs - rhs).abs().max() < 1e-10);
    }

    #[test]
    fn ideal_gas_coefficients(r in 0.1f64..5.0, p in params()) {
        let c = derive_coefficients(&p, &IdealGas::new(r)).unwrap();
        prop_assert!((c.gamma.powi(2) - r * p.theta_inf).abs() <= 1e-12 * c.gamma.powi(2));
        let lb2 = r * r * p.theta_inf / p.c_v;
        prop_assert!((c.lambda_bar.powi(2) - lb2).abs() <= 1e-12 * lb2);
        prop_assert!(c.min_low_frequency_damping() > 0.0);
    }

    #[test]
    fn energy_sandwich_and_homogeneity(seed in any::<u64>(), k_max in 1.0f64..3.9, eta in 0.0f64..1.99, a in -10.0f64..10.0) {
        let u = field(seed, k_max);
        for l in 0..4 {
            let norm = energy_norm_sq(&u, l);
            let e = energy(&u, l, eta).unwrap();
            prop_assert!((1.0 - eta / 2.0) * norm <= e && e <= (1.0 + eta / 2.0) * norm);
            let scaled = energy(&u.scaled(a), l, eta).unwrap();
            prop_assert!((scaled - a * a * e).abs() <= 1e-12 * (a * a * norm).max(1e-300));
        }
        let top = u.grad_norm_sq(3);
        let h = high_freq_energy(&u, 1.0, eta).unwrap();
        prop_assert!((1.0 - eta / 2.0) * top <= h && h <= (1.0 + eta / 2.0) * top);
    }

    #[test]
    fn split_is_a_linear_decomposition(seed in any::<u64>(), a in -3.0f64..3.0) {
        let u = field(seed, 3.9);
        let w = field(seed.wrapping_add(1), 2.5);
        let cutoff = FrequencyCutoff::new(2.0).unwrap();
        let (low, high) = frequency_split(&u, &cutoff);
        let mut sum = low.clone();
        sum.axpy(1.0, &high);
        prop_assert!(u.sub(&sum).l2_norm() <= 1e-12 * u.l2_norm());
        let mut combo = u.clone();
        combo.axpy(a, &w);
        let mut expected = low;
        expected.axpy(a, &frequency_split(&w, &cutoff).0);
        prop_assert!(frequency_split(&combo, &cutoff).0.sub(&expected).l2_norm() <= 1e-12 * combo.l2_norm());
    }

    #[test]
    fn gn_exponent_solves_the_scaling_relation(k in 0u32..5, l in 0u32..5, m in 0u32..6, p in 2u32..12) {
        if let Ok(theta) = gn_exponent(k, l, m, Lebesgue::Finite(p)) {
            let r = |n: u32, d: u32| Ratio::new(n as i64, d as i64);
            let lhs = r(k, 3) - r(1, p);
            let rhs = (r(l, 3) - r(1, 2)) * theta + (r(m, 3) - r(1, 2)) * (Ratio::from_integer(1) - theta);
            prop_assert_eq!(lhs, rhs);
            prop_assert!(theta >= Ratio::from_integer(0) && theta <= Ratio::from_integer(1));
        }
    }

    #[test]
    fn slope_fit_recovers_power_laws(alpha in 0.1f64..4.0, scale in 1e-6f64..1e6) {
        let t = log_times(10.0, 1e4, 16);
        let n: Vec<f64> = t.iter().map(|t| scale * t.powf(-alpha)).collect();
        let fit = fit_decay_slope(&t, &n, [10.0, 1e4]).unwrap();
        prop_assert!((fit.slope + alpha).abs() < 1e-10);
    }

    #[test]
    fn field_file_round_trip(dims in prop::array::uniform3(1usize..6), ncomp in 1usize..6, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = dims.iter().product::<usize>();
        let components: Vec<Vec<f64>> = (0..ncomp).map(|_| (0..len).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
        let file = FieldFile { dims, components };
        let mut bytes = Vec::new();
        file.write_to(&mut bytes).unwrap();
        prop_assert_eq!(bytes.len(), 32 + 8 * len * ncomp);
        prop_assert_eq!(FieldFile::read_from(bytes.as_slice()).unwrap(), file);
    }
}
