//! Property-based invariants.

use proptest::prelude::*;
use sffsim_core::hilbert::{
    evolve_hamiltonian, floquet_power, sample_disorder, HamiltonianPropagator, ModelSpec,
    SpinRegister,
};
use sffsim_core::linalg::max_abs_diff;
use sffsim_core::rmt::{self, EnsembleKind};
use sffsim_core::rng::stream;
use sffsim_core::spectral::{psff_single, spectrum_rescale, SubsystemMask};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// exp(-iH(t1+t2)) = exp(-iHt1)·exp(-iHt2) to 1e-9.
    #[test]
    fn evolution_group_property(seed in 0u64..500, t1 in 0.01f64..3.0, t2 in 0.01f64..3.0) {
        let reg = SpinRegister::new(3).unwrap();
        let model = ModelSpec::IsingLongRange { j: 1.0, alpha: 1.2, w: 1.0 };
        let dis = sample_disorder(&model, reg, seed, 0);
        let h = sffsim_core::hilbert::build_ising(&model, &dis, reg).unwrap();
        let prop = HamiltonianPropagator::new(&h).unwrap();
        let a = prop.evolve(t1).unwrap();
        let b = prop.evolve(t2).unwrap();
        let ab = prop.evolve(t1 + t2).unwrap();
        let err = max_abs_diff::<f64>(ab.data(), a.matmul(&b).unwrap().data());
        prop_assert!(err < 1e-9, "group property violated: {err:e}");
    }

    /// V^(m+n) = V^m · V^n to 1e-9.
    #[test]
    fn floquet_power_additivity(seed in 0u64..500, m in 0u64..12, n in 0u64..12) {
        let reg = SpinRegister::new(3).unwrap();
        let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let dis = sample_disorder(&model, reg, seed, 1);
        let v = sffsim_core::hilbert::build_v3(&model, &dis, reg).unwrap();
        let lhs = floquet_power(&v, m + n).unwrap();
        let rhs = floquet_power(&v, m).unwrap().matmul(&floquet_power(&v, n).unwrap()).unwrap();
        let err = max_abs_diff::<f64>(lhs.data(), rhs.data());
        prop_assert!(err < 1e-9);
    }

    /// 0 <= PSFF(T, mask) <= 1 for unitary T and every mask.
    #[test]
    fn psff_is_in_unit_interval(seed in 0u64..1000, mask_bits in 0u64..16) {
        let mut rng = stream(seed, &[0], "prop-psff");
        let v = rmt::sample::<f64, _>(EnsembleKind::Cue, 16, &mut rng).unwrap();
        let n = 4usize;
        let sites: Vec<usize> = (1..=n).filter(|s| (mask_bits >> (s - 1)) & 1 == 1).collect();
        let mask = SubsystemMask::from_sites(n, &sites).unwrap();
        let k = psff_single(&v, &mask).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&k), "PSFF out of range: {k}");
    }

    /// Identical (seed, index) draws reproduce the disorder bit for bit,
    /// and distinct indices differ.
    #[test]
    fn disorder_streams_are_counter_based(seed in 0u64..10_000, idx in 0u64..10_000) {
        let reg = SpinRegister::new(5).unwrap();
        let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let a = sample_disorder(&model, reg, seed, idx);
        let b = sample_disorder(&model, reg, seed, idx);
        prop_assert_eq!(&a, &b);
        let c = sample_disorder(&model, reg, seed, idx.wrapping_add(1));
        prop_assert_ne!(&a, &c);
    }

    /// Rescaling preserves order and hits the target spacing.
    #[test]
    fn rescale_preserves_order(levels in proptest::collection::vec(-50.0f64..50.0, 4..40), target in 0.01f64..10.0) {
        let mut sorted = levels;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assume!(sorted.last().unwrap() - sorted.first().unwrap() > 1e-6);
        let out = spectrum_rescale(&sorted, target).unwrap();
        for w in out.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        let mean = (out.last().unwrap() - out.first().unwrap()) / (out.len() - 1) as f64;
        prop_assert!((mean - target).abs() < 1e-9 * target.max(1.0));
    }

    /// Mask bitstring round-trip.
    #[test]
    fn mask_bitstring_round_trip(bits in 0u64..256, n in 1usize..9) {
        let bits = bits & ((1 << n) - 1);
        let sites: Vec<usize> = (1..=n).filter(|s| (bits >> (s - 1)) & 1 == 1).collect();
        let mask = SubsystemMask::from_sites(n, &sites).unwrap();
        let parsed = SubsystemMask::from_bitstring(&mask.bitstring()).unwrap();
        prop_assert_eq!(mask, parsed);
    }

    /// t = 0 evolution is the identity for any Hermitian input.
    #[test]
    fn zero_time_evolution_is_identity(seed in 0u64..300) {
        let mut rng = stream(seed, &[7], "prop-t0");
        let h = rmt::sample::<f64, _>(EnsembleKind::Gue, 8, &mut rng).unwrap();
        let t0 = evolve_hamiltonian(&h, 0.0).unwrap();
        let err = max_abs_diff::<f64>(t0.data(), &ndarray::Array2::eye(8));
        prop_assert!(err < 1e-12);
    }
}
