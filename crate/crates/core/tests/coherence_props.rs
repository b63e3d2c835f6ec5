mod common;

use proptest::prelude::*;
use thermorev::coherence::{
    dephase_distill_protocol, discretize_hamiltonian, reference_frame_describe, reference_frame_externalize,
    reference_frame_formation, LadderReference,
};
use thermorev::thermo::{gibbs, work_distillable};
use thermorev::{dephase, trace_distance, DensityOperator, HermitianOperator, C64};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discretization_bounds(seed in any::<u64>(), d in 1usize..=5, delta in 0.01f64..0.5) {
        let mut r = common::rng(seed);
        let h = common::hermitian(&mut r, d);
        let (h2, ledger) = discretize_hamiltonian(&h, delta).unwrap();
        let diff = h.sub(&h2).unwrap().eigenvalues().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(diff <= delta / 2.0 + 1e-12);
        prop_assert!(ledger.energy_range == delta);
        let beta = 1.2;
        let a = gibbs(&h, beta).unwrap().gamma;
        let b = gibbs(&h2, beta).unwrap().gamma;
        prop_assert!(trace_distance(&a, &b).unwrap() <= beta * delta + 1e-8);
    }

    #[test]
    fn dephase_then_distill_waste(seed in any::<u64>(), d in 1usize..=4, delta in 0.01f64..0.3, e in prop::sample::select(vec![0.0, 0.05, 0.1])) {
        let mut r = common::rng(seed);
        let h = HermitianOperator::diagonal((0..d).map(|_| rand::Rng::gen_range(&mut r, 0.0..2.0)).collect()).unwrap();
        let ens = gibbs(&h, 1.0).unwrap();
        let rho = DensityOperator::from_probabilities(common::probs(&mut r, d, 0.2)).unwrap();
        let out = dephase_distill_protocol(&rho, &ens, e, delta).unwrap();
        let base = work_distillable(&rho, &ens, e).unwrap().work;
        prop_assert!(out.work.work >= base - ens.beta * delta - 1e-8, "{} vs {}", out.work.work, base);
    }

    #[test]
    fn reference_frame_round_trip(seed in any::<u64>(), d in 1usize..=3, levels in 1usize..=6) {
        let mut r = common::rng(seed);
        let h = HermitianOperator::diagonal((0..d).map(|_| rand::Rng::gen_range(&mut r, 0..3) as f64 * 0.5).collect()).unwrap();
        let reference = LadderReference::new(levels, 0.5).unwrap();
        let semi = dephase(&common::state(&mut r, d, d), &h).unwrap();
        let back = reference_frame_externalize(&reference_frame_describe(&semi, &h, &reference).unwrap(), &h, &reference).unwrap();
        prop_assert!(trace_distance(&back, &semi).unwrap() <= 1e-12);
    }

    #[test]
    fn recovery_improves_with_ladder_size(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let h = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        let rho = common::state(&mut r, 2, 1 + (seed as usize) % 2);
        let mut last = f64::INFINITY;
        for l in [2, 4, 8, 16, 32] {
            let reference = LadderReference::new(l, 1.0).unwrap();
            let back = reference_frame_externalize(&reference_frame_describe(&rho, &h, &reference).unwrap(), &h, &reference).unwrap();
            let td = trace_distance(&back, &rho).unwrap();
            prop_assert!(td <= last + 1e-9);
            last = td;
        }
    }

    #[test]
    fn formation_ledger_is_linear_in_ladder_size(levels in 1usize..=8, delta in prop::sample::select(vec![0.25, 0.5, 1.0])) {
        let ens = gibbs(&HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap(), 1.0).unwrap();
        let a = C64::new(0.5f64.sqrt(), 0.0);
        let plus = DensityOperator::pure(&[a, a]).unwrap();
        let out = reference_frame_formation(&plus, &ens, 0.0, delta, levels).unwrap();
        prop_assert_eq!(out.ledger.energy_range, delta * (levels as f64 - 1.0) + delta);
    }
}
