mod common;

use proptest::prelude::*;
use thermorev::operator::eig_default;
use thermorev::thermo::gibbs;
use thermorev::{dephase, partial_trace, tensor_states, trace_distance, HermitianOperator};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs(seed in any::<u64>(), d in 1usize..=24) {
        let mut r = common::rng(seed);
        let h = common::hermitian(&mut r, d);
        let rec = eig_default(&h).reconstruct();
        let m = h.matrix().unwrap();
        let err = (&rec - &*m).norm() / m.norm().max(1e-300);
        prop_assert!(err <= 1e-9, "relative reconstruction error {err:e}");
    }

    #[test]
    fn dephasing_is_an_idempotent_channel(seed in any::<u64>(), d in 2usize..=6) {
        let mut r = common::rng(seed);
        let rho = common::state(&mut r, d, 1 + (seed as usize) % d);
        let h = HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap();
        let once = dephase(&rho, &h).unwrap();
        let twice = dephase(&once, &h).unwrap();
        prop_assert!(trace_distance(&once, &twice).unwrap() <= 1e-12);
        prop_assert!((once.as_operator().trace() - 1.0).abs() <= 1e-12);
        prop_assert!(*once.eigenvalues().last().unwrap() >= -1e-12);
        let ens = gibbs(&h, 0.7).unwrap();
        prop_assert!(trace_distance(&dephase(&ens.gamma, &h).unwrap(), &ens.gamma).unwrap() <= 1e-12);
    }

    #[test]
    fn dephasing_in_a_dense_eigenbasis(seed in any::<u64>(), d in 2usize..=5) {
        let mut r = common::rng(seed);
        let h = common::hermitian(&mut r, d);
        let rho = common::state(&mut r, d, d);
        let out = dephase(&rho, &h).unwrap();
        prop_assert!(out.as_operator().commutator_norm(&h).unwrap() <= 1e-9);
        let ens = gibbs(&h, 1.3).unwrap();
        prop_assert!(trace_distance(&dephase(&ens.gamma, &h).unwrap(), &ens.gamma).unwrap() <= 1e-10);
    }

    #[test]
    fn trace_distance_triangle(seed in any::<u64>(), d in 1usize..=6) {
        let mut r = common::rng(seed);
        let a = common::state(&mut r, d, d);
        let b = common::state(&mut r, d, 1);
        let c = common::state(&mut r, d, 2.min(d));
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-10);
    }

    #[test]
    fn partial_trace_recovers_marginals(seed in any::<u64>(), da in 1usize..=4, db in 1usize..=4) {
        let mut r = common::rng(seed);
        let a = common::state(&mut r, da, da);
        let b = common::state(&mut r, db, 1);
        let ab = tensor_states(&a, &b).unwrap();
        let ra = partial_trace(&ab, &[da, db], &[0]).unwrap();
        let rb = partial_trace(&ab, &[da, db], &[1]).unwrap();
        prop_assert!((&*ra.matrix().unwrap() - &*a.matrix().unwrap()).norm() <= 1e-12);
        prop_assert!((&*rb.matrix().unwrap() - &*b.matrix().unwrap()).norm() <= 1e-12);
    }
}
