mod common;

use proptest::prelude::*;
use thermorev::oracle::{d_hyp_thresholds, d_max_grid, d_min_subsets};
use thermorev::thermo::gibbs;
use thermorev::{
    d_hyp_eps, d_max0, d_max_eps, d_min0, d_min_eps, dephase, tensor_states, umegaki, DensityOperator,
    HermitianOperator, SmoothingParams,
};

const TOL: f64 = 1e-8;

fn eps(e: f64) -> SmoothingParams {
    SmoothingParams::new(e).unwrap()
}

/// Upper ends of the estimates; non-commuting brackets are compared at the
/// conservative end.
fn up(e: thermorev::Estimate) -> f64 {
    e.upper.to_f64()
}

fn lo(e: thermorev::Estimate) -> f64 {
    e.lower.to_f64()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn ordering_at_zero_smoothing(seed in any::<u64>(), d in 1usize..=5) {
        let mut r = common::rng(seed);
        let rho = common::state(&mut r, d, 1 + (seed as usize) % d);
        let sigma = common::full_rank_state(&mut r, d);
        let dmin = d_min0(&rho, &sigma).unwrap().to_f64();
        let dmax = d_max0(&rho, &sigma).unwrap().to_f64();
        let rel = umegaki(&rho, &sigma).unwrap().to_f64();
        prop_assert!(dmin <= rel + TOL && rel <= dmax + TOL, "{dmin} {rel} {dmax}");
    }

    #[test]
    fn smoothing_monotonicity(seed in any::<u64>(), d in 1usize..=6) {
        let mut r = common::rng(seed);
        let p = common::probs(&mut r, d, 0.2);
        let q = common::probs(&mut r, d, 0.0);
        let rho = DensityOperator::from_probabilities(p).unwrap();
        let sigma = DensityOperator::from_probabilities(q).unwrap();
        let grid = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4, 0.7];
        let mins: Vec<f64> = grid.iter().map(|&e| d_min_eps(&rho, &sigma, eps(e)).unwrap().value().to_f64()).collect();
        let maxs: Vec<f64> = grid.iter().map(|&e| d_max_eps(&rho, &sigma, eps(e)).unwrap().value().to_f64()).collect();
        for w in mins.windows(2) { prop_assert!(w[1] >= w[0] - TOL); }
        for w in maxs.windows(2) { prop_assert!(w[1] <= w[0] + TOL || w[0].is_infinite()); }
    }

    #[test]
    fn additivity_at_zero_smoothing(seed in any::<u64>(), d1 in 1usize..=3, d2 in 1usize..=3) {
        let mut r = common::rng(seed);
        let (r1, s1) = (common::state(&mut r, d1, 1.max(d1 - 1)), common::full_rank_state(&mut r, d1));
        let (r2, s2) = (common::state(&mut r, d2, d2), common::full_rank_state(&mut r, d2));
        let rr = tensor_states(&r1, &r2).unwrap();
        let ss = tensor_states(&s1, &s2).unwrap();
        let f = |g: fn(&DensityOperator, &DensityOperator) -> thermorev::Result<thermorev::Nats>| {
            (g(&rr, &ss).unwrap().to_f64(), g(&r1, &s1).unwrap().to_f64() + g(&r2, &s2).unwrap().to_f64())
        };
        for (joint, sum) in [f(d_min0), f(d_max0), f(umegaki)] {
            prop_assert!((joint - sum).abs() <= TOL * (1.0 + sum.abs()), "{joint} vs {sum}");
        }
    }

    #[test]
    fn data_processing_under_dephasing(seed in any::<u64>(), d in 2usize..=4, e in prop::sample::select(vec![0.0, 0.05, 0.2])) {
        let mut r = common::rng(seed);
        let h = HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap();
        let gamma = gibbs(&h, 1.0).unwrap().gamma;
        let rho = common::state(&mut r, d, 1 + (seed as usize) % d);
        let deph = dephase(&rho, &h).unwrap();
        prop_assert!(umegaki(&deph, &gamma).unwrap().to_f64() <= umegaki(&rho, &gamma).unwrap().to_f64() + TOL);
        prop_assert!(d_min0(&deph, &gamma).unwrap().to_f64() <= d_min0(&rho, &gamma).unwrap().to_f64() + TOL);
        prop_assert!(d_max0(&deph, &gamma).unwrap().to_f64() <= d_max0(&rho, &gamma).unwrap().to_f64() + TOL);
        prop_assert!(lo(d_hyp_eps(&deph, &gamma, eps(e)).unwrap()) <= up(d_hyp_eps(&rho, &gamma, eps(e)).unwrap()) + TOL);
    }

    #[test]
    fn diagonal_pairs_match_brute_force(seed in any::<u64>(), d in 1usize..=6, e in prop::sample::select(vec![0.0, 0.05, 0.1, 0.25])) {
        let mut r = common::rng(seed);
        let p = common::probs(&mut r, d, 0.15);
        let q = common::probs(&mut r, d, 0.1);
        let rho = DensityOperator::from_probabilities(p.clone()).unwrap();
        let sigma = DensityOperator::from_probabilities(q.clone()).unwrap();
        let close = |a: f64, b: f64, tol: f64| (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= tol;
        let dmin = d_min_eps(&rho, &sigma, eps(e)).unwrap();
        prop_assert!(dmin.exact);
        prop_assert!(close(dmin.value().to_f64(), d_min_subsets(&p, &q, e).unwrap(), 1e-6));
        let dmax = d_max_eps(&rho, &sigma, eps(e)).unwrap().value().to_f64();
        prop_assert!(close(dmax, d_max_grid(&p, &q, e, 1e-7).unwrap(), 1e-6), "{dmax}");
        let dh = d_hyp_eps(&rho, &sigma, eps(e)).unwrap().value().to_f64();
        prop_assert!(close(dh, d_hyp_thresholds(&p, &q, e).unwrap(), 1e-6));
    }
}
