mod common;

use proptest::prelude::*;
use thermorev::oracle::{distillation_by_battery, formation_by_battery};
use thermorev::thermo::{
    gibbs, lorenz_curve, reversibility_gap, thermo_majorizes, work_distillable, work_formation, DEFAULT_BATTERY_STEP,
};
use thermorev::{d_max0, d_min0, DensityOperator, HermitianOperator};

const TOL: f64 = 1e-8;

fn diag(p: Vec<f64>) -> DensityOperator {
    DensityOperator::from_probabilities(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn thermo_majorization_is_a_preorder(seed in any::<u64>(), d in 1usize..=5) {
        let mut r = common::rng(seed);
        let ens = gibbs(&HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap(), 1.0).unwrap();
        let g = ens.gamma.probabilities().unwrap().to_vec();
        let a = common::probs(&mut r, d, 0.3);
        let b = common::thermal_step(&mut r, &a, &g);
        let c = common::thermal_step(&mut r, &b, &g);
        let (ra, rb, rc) = (diag(a), diag(b), diag(c));
        prop_assert!(thermo_majorizes(&ra, &ra, &ens).unwrap());
        prop_assert!(thermo_majorizes(&ra, &rb, &ens).unwrap());
        prop_assert!(thermo_majorizes(&rb, &rc, &ens).unwrap());
        prop_assert!(thermo_majorizes(&ra, &rc, &ens).unwrap());
        // arbitrary triples: the implication must hold whenever its premise does
        let x = diag(common::probs(&mut r, d, 0.3));
        let y = diag(common::probs(&mut r, d, 0.3));
        if thermo_majorizes(&x, &y, &ens).unwrap() && thermo_majorizes(&y, &rc, &ens).unwrap() {
            prop_assert!(thermo_majorizes(&x, &rc, &ens).unwrap());
        }
    }

    #[test]
    fn monotones_decrease_along_thermal_maps(seed in any::<u64>(), d in 1usize..=5) {
        let mut r = common::rng(seed);
        let ens = gibbs(&HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap(), 0.8).unwrap();
        let g = ens.gamma.probabilities().unwrap().to_vec();
        let a = common::probs(&mut r, d, 0.3);
        let b = common::thermal_step(&mut r, &a, &g);
        let (ra, rb) = (diag(a), diag(b));
        prop_assert!(thermo_majorizes(&ra, &rb, &ens).unwrap());
        let (ca, cb) = (lorenz_curve(&ra, &ens).unwrap(), lorenz_curve(&rb, &ens).unwrap());
        for &(x, y) in &cb.vertices {
            prop_assert!(ca.eval(x) >= y - 1e-10);
        }
        prop_assert!(d_min0(&ra, &ens.gamma).unwrap().to_f64() >= d_min0(&rb, &ens.gamma).unwrap().to_f64() - TOL);
        prop_assert!(d_max0(&ra, &ens.gamma).unwrap().to_f64() >= d_max0(&rb, &ens.gamma).unwrap().to_f64() - TOL);
    }

    #[test]
    fn battery_bisection_matches_divergences(seed in any::<u64>(), d in 1usize..=4, e in prop::sample::select(vec![0.0, 0.05, 0.1])) {
        let mut r = common::rng(seed);
        let ens = gibbs(&HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap(), 1.0).unwrap();
        let g = ens.gamma.probabilities().unwrap().to_vec();
        let p = common::probs(&mut r, d, 0.25);
        let rho = diag(p.clone());
        let step = DEFAULT_BATTERY_STEP;
        let f = work_formation(&rho, &ens, e).unwrap().work;
        let fo = formation_by_battery(&p, &g, 1.0, e, step).unwrap();
        prop_assert!((f - fo).abs() <= step + 1e-9, "formation {f} vs {fo}");
        let w = work_distillable(&rho, &ens, e).unwrap().work;
        let wo = distillation_by_battery(&p, &g, 1.0, e, step).unwrap();
        prop_assert!((w - wo).abs() <= step + 1e-9, "distillation {w} vs {wo}");
    }

    #[test]
    fn formation_minus_distillation_is_twice_the_gap(seed in any::<u64>(), d in 1usize..=5, e in prop::sample::select(vec![0.0, 0.05, 0.25])) {
        let mut r = common::rng(seed);
        let beta = 0.5 + (seed % 7) as f64 * 0.25;
        let ens = gibbs(&HermitianOperator::diagonal(common::levels(&mut r, d)).unwrap(), beta).unwrap();
        let rho = diag(common::probs(&mut r, d, 0.2));
        let f = work_formation(&rho, &ens, e).unwrap().work;
        let w = work_distillable(&rho, &ens, e).unwrap().work;
        let gap = reversibility_gap(&rho, &ens, e).unwrap().delta.to_f64();
        prop_assert!((f - w - 2.0 * gap / beta).abs() <= 1e-12 * (1.0 + f.abs()));
    }
}
