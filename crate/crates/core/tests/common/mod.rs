#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermorev::{DensityOperator, HermitianOperator, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability vector; each entry is zeroed with probability `zero_p`, but at
/// least one stays positive.
pub fn probs(r: &mut ChaCha8Rng, d: usize, zero_p: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..d).map(|_| if r.gen_bool(zero_p) { 0.0 } else { r.gen_range(0.01..1.0) }).collect();
    if p.iter().all(|&x| x == 0.0) {
        p[r.gen_range(0..d)] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

pub fn ginibre(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

/// Random mixed state of the given rank.
pub fn state(r: &mut ChaCha8Rng, d: usize, rank: usize) -> DensityOperator {
    let g = ginibre(r, d, rank);
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityOperator::from_matrix(m / t).unwrap()
}

pub fn full_rank_state(r: &mut ChaCha8Rng, d: usize) -> DensityOperator {
    let s = state(r, d, d);
    let mixed = DensityOperator::maximally_mixed(d).unwrap();
    DensityOperator::mixture(&[(0.9, &s), (0.1, &mixed)]).unwrap()
}

pub fn hermitian(r: &mut ChaCha8Rng, d: usize) -> HermitianOperator {
    let g = ginibre(r, d, d);
    HermitianOperator::from_matrix((&g + g.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Diagonal Hamiltonian with levels in `[0, 2)`, possibly degenerate.
pub fn levels(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| (r.gen_range(0..8) as f64) * 0.25).collect()
}

/// Random Gibbs-preserving stochastic map applied to `p`: detailed-balance
/// two-level exchanges and partial thermalization.
pub fn thermal_step(r: &mut ChaCha8Rng, p: &[f64], g: &[f64]) -> Vec<f64> {
    let d = p.len();
    let mut out = p.to_vec();
    for _ in 0..3 {
        let i = r.gen_range(0..d);
        let j = r.gen_range(0..d);
        if i == j {
            continue;
        }
        let (hi, lo) = if g[i] >= g[j] { (i, j) } else { (j, i) };
        let a = r.gen_range(0.0..1.0);
        // lo → hi with rate a, hi → lo with rate a·g_lo/g_hi
        let down = a * out[lo];
        let up = a * g[lo] / g[hi] * out[hi];
        out[lo] += up - down;
        out[hi] += down - up;
    }
    let lam = r.gen_range(0.5..1.0);
    out.iter().zip(g).map(|(x, y)| (lam * x + (1.0 - lam) * y).max(0.0)).collect()
}
