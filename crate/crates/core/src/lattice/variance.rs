//! Fluctuations of spatially averaged single-site observables.

use crate::error::{Error, Result};
use crate::lattice::family::StateFamilySpec;
use crate::operator::HermitianOperator;

/// `(mean, Var)` of `(1/n) Σ_z a_z` for a non-mixture family.
fn moments(state: &StateFamilySpec, a: &HermitianOperator, n: usize) -> Result<(f64, f64)> {
    let nf = n as f64;
    match state {
        StateFamilySpec::Markov { transition, stationary } => {
            // only the diagonal of a is seen by a diagonal state
            let d = stationary.len();
            let diag = a.diagonal_in_basis();
            let sq = a.square()?.diagonal_in_basis();
            let mean: f64 = stationary.iter().zip(&diag).map(|(p, x)| p * x).sum();
            let second: f64 = stationary.iter().zip(&sq).map(|(p, x)| p * x).sum();
            let mut total = nf * (second - mean * mean);
            // f = P^k a, conditional expectation k sites to the right
            let mut f = diag.clone();
            for k in 1..n {
                f = (0..d).map(|x| (0..d).map(|y| transition[x][y] * f[y]).sum()).collect();
                let cov: f64 = (0..d).map(|x| stationary[x] * diag[x] * f[x]).sum::<f64>() - mean * mean;
                total += 2.0 * (n - k) as f64 * cov;
            }
            Ok((mean, (total / (nf * nf)).max(0.0)))
        }
        StateFamilySpec::FiniteMixture { .. } => unreachable!("mixtures are split by the caller"),
        _ => {
            let (mean, second) = state.site_moments(a)?;
            Ok((mean, ((second - mean * mean) / nf).max(0.0)))
        }
    }
}

/// Exact variance of `(1/n) Σ_z a_z` in `ρ_n`.
///
/// Mixtures combine the within-component average and the dispersion of the
/// component means.
pub fn spatial_variance(state: &StateFamilySpec, observable: &HermitianOperator, n: usize) -> Result<f64> {
    state.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("chain length must be positive".into()));
    }
    if observable.dim() != state.site_dim() {
        return Err(Error::ShapeError(format!(
            "observable of dimension {} on sites of dimension {}",
            observable.dim(),
            state.site_dim()
        )));
    }
    let parts = state
        .components()
        .into_iter()
        .map(|(w, c)| moments(&c, observable, n).map(|m| (w, m)))
        .collect::<Result<Vec<_>>>()?;
    let mean: f64 = parts.iter().map(|(w, (m, _))| w * m).sum();
    Ok(parts.iter().map(|(w, (m, v))| w * (v + (m - mean) * (m - mean))).sum())
}
