//! Translation-invariant chains with open boundaries.
//!
//! `H_n = Σ_z h₀^{(z, …, z+r−1)} + b^{(n−r+2, …, n)}`: one copy of the local
//! term per window that fits, plus an optional right-boundary completion on
//! the last `r − 1` sites. Site index 0 is spin up (`σ_z = +1`).

pub mod family;
pub mod rates;
pub mod variance;

use nalgebra::DMatrix;

use crate::divergence::GibbsChain;
use crate::error::{Error, Result};
use crate::operator::{tensor, HermitianOperator, MAX_DENSE_DIM, MAX_DIAGONAL_DIM};
use crate::thermo::{gibbs, GibbsEnsemble};

pub use family::StateFamilySpec;
pub use rates::{gap_scan, mixture_scan, rate_umegaki, MixtureScan, RateScanRow, ScanMethod, UmegakiRate, Verdict};
pub use variance::spatial_variance;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalHamiltonianSpec {
    pub site_dim: usize,
    /// Number of consecutive sites the local term acts on.
    pub support: usize,
    pub local_term: HermitianOperator,
    /// Acts on the last `support − 1` sites.
    pub boundary_term: Option<HermitianOperator>,
}

impl LocalHamiltonianSpec {
    pub fn new(
        site_dim: usize,
        support: usize,
        local_term: HermitianOperator,
        boundary_term: Option<HermitianOperator>,
    ) -> Result<Self> {
        if site_dim == 0 || support == 0 {
            return Err(Error::InvalidParameter("site dimension and support must be positive".into()));
        }
        let want = site_dim.checked_pow(support as u32).unwrap_or(usize::MAX);
        if local_term.dim() != want {
            return Err(Error::ShapeError(format!("local term of dimension {}, expected {want}", local_term.dim())));
        }
        if let Some(b) = &boundary_term {
            if support < 2 || b.dim() != site_dim.pow(support as u32 - 1) {
                return Err(Error::ShapeError("boundary term must act on support − 1 sites".into()));
            }
        }
        Ok(LocalHamiltonianSpec { site_dim, support, local_term, boundary_term })
    }

    pub fn is_diagonal(&self) -> bool {
        self.local_term.is_diagonal() && self.boundary_term.as_ref().is_none_or(|b| b.is_diagonal())
    }

    /// Transfer-matrix form at inverse temperature β (diagonal terms only).
    pub fn gibbs_chain(&self, beta: f64) -> Result<GibbsChain> {
        if !self.is_diagonal() {
            return Err(Error::UnsupportedStructure("local term is not diagonal in the product basis".into()));
        }
        let chain = GibbsChain {
            site_dim: self.site_dim,
            support: self.support,
            local: self.local_term.diagonal_in_basis(),
            boundary: self.boundary_term.as_ref().map(|b| b.diagonal_in_basis()),
            beta,
        };
        chain.validate()?;
        Ok(chain)
    }

    /// Number of local-term windows and boundary terms in `H_n`.
    pub fn term_count(&self, n: usize) -> Result<(usize, usize)> {
        self.check_length(n)?;
        Ok((n + 1 - self.support, usize::from(self.boundary_term.is_some())))
    }

    fn check_length(&self, n: usize) -> Result<()> {
        if n < self.support || n == 0 {
            return Err(Error::ChainTooShort { n, support: self.support });
        }
        Ok(())
    }
}

/// `−J Σ σ_z σ_z + h Σ σ_z`: the field sits on the left site of each window
/// and the boundary term supplies the last site's field.
pub fn ising_chain(j: f64, h: f64) -> LocalHamiltonianSpec {
    let s = [1.0, -1.0];
    let local: Vec<f64> = (0..4).map(|x| -j * s[x / 2] * s[x % 2] + h * s[x / 2]).collect();
    LocalHamiltonianSpec {
        site_dim: 2,
        support: 2,
        local_term: HermitianOperator::diagonal(local).expect("4 entries"),
        boundary_term: Some(HermitianOperator::diagonal(vec![h, -h]).expect("2 entries")),
    }
}

/// Energies of all `site_dim^n` product configurations (diagonal terms).
fn diagonal_energies(spec: &LocalHamiltonianSpec, n: usize) -> Result<Vec<f64>> {
    let d = spec.site_dim;
    let r = spec.support;
    let dim = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > MAX_DIAGONAL_DIM as u128 {
        return Err(Error::DimensionLimit { dim: dim.min(usize::MAX as u128) as usize, limit: MAX_DIAGONAL_DIM });
    }
    let local = spec.local_term.diagonal_in_basis();
    let boundary = spec.boundary_term.as_ref().map(|b| b.diagonal_in_basis());
    let window = d.pow(r as u32);
    let tail = d.pow(r as u32 - 1);
    let mut out = Vec::with_capacity(dim as usize);
    for x in 0..dim as usize {
        let mut e = 0.0;
        // window z covers digits z … z+r−1 counted from the most significant
        for z in 0..=(n - r) {
            let shift = n - r - z;
            e += local[(x / d.pow(shift as u32)) % window];
        }
        if let Some(b) = &boundary {
            e += b[x % tail];
        }
        out.push(e);
    }
    Ok(out)
}

/// `H_n`, diagonal when the terms are diagonal.
pub fn truncate(spec: &LocalHamiltonianSpec, n: usize) -> Result<HermitianOperator> {
    spec.check_length(n)?;
    if spec.is_diagonal() {
        return HermitianOperator::diagonal(diagonal_energies(spec, n)?);
    }
    let d = spec.site_dim;
    let r = spec.support;
    let dim = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > MAX_DENSE_DIM as u128 {
        return Err(Error::DimensionLimit { dim: dim.min(usize::MAX as u128) as usize, limit: MAX_DENSE_DIM });
    }
    let eye = |k: usize| HermitianOperator::identity(d.pow(k as u32));
    let local = spec.local_term.matrix()?.into_owned();
    let mut h = HermitianOperator::from_matrix(DMatrix::zeros(dim as usize, dim as usize))?;
    let dense_local = HermitianOperator::from_matrix(local)?;
    for z in 0..=(n - r) {
        let term = tensor(&tensor(&eye(z)?, &dense_local)?, &eye(n - r - z)?)?;
        h = h.add(&term)?;
    }
    if let Some(b) = &spec.boundary_term {
        let b = HermitianOperator::from_matrix(b.matrix()?.into_owned())?;
        h = h.add(&tensor(&eye(n - (r - 1))?, &b)?)?;
    }
    Ok(h)
}

/// Gibbs state of `H_n`; `ln Z` comes from the transfer matrix for diagonal
/// terms and from exact diagonalization otherwise.
pub fn gibbs_lattice(spec: &LocalHamiltonianSpec, n: usize, beta: f64) -> Result<GibbsEnsemble> {
    let h = truncate(spec, n)?;
    let mut ens = gibbs(&h, beta)?;
    if spec.is_diagonal() {
        ens.log_partition = log_partition(spec, n, beta)?;
    }
    Ok(ens)
}

/// `ln Z_n` by the transfer-matrix recursion (diagonal terms, any `n`).
pub fn log_partition(spec: &LocalHamiltonianSpec, n: usize, beta: f64) -> Result<f64> {
    spec.check_length(n)?;
    spec.gibbs_chain(beta)?.log_partition(n)
}

/// Boltzmann transfer matrix on blocks of `max(r − 1, 1)` sites.
pub fn transfer_matrix(spec: &LocalHamiltonianSpec, beta: f64) -> Result<DMatrix<f64>> {
    let chain = spec.gibbs_chain(beta)?;
    let nb = chain.block_count();
    let mut t = DMatrix::zeros(nb, nb);
    for b in 0..nb {
        for y in 0..chain.site_dim {
            t[(b, chain.next_block(b, y))] += (-beta * chain.step_energy(b, y)).exp();
        }
    }
    Ok(t)
}

/// `f(β) = lim ln Z_n / n`, the log of the Perron root of the transfer matrix.
pub fn free_energy_density(spec: &LocalHamiltonianSpec, beta: f64) -> Result<f64> {
    let t = transfer_matrix(spec, beta)?;
    let root = t.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(root > 0.0) {
        return Err(Error::UnsupportedStructure("transfer matrix has no positive Perron root".into()));
    }
    Ok(root.ln())
}
