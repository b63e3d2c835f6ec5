//! Relative entropies and their ε-smoothed one-shot versions.
//!
//! Smoothing is over normalized states within trace distance ε of ρ.
//!
//! * `D_min^ε(ρ‖σ) = max_{ρ̃ ≈_ε ρ} −ln tr(Π^ρ̃ σ)`. For commuting pairs the
//!   maximizer is supported on a subset of the joint eigenbasis: removing a set
//!   `A` of basis elements costs `ρ(A)` of trace distance, so the value is a 0/1
//!   covering problem solved exactly by branch and bound.
//! * `D_max^ε(ρ‖σ) = min_{ρ̃ ≈_ε ρ} min{λ : ρ̃ ≤ e^λ σ}`. For commuting pairs,
//!   any feasible `ρ̃ ≤ tσ` satisfies `Σ(p − tq)₊ ≤ TD(ρ, ρ̃)`, since
//!   `(p − tq)₊ ≤ (p − p̃)₊` entrywise. Conversely, the truncation
//!   `min(p, tq)` plus the removed mass redistributed under the slack
//!   `Σ(tq − p)₊ = t − 1 + Σ(p − tq)₊` is feasible at trace distance
//!   `Σ(p − tq)₊` whenever `t ≥ 1`. So the value is the least `t ≥ 1` whose
//!   excess mass is at most ε, found in closed form on the ratio-sorted atoms.
//! * `D_H^ε(ρ‖σ) = −ln min{tr Qσ : 0 ≤ Q ≤ 1, tr Qρ ≥ 1 − ε}` by Neyman–Pearson.
//!
//! Commuting inputs (`‖[ρ,σ]‖_F ≤ 1e-10`) are reduced to an exact
//! [`RatioSpectrum`]. Otherwise `D` and `D_H^ε` are computed to bisection
//! accuracy and the smoothed min/max quantities are reported as brackets.

pub mod classical;
pub(crate) mod hypothesis;
pub mod spectrum;

use nalgebra::DMatrix;
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nats::Nats;
use crate::operator::{eig, eigh, C64, DensityOperator, MAX_DIAGONAL_DIM};
pub use spectrum::{Atom, GibbsChain, RatioSpectrum, SiteLaw, DEFAULT_BIN_WIDTH};

/// Frobenius-norm threshold below which a pair is treated as commuting.
pub const COMMUTING_TOL: f64 = 1e-10;
const RHO_SUPPORT_REL: f64 = 1e-12;
const SIGMA_KERNEL_REL: f64 = 1e-14;
const KERNEL_MASS_TOL: f64 = 1e-12;

/// Radius of the trace-distance smoothing ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingParams {
    pub epsilon: f64,
}

impl SmoothingParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if (0.0..1.0).contains(&epsilon) {
            Ok(SmoothingParams { epsilon })
        } else {
            Err(Error::InvalidSmoothing(epsilon))
        }
    }

    pub fn none() -> Self {
        SmoothingParams { epsilon: 0.0 }
    }
}

/// A value known exactly or up to a certified bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub lower: Nats,
    pub upper: Nats,
    pub exact: bool,
}

impl Estimate {
    pub fn exact(v: Nats) -> Self {
        Estimate { lower: v, upper: v, exact: true }
    }

    pub fn bracket(lower: Nats, upper: Nats) -> Self {
        Estimate { lower, upper, exact: false }
    }

    /// Bracket midpoint; the lower end when the bracket is unbounded.
    pub fn value(&self) -> Nats {
        match (self.lower, self.upper) {
            (Nats::Finite(l), Nats::Finite(u)) => Nats::Finite(0.5 * (l + u)),
            (l, _) => l,
        }
    }

    pub fn width(&self) -> Nats {
        match (self.lower, self.upper) {
            (Nats::Finite(l), Nats::Finite(u)) => Nats::Finite((u - l).max(0.0)),
            (Nats::Infinite, _) => Nats::ZERO,
            _ => Nats::Infinite,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Estimate { lower: self.lower.scale(factor), upper: self.upper.scale(factor), exact: self.exact }
    }
}

impl Serialize for Estimate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Estimate", 3)?;
        st.serialize_field("value", &self.value())?;
        st.serialize_field("exact", &self.exact)?;
        st.serialize_field("bracket", &[self.lower, self.upper])?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact ratio spectrum of a commuting pair.
    Commuting,
    /// Binned ratio spectrum from the chain dynamic program.
    BinnedSpectrum,
    /// Dense non-commuting pair.
    Quantum,
}

/// The four divergences of a `(ρ, σ, ε)` triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub umegaki: Estimate,
    pub d_min: Estimate,
    pub d_max: Estimate,
    pub d_hyp: Estimate,
    pub epsilon: f64,
    pub method: Method,
    /// Widest bracket among the four entries.
    pub bracket_width: Nats,
}

impl DivergenceReport {
    fn assemble(umegaki: Estimate, d_min: Estimate, d_max: Estimate, d_hyp: Estimate, epsilon: f64, method: Method) -> Self {
        let bracket_width = [umegaki, d_min, d_max, d_hyp].iter().map(Estimate::width).fold(Nats::ZERO, Nats::max);
        DivergenceReport { umegaki, d_min, d_max, d_hyp, epsilon, method, bracket_width }
    }
}

/// Diagonal state in explicit or chain-factorized form.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagonalState {
    Explicit(Vec<f64>),
    /// Product or Markov law on `n` sites.
    Chain { law: SiteLaw, n: usize },
    /// Classical Gibbs state of a chain Hamiltonian on `n` sites.
    Gibbs { chain: GibbsChain, n: usize },
}

impl DiagonalState {
    /// Explicit probability vector, if it fits the diagonal dimension limit.
    pub fn expand(&self) -> Result<Vec<f64>> {
        self.expand_capped(MAX_DIAGONAL_DIM)
    }

    pub(crate) fn expand_capped(&self, cap: usize) -> Result<Vec<f64>> {
        match self {
            DiagonalState::Explicit(p) => Ok(p.clone()),
            DiagonalState::Chain { law, n } => {
                let d = law.site_dim();
                let dim = checked_dim(d, *n, cap)?;
                let mut out = vec![0.0; dim];
                for (x, slot) in out.iter_mut().enumerate() {
                    let digits = site_digits(x, d, *n);
                    let mut p = match law {
                        SiteLaw::Iid(q) => q[digits[0]],
                        SiteLaw::Markov { initial, .. } => initial[digits[0]],
                    };
                    for w in digits.windows(2) {
                        p *= match law {
                            SiteLaw::Iid(q) => q[w[1]],
                            SiteLaw::Markov { transition, .. } => transition[w[0]][w[1]],
                        };
                    }
                    *slot = p;
                }
                Ok(out)
            }
            DiagonalState::Gibbs { chain, n } => gibbs_probabilities_capped(chain, *n, cap),
        }
    }
}

fn checked_dim(d: usize, n: usize, cap: usize) -> Result<usize> {
    let dim = (d as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::DimensionLimit { dim: dim.min(usize::MAX as u128) as usize, limit: cap });
    }
    Ok(dim as usize)
}

fn site_digits(mut x: usize, d: usize, n: usize) -> Vec<usize> {
    let mut v = vec![0; n];
    for i in (0..n).rev() {
        v[i] = x % d;
        x /= d;
    }
    v
}

/// Explicit Gibbs probabilities of a chain on `n` sites (leftmost site most
/// significant).
pub fn chain_gibbs_probabilities(chain: &GibbsChain, n: usize) -> Result<Vec<f64>> {
    gibbs_probabilities_capped(chain, n, MAX_DIAGONAL_DIM)
}

pub(crate) fn gibbs_probabilities_capped(chain: &GibbsChain, n: usize, cap: usize) -> Result<Vec<f64>> {
    chain.validate()?;
    let d = chain.site_dim;
    let r = chain.support;
    if n < r.max(chain.block_len()) {
        return Err(Error::ChainTooShort { n, support: r.max(chain.block_len()) });
    }
    let dim = checked_dim(d, n, cap)?;
    let energies: Vec<f64> = (0..dim)
        .map(|x| {
            let digits = site_digits(x, d, n);
            let idx = |s: &[usize]| s.iter().fold(0usize, |a, &b| a * d + b);
            let mut e: f64 = digits.windows(r).map(|w| chain.local[idx(w)]).sum();
            if let Some(b) = &chain.boundary {
                e += b[idx(&digits[n - (r - 1)..])];
            }
            e
        })
        .collect();
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-chain.beta * (e - emin)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Likelihood-ratio spectrum of two diagonal states.
///
/// Chain-factorized ρ requires σ in transfer-matrix (Gibbs chain) form;
/// `bin_width` applies to that dynamic program.
pub fn ratio_spectrum(rho: &DiagonalState, sigma: &DiagonalState, bin_width: Option<f64>) -> Result<RatioSpectrum> {
    match (rho, sigma) {
        (DiagonalState::Chain { law, n }, DiagonalState::Gibbs { chain, n: m }) => {
            if n != m {
                return Err(Error::ShapeError(format!("chains of {n} and {m} sites")));
            }
            RatioSpectrum::from_chain(law, chain, *n, bin_width.unwrap_or(DEFAULT_BIN_WIDTH))
        }
        (DiagonalState::Chain { law, n }, DiagonalState::Chain { law: SiteLaw::Iid(q), n: m }) => {
            if n != m {
                return Err(Error::ShapeError(format!("chains of {n} and {m} sites")));
            }
            if q.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::UnsupportedStructure("product reference state must have full support".into()));
            }
            let chain = GibbsChain {
                site_dim: q.len(),
                support: 1,
                local: q.iter().map(|x| -x.ln()).collect(),
                boundary: None,
                beta: 1.0,
            };
            RatioSpectrum::from_chain(law, &chain, *n, bin_width.unwrap_or(DEFAULT_BIN_WIDTH))
        }
        (DiagonalState::Explicit(_), _) | (_, DiagonalState::Explicit(_)) | (DiagonalState::Gibbs { .. }, _) => {
            if matches!(rho, DiagonalState::Chain { .. }) {
                return Err(Error::UnsupportedStructure(
                    "a chain-factorized state needs a transfer-matrix reference state".into(),
                ));
            }
            RatioSpectrum::from_probabilities(&rho.expand()?, &sigma.expand()?)
        }
        _ => Err(Error::UnsupportedStructure("reference state is not of transfer-matrix form".into())),
    }
}

/// All four divergences from a ratio spectrum.
pub fn divergences_from_spectrum(spec: &RatioSpectrum, params: SmoothingParams) -> DivergenceReport {
    let eps = params.epsilon;
    let method = if spec.bin_width.is_some() { Method::BinnedSpectrum } else { Method::Commuting };
    DivergenceReport::assemble(
        classical::umegaki(spec),
        classical::d_min(spec, eps),
        classical::d_max(spec, eps),
        classical::d_hyp(spec, eps),
        eps,
        method,
    )
}

fn check_dims(rho: &DensityOperator, sigma: &DensityOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeError(format!("states of dimension {} and {}", rho.dim(), sigma.dim())));
    }
    Ok(())
}

/// Joint eigenvalue pairs `(p_i, q_i)` of a commuting pair, or `None`.
pub fn commuting_pairs(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    check_dims(rho, sigma)?;
    if let (Some(p), Some(q)) = (rho.probabilities(), sigma.probabilities()) {
        return Ok(Some((p.to_vec(), q.to_vec())));
    }
    if rho.as_operator().commutator_norm(sigma.as_operator())? > COMMUTING_TOL {
        return Ok(None);
    }
    let sig = sigma.as_operator();
    let spectral = eig(sig, 1e-10_f64.max(crate::operator::default_merge_tol(sig)));
    let rm = rho.matrix()?;
    let (mut p, mut q) = (Vec::with_capacity(rho.dim()), Vec::with_capacity(rho.dim()));
    for space in spectral.spaces() {
        let v = space.vectors(rho.dim());
        let block = v.adjoint() * rm.as_ref() * &v;
        let (vals, _) = eigh(&block);
        for mu in vals {
            p.push(mu.max(0.0));
            q.push(space.value.max(0.0));
        }
    }
    Ok(Some((p, q)))
}

fn spectrum_of(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Option<RatioSpectrum>> {
    match commuting_pairs(rho, sigma)? {
        Some((p, q)) => Ok(Some(RatioSpectrum::from_probabilities(&p, &q)?)),
        None => Ok(None),
    }
}

struct Dense {
    rho: DMatrix<C64>,
    sigma: DMatrix<C64>,
    rho_vals: Vec<f64>,
    rho_vecs: DMatrix<C64>,
    sigma_vals: Vec<f64>,
    sigma_vecs: DMatrix<C64>,
}

impl Dense {
    fn new(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Self> {
        let rho = rho.matrix()?.into_owned();
        let sigma = sigma.matrix()?.into_owned();
        let (rho_vals, rho_vecs) = eigh(&rho);
        let (sigma_vals, sigma_vecs) = eigh(&sigma);
        Ok(Dense { rho, sigma, rho_vals, rho_vecs, sigma_vals, sigma_vecs })
    }

    fn sigma_support(&self) -> Vec<usize> {
        let smax = self.sigma_vals.first().copied().unwrap_or(0.0);
        (0..self.sigma_vals.len()).filter(|&j| self.sigma_vals[j] > SIGMA_KERNEL_REL * smax).collect()
    }

    /// `⟨s_j|ρ|s_j⟩` for every σ-eigenvector.
    fn rho_in_sigma_basis(&self) -> Vec<f64> {
        let rv = &self.rho * &self.sigma_vecs;
        (0..self.sigma_vals.len()).map(|j| self.sigma_vecs.column(j).dotc(&rv.column(j)).re).collect()
    }

    fn kernel_mass(&self) -> f64 {
        let support = self.sigma_support();
        let diag = self.rho_in_sigma_basis();
        (0..diag.len()).filter(|j| !support.contains(j)).map(|j| diag[j].max(0.0)).sum()
    }

    fn umegaki(&self) -> Nats {
        if self.kernel_mass() > KERNEL_MASS_TOL {
            return Nats::Infinite;
        }
        let neg_entropy: f64 = self.rho_vals.iter().filter(|&&l| l > 0.0).map(|&l| l * l.ln()).sum();
        let diag = self.rho_in_sigma_basis();
        let cross: f64 = self.sigma_support().into_iter().map(|j| diag[j] * self.sigma_vals[j].ln()).sum();
        Nats::Finite(neg_entropy - cross)
    }

    fn d_min0(&self) -> Nats {
        let rmax = self.rho_vals.first().copied().unwrap_or(0.0);
        let sv = &self.sigma * &self.rho_vecs;
        let tr: f64 = (0..self.rho_vals.len())
            .filter(|&i| self.rho_vals[i] > RHO_SUPPORT_REL * rmax)
            .map(|i| self.rho_vecs.column(i).dotc(&sv.column(i)).re)
            .sum();
        let smax = self.sigma_vals.first().copied().unwrap_or(0.0);
        if tr <= SIGMA_KERNEL_REL * smax {
            Nats::Infinite
        } else {
            Nats::neg_ln(tr)
        }
    }

    fn d_max0(&self) -> Nats {
        if self.kernel_mass() > KERNEL_MASS_TOL {
            return Nats::Infinite;
        }
        let support = self.sigma_support();
        let d = self.rho.nrows();
        let mut w = DMatrix::<C64>::zeros(d, support.len());
        for (c, &j) in support.iter().enumerate() {
            let s = self.sigma_vals[j].sqrt();
            w.set_column(c, &self.sigma_vecs.column(j).map(|z| z / s));
        }
        let m = w.adjoint() * &self.rho * &w;
        let (vals, _) = eigh(&m);
        match vals.first() {
            Some(&l) if l > 0.0 => Nats::Finite(l.ln()),
            _ => Nats::Infinite,
        }
    }
}

pub fn umegaki(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Nats> {
    match spectrum_of(rho, sigma)? {
        Some(s) => Ok(classical::umegaki(&s).lower),
        None => Ok(Dense::new(rho, sigma)?.umegaki()),
    }
}

pub fn d_min0(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Nats> {
    check_dims(rho, sigma)?;
    if let (Some(p), Some(q)) = (rho.probabilities(), sigma.probabilities()) {
        return Ok(classical::d_min0(&RatioSpectrum::from_probabilities(p, q)?));
    }
    Ok(Dense::new(rho, sigma)?.d_min0())
}

pub fn d_max0(rho: &DensityOperator, sigma: &DensityOperator) -> Result<Nats> {
    check_dims(rho, sigma)?;
    if let (Some(p), Some(q)) = (rho.probabilities(), sigma.probabilities()) {
        return Ok(classical::d_max(&RatioSpectrum::from_probabilities(p, q)?, 0.0).lower);
    }
    Ok(Dense::new(rho, sigma)?.d_max0())
}

fn quantum_hyp(dense: &Dense, eps: f64) -> (Estimate, f64) {
    let t = hypothesis::type_two(&dense.rho, &dense.sigma, eps);
    (Estimate::bracket(Nats::neg_ln(t.upper), Nats::neg_ln(t.lower)), t.projector)
}

fn quantum_d_min(dense: &Dense, eps: f64, hyp: &Estimate, projector: f64) -> Estimate {
    let d0 = dense.d_min0();
    if eps == 0.0 {
        return Estimate::exact(d0);
    }
    let lower = d0.max(Nats::neg_ln(projector)).min(hyp.upper);
    Estimate::bracket(lower, hyp.upper)
}

fn quantum_d_max(dense: &Dense, eps: f64) -> Estimate {
    let d0 = dense.d_max0();
    if eps == 0.0 {
        return Estimate::exact(d0);
    }
    if dense.kernel_mass() > eps + KERNEL_MASS_TOL {
        return Estimate::exact(Nats::Infinite);
    }
    let cap = d0.as_finite().map(|l| l.exp() * (1.0 + 1e-12));
    let lower = Nats::Finite(hypothesis::smoothed_max_lower(&dense.rho, &dense.sigma, eps, cap)).min(d0);
    Estimate::bracket(lower, d0)
}

pub fn d_min_eps(rho: &DensityOperator, sigma: &DensityOperator, params: SmoothingParams) -> Result<Estimate> {
    let params = SmoothingParams::new(params.epsilon)?;
    match spectrum_of(rho, sigma)? {
        Some(s) => Ok(classical::d_min(&s, params.epsilon)),
        None => {
            let dense = Dense::new(rho, sigma)?;
            let (hyp, proj) = quantum_hyp(&dense, params.epsilon);
            Ok(quantum_d_min(&dense, params.epsilon, &hyp, proj))
        }
    }
}

pub fn d_max_eps(rho: &DensityOperator, sigma: &DensityOperator, params: SmoothingParams) -> Result<Estimate> {
    let params = SmoothingParams::new(params.epsilon)?;
    match spectrum_of(rho, sigma)? {
        Some(s) => Ok(classical::d_max(&s, params.epsilon)),
        None => Ok(quantum_d_max(&Dense::new(rho, sigma)?, params.epsilon)),
    }
}

pub fn d_hyp_eps(rho: &DensityOperator, sigma: &DensityOperator, params: SmoothingParams) -> Result<Estimate> {
    let params = SmoothingParams::new(params.epsilon)?;
    match spectrum_of(rho, sigma)? {
        Some(s) => Ok(classical::d_hyp(&s, params.epsilon)),
        None => Ok(quantum_hyp(&Dense::new(rho, sigma)?, params.epsilon).0),
    }
}

/// All four divergences of `(ρ, σ)` at smoothing `params`.
pub fn divergence_report(rho: &DensityOperator, sigma: &DensityOperator, params: SmoothingParams) -> Result<DivergenceReport> {
    let params = SmoothingParams::new(params.epsilon)?;
    let eps = params.epsilon;
    match spectrum_of(rho, sigma)? {
        Some(s) => Ok(divergences_from_spectrum(&s, params)),
        None => {
            let dense = Dense::new(rho, sigma)?;
            let (hyp, proj) = quantum_hyp(&dense, eps);
            Ok(DivergenceReport::assemble(
                Estimate::exact(dense.umegaki()),
                quantum_d_min(&dense, eps, &hyp, proj),
                quantum_d_max(&dense, eps),
                hyp,
                eps,
                Method::Quantum,
            ))
        }
    }
}
