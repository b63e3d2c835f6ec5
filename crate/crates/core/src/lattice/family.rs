//! Translation-invariant test-state families on chains.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::divergence::{DiagonalState, SiteLaw};
use crate::error::{Error, Result};
use crate::lattice::LocalHamiltonianSpec;
use crate::operator::{tensor_states, DensityOperator, HermitianOperator, C64};

/// Weight and stochasticity tolerance.
pub const WEIGHT_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;
/// Off-diagonal magnitude below which a single-site state is stored diagonally.
const COMPACT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StateFamilySpec {
    /// `|ψ⟩^{⊗n}`.
    IidPure {
        #[serde(with = "amplitudes")]
        psi: Vec<C64>,
    },
    /// `ρ₁^{⊗n}`.
    IidMixed { state: DensityOperator },
    /// Stationary classical Markov chain; `transition[a][b]` is `P(b | a)`.
    Markov { transition: Vec<Vec<f64>>, stationary: Vec<f64> },
    /// `Σ p_k ρ^{(k)}`.
    FiniteMixture { components: Vec<(f64, StateFamilySpec)> },
}

/// Amplitudes as separate real and imaginary lists.
mod amplitudes {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::operator::C64;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Parts {
        re: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(psi: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        let parts = Parts { re: psi.iter().map(|z| z.re).collect(), im: im.iter().any(|&x| x != 0.0).then_some(im) };
        parts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let p = Parts::deserialize(d)?;
        let im = p.im.unwrap_or_else(|| vec![0.0; p.re.len()]);
        if im.len() != p.re.len() {
            return Err(serde::de::Error::custom("re and im have different lengths"));
        }
        Ok(p.re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
    }
}

fn entropy(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter().filter(|&x| x > 0.0).map(|x| -x * x.ln()).sum()
}

impl StateFamilySpec {
    pub fn iid_pure(psi: Vec<C64>) -> Result<Self> {
        let s = StateFamilySpec::IidPure { psi };
        s.validate()?;
        Ok(s)
    }

    pub fn iid_mixed(state: DensityOperator) -> Result<Self> {
        Ok(StateFamilySpec::IidMixed { state })
    }

    pub fn markov(transition: Vec<Vec<f64>>, stationary: Vec<f64>) -> Result<Self> {
        let s = StateFamilySpec::Markov { transition, stationary };
        s.validate()?;
        Ok(s)
    }

    pub fn mixture(components: Vec<(f64, StateFamilySpec)>) -> Result<Self> {
        let s = StateFamilySpec::FiniteMixture { components };
        s.validate()?;
        Ok(s)
    }

    /// `|0⟩` or `|1⟩` on a qubit.
    pub fn spin_up() -> Self {
        StateFamilySpec::IidPure { psi: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)] }
    }

    pub fn spin_down() -> Self {
        StateFamilySpec::IidPure { psi: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StateFamilySpec::IidPure { psi } => {
                DensityOperator::pure(psi)?;
            }
            StateFamilySpec::IidMixed { .. } => {}
            StateFamilySpec::Markov { transition, stationary } => validate_markov(transition, stationary)?,
            StateFamilySpec::FiniteMixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidFamily("mixture has no components".into()));
                }
                let d = components[0].1.site_dim();
                let mut total = 0.0;
                for (w, c) in components {
                    if !(*w > 0.0) {
                        return Err(Error::InvalidFamily(format!("mixture weight {w} is not positive")));
                    }
                    if c.site_dim() != d {
                        return Err(Error::InvalidFamily("mixture components have different site dimensions".into()));
                    }
                    c.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > WEIGHT_TOL {
                    return Err(Error::InvalidFamily(format!("mixture weights sum to {total}")));
                }
            }
        }
        Ok(())
    }

    pub fn site_dim(&self) -> usize {
        match self {
            StateFamilySpec::IidPure { psi } => psi.len(),
            StateFamilySpec::IidMixed { state } => state.dim(),
            StateFamilySpec::Markov { stationary, .. } => stationary.len(),
            StateFamilySpec::FiniteMixture { components } => components.first().map_or(0, |c| c.1.site_dim()),
        }
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self, StateFamilySpec::FiniteMixture { .. })
    }

    /// Components with mixtures flattened; a non-mixture is its own single
    /// component.
    pub fn components(&self) -> Vec<(f64, StateFamilySpec)> {
        match self {
            StateFamilySpec::FiniteMixture { components } => components
                .iter()
                .flat_map(|(w, c)| c.components().into_iter().map(move |(v, d)| (w * v, d)))
                .collect(),
            other => vec![(1.0, other.clone())],
        }
    }

    /// Single-site reduced state of an i.i.d. family.
    pub fn single_site(&self) -> Result<DensityOperator> {
        let op = match self {
            StateFamilySpec::IidPure { psi } => DensityOperator::pure(psi)?.into_operator(),
            StateFamilySpec::IidMixed { state } => state.as_operator().clone(),
            StateFamilySpec::Markov { stationary, .. } => return DensityOperator::from_probabilities(stationary.clone()),
            StateFamilySpec::FiniteMixture { .. } => {
                let parts = self.components();
                let sites = parts.iter().map(|(_, c)| c.single_site()).collect::<Result<Vec<_>>>()?;
                let refs: Vec<(f64, &DensityOperator)> = parts.iter().zip(&sites).map(|((w, _), s)| (*w, s)).collect();
                return DensityOperator::mixture(&refs);
            }
        };
        DensityOperator::from_operator(op.compact(COMPACT_TOL))
    }

    /// Diagonal in the site product basis.
    pub fn is_diagonal(&self) -> bool {
        match self {
            StateFamilySpec::Markov { .. } => true,
            StateFamilySpec::FiniteMixture { .. } => self.components().iter().all(|(_, c)| c.is_diagonal()),
            _ => self.single_site().is_ok_and(|s| s.is_diagonal()),
        }
    }

    /// Site law of a diagonal, non-mixture family.
    pub fn site_law(&self) -> Result<SiteLaw> {
        match self {
            StateFamilySpec::Markov { transition, stationary } => {
                Ok(SiteLaw::Markov { initial: stationary.clone(), transition: transition.clone() })
            }
            StateFamilySpec::FiniteMixture { .. } => {
                Err(Error::UnsupportedStructure("a mixture has no site-factorized law".into()))
            }
            _ => {
                let s = self.single_site()?;
                match s.probabilities() {
                    Some(p) => Ok(SiteLaw::Iid(p.to_vec())),
                    None => Err(Error::UnsupportedStructure("single-site state is not diagonal".into())),
                }
            }
        }
    }

    /// Diagonal probabilities of `ρ_n`, at most `cap` entries.
    pub(crate) fn probabilities_capped(&self, n: usize, cap: usize) -> Result<Vec<f64>> {
        match self {
            StateFamilySpec::FiniteMixture { .. } => {
                let mut acc: Option<Vec<f64>> = None;
                for (w, c) in self.components() {
                    let p = c.probabilities_capped(n, cap)?;
                    match &mut acc {
                        None => acc = Some(p.into_iter().map(|x| w * x).collect()),
                        Some(a) => a.iter_mut().zip(p).for_each(|(a, x)| *a += w * x),
                    }
                }
                Ok(acc.expect("mixture has components"))
            }
            _ => DiagonalState::Chain { law: self.site_law()?, n }.expand_capped(cap),
        }
    }

    /// `ρ_n` on `n` sites.
    pub fn state(&self, n: usize) -> Result<DensityOperator> {
        if n == 0 {
            return Err(Error::InvalidParameter("chain length must be positive".into()));
        }
        if self.is_diagonal() {
            return DensityOperator::from_probabilities(self.probabilities_capped(n, crate::operator::MAX_DIAGONAL_DIM)?);
        }
        match self {
            StateFamilySpec::FiniteMixture { .. } => {
                let parts = self.components();
                let states = parts.iter().map(|(_, c)| c.state(n)).collect::<Result<Vec<_>>>()?;
                let refs: Vec<(f64, &DensityOperator)> = parts.iter().zip(&states).map(|((w, _), s)| (*w, s)).collect();
                DensityOperator::mixture(&refs)
            }
            _ => power(&self.single_site()?, n),
        }
    }

    /// `S(ρ_n)` in closed form (non-mixture families).
    pub fn entropy(&self, n: usize) -> Result<f64> {
        match self {
            StateFamilySpec::IidPure { .. } => Ok(0.0),
            StateFamilySpec::IidMixed { state } => Ok(n as f64 * entropy(state.eigenvalues())),
            StateFamilySpec::Markov { transition, stationary } => {
                Ok(entropy(stationary.iter().copied()) + n.saturating_sub(1) as f64 * markov_entropy_rate(transition, stationary))
            }
            StateFamilySpec::FiniteMixture { .. } => {
                Err(Error::UnsupportedStructure("mixture entropy has no closed form".into()))
            }
        }
    }

    /// Entropy per site in the limit.
    pub fn entropy_rate(&self) -> Result<f64> {
        match self {
            StateFamilySpec::Markov { transition, stationary } => Ok(markov_entropy_rate(transition, stationary)),
            _ => self.entropy(1),
        }
    }

    /// `(⟨h₀⟩, ⟨b⟩)` on one window and on the boundary block.
    pub fn window_energies(&self, spec: &LocalHamiltonianSpec) -> Result<(f64, f64)> {
        if self.site_dim() != spec.site_dim {
            return Err(Error::ShapeError("state and Hamiltonian site dimensions differ".into()));
        }
        let r = spec.support;
        match self {
            StateFamilySpec::Markov { transition, stationary } => {
                let local = spec.local_term.diagonal_in_basis();
                let e_w = dot(&markov_marginal(transition, stationary, r), &local);
                let e_b = match &spec.boundary_term {
                    Some(b) => dot(&markov_marginal(transition, stationary, r - 1), &b.diagonal_in_basis()),
                    None => 0.0,
                };
                Ok((e_w, e_b))
            }
            StateFamilySpec::FiniteMixture { .. } => {
                let mut acc = (0.0, 0.0);
                for (w, c) in self.components() {
                    let (a, b) = c.window_energies(spec)?;
                    acc.0 += w * a;
                    acc.1 += w * b;
                }
                Ok(acc)
            }
            _ => {
                let s = self.single_site()?;
                let e_w = spec.local_term.expectation(&power(&s, r)?)?;
                let e_b = match &spec.boundary_term {
                    Some(b) => b.expectation(&power(&s, r - 1)?)?,
                    None => 0.0,
                };
                Ok((e_w, e_b))
            }
        }
    }

    /// `tr(ρ_n H_n)`.
    pub fn energy(&self, spec: &LocalHamiltonianSpec, n: usize) -> Result<f64> {
        let (windows, boundary) = spec.term_count(n)?;
        let (e_w, e_b) = self.window_energies(spec)?;
        Ok(windows as f64 * e_w + boundary as f64 * e_b)
    }

    /// Per-site mean and second moment of a single-site observable.
    pub(crate) fn site_moments(&self, a: &HermitianOperator) -> Result<(f64, f64)> {
        let s = self.single_site()?;
        Ok((a.expectation(&s)?, a.square()?.expectation(&s)?))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn power(s: &DensityOperator, k: usize) -> Result<DensityOperator> {
    let mut acc = s.clone();
    for _ in 1..k {
        acc = tensor_states(&acc, s)?;
    }
    Ok(acc)
}

fn markov_entropy_rate(transition: &[Vec<f64>], stationary: &[f64]) -> f64 {
    stationary.iter().zip(transition).map(|(&p, row)| p * entropy(row.iter().copied())).sum()
}

/// Law of `k` consecutive sites, leftmost site most significant.
fn markov_marginal(transition: &[Vec<f64>], stationary: &[f64], k: usize) -> Vec<f64> {
    let d = stationary.len();
    let mut m = stationary.to_vec();
    for _ in 1..k {
        let mut next = Vec::with_capacity(m.len() * d);
        for (x, &w) in m.iter().enumerate() {
            let last = x % d;
            next.extend(transition[last].iter().map(|&t| w * t));
        }
        m = next;
    }
    m
}

fn validate_markov(transition: &[Vec<f64>], stationary: &[f64]) -> Result<()> {
    let d = stationary.len();
    if d == 0 || transition.len() != d || transition.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidFamily("transition matrix must be square and match the stationary law".into()));
    }
    for row in transition {
        let s: f64 = row.iter().sum();
        if row.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidFamily("transition matrix is not row-stochastic".into()));
        }
    }
    let s: f64 = stationary.iter().sum();
    if stationary.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidFamily("stationary law is not a probability vector".into()));
    }
    for b in 0..d {
        let v: f64 = (0..d).map(|a| stationary[a] * transition[a][b]).sum();
        if (v - stationary[b]).abs() > STATIONARY_TOL {
            return Err(Error::InvalidFamily("stationary law is not invariant under the transition matrix".into()));
        }
    }
    let p = DMatrix::from_fn(d, d, |i, j| transition[i][j]);
    let unit = p.complex_eigenvalues().iter().filter(|&&z| (z - C64::new(1.0, 0.0)).norm() < 1e-9).count();
    if unit != 1 {
        return Err(Error::InvalidFamily("stationary distribution is not unique".into()));
    }
    Ok(())
}
