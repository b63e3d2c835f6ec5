//! Coherence handling: level discretization, off-diagonal diagnostics,
//! dephase-then-distill, and ladder reference frames.
//!
//! Coherence is accounted as the energy range of the auxiliary pure systems a
//! protocol consumes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::divergence::{self, Estimate, SmoothingParams};
use crate::error::{Error, Result};
use crate::operator::{
    dephase, eig_default, eigh, tensor, tensor_states, trace_distance, DensityOperator, HermitianOperator, C64,
};
use crate::thermo::{gibbs, work_distillable, GibbsEnsemble, WorkQuote};

/// Energy-range budget of auxiliary pure systems, per protocol step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoherenceLedger {
    pub energy_range: f64,
    pub per_step: Vec<(String, f64)>,
}

impl CoherenceLedger {
    pub fn push(&mut self, label: &str, range: f64) {
        self.per_step.push((label.to_string(), range.max(0.0)));
        self.energy_range = self.per_step.iter().map(|(_, r)| r).sum();
    }

    pub fn extend(&mut self, other: &CoherenceLedger) {
        for (label, r) in &other.per_step {
            self.push(label, *r);
        }
    }
}

/// Nearest multiple of `delta`; exact half-way cases go toward zero.
pub fn round_to_grid(e: f64, delta: f64) -> f64 {
    let x = e / delta;
    let t = x.trunc();
    let frac = (x - t).abs();
    let k = if (frac - 0.5).abs() <= 1e-12 { t } else { x.round() };
    k * delta
}

/// Same eigenvectors as `h`, eigenvalues rounded to multiples of `delta`.
pub fn discretize_hamiltonian(h: &HermitianOperator, delta: f64) -> Result<(HermitianOperator, CoherenceLedger)> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {delta}")));
    }
    let h2 = match h.diagonal_entries() {
        Some(e) => HermitianOperator::diagonal(e.iter().map(|&x| round_to_grid(x, delta)).collect())?,
        None => {
            let spec = eig_default(h);
            let d = h.dim();
            let mut m = DMatrix::<C64>::zeros(d, d);
            for (k, s) in spec.spaces().iter().enumerate() {
                m += spec.projector(k) * C64::new(round_to_grid(s.value, delta), 0.0);
            }
            HermitianOperator::from_matrix(m)?
        }
    };
    let mut ledger = CoherenceLedger::default();
    ledger.push("discretization", delta);
    Ok((h2, ledger))
}

/// Largest coherence between energy levels, binned by gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffDiagonalProfile {
    /// `(energy gap, largest block norm)`, gaps increasing.
    pub bins: Vec<(f64, f64)>,
    pub beta: f64,
}

impl OffDiagonalProfile {
    /// CSV with header `gap,max_abs`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        use crate::numfmt::format_f64;
        let err = |e: std::io::Error| Error::Serialization(e.to_string());
        out.write_all(b"gap,max_abs\r\n").map_err(err)?;
        for &(g, v) in &self.bins {
            write!(out, "{},{}\r\n", format_f64(g), format_f64(v)).map_err(err)?;
        }
        Ok(())
    }
}

/// Spectral norms of the blocks `P_k ρ P_k′` between distinct levels of the
/// ensemble Hamiltonian, grouped by `|E_k − E_k′|`.
pub fn offdiagonal_profile(rho: &DensityOperator, ens: &GibbsEnsemble) -> Result<OffDiagonalProfile> {
    if rho.dim() != ens.dim() {
        return Err(Error::ShapeError(format!("state of dimension {} vs Hamiltonian {}", rho.dim(), ens.dim())));
    }
    let spec = ens.spectrum();
    let spaces = spec.spaces();
    let rm = rho.matrix()?;
    let vecs: Vec<DMatrix<C64>> = spaces.iter().map(|s| s.vectors(rho.dim())).collect();
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for k in 0..spaces.len() {
        for k2 in (k + 1)..spaces.len() {
            let block = vecs[k].adjoint() * rm.as_ref() * &vecs[k2];
            let gram = &block * block.adjoint();
            let norm = eigh(&gram).0.first().copied().unwrap_or(0.0).max(0.0).sqrt();
            pairs.push(((spaces[k].value - spaces[k2].value).abs(), norm));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = spaces.iter().map(|s| s.value.abs()).fold(1.0, f64::max);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    for (gap, v) in pairs {
        match bins.last_mut() {
            Some(last) if gap - last.0 <= 1e-9 * scale => last.1 = last.1.max(v),
            _ => bins.push((gap, v)),
        }
    }
    Ok(OffDiagonalProfile { bins, beta: ens.beta })
}

/// Measured quantities of the dephase-then-distill pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillDiagnostics {
    /// `D_min^ε(ρ‖γ)`.
    pub d_min_original: Estimate,
    /// `D_min^ε(D(ρ)‖γ′)`.
    pub d_min_dephased: Estimate,
    /// Certified range of the difference of the two.
    pub waste: [f64; 2],
    /// `−βδ`, the lower limit on the waste.
    pub waste_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistillOutcome {
    pub work: WorkQuote,
    pub ledger: CoherenceLedger,
    pub diagnostics: DistillDiagnostics,
}

/// Discretize the levels at `delta`, dephase, and distill the dephased state.
pub fn dephase_distill_protocol(rho: &DensityOperator, ens: &GibbsEnsemble, eps: f64, delta: f64) -> Result<DistillOutcome> {
    let params = SmoothingParams::new(eps)?;
    let (h2, ledger) = discretize_hamiltonian(&ens.hamiltonian, delta)?;
    let ens2 = gibbs(&h2, ens.beta)?;
    let dephased = dephase(rho, &h2)?;
    let work = work_distillable(&dephased, &ens2, eps)?;
    let d_min_original = divergence::d_min_eps(rho, &ens.gamma, params)?;
    let d_min_dephased = divergence::d_min_eps(&dephased, &ens2.gamma, params)?;
    let waste = [
        d_min_original.lower.to_f64() - d_min_dephased.upper.to_f64(),
        d_min_original.upper.to_f64() - d_min_dephased.lower.to_f64(),
    ];
    let diagnostics = DistillDiagnostics { d_min_original, d_min_dephased, waste, waste_floor: -ens.beta * delta };
    Ok(DistillOutcome { work, ledger, diagnostics })
}

/// Uniform superposition over `levels` equally spaced ladder levels.
#[derive(Debug, Clone)]
pub struct LadderReference {
    pub levels: usize,
    pub spacing: f64,
    pub state: DensityOperator,
}

impl LadderReference {
    pub fn new(levels: usize, spacing: f64) -> Result<Self> {
        if levels == 0 || !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("ladder with {levels} levels and spacing {spacing}")));
        }
        let amp = C64::new((1.0 / levels as f64).sqrt(), 0.0);
        let state = DensityOperator::pure(&vec![amp; levels])?;
        Ok(LadderReference { levels, spacing, state })
    }

    /// `diag(0, δ, …, (L−1)δ)`.
    pub fn hamiltonian(&self) -> Result<HermitianOperator> {
        HermitianOperator::diagonal((0..self.levels).map(|j| j as f64 * self.spacing).collect())
    }

    pub fn energy_range(&self) -> f64 {
        (self.levels as f64 - 1.0) * self.spacing
    }
}

/// Integer ladder offsets `m_k = (E_k − E_min)/δ` of the levels of `h`.
fn level_offsets(h: &HermitianOperator, spacing: f64) -> Result<(crate::SpectralDecomposition, Vec<usize>)> {
    let spec = eig_default(h);
    let emin = spec.spaces().iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let mut m = Vec::with_capacity(spec.spaces().len());
    for s in spec.spaces() {
        let x = (s.value - emin) / spacing;
        if (x - x.round()).abs() > 1e-9 {
            return Err(Error::SpacingMismatch { spacing });
        }
        m.push(x.round() as usize);
    }
    Ok((spec, m))
}

fn total_hamiltonian(h: &HermitianOperator, reference: &LadderReference) -> Result<HermitianOperator> {
    let ladder = reference.hamiltonian()?;
    tensor(h, &HermitianOperator::identity(reference.levels)?)?.add(&tensor(&HermitianOperator::identity(h.dim())?, &ladder)?)
}

/// `D[ρ ⊗ η]`, dephased in total energy.
pub fn reference_frame_describe(rho: &DensityOperator, h: &HermitianOperator, reference: &LadderReference) -> Result<DensityOperator> {
    level_offsets(h, reference.spacing)?;
    let joint = tensor_states(rho, &reference.state)?;
    dephase(&joint, &total_hamiltonian(h, reference)?)
}

/// Shift the ladder by `m_k` conditioned on the system level, then trace
/// the ladder out.
pub fn reference_frame_externalize(
    described: &DensityOperator,
    h: &HermitianOperator,
    reference: &LadderReference,
) -> Result<DensityOperator> {
    let d = h.dim();
    let l = reference.levels;
    if described.dim() != d * l {
        return Err(Error::ShapeError(format!("joint state of dimension {} vs {}·{}", described.dim(), d, l)));
    }
    let c = described.as_operator().commutator_norm(&total_hamiltonian(h, reference)?)?;
    if c > 1e-9 {
        return Err(Error::NotIncoherent(c));
    }
    let (spec, m) = level_offsets(h, reference.spacing)?;
    let projectors = spec.projectors();
    let joint = described.matrix()?;
    // Ladder block (j, j′) of the joint state as a system operator.
    let block = |j: usize, j2: usize| -> DMatrix<C64> {
        DMatrix::from_fn(d, d, |a, b| joint[(a * l + j, b * l + j2)])
    };
    let mut out = DMatrix::<C64>::zeros(d, d);
    for (k, pk) in projectors.iter().enumerate() {
        for (k2, pk2) in projectors.iter().enumerate() {
            let mut acc = DMatrix::<C64>::zeros(d, d);
            for j in 0..l {
                // j + m_k = j′ + m_k′
                let t = j as i64 + m[k] as i64 - m[k2] as i64;
                if t < 0 || t >= l as i64 {
                    continue;
                }
                acc += block(j, t as usize);
            }
            out += pk * acc * pk2;
        }
    }
    DensityOperator::from_matrix((&out + out.adjoint()) * C64::new(0.5, 0.0))
}

/// Internal-reference-frame formation: discretize, describe with an
/// `levels`-level ladder, and price the incoherent description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormationOutcome {
    /// `β⁻¹ D_max^ε(D[ρ⊗η] ‖ γ′⊗γ_L)`.
    pub work: f64,
    /// `β⁻¹ D_max^ε(D(ρ)‖γ′)` of the system alone.
    pub semiclassical_work: f64,
    /// Trace distance of the externalized state to ρ.
    pub recovery_distance: f64,
    pub ledger: CoherenceLedger,
}

pub fn reference_frame_formation(
    rho: &DensityOperator,
    ens: &GibbsEnsemble,
    eps: f64,
    delta: f64,
    levels: usize,
) -> Result<FormationOutcome> {
    let params = SmoothingParams::new(eps)?;
    let (h2, mut ledger) = discretize_hamiltonian(&ens.hamiltonian, delta)?;
    let reference = LadderReference::new(levels, delta)?;
    let described = reference_frame_describe(rho, &h2, &reference)?;
    let ens2 = gibbs(&h2, ens.beta)?;
    let ladder_ens = gibbs(&reference.hamiltonian()?, ens.beta)?;
    let gamma_joint = tensor_states(&ens2.gamma, &ladder_ens.gamma)?;
    let dmax = divergence::d_max_eps(&described, &gamma_joint, params)?;
    let semi = divergence::d_max_eps(&dephase(rho, &h2)?, &ens2.gamma, params)?;
    let recovered = reference_frame_externalize(&described, &h2, &reference)?;
    ledger.push("reference frame", reference.energy_range());
    Ok(FormationOutcome {
        work: dmax.value().to_f64() / ens.beta,
        semiclassical_work: semi.value().to_f64() / ens.beta,
        recovery_distance: trace_distance(&recovered, rho)?,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plus() -> DensityOperator {
        let a = C64::new(0.5f64.sqrt(), 0.0);
        DensityOperator::pure(&[a, a]).unwrap()
    }

    #[test]
    fn rounding_examples() {
        let h = HermitianOperator::diagonal(vec![0.0, 0.96]).unwrap();
        let (h2, ledger) = discretize_hamiltonian(&h, 0.5).unwrap();
        assert_eq!(h2.diagonal_entries().unwrap(), &[0.0, 1.0]);
        assert_eq!(ledger.energy_range, 0.5);
        assert_eq!(round_to_grid(0.25, 0.5), 0.0);
        assert_eq!(round_to_grid(-0.75, 0.5), -0.5);
        assert_eq!(round_to_grid(1.5, 1.0), 1.0);
    }

    #[test]
    fn plus_state_profile() {
        let ens = gibbs(&HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap(), 1.0).unwrap();
        let p = offdiagonal_profile(&plus(), &ens).unwrap();
        assert_eq!(p.bins.len(), 1);
        assert_abs_diff_eq!(p.bins[0].0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.bins[0].1, 0.5, epsilon = 1e-12);
        let q = offdiagonal_profile(&ens.gamma, &ens).unwrap();
        assert_eq!(q.bins[0].1, 0.0);
    }

    #[test]
    fn externalized_coherence_matches_closed_form() {
        let h = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        for l in [2usize, 8, 32] {
            let r = LadderReference::new(l, 1.0).unwrap();
            let desc = reference_frame_describe(&plus(), &h, &r).unwrap();
            assert_abs_diff_eq!(desc.as_operator().trace(), 1.0, epsilon = 1e-12);
            let rec = reference_frame_externalize(&desc, &h, &r).unwrap();
            let m = rec.matrix().unwrap();
            assert_abs_diff_eq!(m[(0, 1)].re, 0.5 * (1.0 - 1.0 / l as f64), epsilon = 1e-12);
            assert_abs_diff_eq!(m[(0, 0)].re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(trace_distance(&rec, &plus()).unwrap(), 0.5 / l as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_level_ladder_description_has_rank_three() {
        let h = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        let r = LadderReference::new(2, 1.0).unwrap();
        let desc = reference_frame_describe(&plus(), &h, &r).unwrap();
        let rank = desc.eigenvalues().iter().filter(|&&x| x > 1e-12).count();
        assert_eq!(rank, 3);
        // energy-1 block holds |0,1⟩ and |1,0⟩ coherently
        let m = desc.matrix().unwrap();
        assert_abs_diff_eq!(m[(1, 2)].re, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn spacing_mismatch_rejected() {
        let h = HermitianOperator::diagonal(vec![0.0, 0.7]).unwrap();
        let r = LadderReference::new(4, 0.5).unwrap();
        assert!(matches!(reference_frame_describe(&plus(), &h, &r), Err(Error::SpacingMismatch { .. })));
    }

    #[test]
    fn coherent_joint_state_cannot_be_externalized() {
        let h = HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap();
        let r = LadderReference::new(2, 1.0).unwrap();
        let joint = tensor_states(&plus(), &r.state).unwrap();
        assert!(matches!(reference_frame_externalize(&joint, &h, &r), Err(Error::NotIncoherent(_))));
    }

    #[test]
    fn formation_ledger_counts_both_auxiliaries() {
        let ens = gibbs(&HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap(), 1.0).unwrap();
        let out = reference_frame_formation(&plus(), &ens, 0.0, 0.5, 4).unwrap();
        assert_abs_diff_eq!(out.ledger.energy_range, 0.5 + 3.0 * 0.5, epsilon = 1e-15);
        assert!(out.recovery_distance > 0.0);
    }

    #[test]
    fn mixed_plus_state_distills_nothing_at_small_eps() {
        let h = HermitianOperator::diagonal(vec![0.0, 0.2]).unwrap();
        let ens = gibbs(&h, 1.0).unwrap();
        let mixed = DensityOperator::mixture(&[(0.95, &plus()), (0.05, &DensityOperator::maximally_mixed(2).unwrap())]).unwrap();
        let out = dephase_distill_protocol(&mixed, &ens, 0.05, 0.1).unwrap();
        // dephased state is I/2: full support, nothing removable at ε = 0.05
        assert_abs_diff_eq!(out.work.work, 0.0, epsilon = 1e-14);
        assert!(out.diagnostics.waste[1] >= out.diagnostics.waste_floor - 1e-8);
    }
}
