//! Thermal states, thermo-majorization and battery-assisted work.
//!
//! Work is in energy units. A formation quote is the work invested to make
//! ρ from the thermal state; a distillation quote is the work extracted when
//! ρ is returned to it.

use std::io;

use serde::Serialize;

use crate::divergence::{self, Estimate, SmoothingParams};
use crate::error::{Error, Result};
use crate::nats::Nats;
use crate::operator::{eig_default, eigh, DensityOperator, HermitianOperator, SpectralDecomposition};

/// Commutator norm below which a state counts as semiclassical.
pub const SEMICLASSICAL_TOL: f64 = 1e-10;
/// Tolerance of Lorenz-curve comparisons.
pub const LORENZ_TOL: f64 = 1e-10;
/// Default battery ladder spacing, in energy units.
pub const DEFAULT_BATTERY_STEP: f64 = 1e-3;

/// Gibbs state of a Hamiltonian at inverse temperature β.
#[derive(Debug, Clone)]
pub struct GibbsEnsemble {
    pub hamiltonian: HermitianOperator,
    pub beta: f64,
    pub gamma: DensityOperator,
    /// `ln Z`.
    pub log_partition: f64,
    spectrum: SpectralDecomposition,
    /// Gibbs weight of one basis vector in each eigenspace.
    weights: Vec<f64>,
}

pub fn gibbs(h: &HermitianOperator, beta: f64) -> Result<GibbsEnsemble> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidTemperature(beta));
    }
    let spectrum = eig_default(h);
    let emin = spectrum.spaces().iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = spectrum.spaces().iter().map(|s| (-beta * (s.value - emin)).exp()).collect();
    let zs: f64 = spectrum.spaces().iter().zip(&shifted).map(|(s, w)| s.multiplicity() as f64 * w).sum();
    let log_partition = -beta * emin + zs.ln();
    let weights: Vec<f64> = shifted.iter().map(|w| w / zs).collect();
    let gamma = match h.diagonal_entries() {
        Some(e) => DensityOperator::from_probabilities(e.iter().map(|&x| (-beta * (x - emin)).exp() / zs).collect())?,
        None => {
            let d = h.dim();
            let mut m = nalgebra::DMatrix::zeros(d, d);
            for (k, w) in weights.iter().enumerate() {
                m += spectrum.projector(k) * crate::operator::C64::new(*w, 0.0);
            }
            DensityOperator::from_matrix(m)?
        }
    };
    Ok(GibbsEnsemble { hamiltonian: h.clone(), beta, gamma, log_partition, spectrum, weights })
}

impl GibbsEnsemble {
    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Joint eigenvalue pairs `(p_i, g_i)` of a semiclassical ρ and γ.
    pub fn pairs(&self, rho: &DensityOperator) -> Result<(Vec<f64>, Vec<f64>)> {
        if rho.dim() != self.dim() {
            return Err(Error::ShapeError(format!("state of dimension {} vs Hamiltonian {}", rho.dim(), self.dim())));
        }
        let c = rho.as_operator().commutator_norm(&self.hamiltonian)?;
        if c > SEMICLASSICAL_TOL {
            return Err(Error::NotSemiclassical(c));
        }
        let mut p = Vec::with_capacity(self.dim());
        let mut g = Vec::with_capacity(self.dim());
        let probs = rho.probabilities();
        let rm = if probs.is_none() { Some(rho.matrix()?.into_owned()) } else { None };
        for (k, space) in self.spectrum.spaces().iter().enumerate() {
            match (space.indices(), probs) {
                (Some(idx), Some(pr)) => {
                    for &i in idx {
                        p.push(pr[i]);
                        g.push(self.weights[k]);
                    }
                }
                _ => {
                    let v = space.vectors(self.dim());
                    let dense = match &rm {
                        Some(m) => std::borrow::Cow::Borrowed(m),
                        None => rho.matrix()?,
                    };
                    let block = v.adjoint() * dense.as_ref() * &v;
                    for mu in eigh(&block).0 {
                        p.push(mu.max(0.0));
                        g.push(self.weights[k]);
                    }
                }
            }
        }
        Ok((p, g))
    }

    /// Energy `Σ_k E_k tr(P_k ρ)`.
    pub fn mean_energy(&self, rho: &DensityOperator) -> Result<f64> {
        self.hamiltonian.expectation(rho)
    }
}

/// Thermo-majorization curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    /// `(cumulative Gibbs weight, cumulative probability)`, from (0,0) to (1,1).
    pub vertices: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Curve of probability/weight pairs; pairs are ordered by `p/g`
    /// descending and equal ratios share one segment.
    pub fn from_pairs(p: &[f64], g: &[f64]) -> Result<Self> {
        if p.len() != g.len() {
            return Err(Error::ShapeError(format!("{} probabilities vs {} weights", p.len(), g.len())));
        }
        let mut idx: Vec<usize> = (0..p.len()).filter(|&i| g[i] > 0.0 || p[i] > 0.0).collect();
        // p_i/g_i > p_j/g_j without dividing
        idx.sort_by(|&i, &j| (p[j] * g[i]).total_cmp(&(p[i] * g[j])));
        let mut vertices = vec![(0.0, 0.0)];
        let (mut x, mut y) = (0.0, 0.0);
        let mut k = 0;
        while k < idx.len() {
            let i = idx[k];
            x += g[i];
            y += p[i];
            k += 1;
            while k < idx.len() {
                let j = idx[k];
                let (a, b) = (p[i] * g[j], p[j] * g[i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    break;
                }
                x += g[j];
                y += p[j];
                k += 1;
            }
            vertices.push((x, y));
        }
        let (tx, ty) = (x, y);
        if tx > 0.0 && ty > 0.0 {
            for v in vertices.iter_mut() {
                v.0 /= tx;
                v.1 /= ty;
            }
        }
        if let Some(last) = vertices.last_mut() {
            *last = (1.0, 1.0);
        }
        Ok(LorenzCurve { vertices })
    }

    /// Height of the curve at `x ∈ [0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let v = &self.vertices;
        if x <= 0.0 {
            return 0.0;
        }
        let k = v.partition_point(|&(vx, _)| vx < x);
        if k >= v.len() {
            return 1.0;
        }
        let (x1, y1) = v[k];
        if k == 0 || x1 == x {
            return y1;
        }
        let (x0, y0) = v[k - 1];
        if x1 <= x0 {
            return y1;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Pointwise `self ≥ other − tol` at the union of vertex abscissae.
    pub fn dominates(&self, other: &LorenzCurve, tol: f64) -> bool {
        self.vertices.iter().chain(&other.vertices).all(|&(x, _)| self.eval(x) >= other.eval(x) - tol)
    }

    /// CSV with header `x,y`.
    pub fn write_csv<W: io::Write>(&self, mut out: W) -> Result<()> {
        use crate::numfmt::format_f64;
        let err = |e: io::Error| Error::Serialization(e.to_string());
        out.write_all(b"x,y\r\n").map_err(err)?;
        for &(x, y) in &self.vertices {
            write!(out, "{},{}\r\n", format_f64(x), format_f64(y)).map_err(err)?;
        }
        Ok(())
    }
}

pub fn lorenz_curve(rho: &DensityOperator, ens: &GibbsEnsemble) -> Result<LorenzCurve> {
    let (p, g) = ens.pairs(rho)?;
    LorenzCurve::from_pairs(&p, &g)
}

pub fn thermo_majorizes(rho: &DensityOperator, rho2: &DensityOperator, ens: &GibbsEnsemble) -> Result<bool> {
    Ok(lorenz_curve(rho, ens)?.dominates(&lorenz_curve(rho2, ens)?, LORENZ_TOL))
}

/// Equally spaced battery levels `min + k·step`, `k = 0 … count−1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatteryLadder {
    pub min: f64,
    pub step: f64,
    pub count: usize,
}

impl BatteryLadder {
    pub fn new(min: f64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || count == 0 || !min.is_finite() {
            return Err(Error::InvalidParameter(format!("battery ladder min={min} step={step} count={count}")));
        }
        Ok(BatteryLadder { min, step, count })
    }

    /// Ladder `0, step, …` reaching at least `span`.
    pub fn covering(span: f64, step: f64) -> Result<Self> {
        let count = (span.max(0.0) / step).ceil() as usize + 2;
        Self::new(0.0, step, count)
    }

    pub fn level(&self, k: usize) -> f64 {
        self.min + k as f64 * self.step
    }

    /// Index of a level, within `1e-9` of a step.
    pub fn index_of(&self, e: f64) -> Result<usize> {
        let k = ((e - self.min) / self.step).round();
        if k < 0.0 || k >= self.count as f64 || ((e - self.level(k as usize)) / self.step).abs() > 1e-9 {
            return Err(Error::InvalidBatteryLevel(e));
        }
        Ok(k as usize)
    }
}

/// Curve of `ρ ⊗ |E_k⟩⟨E_k|` in the joint system–battery ensemble.
fn joint_curve(p: &[f64], g: &[f64], a: f64) -> Result<LorenzCurve> {
    let mut pj = p.to_vec();
    let mut gj: Vec<f64> = g.iter().map(|x| x * a).collect();
    pj.push(0.0);
    gj.push((1.0 - a).max(0.0));
    LorenzCurve::from_pairs(&pj, &gj)
}

fn battery_feasible_pairs(
    p: &[f64],
    g: &[f64],
    p2: &[f64],
    g2: &[f64],
    a: f64,
    a2: f64,
) -> Result<bool> {
    Ok(joint_curve(p, g, a)?.dominates(&joint_curve(p2, g2, a2)?, LORENZ_TOL))
}

/// Whether `ρ ⊗ |E⟩⟨E| → ρ′ ⊗ |E′⟩⟨E′|` is possible by a thermal operation.
///
/// The joint curves depend on the battery only through the ratio
/// `e^{−β(E′−E)}` of the two level weights.
pub fn battery_transition_feasible(
    rho: &DensityOperator,
    rho2: &DensityOperator,
    e: f64,
    e2: f64,
    ens: &GibbsEnsemble,
    ladder: &BatteryLadder,
) -> Result<bool> {
    ladder.index_of(e)?;
    ladder.index_of(e2)?;
    let (p, g) = ens.pairs(rho)?;
    let (p2, g2) = ens.pairs(rho2)?;
    feasible_with_work(&p, &g, &p2, &g2, ens.beta, e - e2)
}

/// Battery feasibility for probability/weight pairs with the battery energy
/// lowered by `work`.
pub fn feasible_with_work(p: &[f64], g: &[f64], p2: &[f64], g2: &[f64], beta: f64, work: f64) -> Result<bool> {
    // Only the ratio of the two battery weights matters; keep both ≤ 1/2.
    let (a, a2) = if work >= 0.0 { (0.5 * (-beta * work).exp(), 0.5) } else { (0.5, 0.5 * (beta * work).exp()) };
    battery_feasible_pairs(p, g, p2, g2, a, a2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkKind {
    Formation,
    Distillation,
}

/// Work needed to form ρ, or extractable from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkQuote {
    pub work: f64,
    pub epsilon: f64,
    pub quantity: WorkKind,
    pub exact: bool,
    /// Certified range of `work`.
    pub bracket: [f64; 2],
}

impl WorkQuote {
    fn from_estimate(e: Estimate, beta: f64, epsilon: f64, quantity: WorkKind) -> Self {
        let s = e.scale(1.0 / beta);
        WorkQuote { work: s.value().to_f64(), epsilon, quantity, exact: s.exact, bracket: [s.lower.to_f64(), s.upper.to_f64()] }
    }
}

pub fn work_formation(rho: &DensityOperator, ens: &GibbsEnsemble, eps: f64) -> Result<WorkQuote> {
    let params = SmoothingParams::new(eps)?;
    let d = divergence::d_max_eps(rho, &ens.gamma, params)?;
    Ok(WorkQuote::from_estimate(d, ens.beta, eps, WorkKind::Formation))
}

pub fn work_distillable(rho: &DensityOperator, ens: &GibbsEnsemble, eps: f64) -> Result<WorkQuote> {
    let params = SmoothingParams::new(eps)?;
    let d = divergence::d_min_eps(rho, &ens.gamma, params)?;
    Ok(WorkQuote::from_estimate(d, ens.beta, eps, WorkKind::Distillation))
}

/// `S = (D_max^ε + D_min^ε)/2` and `Δ = (D_max^ε − D_min^ε)/2`, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReversibilityGap {
    pub s: Nats,
    pub delta: Nats,
    pub epsilon: f64,
    pub exact: bool,
}

pub fn reversibility_gap(rho: &DensityOperator, ens: &GibbsEnsemble, eps: f64) -> Result<ReversibilityGap> {
    let params = SmoothingParams::new(eps)?;
    let dmax = divergence::d_max_eps(rho, &ens.gamma, params)?;
    let dmin = divergence::d_min_eps(rho, &ens.gamma, params)?;
    Ok(gap_from(dmin, dmax, eps))
}

pub(crate) fn gap_from(dmin: Estimate, dmax: Estimate, eps: f64) -> ReversibilityGap {
    let (lo, hi) = (dmin.value(), dmax.value());
    let (s, delta) = match (lo, hi) {
        (Nats::Finite(a), Nats::Finite(b)) => (Nats::Finite(0.5 * (a + b)), Nats::Finite(0.5 * (b - a))),
        _ => (Nats::Infinite, Nats::Infinite),
    };
    ReversibilityGap { s, delta, epsilon: eps, exact: dmin.exact && dmax.exact }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn qubit() -> GibbsEnsemble {
        gibbs(&HermitianOperator::diagonal(vec![0.0, 1.0]).unwrap(), 1.0).unwrap()
    }

    fn ground() -> DensityOperator {
        DensityOperator::from_probabilities(vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn gibbs_examples() {
        let z = 1.0 + (-1.0f64).exp();
        assert_abs_diff_eq!(qubit().log_partition, z.ln(), epsilon = 1e-15);
        let flat = gibbs(&HermitianOperator::zeros(3).unwrap(), 2.0).unwrap();
        assert_abs_diff_eq!(flat.log_partition, 3f64.ln(), epsilon = 1e-15);
        assert!(gibbs(&HermitianOperator::zeros(2).unwrap(), 0.0).is_err());
    }

    #[test]
    fn ground_state_curve() {
        let c = lorenz_curve(&ground(), &qubit()).unwrap();
        let z = 1.0 + (-1.0f64).exp();
        assert_eq!(c.vertices.len(), 3);
        assert_abs_diff_eq!(c.vertices[1].0, 1.0 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(c.vertices[1].1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ground_does_not_majorize_excited() {
        let ens = qubit();
        let excited = DensityOperator::from_probabilities(vec![0.0, 1.0]).unwrap();
        // the excited curve reaches 1 at x = e^{-1}/Z, the ground curve at 1/Z
        assert!(thermo_majorizes(&excited, &ground(), &ens).unwrap());
        assert!(!thermo_majorizes(&ground(), &excited, &ens).unwrap());
        assert!(thermo_majorizes(&excited, &ens.gamma, &ens).unwrap());
    }

    #[test]
    fn coherent_state_is_rejected() {
        let ens = qubit();
        let plus = DensityOperator::pure(&[crate::C64::new(0.5f64.sqrt(), 0.0), crate::C64::new(0.5f64.sqrt(), 0.0)]).unwrap();
        assert!(matches!(lorenz_curve(&plus, &ens), Err(Error::NotSemiclassical(_))));
    }

    #[test]
    fn pure_eigenstate_is_reversible() {
        let ens = qubit();
        let f = work_formation(&ground(), &ens, 0.0).unwrap();
        let d = work_distillable(&ground(), &ens, 0.0).unwrap();
        let ln_z = ens.log_partition;
        assert_abs_diff_eq!(f.work, ln_z, epsilon = 1e-12);
        assert_abs_diff_eq!(d.work, ln_z, epsilon = 1e-12);
        let gap = reversibility_gap(&ground(), &ens, 0.0).unwrap();
        assert_abs_diff_eq!(gap.delta.to_f64(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn battery_threshold_matches_max_divergence() {
        let ens = qubit();
        let ladder = BatteryLadder::new(0.0, 1e-3, 2000).unwrap();
        let w = ens.log_partition;
        let above = ladder.level((w / 1e-3).ceil() as usize);
        let below = ladder.level((w / 1e-3).floor() as usize);
        assert!(battery_transition_feasible(&ens.gamma, &ground(), above, 0.0, &ens, &ladder).unwrap());
        assert!(!battery_transition_feasible(&ens.gamma, &ground(), below, 0.0, &ens, &ladder).unwrap());
        assert!(matches!(
            battery_transition_feasible(&ens.gamma, &ground(), 0.0005, 0.0, &ens, &ladder),
            Err(Error::InvalidBatteryLevel(_))
        ));
    }
}
