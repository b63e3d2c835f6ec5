//! Per-site divergence rates against truncated Gibbs states.

use std::io;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::divergence::{
    divergence_report, divergences_from_spectrum, gibbs_probabilities_capped, DivergenceReport, RatioSpectrum,
    SmoothingParams, DEFAULT_BIN_WIDTH,
};
use crate::error::{Error, Result};
use crate::lattice::family::StateFamilySpec;
use crate::lattice::{free_energy_density, gibbs_lattice, log_partition, LocalHamiltonianSpec};
use crate::nats::Nats;
use crate::numfmt::format_f64;

/// Largest Hilbert dimension of the dense scan path.
pub const QUANTUM_SCAN_DIM: usize = 1 << 8;
/// Longest chain for which mixtures are also evaluated on the explicit spectrum.
pub const DIRECT_MIXTURE_MAX_N: usize = 20;
const DIRECT_MIXTURE_CAP: usize = 1 << 20;
/// Potential spread below which a mixture is declared reversible, nats/site.
pub const VERDICT_TOL: f64 = 1e-6;

fn ser_rate<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&format_f64(*v))
    }
}

/// `D(ρ_n‖γ_n)` in closed form and its per-site limit.
#[derive(Debug, Clone, Serialize)]
pub struct UmegakiRate {
    /// `−s₁ + β e + f(β)`.
    pub limit: f64,
    pub entropy_rate: f64,
    pub energy_density: f64,
    pub free_energy_density: f64,
    #[serde(skip)]
    state: StateFamilySpec,
    #[serde(skip)]
    spec: LocalHamiltonianSpec,
    #[serde(skip)]
    beta: f64,
}

impl UmegakiRate {
    /// `−S(ρ_n) + β tr(ρ_n H_n) + ln Z_n`.
    pub fn finite_n(&self, n: usize) -> Result<f64> {
        let s = self.state.entropy(n)?;
        let e = self.state.energy(&self.spec, n)?;
        Ok(-s + self.beta * e + log_partition(&self.spec, n, self.beta)?)
    }
}

pub fn rate_umegaki(state: &StateFamilySpec, spec: &LocalHamiltonianSpec, beta: f64) -> Result<UmegakiRate> {
    if state.is_mixture() {
        return Err(Error::UnsupportedStructure("mixtures are handled by mixture_scan".into()));
    }
    state.validate()?;
    let f = free_energy_density(spec, beta)?;
    let s1 = state.entropy_rate()?;
    let (e, _) = state.window_energies(spec)?;
    Ok(UmegakiRate {
        limit: -s1 + beta * e + f,
        entropy_rate: s1,
        energy_density: e,
        free_energy_density: f,
        state: state.clone(),
        spec: spec.clone(),
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMethod {
    ClassicalDp,
    QuantumExact,
}

impl ScanMethod {
    fn as_str(self) -> &'static str {
        match self {
            ScanMethod::ClassicalDp => "classical_dp",
            ScanMethod::QuantumExact => "quantum_exact",
        }
    }
}

/// One chain length of a scan; rates in nats/site.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateScanRow {
    pub n: usize,
    pub eps: f64,
    #[serde(serialize_with = "ser_rate")]
    pub d_min_rate: f64,
    #[serde(serialize_with = "ser_rate")]
    pub d_max_rate: f64,
    #[serde(serialize_with = "ser_rate")]
    pub d_hyp_rate: f64,
    #[serde(serialize_with = "ser_rate")]
    pub umegaki_rate: f64,
    /// `d_max_rate − d_min_rate`.
    #[serde(serialize_with = "ser_rate")]
    pub gap_rate: f64,
    pub method: ScanMethod,
    /// Bound on the error of every rate in the row from brackets and binning.
    #[serde(serialize_with = "ser_rate")]
    pub err_bound: f64,
}

impl RateScanRow {
    fn from_report(n: usize, eps: f64, r: &DivergenceReport, method: ScanMethod) -> Self {
        let per = |e: Nats| e.to_f64() / n as f64;
        let d_min_rate = per(r.d_min.value());
        let d_max_rate = per(r.d_max.value());
        let err = r.umegaki.width().max(Nats::Finite(r.d_min.width().to_f64() + r.d_max.width().to_f64()));
        RateScanRow {
            n,
            eps,
            d_min_rate,
            d_max_rate,
            d_hyp_rate: per(r.d_hyp.value()),
            umegaki_rate: per(r.umegaki.value()),
            gap_rate: d_max_rate - d_min_rate,
            method,
            err_bound: per(err),
        }
    }
}

pub const CSV_HEADER: &str = "n,eps,d_min_rate,d_max_rate,umegaki_rate,gap_rate,method,err_bound";

/// RFC 4180 CSV of scan rows.
pub fn write_rows_csv<W: io::Write>(rows: &[RateScanRow], mut out: W) -> Result<()> {
    let io_err = |e: io::Error| Error::Serialization(e.to_string());
    write!(out, "{CSV_HEADER}\r\n").map_err(io_err)?;
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{}\r\n",
            r.n,
            format_f64(r.eps),
            format_f64(r.d_min_rate),
            format_f64(r.d_max_rate),
            format_f64(r.umegaki_rate),
            format_f64(r.gap_rate),
            r.method.as_str(),
            format_f64(r.err_bound)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

fn scan_row(
    state: &StateFamilySpec,
    spec: &LocalHamiltonianSpec,
    beta: f64,
    params: SmoothingParams,
    n: usize,
    bin_width: f64,
) -> Result<RateScanRow> {
    if state.is_diagonal() && !state.is_mixture() && spec.is_diagonal() {
        let chain = spec.gibbs_chain(beta)?;
        let spectrum = RatioSpectrum::from_chain(&state.site_law()?, &chain, n, bin_width)?;
        let report = divergences_from_spectrum(&spectrum, params);
        return Ok(RateScanRow::from_report(n, params.epsilon, &report, ScanMethod::ClassicalDp));
    }
    dense_row(state, spec, beta, params, n)
}

fn dense_row(
    state: &StateFamilySpec,
    spec: &LocalHamiltonianSpec,
    beta: f64,
    params: SmoothingParams,
    n: usize,
) -> Result<RateScanRow> {
    let dim = (spec.site_dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > QUANTUM_SCAN_DIM as u128 {
        return Err(Error::DimensionLimit { dim: dim.min(usize::MAX as u128) as usize, limit: QUANTUM_SCAN_DIM });
    }
    let rho = state.state(n)?;
    let gamma = gibbs_lattice(spec, n, beta)?.gamma;
    let report = divergence_report(&rho, &gamma, params)?;
    Ok(RateScanRow::from_report(n, params.epsilon, &report, ScanMethod::QuantumExact))
}

fn check_inputs(state: &StateFamilySpec, spec: &LocalHamiltonianSpec, n_list: &[usize]) -> Result<()> {
    state.validate()?;
    if state.site_dim() != spec.site_dim {
        return Err(Error::ShapeError("state and Hamiltonian site dimensions differ".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < spec.support.max(1)) {
        return Err(Error::ChainTooShort { n, support: spec.support });
    }
    Ok(())
}

/// Min/max rates of `ρ_n` against the truncated Gibbs state, one row per `n`
/// in ascending order.
///
/// Diagonal families under diagonal Hamiltonians use the chain ratio-spectrum
/// program; everything else is evaluated densely for `site_dim^n ≤ 2^8`.
pub fn gap_scan(
    state: &StateFamilySpec,
    spec: &LocalHamiltonianSpec,
    beta: f64,
    epsilon: f64,
    n_list: &[usize],
    bin_width: Option<f64>,
) -> Result<Vec<RateScanRow>> {
    let params = SmoothingParams::new(epsilon)?;
    check_inputs(state, spec, n_list)?;
    let bw = bin_width.unwrap_or(DEFAULT_BIN_WIDTH);
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.par_iter().map(|&n| scan_row(state, spec, beta, params, n, bw)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reversible,
    Irreversible,
}

/// Mixture rates from component scans and, for short chains, from the mixed
/// state itself.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureScan {
    /// Distinct components after merging identical ones.
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub components: Vec<StateFamilySpec>,
    /// Potentials `s_k` of the components, nats/site.
    pub potentials: Vec<f64>,
    pub spread: f64,
    pub verdict: Verdict,
    /// Smoothing used for each component scan.
    pub component_epsilon: f64,
    /// Component relations: min over components of `d_min`, max of `d_max`.
    pub rows: Vec<RateScanRow>,
    /// Mixed state evaluated directly, `n ≤ 20`.
    pub direct: Vec<RateScanRow>,
    pub component_rows: Vec<Vec<RateScanRow>>,
}

fn merge_components(parts: Vec<(f64, StateFamilySpec)>) -> (Vec<f64>, Vec<StateFamilySpec>) {
    let mut weights: Vec<f64> = Vec::new();
    let mut comps: Vec<StateFamilySpec> = Vec::new();
    for (w, c) in parts {
        match comps.iter().position(|d| *d == c) {
            Some(k) => weights[k] += w,
            None => {
                weights.push(w);
                comps.push(c);
            }
        }
    }
    (weights, comps)
}

/// Scan of `Σ p_k ρ^{(k)}`.
///
/// Relation rows take `min_k D_min^{ε′}` and `max_k D_max^{ε′}` with
/// `ε′ = ε/(2K)`; the mixed Umegaki divergence is bracketed by
/// `[Σ p_k D_k − H(p), Σ p_k D_k]`. A single distinct component reduces to
/// [`gap_scan`] at `ε`.
pub fn mixture_scan(
    components: &[(f64, StateFamilySpec)],
    spec: &LocalHamiltonianSpec,
    beta: f64,
    epsilon: f64,
    n_list: &[usize],
    bin_width: Option<f64>,
) -> Result<MixtureScan> {
    let params = SmoothingParams::new(epsilon)?;
    let mixture = StateFamilySpec::mixture(components.to_vec())?;
    check_inputs(&mixture, spec, n_list)?;
    let (weights, comps) = merge_components(mixture.components());
    let potentials =
        comps.iter().map(|c| rate_umegaki(c, spec, beta).map(|u| u.limit)).collect::<Result<Vec<f64>>>()?;
    let spread = potentials.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - potentials.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if spread <= VERDICT_TOL { Verdict::Reversible } else { Verdict::Irreversible };
    let k = comps.len();
    if k == 1 {
        let rows = gap_scan(&comps[0], spec, beta, epsilon, n_list, bin_width)?;
        let direct = rows.iter().filter(|r| r.n <= DIRECT_MIXTURE_MAX_N).cloned().collect();
        return Ok(MixtureScan {
            weights,
            components: comps,
            potentials,
            spread,
            verdict,
            component_epsilon: epsilon,
            component_rows: vec![rows.clone()],
            rows,
            direct,
        });
    }

    let eps_c = epsilon / (2.0 * k as f64);
    let component_rows =
        comps.iter().map(|c| gap_scan(c, spec, beta, eps_c, n_list, bin_width)).collect::<Result<Vec<_>>>()?;
    let mix_entropy: f64 = weights.iter().map(|&w| -w * w.ln()).sum();
    let rows: Vec<RateScanRow> = (0..component_rows[0].len())
        .map(|i| {
            let at: Vec<&RateScanRow> = component_rows.iter().map(|rs| &rs[i]).collect();
            let n = at[0].n;
            let d_min_rate = at.iter().map(|r| r.d_min_rate).fold(f64::INFINITY, f64::min);
            let d_max_rate = at.iter().map(|r| r.d_max_rate).fold(f64::NEG_INFINITY, f64::max);
            let d_hyp_rate = at.iter().map(|r| r.d_hyp_rate).fold(f64::INFINITY, f64::min);
            let mean: f64 = weights.iter().zip(&at).map(|(w, r)| w * r.umegaki_rate).sum();
            let half = 0.5 * mix_entropy / n as f64;
            let comp_err = at.iter().map(|r| r.err_bound).fold(0.0, f64::max);
            let method =
                if at.iter().all(|r| r.method == ScanMethod::ClassicalDp) { ScanMethod::ClassicalDp } else { ScanMethod::QuantumExact };
            RateScanRow {
                n,
                eps: epsilon,
                d_min_rate,
                d_max_rate,
                d_hyp_rate,
                umegaki_rate: mean - half,
                gap_rate: d_max_rate - d_min_rate,
                method,
                err_bound: comp_err + half,
            }
        })
        .collect();

    let mut short: Vec<usize> = n_list.iter().copied().filter(|&n| n <= DIRECT_MIXTURE_MAX_N).collect();
    short.sort_unstable();
    let direct = short
        .par_iter()
        .filter_map(|&n| direct_row(&mixture, spec, beta, params, n).transpose())
        .collect::<Result<Vec<_>>>()?;

    Ok(MixtureScan {
        weights,
        components: comps,
        potentials,
        spread,
        verdict,
        component_epsilon: eps_c,
        rows,
        direct,
        component_rows,
    })
}

/// Mixed state evaluated on its explicit spectrum; `None` when too large.
fn direct_row(
    mixture: &StateFamilySpec,
    spec: &LocalHamiltonianSpec,
    beta: f64,
    params: SmoothingParams,
    n: usize,
) -> Result<Option<RateScanRow>> {
    let dim = (spec.site_dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if mixture.is_diagonal() && spec.is_diagonal() {
        if dim > DIRECT_MIXTURE_CAP as u128 {
            return Ok(None);
        }
        let p = mixture.probabilities_capped(n, DIRECT_MIXTURE_CAP)?;
        let q = gibbs_probabilities_capped(&spec.gibbs_chain(beta)?, n, DIRECT_MIXTURE_CAP)?;
        let spectrum = RatioSpectrum::from_probabilities(&p, &q)?;
        let report = divergences_from_spectrum(&spectrum, params);
        return Ok(Some(RateScanRow::from_report(n, params.epsilon, &report, ScanMethod::ClassicalDp)));
    }
    if dim > QUANTUM_SCAN_DIM as u128 {
        return Ok(None);
    }
    dense_row(mixture, spec, beta, params, n).map(Some)
}
