//! Likelihood-ratio spectra of commuting state pairs.
//!
//! For a pair of states diagonal in a common basis, every quantity in this
//! crate is a functional of the joint law of `(ln p_x − ln q_x, p_x, q_x)`.
//! [`RatioSpectrum`] stores that law as a list of atoms. Explicit vectors give
//! exact atoms; chain-structured pairs (a Markov or i.i.d. state against a
//! classical transfer-matrix Gibbs state) are aggregated site by site with a
//! dynamic program that bins the running log-ratio.
//!
//! Each atom remembers the range of member log-ratios and the extreme member
//! masses, so the functionals can return certified brackets after binning.

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::error::{Error, Result};

/// Default log-ratio bin width of the chain dynamic program, in nats.
pub const DEFAULT_BIN_WIDTH: f64 = 1e-3;

const P_ZERO_REL: f64 = 1e-12;
const Q_ZERO_REL: f64 = 1e-14;
const SAME_MASS_REL: f64 = 1e-12;

/// One atom of a ratio spectrum: a set of basis elements ("members") whose
/// log-ratios were aggregated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// `ln(rho_mass / sigma_mass)` of the aggregate.
    pub log_ratio: f64,
    pub rho_mass: f64,
    pub sigma_mass: f64,
    /// ρ-weighted mean of the member log-ratios.
    pub mean_log_ratio: f64,
    /// Smallest and largest member log-ratio.
    pub lo: f64,
    pub hi: f64,
    /// Number of members.
    pub count: f64,
    /// Smallest and largest single-member ρ-mass.
    pub rho_piece: (f64, f64),
    /// Smallest and largest single-member σ-mass.
    pub sigma_piece: (f64, f64),
}

impl Atom {
    fn single(p: f64, q: f64) -> Self {
        let l = p.ln() - q.ln();
        Atom {
            log_ratio: l,
            rho_mass: p,
            sigma_mass: q,
            mean_log_ratio: l,
            lo: l,
            hi: l,
            count: 1.0,
            rho_piece: (p, p),
            sigma_piece: (q, q),
        }
    }

    /// All members carry identical `(p, q)` masses.
    pub fn is_homogeneous(&self) -> bool {
        self.count == 1.0
            || (self.rho_piece.0 >= self.rho_piece.1 * (1.0 - SAME_MASS_REL)
                && self.sigma_piece.0 >= self.sigma_piece.1 * (1.0 - SAME_MASS_REL))
    }

    /// Largest displacement of a member log-ratio from the aggregate ratio.
    pub fn displacement(&self) -> f64 {
        (self.hi - self.log_ratio).max(self.log_ratio - self.lo).max(0.0)
    }

    fn merge(&mut self, other: &Atom) {
        let rho = self.rho_mass + other.rho_mass;
        self.mean_log_ratio = if rho > 0.0 {
            (self.mean_log_ratio * self.rho_mass + other.mean_log_ratio * other.rho_mass) / rho
        } else {
            self.mean_log_ratio
        };
        self.rho_mass = rho;
        self.sigma_mass += other.sigma_mass;
        self.log_ratio = self.rho_mass.ln() - self.sigma_mass.ln();
        self.lo = self.lo.min(other.lo);
        self.hi = self.hi.max(other.hi);
        self.count += other.count;
        self.rho_piece = (self.rho_piece.0.min(other.rho_piece.0), self.rho_piece.1.max(other.rho_piece.1));
        self.sigma_piece = (self.sigma_piece.0.min(other.sigma_piece.0), self.sigma_piece.1.max(other.sigma_piece.1));
    }
}

/// Joint law of the log-likelihood ratio under ρ and σ.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSpectrum {
    /// Atoms with both masses positive, sorted by `log_ratio` descending.
    pub atoms: Vec<Atom>,
    /// ρ-mass outside the support of σ (log-ratio +∞).
    pub rho_excess: f64,
    /// σ-mass outside the support of ρ (log-ratio −∞).
    pub sigma_excess: f64,
    /// Bin width when produced by the chain dynamic program.
    pub bin_width: Option<f64>,
}

impl RatioSpectrum {
    /// Exact spectrum of two probability vectors on the same basis.
    ///
    /// Entries below `1e-12·max p` (resp. `1e-14·max q`) count as zero. Basis
    /// elements with identical `(p, q)` are merged into one atom with a count.
    pub fn from_probabilities(p: &[f64], q: &[f64]) -> Result<Self> {
        if p.len() != q.len() || p.is_empty() {
            return Err(Error::ShapeError(format!("vectors of length {} and {}", p.len(), q.len())));
        }
        let pmax = p.iter().copied().fold(0.0, f64::max);
        let qmax = q.iter().copied().fold(0.0, f64::max);
        let mut atoms = Vec::new();
        let (mut rho_excess, mut sigma_excess) = (0.0, 0.0);
        for (&pi, &qi) in p.iter().zip(q) {
            let pi = if pi > P_ZERO_REL * pmax { pi } else { 0.0 };
            let qi = if qi > Q_ZERO_REL * qmax { qi } else { 0.0 };
            match (pi > 0.0, qi > 0.0) {
                (true, true) => atoms.push(Atom::single(pi, qi)),
                (true, false) => rho_excess += pi,
                (false, true) => sigma_excess += qi,
                (false, false) => {}
            }
        }
        atoms.sort_by(|a, b| b.log_ratio.total_cmp(&a.log_ratio).then(b.rho_mass.total_cmp(&a.rho_mass)));
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            if let Some(last) = merged.last_mut() {
                let same = (last.rho_piece.1 - a.rho_mass).abs() <= SAME_MASS_REL * a.rho_mass
                    && (last.sigma_piece.1 - a.sigma_mass).abs() <= SAME_MASS_REL * a.sigma_mass;
                if same {
                    last.merge(&a);
                    continue;
                }
            }
            merged.push(a);
        }
        Ok(RatioSpectrum { atoms: merged, rho_excess, sigma_excess, bin_width: None })
    }

    /// Spectrum of a chain-structured pair on `n` sites, binned at `bin_width`.
    pub fn from_chain(rho: &SiteLaw, sigma: &GibbsChain, n: usize, bin_width: f64) -> Result<Self> {
        chain_spectrum(rho, sigma, n, bin_width)
    }

    pub fn total_rho(&self) -> f64 {
        self.rho_excess + self.atoms.iter().map(|a| a.rho_mass).sum::<f64>()
    }

    pub fn total_sigma(&self) -> f64 {
        self.sigma_excess + self.atoms.iter().map(|a| a.sigma_mass).sum::<f64>()
    }

    /// Largest member displacement over all atoms (0 for exact spectra).
    pub fn max_displacement(&self) -> f64 {
        self.atoms.iter().map(Atom::displacement).fold(0.0, f64::max)
    }

    /// CSV with header `log_ratio,rho_mass,sigma_mass`; the two support-excess
    /// rows use `inf` and `-inf`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        use crate::numfmt::format_f64;
        let mut w = io::BufWriter::new(out);
        let io_err = |e: io::Error| Error::Serialization(e.to_string());
        w.write_all(b"log_ratio,rho_mass,sigma_mass\r\n").map_err(io_err)?;
        if self.rho_excess > 0.0 {
            write!(w, "inf,{},{}\r\n", format_f64(self.rho_excess), format_f64(0.0)).map_err(io_err)?;
        }
        for a in &self.atoms {
            write!(w, "{},{},{}\r\n", format_f64(a.log_ratio), format_f64(a.rho_mass), format_f64(a.sigma_mass))
                .map_err(io_err)?;
        }
        if self.sigma_excess > 0.0 {
            write!(w, "-inf,{},{}\r\n", format_f64(0.0), format_f64(self.sigma_excess)).map_err(io_err)?;
        }
        w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(())
    }
}

/// Site-factorized law of a classical state on a chain.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteLaw {
    /// Independent sites with the given single-site probabilities.
    Iid(Vec<f64>),
    /// Markov chain started from `initial`; `transition[a][b]` is `P(b | a)`.
    Markov { initial: Vec<f64>, transition: Vec<Vec<f64>> },
}

impl SiteLaw {
    pub fn site_dim(&self) -> usize {
        match self {
            SiteLaw::Iid(p) => p.len(),
            SiteLaw::Markov { initial, .. } => initial.len(),
        }
    }

    fn first(&self, x: usize) -> f64 {
        match self {
            SiteLaw::Iid(p) => p[x],
            SiteLaw::Markov { initial, .. } => initial[x],
        }
    }

    fn step(&self, prev: usize, next: usize) -> f64 {
        match self {
            SiteLaw::Iid(p) => p[next],
            SiteLaw::Markov { transition, .. } => transition[prev][next],
        }
    }
}

/// Classical Gibbs state of a translation-invariant chain Hamiltonian with
/// open boundaries, in transfer-matrix form.
///
/// The energy of a configuration `x_1 … x_n` is
/// `Σ_{z=1}^{n−r+1} local(x_z … x_{z+r−1}) + boundary(x_{n−r+2} … x_n)`.
/// Multi-site energies are indexed with the leftmost site most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsChain {
    pub site_dim: usize,
    pub support: usize,
    /// `site_dim^support` window energies.
    pub local: Vec<f64>,
    /// Optional `site_dim^(support−1)` right-boundary completion.
    pub boundary: Option<Vec<f64>>,
    pub beta: f64,
}

impl GibbsChain {
    pub fn validate(&self) -> Result<()> {
        let d = self.site_dim;
        let r = self.support;
        if d == 0 || r == 0 {
            return Err(Error::UnsupportedStructure("site dimension and support must be positive".into()));
        }
        if self.local.len() != d.pow(r as u32) {
            return Err(Error::UnsupportedStructure(format!(
                "local energies have {} entries, expected {}",
                self.local.len(),
                d.pow(r as u32)
            )));
        }
        if let Some(b) = &self.boundary {
            if r < 2 || b.len() != d.pow(r as u32 - 1) {
                return Err(Error::UnsupportedStructure("boundary term must act on support − 1 sites".into()));
            }
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidTemperature(self.beta));
        }
        Ok(())
    }

    /// Sites carried by the transfer-matrix state.
    pub fn block_len(&self) -> usize {
        self.support.saturating_sub(1).max(1)
    }

    pub(crate) fn block_count(&self) -> usize {
        self.site_dim.pow(self.block_len() as u32)
    }

    /// Energy picked up when appending `next` to `block`.
    pub(crate) fn step_energy(&self, block: usize, next: usize) -> f64 {
        if self.support == 1 {
            self.local[next]
        } else {
            self.local[block * self.site_dim + next]
        }
    }

    pub(crate) fn next_block(&self, block: usize, next: usize) -> usize {
        (block * self.site_dim + next) % self.block_count()
    }

    /// Energy of the first `block_len` sites.
    pub(crate) fn initial_energy(&self, block: usize) -> f64 {
        if self.support == 1 {
            self.local[block]
        } else {
            0.0
        }
    }

    pub(crate) fn final_energy(&self, block: usize) -> f64 {
        match (&self.boundary, self.support) {
            (Some(b), r) if r >= 2 => b[block],
            _ => 0.0,
        }
    }

    /// `ln Z_n` by the transfer-matrix recursion (log-scaled).
    pub fn log_partition(&self, n: usize) -> Result<f64> {
        self.validate()?;
        let k = self.block_len();
        if n < self.support.max(k) {
            return Err(Error::ChainTooShort { n, support: self.support.max(k) });
        }
        let nb = self.block_count();
        let mut w: Vec<f64> = (0..nb).map(|b| (-self.beta * self.initial_energy(b)).exp()).collect();
        let mut log_c = 0.0;
        for _ in k..n {
            let mut next = vec![0.0; nb];
            for (b, &wb) in w.iter().enumerate() {
                if wb == 0.0 {
                    continue;
                }
                for y in 0..self.site_dim {
                    next[self.next_block(b, y)] += wb * (-self.beta * self.step_energy(b, y)).exp();
                }
            }
            let s: f64 = next.iter().sum();
            log_c += s.ln();
            w = next.into_iter().map(|x| x / s).collect();
        }
        let z: f64 = w.iter().enumerate().map(|(b, &wb)| wb * (-self.beta * self.final_energy(b)).exp()).sum();
        Ok(log_c + z.ln())
    }
}

fn chain_spectrum(law: &SiteLaw, chain: &GibbsChain, n: usize, bin_width: f64) -> Result<RatioSpectrum> {
    chain.validate()?;
    if !(bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width must be positive, got {bin_width}")));
    }
    let d = chain.site_dim;
    if law.site_dim() != d {
        return Err(Error::UnsupportedStructure(format!(
            "state has site dimension {}, Hamiltonian {}",
            law.site_dim(),
            d
        )));
    }
    if let SiteLaw::Markov { transition, .. } = law {
        if transition.len() != d || transition.iter().any(|r| r.len() != d) {
            return Err(Error::UnsupportedStructure("transition matrix shape mismatch".into()));
        }
    }
    let k = chain.block_len();
    if n < chain.support.max(k) {
        return Err(Error::ChainTooShort { n, support: chain.support.max(k) });
    }
    let beta = chain.beta;
    let nb = chain.block_count();
    let bin = |l: f64| (l / bin_width).round() as i64;

    // Atoms keyed by (bin, block). Members are tracked by their partial
    // log-ratio L' = ln p + β·E (σ weights are kept unnormalized and rescaled).
    let mut atoms: BTreeMap<(i64, usize), Atom> = BTreeMap::new();
    let mut null = vec![0.0; nb];
    let digits = |block: usize| -> Vec<usize> {
        let mut v = vec![0; k];
        let mut b = block;
        for i in (0..k).rev() {
            v[i] = b % d;
            b /= d;
        }
        v
    };
    for block in 0..nb {
        let xs = digits(block);
        let mut p = law.first(xs[0]);
        for w in xs.windows(2) {
            p *= law.step(w[0], w[1]);
        }
        let e = chain.initial_energy(block);
        let q = (-beta * e).exp();
        if p > 0.0 {
            let l = p.ln() + beta * e;
            let atom = Atom {
                log_ratio: l,
                rho_mass: p,
                sigma_mass: q,
                mean_log_ratio: l,
                lo: l,
                hi: l,
                count: 1.0,
                rho_piece: (p, p),
                sigma_piece: (q, q),
            };
            insert(&mut atoms, (bin(l), block), atom);
        } else {
            null[block] += q;
        }
    }

    for _ in k..n {
        let mut next: BTreeMap<(i64, usize), Atom> = BTreeMap::new();
        let mut next_null = vec![0.0; nb];
        for (b, &w) in null.iter().enumerate() {
            if w > 0.0 {
                for y in 0..d {
                    next_null[chain.next_block(b, y)] += w * (-beta * chain.step_energy(b, y)).exp();
                }
            }
        }
        for (&(_, b), a) in &atoms {
            let last = b % d;
            for y in 0..d {
                let e = chain.step_energy(b, y);
                let qf = (-beta * e).exp();
                let pf = law.step(last, y);
                let nb2 = chain.next_block(b, y);
                if pf <= 0.0 {
                    next_null[nb2] += a.sigma_mass * qf;
                    continue;
                }
                let inc = pf.ln() + beta * e;
                let rho = a.rho_mass * pf;
                let mean = a.mean_log_ratio + inc;
                let atom = Atom {
                    log_ratio: a.log_ratio + inc,
                    rho_mass: rho,
                    sigma_mass: a.sigma_mass * qf,
                    mean_log_ratio: mean,
                    lo: a.lo + inc,
                    hi: a.hi + inc,
                    count: a.count,
                    rho_piece: (a.rho_piece.0 * pf, a.rho_piece.1 * pf),
                    sigma_piece: (a.sigma_piece.0 * qf, a.sigma_piece.1 * qf),
                };
                let key = (bin(atom.log_ratio), nb2);
                insert(&mut next, key, atom);
            }
        }
        // Rescale σ weights to keep them in floating-point range.
        let s: f64 = next.values().map(|a| a.sigma_mass).sum::<f64>() + next_null.iter().sum::<f64>();
        for a in next.values_mut() {
            rescale_sigma(a, s);
        }
        for w in next_null.iter_mut() {
            *w /= s;
        }
        atoms = next;
        null = next_null;
    }

    // Right-boundary completion.
    let mut finals: Vec<Atom> = Vec::with_capacity(atoms.len());
    let mut sigma_excess = 0.0;
    for (b, &w) in null.iter().enumerate() {
        sigma_excess += w * (-beta * chain.final_energy(b)).exp();
    }
    for (&(_, b), a) in &atoms {
        let e = chain.final_energy(b);
        let qf = (-beta * e).exp();
        let inc = beta * e;
        finals.push(Atom {
            log_ratio: a.log_ratio + inc,
            rho_mass: a.rho_mass,
            sigma_mass: a.sigma_mass * qf,
            mean_log_ratio: a.mean_log_ratio + inc,
            lo: a.lo + inc,
            hi: a.hi + inc,
            count: a.count,
            rho_piece: a.rho_piece,
            sigma_piece: (a.sigma_piece.0 * qf, a.sigma_piece.1 * qf),
        });
    }
    let z_rest: f64 = finals.iter().map(|a| a.sigma_mass).sum::<f64>() + sigma_excess;
    sigma_excess /= z_rest;

    // Normalize σ and merge blocks per bin.
    let mut by_bin: BTreeMap<i64, Atom> = BTreeMap::new();
    for mut a in finals {
        rescale_sigma(&mut a, z_rest);
        // Aggregate ratio lies inside the member range up to rounding.
        a.lo = a.lo.min(a.log_ratio);
        a.hi = a.hi.max(a.log_ratio);
        let key = bin(a.log_ratio);
        match by_bin.get_mut(&key) {
            Some(existing) => existing.merge(&a),
            None => {
                by_bin.insert(key, a);
            }
        }
    }
    let mut out: Vec<Atom> = by_bin.into_values().collect();
    out.sort_by(|a, b| b.log_ratio.total_cmp(&a.log_ratio));
    Ok(RatioSpectrum { atoms: out, rho_excess: 0.0, sigma_excess, bin_width: Some(bin_width) })
}

fn rescale_sigma(a: &mut Atom, s: f64) {
    a.sigma_mass /= s;
    a.sigma_piece = (a.sigma_piece.0 / s, a.sigma_piece.1 / s);
    let ls = s.ln();
    a.log_ratio += ls;
    a.mean_log_ratio += ls;
    a.lo += ls;
    a.hi += ls;
}

fn insert(map: &mut BTreeMap<(i64, usize), Atom>, key: (i64, usize), atom: Atom) {
    match map.get_mut(&key) {
        Some(existing) => existing.merge(&atom),
        None => {
            map.insert(key, atom);
        }
    }
}
