//! Built-in oracle suites, one per subcommand, on inputs of dimension ≤ 6.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thermorev::coherence::{dephase_distill_protocol, reference_frame_formation};
use thermorev::lattice::{gap_scan, gibbs_lattice, ising_chain, mixture_scan, spatial_variance, StateFamilySpec, Verdict};
use thermorev::oracle::{d_hyp_thresholds, d_max_grid, d_min_subsets, distillation_by_battery, formation_by_battery};
use thermorev::thermo::{gibbs, lorenz_curve, thermo_majorizes, work_distillable, work_formation};
use thermorev::{d_hyp_eps, d_max_eps, d_min_eps, DensityOperator, HermitianOperator, SmoothingParams};

use crate::config::Command;
use crate::error::CliError;

const SEED: u64 = 0x7e57;
const DIV_TOL: f64 = 1e-6;
const GRID: f64 = 1e-9;
const STEP: f64 = 1e-3;
const EPS_GRID: [f64; 4] = [0.0, 0.05, 0.1, 0.25];

#[derive(Debug, Default, Serialize)]
pub struct SelftestReport {
    pub command: &'static str,
    pub checks: usize,
    pub max_deviation: f64,
    pub failures: Vec<String>,
}

impl SelftestReport {
    fn compare(&mut self, what: impl FnOnce() -> String, got: f64, want: f64, tol: f64) {
        self.checks += 1;
        let dev = if got == want { 0.0 } else { (got - want).abs() };
        if dev.is_finite() {
            self.max_deviation = self.max_deviation.max(dev);
        }
        if !(dev <= tol) {
            self.fail(format!("{}: got {got}, expected {want}", what()));
        }
    }

    fn holds(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(what());
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        }
    }
}

fn probs(r: &mut ChaCha8Rng, d: usize, zero_p: f64) -> Vec<f64> {
    let mut p: Vec<f64> = (0..d).map(|_| if r.gen_bool(zero_p) { 0.0 } else { r.gen_range(0.01..1.0) }).collect();
    if p.iter().all(|&x| x == 0.0) {
        p[0] = 1.0;
    }
    let s: f64 = p.iter().sum();
    p.into_iter().map(|x| x / s).collect()
}

fn levels(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.gen_range(0..8) as f64 * 0.25).collect()
}

fn diag_state(p: Vec<f64>) -> Result<DensityOperator, CliError> {
    Ok(DensityOperator::from_probabilities(p)?)
}

pub fn run(command: Command) -> Result<SelftestReport, CliError> {
    let mut rep = SelftestReport { command: command.name(), ..Default::default() };
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    match command {
        Command::Divergence => divergence(&mut rep, &mut r)?,
        Command::Lorenz => lorenz(&mut rep, &mut r)?,
        Command::Work => work(&mut rep, &mut r)?,
        Command::Protocol => protocol(&mut rep, &mut r)?,
        Command::GapScan => scan(&mut rep, &mut r)?,
        Command::MixtureScan => mixture(&mut rep, &mut r)?,
        Command::Variance => variance(&mut rep, &mut r)?,
    }
    Ok(rep)
}

fn divergence(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..300 {
        let d = 1 + i % 6;
        let p = probs(r, d, 0.25);
        let q = probs(r, d, 0.15);
        let (rho, sigma) = (diag_state(p.clone())?, diag_state(q.clone())?);
        for eps in EPS_GRID {
            let sp = SmoothingParams::new(eps)?;
            let ctx = |name: &str| format!("{name} p={p:?} q={q:?} eps={eps}");
            rep.compare(|| ctx("d_min"), d_min_eps(&rho, &sigma, sp)?.value().to_f64(), d_min_subsets(&p, &q, eps)?, DIV_TOL);
            rep.compare(|| ctx("d_max"), d_max_eps(&rho, &sigma, sp)?.value().to_f64(), d_max_grid(&p, &q, eps, GRID)?, DIV_TOL);
            rep.compare(|| ctx("d_hyp"), d_hyp_eps(&rho, &sigma, sp)?.value().to_f64(), d_hyp_thresholds(&p, &q, eps)?, DIV_TOL);
        }
    }
    Ok(())
}

fn lorenz(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..300 {
        let d = 1 + i % 6;
        let ens = gibbs(&HermitianOperator::diagonal(levels(r, d))?, r.gen_range(0.2..2.0))?;
        let p = probs(r, d, 0.2);
        let g = ens.gamma.probabilities().expect("diagonal Gibbs state").to_vec();
        let curve = lorenz_curve(&diag_state(p.clone())?, &ens)?;
        // cumulative sums in order of decreasing p/g
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&a, &b| (p[b] * g[a]).total_cmp(&(p[a] * g[b])));
        let (mut x, mut y) = (0.0, 0.0);
        for k in idx {
            x += g[k];
            y += p[k];
            rep.compare(|| format!("curve at {x} for p={p:?}"), curve.eval(x), y, 1e-12);
        }
        let rho = diag_state(p.clone())?;
        rep.holds(thermo_majorizes(&rho, &ens.gamma, &ens)?, || format!("p={p:?} does not majorize γ"));
    }
    Ok(())
}

fn work(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..120 {
        let d = 1 + i % 4;
        let beta = [0.5, 1.0, 2.0][i % 3];
        let ens = gibbs(&HermitianOperator::diagonal(levels(r, d))?, beta)?;
        let p = probs(r, d, 0.2);
        let g = ens.gamma.probabilities().expect("diagonal Gibbs state").to_vec();
        let rho = diag_state(p.clone())?;
        for eps in [0.0, 0.05, 0.1] {
            let f = work_formation(&rho, &ens, eps)?.work;
            let w = work_distillable(&rho, &ens, eps)?.work;
            let ctx = |name: &str| format!("{name} p={p:?} g={g:?} β={beta} eps={eps}");
            rep.compare(|| ctx("formation"), f, formation_by_battery(&p, &g, beta, eps, STEP)?, STEP + 1e-9);
            rep.compare(|| ctx("distillation"), w, distillation_by_battery(&p, &g, beta, eps, STEP)?, STEP + 1e-9);
        }
    }
    Ok(())
}

fn protocol(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..150 {
        let d = 1 + i % 3;
        let beta = [0.5, 1.0, 2.0][i % 3];
        let ens = gibbs(&HermitianOperator::diagonal((0..d).map(|_| r.gen_range(0.0..2.0)).collect())?, beta)?;
        let rho = diag_state(probs(r, d, 0.2))?;
        let delta = [0.01, 0.05, 0.2][(i / 3) % 3];
        let eps = [0.0, 0.05][i % 2];
        let out = dephase_distill_protocol(&rho, &ens, eps, delta)?;
        rep.holds(out.diagnostics.waste[1] <= beta * delta + 1e-8, || format!("waste {:?} above βδ = {}", out.diagnostics.waste, beta * delta));
        let base = work_distillable(&rho, &ens, eps)?.work;
        rep.holds(beta * (base - out.work.work) <= beta * delta + 1e-8, || format!("work loss {} above δ = {delta}", base - out.work.work));

        let l = 1 + i % 6;
        let f = reference_frame_formation(&rho, &ens, eps, delta, l)?;
        rep.compare(|| format!("recovery of a semiclassical state, L = {l}"), f.recovery_distance, 0.0, 1e-12);
        rep.compare(|| format!("ledger at δ = {delta}, L = {l}"), f.ledger.energy_range, delta * (l as f64 - 1.0) + delta, 0.0);
    }
    Ok(())
}

/// Explicit probability vectors of `ρ_n` and `γ_n`.
fn explicit(fam: &StateFamilySpec, j: f64, h: f64, n: usize, beta: f64) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let rho = fam.state(n)?;
    let gamma = gibbs_lattice(&ising_chain(j, h), n, beta)?.gamma;
    let p = rho.probabilities().ok_or_else(|| CliError::numerical("family state is not diagonal"))?.to_vec();
    Ok((p, gamma.probabilities().expect("diagonal Gibbs state").to_vec()))
}

fn random_family(r: &mut ChaCha8Rng, i: usize) -> Result<StateFamilySpec, CliError> {
    Ok(if i % 2 == 0 {
        StateFamilySpec::iid_mixed(diag_state(probs(r, 2, 0.1))?)?
    } else {
        let (a, b) = (r.gen_range(0.1..0.9), r.gen_range(0.1..0.9));
        StateFamilySpec::markov(vec![vec![1.0 - a, a], vec![b, 1.0 - b]], vec![b / (a + b), a / (a + b)])?
    })
}

fn scan(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..60 {
        let fam = random_family(r, i)?;
        let (j, h, beta) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(0.3..1.5));
        let eps = EPS_GRID[i % 4];
        let row = gap_scan(&fam, &ising_chain(j, h), beta, eps, &[2], Some(1e-9))?.remove(0);
        let (p, g) = explicit(&fam, j, h, 2, beta)?;
        let tol = 2.0 * row.err_bound + DIV_TOL;
        let ctx = |name: &str| format!("{name} at n = 2, J={j}, h={h}, β={beta}, eps={eps}, p={p:?}");
        rep.compare(|| ctx("d_min"), 2.0 * row.d_min_rate, d_min_subsets(&p, &g, eps)?, 2.0 * tol);
        rep.compare(|| ctx("d_max"), 2.0 * row.d_max_rate, d_max_grid(&p, &g, eps, GRID)?, 2.0 * tol);
        let kl: f64 = p.iter().zip(&g).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
        rep.compare(|| ctx("umegaki"), 2.0 * row.umegaki_rate, kl, 1e-9);
    }
    Ok(())
}

fn ising_potential(q: &[f64], j: f64, h: f64, beta: f64) -> f64 {
    let s = [1.0, -1.0];
    let t = |a: usize, b: usize| (-beta * (-j * s[a] * s[b] + h * s[a])).exp();
    let (tr, det) = (t(0, 0) + t(1, 1), t(0, 0) * t(1, 1) - t(0, 1) * t(1, 0));
    let m = q[0] - q[1];
    let entropy: f64 = q.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum();
    -entropy + beta * (-j * m * m + h * m) + (0.5 * (tr + (tr * tr - 4.0 * det).sqrt())).ln()
}

fn mixture(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..40 {
        let k = 2 + i % 2;
        let q: Vec<Vec<f64>> = (0..k).map(|_| probs(r, 2, 0.1)).collect();
        let w = probs(r, k, 0.0);
        let comps: Vec<(f64, StateFamilySpec)> =
            q.iter().zip(&w).map(|(q, &w)| Ok((w, StateFamilySpec::iid_mixed(diag_state(q.clone())?)?))).collect::<Result<_, CliError>>()?;
        let (j, h) = if i % 4 == 0 { (r.gen_range(-1.0..1.0), 0.0) } else { (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) };
        let beta = 1.0;
        let eps = 0.05;
        let out = mixture_scan(&comps, &ising_chain(j, h), beta, eps, &[2], Some(1e-9))?;
        let s: Vec<f64> = q.iter().map(|q| ising_potential(q, j, h, beta)).collect();
        for (a, b) in out.potentials.iter().zip(&s) {
            rep.compare(|| format!("component potential J={j}, h={h}"), *a, *b, 1e-9);
        }
        let spread = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
        let expect = if spread <= thermorev::lattice::rates::VERDICT_TOL { Verdict::Reversible } else { Verdict::Irreversible };
        rep.holds(out.verdict == expect, || format!("verdict {:?} with spread {spread}", out.verdict));

        // direct row at n = 2 against the explicit mixture
        let mix = StateFamilySpec::mixture(comps.clone())?;
        let (p, g) = explicit(&mix, j, h, 2, beta)?;
        if let Some(d) = out.direct.iter().find(|d| d.n == 2) {
            let ctx = |name: &str| format!("direct {name}, p={p:?}, J={j}, h={h}");
            let tol = 2.0 * d.err_bound + DIV_TOL;
            rep.compare(|| ctx("d_min"), 2.0 * d.d_min_rate, d_min_subsets(&p, &g, eps)?, tol);
            rep.compare(|| ctx("d_max"), 2.0 * d.d_max_rate, d_max_grid(&p, &g, eps, GRID)?, tol);
        } else {
            rep.holds(false, || "no direct row at n = 2".into());
        }
    }
    Ok(())
}

fn variance(rep: &mut SelftestReport, r: &mut ChaCha8Rng) -> Result<(), CliError> {
    for i in 0..60 {
        let fam = if i % 3 == 2 {
            StateFamilySpec::mixture(vec![(0.4, random_family(r, 0)?), (0.6, random_family(r, 1)?)])?
        } else {
            random_family(r, i)?
        };
        let a: Vec<f64> = (0..2).map(|_| r.gen_range(-2.0..2.0)).collect();
        let obs = HermitianOperator::diagonal(a.clone())?;
        let n = 1 + i % 6;
        let p = fam.state(n)?.probabilities().ok_or_else(|| CliError::numerical("family state is not diagonal"))?.to_vec();
        let avg: Vec<f64> = (0..p.len()).map(|x| (0..n).map(|z| a[(x >> z) & 1]).sum::<f64>() / n as f64).collect();
        let mean: f64 = p.iter().zip(&avg).map(|(p, v)| p * v).sum();
        let want: f64 = p.iter().zip(&avg).map(|(p, v)| p * (v - mean).powi(2)).sum();
        rep.compare(|| format!("variance at n = {n}, a = {a:?}"), spatial_variance(&fam, &obs, n)?, want, 1e-12);
    }
    Ok(())
}
