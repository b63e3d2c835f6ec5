//! Dispatch of a validated configuration to the toolkit.

use serde::Serialize;
use thermorev::coherence::{dephase_distill_protocol, reference_frame_formation};
use thermorev::lattice::{gap_scan, mixture_scan, spatial_variance, RateScanRow, StateFamilySpec};
use thermorev::oracle::{distillation_by_battery, formation_by_battery};
use thermorev::thermo::{gibbs, lorenz_curve, work_distillable, work_formation, GibbsEnsemble, WorkQuote};
use thermorev::{divergence_report, DensityOperator, Estimate, Nats, SmoothingParams};

use crate::config::{Command, Protocol, RunConfig};
use crate::error::CliError;
use crate::output::{num, Report, Table};

/// Largest dimension for which `work` adds the battery-ladder cross-check.
pub const BATTERY_CHECK_MAX_DIM: usize = 12;

fn nats(v: Nats) -> String {
    num(v.to_f64())
}

fn ensemble(config: &RunConfig) -> Result<GibbsEnsemble, CliError> {
    let h = config.hamiltonian.as_ref().expect("validated config").resolve("hamiltonian")?;
    Ok(gibbs(&h, config.beta.expect("canonical config"))?)
}

fn rho(config: &RunConfig) -> Result<DensityOperator, CliError> {
    config.rho.as_ref().expect("validated config").resolve("rho")
}

fn family(config: &RunConfig) -> Result<StateFamilySpec, CliError> {
    let f = config.family.as_ref().expect("validated config").resolve("family")?;
    f.validate()?;
    Ok(f)
}

pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    match config.command.expect("validated config") {
        Command::Divergence => divergence(config),
        Command::Lorenz => lorenz(config),
        Command::Work => work(config),
        Command::Protocol => protocol(config),
        Command::GapScan => scan(config),
        Command::MixtureScan => mixture(config),
        Command::Variance => variance(config),
    }
}

fn divergence(config: &RunConfig) -> Result<Report, CliError> {
    let rho = rho(config)?;
    let sigma = match &config.sigma {
        Some(s) => s.resolve("sigma")?,
        None => ensemble(config)?.gamma,
    };
    let eps = config.epsilon.expect("canonical config");
    let report = divergence_report(&rho, &sigma, SmoothingParams::new(eps)?)?;
    let mut t = Table::new(&["quantity", "epsilon", "value", "lower", "upper", "exact"]);
    for (name, e) in [("umegaki", report.umegaki), ("d_min", report.d_min), ("d_max", report.d_max), ("d_hyp", report.d_hyp)] {
        let e: Estimate = e;
        let eps = if name == "umegaki" { 0.0 } else { eps };
        t.push(vec![name.into(), num(eps), nats(e.value()), nats(e.lower), nats(e.upper), e.exact.to_string()]);
    }
    Ok(Report::new(t, &report).with_summary(&serde_json::json!({ "method": report.method })))
}

fn lorenz(config: &RunConfig) -> Result<Report, CliError> {
    let curve = lorenz_curve(&rho(config)?, &ensemble(config)?)?;
    let mut t = Table::new(&["gibbs_weight", "probability"]);
    for (x, y) in &curve.vertices {
        t.push(vec![num(*x), num(*y)]);
    }
    Ok(Report::new(t, &curve))
}

#[derive(Serialize)]
struct WorkResult {
    formation: WorkQuote,
    distillation: WorkQuote,
    /// Battery-ladder bisection values, when the state is small and semiclassical.
    battery: Option<[f64; 2]>,
    battery_step: f64,
}

fn work(config: &RunConfig) -> Result<Report, CliError> {
    let rho = rho(config)?;
    let ens = ensemble(config)?;
    let eps = config.epsilon.expect("canonical config");
    let step = config.battery_step.expect("canonical config");
    let formation = work_formation(&rho, &ens, eps)?;
    let distillation = work_distillable(&rho, &ens, eps)?;
    let battery = if rho.dim() <= BATTERY_CHECK_MAX_DIM {
        match ens.pairs(&rho) {
            Ok((p, g)) => Some([
                formation_by_battery(&p, &g, ens.beta, eps, step)?,
                distillation_by_battery(&p, &g, ens.beta, eps, step)?,
            ]),
            Err(thermorev::Error::NotSemiclassical(_)) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let mut t = Table::new(&["quantity", "epsilon", "work", "lower", "upper", "exact", "battery_work"]);
    for (i, q) in [formation, distillation].iter().enumerate() {
        let name = if i == 0 { "formation" } else { "distillation" };
        let b = battery.map_or(String::new(), |b| num(b[i]));
        t.push(vec![name.into(), num(eps), num(q.work), num(q.bracket[0]), num(q.bracket[1]), q.exact.to_string(), b]);
    }
    Ok(Report::new(t, &WorkResult { formation, distillation, battery, battery_step: step }))
}

fn protocol(config: &RunConfig) -> Result<Report, CliError> {
    let rho = rho(config)?;
    let ens = ensemble(config)?;
    let eps = config.epsilon.expect("canonical config");
    let delta = config.delta.expect("canonical config");
    let mut t = Table::new(&["quantity", "value"]);
    match config.protocol.expect("canonical config") {
        Protocol::DephaseDistill => {
            let out = dephase_distill_protocol(&rho, &ens, eps, delta)?;
            t.push(vec!["work".into(), num(out.work.work)]);
            t.push(vec!["work_lower".into(), num(out.work.bracket[0])]);
            t.push(vec!["work_upper".into(), num(out.work.bracket[1])]);
            t.push(vec!["d_min_original".into(), nats(out.diagnostics.d_min_original.value())]);
            t.push(vec!["d_min_dephased".into(), nats(out.diagnostics.d_min_dephased.value())]);
            t.push(vec!["waste_lower".into(), num(out.diagnostics.waste[0])]);
            t.push(vec!["waste_upper".into(), num(out.diagnostics.waste[1])]);
            t.push(vec!["waste_floor".into(), num(out.diagnostics.waste_floor)]);
            t.push(vec!["coherence_energy_range".into(), num(out.ledger.energy_range)]);
            Ok(Report::new(t, &out))
        }
        Protocol::ReferenceFrame => {
            let levels = config.levels.expect("canonical config");
            let out = reference_frame_formation(&rho, &ens, eps, delta, levels)?;
            t.push(vec!["work".into(), num(out.work)]);
            t.push(vec!["semiclassical_work".into(), num(out.semiclassical_work)]);
            t.push(vec!["recovery_distance".into(), num(out.recovery_distance)]);
            t.push(vec!["coherence_energy_range".into(), num(out.ledger.energy_range)]);
            Ok(Report::new(t, &out))
        }
    }
}

pub const SCAN_HEADER: [&str; 8] = ["n", "eps", "d_min_rate", "d_max_rate", "umegaki_rate", "gap_rate", "method", "err_bound"];

fn scan_table(rows: &[RateScanRow]) -> Table {
    let mut t = Table::new(&SCAN_HEADER);
    for r in rows {
        let method = serde_json::to_value(r.method).expect("method serializes");
        t.push(vec![
            r.n.to_string(),
            num(r.eps),
            num(r.d_min_rate),
            num(r.d_max_rate),
            num(r.umegaki_rate),
            num(r.gap_rate),
            method.as_str().unwrap_or_default().to_string(),
            num(r.err_bound),
        ]);
    }
    t
}

fn scan(config: &RunConfig) -> Result<Report, CliError> {
    let fam = family(config)?;
    let spec = config.lattice.as_ref().expect("validated config").build()?;
    let rows = gap_scan(
        &fam,
        &spec,
        config.beta.expect("canonical config"),
        config.epsilon.expect("canonical config"),
        config.n_list.as_deref().expect("canonical config"),
        config.bin_width,
    )?;
    Ok(Report::new(scan_table(&rows), &rows))
}

fn mixture(config: &RunConfig) -> Result<Report, CliError> {
    let fam = family(config)?;
    if !fam.is_mixture() {
        return Err(CliError::config("mixture-scan needs a finite_mixture family"));
    }
    let spec = config.lattice.as_ref().expect("validated config").build()?;
    let out = mixture_scan(
        &fam.components(),
        &spec,
        config.beta.expect("canonical config"),
        config.epsilon.expect("canonical config"),
        config.n_list.as_deref().expect("canonical config"),
        config.bin_width,
    )?;
    let summary = serde_json::json!({
        "weights": out.weights,
        "potentials": out.potentials,
        "spread": out.spread,
        "verdict": out.verdict,
        "component_epsilon": out.component_epsilon,
    });
    Ok(Report::new(scan_table(&out.rows), &out).with_summary(&summary))
}

#[derive(Serialize)]
struct VarianceRow {
    n: usize,
    variance: f64,
}

fn variance(config: &RunConfig) -> Result<Report, CliError> {
    let fam = family(config)?;
    let obs = config.observable.as_ref().expect("validated config").resolve("observable")?;
    let mut rows = Vec::new();
    for &n in config.n_list.as_deref().expect("canonical config") {
        rows.push(VarianceRow { n, variance: spatial_variance(&fam, &obs, n)? });
    }
    let mut t = Table::new(&["n", "variance"]);
    for r in &rows {
        t.push(vec![r.n.to_string(), num(r.variance)]);
    }
    Ok(Report::new(t, &rows))
}
