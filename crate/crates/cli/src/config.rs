//! Run configuration: a flat TOML file plus flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thermorev::lattice::{ising_chain, LocalHamiltonianSpec, StateFamilySpec};
use thermorev::{DensityOperator, HermitianOperator};

use crate::error::CliError;

pub const DEFAULT_N_LIST: [usize; 4] = [8, 16, 32, 64];
pub const MAX_N: usize = 4096;
pub const MAX_LEVELS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Divergence,
    Lorenz,
    Work,
    Protocol,
    GapScan,
    MixtureScan,
    Variance,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Divergence => "divergence",
            Command::Lorenz => "lorenz",
            Command::Work => "work",
            Command::Protocol => "protocol",
            Command::GapScan => "gap-scan",
            Command::MixtureScan => "mixture-scan",
            Command::Variance => "variance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    DephaseDistill,
    ReferenceFrame,
}

/// A value given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Source<T> {
    pub fn resolve(&self, what: &str) -> Result<T, CliError> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => read_json(p, what),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{what}: cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{what}: {}: {e}", path.display())))
}

/// Chain Hamiltonian: the nearest-neighbour Ising chain or a general local term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Ising {
        j: f64,
        h: f64,
    },
    Local {
        site_dim: usize,
        support: usize,
        local_term: Source<HermitianOperator>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boundary_term: Option<Source<HermitianOperator>>,
    },
}

impl LatticeConfig {
    pub fn build(&self) -> Result<LocalHamiltonianSpec, CliError> {
        match self {
            LatticeConfig::Ising { j, h } => {
                if !j.is_finite() || !h.is_finite() {
                    return Err(CliError::config("lattice couplings must be finite"));
                }
                Ok(ising_chain(*j, *h))
            }
            LatticeConfig::Local { site_dim, support, local_term, boundary_term } => {
                let local = local_term.resolve("lattice.local_term")?;
                let boundary = boundary_term.as_ref().map(|b| b.resolve("lattice.boundary_term")).transpose()?;
                Ok(LocalHamiltonianSpec::new(*site_dim, *support, local, boundary)?)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Source<DensityOperator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Source<DensityOperator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<Source<HermitianOperator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<Source<HermitianOperator>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Source<StateFamilySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(command, rho, sigma, hamiltonian, observable, family, lattice, epsilon, beta, n_list, bin_width,
              battery_step, protocol, delta, levels, output, format);
        self
    }

    /// Defaults filled in for every parameter the command reads, unused ones
    /// dropped.
    pub fn canonical(mut self) -> Self {
        let cmd = self.command;
        let uses = |cs: &[Command]| cmd.is_some_and(|c| cs.contains(&c));
        use Command::*;
        self.epsilon = if uses(&[Divergence, Work, Protocol, GapScan, MixtureScan]) { Some(self.epsilon.unwrap_or(0.0)) } else { None };
        self.beta = if uses(&[Lorenz, Work, Protocol, GapScan, MixtureScan]) || (cmd == Some(Divergence) && self.sigma.is_none()) {
            Some(self.beta.unwrap_or(1.0))
        } else {
            None
        };
        if uses(&[GapScan, MixtureScan, Variance]) {
            let mut n = self.n_list.take().unwrap_or_else(|| DEFAULT_N_LIST.to_vec());
            n.sort_unstable();
            n.dedup();
            self.n_list = Some(n);
        } else {
            self.n_list = None;
        }
        if !uses(&[GapScan, MixtureScan]) {
            self.bin_width = None;
            self.lattice = None;
        }
        self.battery_step = if uses(&[Work]) { Some(self.battery_step.unwrap_or(thermorev::thermo::DEFAULT_BATTERY_STEP)) } else { None };
        if uses(&[Protocol]) {
            let p = self.protocol.unwrap_or_default();
            self.protocol = Some(p);
            self.delta = Some(self.delta.unwrap_or(0.05));
            self.levels = if p == self::Protocol::ReferenceFrame { Some(self.levels.unwrap_or(8)) } else { None };
        } else {
            self.protocol = None;
            self.delta = None;
            self.levels = None;
        }
        if !uses(&[Divergence, Lorenz, Work, Protocol]) {
            self.rho = None;
            self.hamiltonian = None;
        }
        if cmd != Some(Divergence) {
            self.sigma = None;
        }
        if cmd == Some(Divergence) && self.sigma.is_some() {
            self.hamiltonian = None;
        }
        if !uses(&[GapScan, MixtureScan, Variance]) {
            self.family = None;
        }
        if cmd != Some(Variance) {
            self.observable = None;
        }
        self.format = Some(self.format.unwrap_or_default());
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Range checks on the numeric parameters of a canonical config.
    pub fn validate(&self) -> Result<(), CliError> {
        let cmd = self.command.ok_or_else(|| CliError::config("no command given"))?;
        let bad = |what: &str, v: f64| CliError::config(format!("{what} out of range: {v}"));
        if let Some(e) = self.epsilon {
            if !(0.0..1.0).contains(&e) {
                return Err(bad("epsilon (needs 0 ≤ ε < 1)", e));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(bad("beta (needs 0 < β < ∞)", b));
            }
        }
        for (what, v) in [("bin_width", self.bin_width), ("battery_step", self.battery_step), ("delta", self.delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(bad(what, v));
                }
            }
        }
        if let Some(ns) = &self.n_list {
            if ns.is_empty() {
                return Err(CliError::config("n_list is empty"));
            }
            if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > MAX_N) {
                return Err(CliError::config(format!("chain length {n} out of range 1..={MAX_N}")));
            }
        }
        if let Some(l) = self.levels {
            if l == 0 || l > MAX_LEVELS {
                return Err(CliError::config(format!("levels {l} out of range 1..={MAX_LEVELS}")));
            }
        }
        let need = |present: bool, what: &str| {
            if present {
                Ok(())
            } else {
                Err(CliError::config(format!("{} needs `{what}`", cmd.name())))
            }
        };
        use Command::*;
        match cmd {
            Divergence => {
                need(self.rho.is_some(), "rho")?;
                need(self.sigma.is_some() || self.hamiltonian.is_some(), "sigma` or `hamiltonian")
            }
            Lorenz | Work | Protocol => {
                need(self.rho.is_some(), "rho")?;
                need(self.hamiltonian.is_some(), "hamiltonian")
            }
            GapScan | MixtureScan => {
                need(self.family.is_some(), "family")?;
                need(self.lattice.is_some(), "lattice")
            }
            Variance => {
                need(self.family.is_some(), "family")?;
                need(self.observable.is_some(), "observable")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let c = RunConfig::parse(
            r#"
            command = "gap-scan"
            n_list = [32, 8, 8]
            rho = "ignored.json"
            family = { kind = "iid_mixed", state = { dim = 2, diag = [0.8, 0.2] } }
            lattice = { model = "ising", j = 1.0, h = 0.5 }
            "#,
        )
        .unwrap()
        .canonical();
        assert_eq!(c.n_list.as_deref(), Some(&[8, 32][..]));
        assert!(c.rho.is_none());
        let again = RunConfig::parse(&c.to_toml()).unwrap().canonical();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), c.to_toml());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("command = \"work\"\nbeta_typo = 1.0\n").is_err());
        assert!(RunConfig::parse("lattice = { model = \"ising\", j = 1.0, h = 0.0, k = 2 }\n").is_err());
    }

    #[test]
    fn flags_win() {
        let file = RunConfig { epsilon: Some(0.1), beta: Some(2.0), ..Default::default() };
        let flags = RunConfig { epsilon: Some(0.2), ..Default::default() };
        let c = file.overlay(flags);
        assert_eq!((c.epsilon, c.beta), (Some(0.2), Some(2.0)));
    }

    #[test]
    fn ranges_are_checked() {
        let base = RunConfig {
            command: Some(Command::Variance),
            family: Some(Source::Path("f.json".into())),
            observable: Some(Source::Path("o.json".into())),
            ..Default::default()
        };
        assert!(base.clone().canonical().validate().is_ok());
        let c = RunConfig { n_list: Some(vec![0]), ..base.clone() }.canonical();
        assert!(c.validate().is_err());
        let c = RunConfig { command: Some(Command::Work), epsilon: Some(1.0), ..Default::default() }.canonical();
        assert!(c.validate().is_err());
    }
}
