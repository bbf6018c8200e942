//! Run configuration: one TOML file, versioned, with dotted-path overrides.
//!
//! ```toml
//! config_version = 1
//! n_atoms = 4
//! variant = "hybrid"            # or "static"
//! conditioning = "early_measured"
//! backend = "mps"               # or "dense"
//! shots = 1000
//! seed = 7
//! output_dir = "runs/n4-bo"
//!
//! [optimizer]
//! kind = "bo"                   # or "cobyla"
//! evaluations = 150
//!
//! [mode]
//! kind = "scaffold"
//! core = { atoms = ["C", "C", "O"], bonds = [[0, 1, 1], [1, 2, 2]] }
//! sites = [0, 1, 2]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqmg_core::ansatz::{
    qubit_count, AnsatzSpec, AtomCodebook, BondCodebook, Conditioning, Fragment, ModeSpec, Variant,
};
use sqmg_core::chem::{AtomKind, BondKind, Element};
use sqmg_core::molgraph::{Decoder, ValenceTable};
use sqmg_core::sim::dense::DEFAULT_MAX_QUBITS;
use sqmg_core::sim::mps::MpsSimulator;
use sqmg_optim::BoConfig;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Dense,
    Mps,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Dense => "dense",
            Backend::Mps => "mps",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Cobyla,
    Bo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Objective evaluations; one evaluation is one shot batch.
    pub evaluations: usize,
    pub rhobeg: f64,
    pub rhoend: f64,
    pub initial_points: usize,
    pub candidates: usize,
    pub polish_steps: usize,
    pub xi: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let bo = BoConfig::default();
        OptimizerConfig {
            kind: OptimizerKind::Bo,
            evaluations: 150,
            rhobeg: 1.0,
            rhoend: 1e-4,
            initial_points: bo.initial_points,
            candidates: bo.candidates,
            polish_steps: bo.polish_steps,
            xi: bo.xi,
        }
    }
}

impl OptimizerConfig {
    pub fn bo_config(&self) -> BoConfig {
        BoConfig {
            candidates: self.candidates,
            polish_steps: self.polish_steps,
            xi: self.xi,
            initial_points: self.initial_points,
            ..BoConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    DeNovo,
    Scaffold {
        core: Fragment,
        sites: Vec<usize>,
    },
    Linker {
        first: Fragment,
        first_sites: Vec<usize>,
        second: Fragment,
        second_sites: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    /// Eight entries, code order; "NONE" or an element symbol.
    pub atoms: Vec<String>,
    /// Four bond orders in code order, 0 meaning no bond.
    pub bonds: Vec<u8>,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        let atoms: Vec<AtomKind> = AtomCodebook::default().into();
        let bonds: Vec<BondKind> = BondCodebook::default().into();
        CodebookConfig {
            atoms: atoms.iter().map(|a| a.to_string()).collect(),
            bonds: bonds.iter().map(|b| b.order()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub dense_atoms: Vec<usize>,
    pub mps_atoms: Vec<usize>,
    pub dense_variants: Vec<Variant>,
    pub mps_variants: Vec<Variant>,
    pub shots: usize,
    /// Shot count for the dense backend; the largest dense sizes take
    /// seconds per shot on a desktop core.
    pub dense_shots: usize,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dense_atoms: (2..=8).chain([10]).collect(),
            mps_atoms: vec![8, 12, 16, 20],
            dense_variants: vec![Variant::Hybrid],
            mps_variants: vec![Variant::Hybrid, Variant::Static],
            shots: 1000,
            dense_shots: 1000,
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    pub n_atoms: usize,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_conditioning")]
    pub conditioning: Conditioning,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_chi")]
    pub chi_max: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_mode")]
    pub mode: ModeConfig,
    #[serde(default)]
    pub codebook: CodebookConfig,
    /// Maximum valence overrides by element symbol.
    #[serde(default)]
    pub valence: BTreeMap<Element, u8>,
    #[serde(default)]
    pub bench: BenchConfig,
}

fn default_variant() -> Variant {
    Variant::Hybrid
}
fn default_conditioning() -> Conditioning {
    Conditioning::EarlyMeasured
}
fn default_backend() -> Backend {
    Backend::Mps
}
fn default_chi() -> usize {
    MpsSimulator::default().chi_max
}
fn default_threshold() -> f64 {
    MpsSimulator::default().threshold
}
fn default_shots() -> usize {
    1000
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_mode() -> ModeConfig {
    ModeConfig::DeNovo
}

impl RunConfig {
    /// A de novo configuration with every other field at its default.
    pub fn new(n_atoms: usize) -> RunConfig {
        RunConfig {
            config_version: CONFIG_VERSION,
            n_atoms,
            variant: default_variant(),
            conditioning: default_conditioning(),
            backend: default_backend(),
            chi_max: default_chi(),
            threshold: default_threshold(),
            shots: default_shots(),
            seed: 0,
            output_dir: default_output(),
            optimizer: OptimizerConfig::default(),
            mode: default_mode(),
            codebook: CodebookConfig::default(),
            valence: BTreeMap::new(),
            bench: BenchConfig::default(),
        }
    }

    /// Reads `path`, applies `key.path=value` overrides and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text, overrides)
    }

    pub fn from_toml(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        if self.n_atoms == 0 {
            return Err(CliError::Config("n_atoms must be at least 1".into()));
        }
        if self.shots == 0 {
            return Err(CliError::Config("shots must be at least 1".into()));
        }
        if self.chi_max == 0 || !(self.threshold >= 0.0) {
            return Err(CliError::Config("chi_max must be ≥ 1 and threshold ≥ 0".into()));
        }
        self.ansatz_spec()?;
        self.valence_table()?;
        Ok(())
    }

    /// Capacity check for the configured backend, phrased for a user.
    pub fn check_capacity(&self) -> Result<(), CliError> {
        let q = qubit_count(self.n_atoms, self.variant).map_err(|e| CliError::Config(e.to_string()))?;
        if self.backend == Backend::Dense && q > DEFAULT_MAX_QUBITS {
            return Err(CliError::Capacity(format!(
                "N={} needs {q} qubits, over the dense backend's {DEFAULT_MAX_QUBITS}-qubit cap; \
                 set backend = \"mps\"",
                self.n_atoms
            )));
        }
        Ok(())
    }

    pub fn mode_spec(&self) -> Result<ModeSpec, CliError> {
        let n = self.n_atoms;
        let spec = match &self.mode {
            ModeConfig::DeNovo => Ok(ModeSpec::de_novo(n)),
            ModeConfig::Scaffold { core, sites } => ModeSpec::scaffold(n, core, sites),
            ModeConfig::Linker {
                first,
                first_sites,
                second,
                second_sites,
            } => ModeSpec::linker(n, (first, first_sites), (second, second_sites)),
        };
        let spec = spec.map_err(|e| CliError::Config(format!("mode: {e}")))?;
        spec.validate(n, &self.valence_table()?)
            .map_err(|e| CliError::Config(format!("mode: {e}")))?;
        Ok(spec)
    }

    pub fn atom_codebook(&self) -> Result<AtomCodebook, CliError> {
        let kinds = self
            .codebook
            .atoms
            .iter()
            .map(|s| s.parse::<AtomKind>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("codebook.atoms: {e}")))?;
        AtomCodebook::try_from(kinds).map_err(|e| CliError::Config(format!("codebook.atoms: {e}")))
    }

    pub fn bond_codebook(&self) -> Result<BondCodebook, CliError> {
        let kinds = self
            .codebook
            .bonds
            .iter()
            .map(|&o| {
                BondKind::from_order(o)
                    .ok_or_else(|| CliError::Config(format!("codebook.bonds: bad bond order {o}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        BondCodebook::try_from(kinds).map_err(|e| CliError::Config(format!("codebook.bonds: {e}")))
    }

    pub fn valence_table(&self) -> Result<ValenceTable, CliError> {
        ValenceTable::with_overrides(&self.valence).map_err(|e| CliError::Config(format!("valence: {e}")))
    }

    pub fn ansatz_spec(&self) -> Result<AnsatzSpec, CliError> {
        Ok(AnsatzSpec {
            n_atoms: self.n_atoms,
            variant: self.variant,
            conditioning: self.conditioning,
            mode: self.mode_spec()?,
            atom_codebook: self.atom_codebook()?,
        })
    }

    pub fn decoder(&self) -> Result<Decoder, CliError> {
        Ok(Decoder {
            n_atoms: self.n_atoms,
            atom_codebook: self.atom_codebook()?,
            bond_codebook: self.bond_codebook()?,
            mode: self.mode_spec()?,
        })
    }
}

/// Applies `a.b.c=value`. The value is read as a TOML literal when it parses
/// as one and as a bare string otherwise, so `seed=3` sets an integer and
/// `backend=dense` a string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key {path:?}")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut table = root;
    for k in &keys[..keys.len() - 1] {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {path:?}: {k} is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
