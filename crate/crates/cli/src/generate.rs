//! Sampling with fixed parameters and decoding shot files into molecules.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sqmg_core::ansatz::Mode;
use sqmg_core::batch::SampleBatch;
use sqmg_core::molgraph::{to_smiles, Failure};

use crate::config::RunConfig;
use crate::metrics::{compute_metrics, decode_records, DecodedShot, Metrics};
use crate::pipeline::Pipeline;
use crate::train::BestParams;
use crate::{create_dir, write_json, CliError};

pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const MOLECULES_FILE: &str = "molecules.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeRow {
    pub shot: usize,
    pub atoms: Vec<u8>,
    pub bonds: Vec<u8>,
    pub smiles: String,
    /// True when `smiles` holds the canonical key because no SMILES string
    /// could be written.
    pub smiles_fallback: bool,
    pub key: String,
    pub valid: bool,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub empty: usize,
    pub valence: usize,
    pub disconnected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: Mode,
    pub n_atoms: usize,
    pub seed: u64,
    pub metrics: Metrics,
    pub failures: FailureCounts,
    /// Canonical key → count among valid shots.
    pub molecules: BTreeMap<String, usize>,
}

/// Accepts either a `best_params.json` written by `train` or a bare JSON
/// array of numbers.
pub fn read_params(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    if let Ok(best) = serde_json::from_str::<BestParams>(&text) {
        return Ok(best.params);
    }
    serde_json::from_str::<Vec<f64>>(&text).map_err(|e| {
        CliError::Config(format!(
            "{}: expected best_params.json or a JSON array of numbers ({e})",
            path.display()
        ))
    })
}

pub fn summarize(cfg: &RunConfig, decoded: &[DecodedShot], seed: u64) -> Result<Summary, CliError> {
    let mut failures = FailureCounts {
        empty: 0,
        valence: 0,
        disconnected: 0,
    };
    let mut molecules = BTreeMap::new();
    for d in decoded {
        if d.validation.valid {
            *molecules.entry(d.key.clone()).or_insert(0) += 1;
        }
        let f = &d.validation.failures;
        failures.empty += f.contains(&Failure::EmptyMolecule) as usize;
        failures.valence += f.iter().any(|x| matches!(x, Failure::ValenceExceeded(_))) as usize;
        failures.disconnected += f.contains(&Failure::Disconnected) as usize;
    }
    Ok(Summary {
        mode: cfg.mode_spec()?.mode,
        n_atoms: cfg.n_atoms,
        seed,
        metrics: compute_metrics(decoded)?,
        failures,
        molecules,
    })
}

pub fn write_molecules(path: &Path, decoded: &[DecodedShot]) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut w = BufWriter::new(f);
    for (shot, d) in decoded.iter().enumerate() {
        let s = to_smiles(&d.molecule);
        let row = MoleculeRow {
            shot,
            atoms: d.record.atoms.clone(),
            bonds: d.record.bonds.clone(),
            smiles: s.text,
            smiles_fallback: s.fallback,
            key: d.key.clone(),
            valid: d.validation.valid,
            failures: d.validation.failures.clone(),
        };
        serde_json::to_writer(&mut w, &row).map_err(|e| CliError::io(path.display(), e))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path.display(), e))?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub summary: Summary,
    pub output_dir: PathBuf,
}

/// Samples `cfg.shots` shots with `params`, then writes `samples.jsonl`,
/// `molecules.jsonl`, `summary.json` and a `generate.timing.json` sidecar.
pub fn run_generate(cfg: &RunConfig, params: &[f64]) -> Result<GenerateOutcome, CliError> {
    let pipeline = Pipeline::new(cfg)?;
    let start = Instant::now();
    let batch = pipeline.sample(params, cfg.shots, cfg.seed)?;
    let decoded = pipeline.decode(&batch)?;
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    let samples = dir.join(SAMPLES_FILE);
    let f = File::create(&samples).map_err(|e| CliError::io(samples.display(), e))?;
    batch
        .write_jsonl(BufWriter::new(f))
        .map_err(|e| CliError::io(samples.display(), e))?;
    write_molecules(&dir.join(MOLECULES_FILE), &decoded)?;
    let summary = summarize(cfg, &decoded, cfg.seed)?;
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    write_json(
        &dir.join("generate.timing.json"),
        &serde_json::json!({ "wall_seconds": start.elapsed().as_secs_f64() }),
    )?;
    Ok(GenerateOutcome {
        summary,
        output_dir: dir,
    })
}

/// Reads a sample file (JSONL or the binary format, detected by its magic
/// bytes) and writes molecules and a summary next to `output`.
pub fn run_decode(cfg: &RunConfig, input: &Path, output: &Path) -> Result<Summary, CliError> {
    let mut bytes = Vec::new();
    File::open(input)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| CliError::io(input.display(), e))?;
    let batch = if bytes.starts_with(b"SQMGSB") {
        SampleBatch::read_binary(&bytes[..])
    } else {
        SampleBatch::read_jsonl(&bytes[..])
    }
    .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    if batch.n_atoms != cfg.n_atoms {
        return Err(CliError::Config(format!(
            "{} holds N={} samples but the config says N={}",
            input.display(),
            batch.n_atoms,
            cfg.n_atoms
        )));
    }
    let decoded = decode_records(&batch.records, &cfg.decoder()?, &cfg.valence_table()?)?;
    write_molecules(output, &decoded)?;
    let summary = summarize(cfg, &decoded, batch.seed)?;
    write_json(&output.with_extension("summary.json"), &summary)?;
    Ok(summary)
}
