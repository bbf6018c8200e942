//! Validity, uniqueness and their product.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sqmg_core::batch::ShotRecord;
use sqmg_core::molgraph::{canonical_key, validate, Decoder, MoleculeGraph, ValenceTable, ValidationResult};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct DecodedShot {
    pub record: ShotRecord,
    pub molecule: MoleculeGraph,
    pub validation: ValidationResult,
    pub key: String,
}

pub fn decode_records(
    records: &[ShotRecord],
    decoder: &Decoder,
    valence: &ValenceTable,
) -> Result<Vec<DecodedShot>, CliError> {
    records
        .iter()
        .map(|r| {
            let molecule = decoder
                .decode(r)
                .map_err(|e| CliError::Config(format!("cannot decode shot: {e}")))?;
            Ok(DecodedShot {
                validation: validate(&molecule, valence),
                key: canonical_key(&molecule),
                record: r.clone(),
                molecule,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub shots: usize,
    pub valid: usize,
    pub unique: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub objective: f64,
}

/// Validity is valid shots over all shots; uniqueness is distinct canonical
/// keys among valid shots over valid shots, 0 when nothing is valid.
pub fn compute_metrics(shots: &[DecodedShot]) -> Result<Metrics, CliError> {
    if shots.is_empty() {
        return Err(CliError::Config("cannot score an empty batch".into()));
    }
    let valid: Vec<&DecodedShot> = shots.iter().filter(|s| s.validation.valid).collect();
    let unique = valid.iter().map(|s| s.key.as_str()).collect::<BTreeSet<_>>().len();
    let validity = valid.len() as f64 / shots.len() as f64;
    let uniqueness = if valid.is_empty() {
        0.0
    } else {
        unique as f64 / valid.len() as f64
    };
    Ok(Metrics {
        shots: shots.len(),
        valid: valid.len(),
        unique,
        validity,
        uniqueness,
        objective: validity * uniqueness,
    })
}
