//! Plot-ready tidy CSV from history and benchmark files alone.

use std::path::Path;

use serde::Serialize;

use crate::bench::{fit, read_csv, BenchFits, Status};
use crate::train::read_history;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub run: String,
    pub epoch: usize,
    pub objective: f64,
    pub validity: f64,
    pub uniqueness: f64,
    pub running_max: f64,
    /// Trailing mean of the objective over the last three epochs (fewer at
    /// the start of a run).
    pub moving_average_3: f64,
}

pub fn trajectory(run: &str, history: &Path) -> Result<Vec<TrajectoryRow>, CliError> {
    let rows = read_history(history)?;
    let mut best = f64::NEG_INFINITY;
    Ok(rows
        .iter()
        .enumerate()
        .map(|(t, r)| {
            best = best.max(r.y);
            let window = &rows[t.saturating_sub(2)..=t];
            TrajectoryRow {
                run: run.to_string(),
                epoch: r.iteration,
                objective: r.y,
                validity: r.validity,
                uniqueness: r.uniqueness,
                running_max: best,
                moving_average_3: window.iter().map(|w| w.y).sum::<f64>() / window.len() as f64,
            }
        })
        .collect())
}

/// Run label for a history file: its parent directory name, falling back
/// to the file stem.
pub fn run_label(history: &Path) -> String {
    history
        .parent()
        .and_then(|p| p.file_name())
        .or_else(|| history.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

pub fn write_trajectories(histories: &[&Path], out: &Path) -> Result<usize, CliError> {
    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::io(out.display(), e))?;
    let mut n = 0;
    for h in histories {
        for row in trajectory(&run_label(h), h)? {
            w.serialize(&row).map_err(|e| CliError::io(out.display(), e))?;
            n += 1;
        }
    }
    w.flush().map_err(|e| CliError::io(out.display(), e))?;
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub backend: String,
    pub variant: String,
    pub n_atoms: usize,
    pub qubits: usize,
    pub seconds: f64,
    pub log_seconds: f64,
}

/// Tidy scaling table plus fits recomputed from the benchmark CSV.
pub fn write_scaling(bench_csv: &Path, out: &Path) -> Result<BenchFits, CliError> {
    let records = read_csv(bench_csv)?;
    let mut w = csv::Writer::from_path(out).map_err(|e| CliError::io(out.display(), e))?;
    for r in records.iter().filter(|r| r.status == Status::Ok) {
        let Some(s) = r.seconds else { continue };
        let row = ScalingRow {
            backend: r.backend.to_string(),
            variant: format!("{:?}", r.variant).to_lowercase(),
            n_atoms: r.n_atoms,
            qubits: r.qubits,
            seconds: s,
            log_seconds: s.ln(),
        };
        w.serialize(&row).map_err(|e| CliError::io(out.display(), e))?;
    }
    w.flush().map_err(|e| CliError::io(out.display(), e))?;
    Ok(fit(&records))
}
