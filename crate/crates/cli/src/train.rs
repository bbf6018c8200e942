//! Optimizer loop over the sampled Validity×Uniqueness objective.
//!
//! Every evaluation is appended to `history.jsonl` as soon as it finishes, so
//! an interrupted run can be resumed. Resuming replays the saved rows through
//! the optimizer, which asks for exactly the same points again because both
//! optimizers are deterministic given the seed, and continues live afterwards.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sqmg_optim::{cobyla_minimize, BayesOpt, CobylaError};

use crate::config::{OptimizerKind, RunConfig};
use crate::pipeline::Pipeline;
use crate::{create_dir, derive_seed, write_json, CliError};

pub const HISTORY_FILE: &str = "history.jsonl";
pub const TIMING_FILE: &str = "history.timing.jsonl";
pub const BEST_FILE: &str = "best_params.json";

/// Seeds are derived per purpose so that the evaluation stream does not
/// depend on how the initial point was drawn.
const STREAM_EVAL: u64 = 1;
const STREAM_INIT: u64 = 2;

/// Surrogate fits get unwieldy past this many parameters.
const BO_COMFORT_DIM: usize = 120;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub validity: f64,
    pub uniqueness: f64,
    pub seed: u64,
    pub running_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub n_atoms: usize,
    pub iteration: usize,
    pub objective: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRow>,
    pub best: BestParams,
    pub output_dir: PathBuf,
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>, CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path.display(), e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path.display(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: HistoryRow = serde_json::from_str(&line)
            .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

struct Recorder {
    pipeline: Pipeline,
    replay: Vec<HistoryRow>,
    rows: Vec<HistoryRow>,
    history: BufWriter<File>,
    timing: BufWriter<File>,
    budget: usize,
}

impl Recorder {
    /// Evaluates (or replays) the next point and records it.
    fn eval(&mut self, x: &[f64], seed: u64) -> Result<f64, CliError> {
        let t = self.rows.len();
        if t >= self.budget {
            return Err(CliError::Config("evaluation budget exhausted".into()));
        }
        let start = Instant::now();
        let (y, validity, uniqueness) = match self.replay.get(t) {
            Some(old) => {
                if old.x != x || old.seed != seed {
                    return Err(CliError::Config(format!(
                        "cannot resume: evaluation {t} of the saved history was made with a \
                         different configuration"
                    )));
                }
                (old.y, old.validity, old.uniqueness)
            }
            None => {
                let m = self.pipeline.evaluate(x, seed)?;
                (m.objective, m.validity, m.uniqueness)
            }
        };
        let running_max = self.rows.last().map_or(y, |r| r.running_max.max(y));
        let row = HistoryRow {
            iteration: t,
            x: x.to_vec(),
            y,
            validity,
            uniqueness,
            seed,
            running_max,
        };
        if t >= self.replay.len() {
            let line = serde_json::to_string(&row).expect("serializable");
            writeln!(self.history, "{line}").map_err(|e| CliError::io(HISTORY_FILE, e))?;
            self.history.flush().map_err(|e| CliError::io(HISTORY_FILE, e))?;
            writeln!(
                self.timing,
                "{{\"iteration\":{t},\"wall_seconds\":{}}}",
                start.elapsed().as_secs_f64()
            )
            .map_err(|e| CliError::io(TIMING_FILE, e))?;
            self.timing.flush().map_err(|e| CliError::io(TIMING_FILE, e))?;
        }
        self.rows.push(row);
        Ok(y)
    }
}

/// Runs the configured optimizer for `optimizer.evaluations` evaluations
/// (COBYLA may stop earlier once its radius reaches `rhoend`). Writes
/// `history.jsonl`, `history.timing.jsonl`, `best_params.json` and the
/// effective `config.toml` under `output_dir`.
pub fn run_train(cfg: &RunConfig, resume: bool) -> Result<TrainOutcome, CliError> {
    let budget = cfg.optimizer.evaluations;
    if budget == 0 {
        return Err(CliError::Config("empty budget: optimizer.evaluations is 0".into()));
    }
    let pipeline = Pipeline::new(cfg)?;
    let dim = pipeline.n_params();
    if dim == 0 {
        return Err(CliError::Config("the mode leaves no free parameters".into()));
    }
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    let hist_path = dir.join(HISTORY_FILE);
    let replay = if resume && hist_path.exists() {
        read_history(&hist_path)?
    } else {
        Vec::new()
    };
    if replay.len() > budget {
        return Err(CliError::Config(format!(
            "saved history has {} rows, more than the budget of {budget}",
            replay.len()
        )));
    }
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| CliError::io(dir.display(), e))?;
    let open = |name: &str, append: bool| {
        let p = dir.join(name);
        std::fs::OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&p)
            .map(BufWriter::new)
            .map_err(|e| CliError::io(p.display(), e))
    };
    let resuming = !replay.is_empty();
    let mut rec = Recorder {
        pipeline,
        replay,
        rows: Vec::new(),
        history: open(HISTORY_FILE, resuming)?,
        timing: open(TIMING_FILE, resuming)?,
        budget,
    };

    let bounds = vec![(0.0, TAU); dim];
    match cfg.optimizer.kind {
        OptimizerKind::Bo => {
            if dim > BO_COMFORT_DIM {
                eprintln!(
                    "warning: {dim} parameters is beyond the range where the GP surrogate is \
                     reliable (about {BO_COMFORT_DIM})"
                );
            }
            let mut bo = BayesOpt::new(bounds, cfg.optimizer.bo_config(), cfg.seed);
            for t in 0..budget {
                let x = bo.ask();
                let y = rec.eval(&x, derive_seed(cfg.seed, STREAM_EVAL, t as u64))?;
                bo.tell(x, y);
            }
        }
        OptimizerKind::Cobyla => {
            let mut init = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT, 0));
            let x0: Vec<f64> = (0..dim).map(|_| init.gen_range(0.0..TAU)).collect();
            // one seed for the whole run keeps the linear models consistent
            let seed = derive_seed(cfg.seed, STREAM_EVAL, 0);
            let mut failure = None;
            let result = cobyla_minimize(
                |x| match rec.eval(x, seed) {
                    Ok(y) => -y,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                },
                &x0,
                &bounds,
                cfg.optimizer.rhobeg,
                cfg.optimizer.rhoend,
                budget,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            result.map_err(|e| match e {
                CobylaError::InvalidArgument(m) => CliError::Config(format!("optimizer: {m}")),
                e @ CobylaError::NonFinite { .. } => CliError::Numerical(e.to_string()),
            })?;
        }
    }

    let best_row = rec
        .rows
        .iter()
        .fold(&rec.rows[0], |b, r| if r.y > b.y { r } else { b });
    let best = BestParams {
        n_atoms: cfg.n_atoms,
        iteration: best_row.iteration,
        objective: best_row.y,
        params: best_row.x.clone(),
    };
    write_json(&dir.join(BEST_FILE), &best)?;
    Ok(TrainOutcome {
        history: rec.rows,
        best,
        output_dir: dir,
    })
}
