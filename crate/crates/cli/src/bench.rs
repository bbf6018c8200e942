//! Runtime scaling of both backends over N.
//!
//! Configurations run one after another in this process. Each row is the
//! median wall time of `repetitions` end-to-end runs (circuit build plus
//! sampling) with random parameters. Sizes that do not fit a backend become
//! `capacity_error` rows.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sqmg_core::ansatz::{qubit_count, AnsatzSpec, Variant};
use sqmg_core::sim::dense::DenseSimulator;
use sqmg_core::sim::mps::MpsSimulator;
use sqmg_core::sim::SimError;

use crate::config::{Backend, RunConfig};
use crate::{create_dir, derive_seed, write_json, CliError};

pub const BENCH_FILE: &str = "bench.csv";
pub const FITS_FILE: &str = "bench_fits.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    CapacityError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub backend: Backend,
    pub variant: Variant,
    pub n_atoms: usize,
    pub qubits: usize,
    pub shots: usize,
    /// Median over repetitions; empty for capacity rows.
    pub seconds: Option<f64>,
    /// Largest MPS bond produced, mps rows only.
    pub peak_bond_dim: Option<usize>,
    /// State-vector length, dense rows only.
    pub amplitudes: Option<u64>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub backend: Backend,
    pub variant: Variant,
    pub points: usize,
    /// Least-squares slope of ln(seconds) against N.
    pub log_slope: f64,
    /// `exp(log_slope)`: runtime growth per added atom.
    pub factor_per_atom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseRatio {
    pub n_atoms: usize,
    pub hybrid_seconds: f64,
    pub static_seconds: f64,
    /// static / hybrid; below 1 means the no-reuse circuit ran faster.
    pub static_over_hybrid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFits {
    pub fits: Vec<ScalingFit>,
    pub mps_reuse_ratios: Vec<ReuseRatio>,
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares slope of `y` on `x`; `None` below two points.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn fit(records: &[BenchRecord]) -> BenchFits {
    let mut fits = Vec::new();
    for backend in [Backend::Dense, Backend::Mps] {
        for variant in [Variant::Hybrid, Variant::Static] {
            let pts: Vec<(f64, f64)> = records
                .iter()
                .filter(|r| r.backend == backend && r.variant == variant && r.status == Status::Ok)
                .filter_map(|r| r.seconds.map(|s| (r.n_atoms as f64, s.ln())))
                .collect();
            let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().cloned().unzip();
            if let Some(slope) = ls_slope(&x, &y) {
                fits.push(ScalingFit {
                    backend,
                    variant,
                    points: x.len(),
                    log_slope: slope,
                    factor_per_atom: slope.exp(),
                });
            }
        }
    }
    let secs = |variant, n| {
        records
            .iter()
            .find(|r| r.backend == Backend::Mps && r.variant == variant && r.n_atoms == n)
            .and_then(|r| r.seconds)
    };
    let mut ns: Vec<usize> = records.iter().filter(|r| r.backend == Backend::Mps).map(|r| r.n_atoms).collect();
    ns.sort_unstable();
    ns.dedup();
    let mps_reuse_ratios = ns
        .into_iter()
        .filter_map(|n| {
            let (h, s) = (secs(Variant::Hybrid, n)?, secs(Variant::Static, n)?);
            Some(ReuseRatio {
                n_atoms: n,
                hybrid_seconds: h,
                static_seconds: s,
                static_over_hybrid: s / h,
            })
        })
        .collect();
    BenchFits {
        fits,
        mps_reuse_ratios,
    }
}

fn one_run(cfg: &RunConfig, backend: Backend, variant: Variant, n: usize, shots: usize, seed: u64) -> Result<(f64, Option<usize>), SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 7, n as u64));
    let start = Instant::now();
    let (circuit, layout) = AnsatzSpec::de_novo(n, variant, cfg.conditioning)
        .build()
        .map_err(|e| SimError::InvalidArgument(e.to_string()))?;
    let params: Vec<f64> = (0..layout.total).map(|_| rng.gen_range(0.0..TAU)).collect();
    let bond = match backend {
        Backend::Dense => {
            DenseSimulator::default().run_shots(&circuit, &params, shots, seed)?;
            None
        }
        Backend::Mps => {
            let sim = MpsSimulator {
                chi_max: cfg.chi_max,
                threshold: cfg.threshold,
                ..MpsSimulator::default()
            };
            Some(sim.run_shots(&circuit, &params, shots, seed)?.1.max_bond_dim())
        }
    };
    Ok((start.elapsed().as_secs_f64(), bond))
}

fn measure(cfg: &RunConfig, backend: Backend, variant: Variant, n: usize) -> Result<BenchRecord, CliError> {
    let qubits = qubit_count(n, variant).map_err(|e| CliError::Config(e.to_string()))?;
    let shots = match backend {
        Backend::Dense => cfg.bench.dense_shots,
        Backend::Mps => cfg.bench.shots,
    };
    let mut row = BenchRecord {
        backend,
        variant,
        n_atoms: n,
        qubits,
        shots,
        seconds: None,
        peak_bond_dim: None,
        amplitudes: None,
        status: Status::Ok,
    };
    let fits = match backend {
        Backend::Dense => DenseSimulator::default().check_capacity(qubits),
        Backend::Mps => MpsSimulator {
            chi_max: cfg.chi_max,
            ..MpsSimulator::default()
        }
        .check_capacity(qubits),
    };
    if let Err(SimError::Capacity(_)) = fits {
        row.status = Status::CapacityError;
        return Ok(row);
    }
    let mut times = Vec::with_capacity(cfg.bench.repetitions);
    for rep in 0..cfg.bench.repetitions {
        let seed = derive_seed(cfg.seed, 8, rep as u64);
        match one_run(cfg, backend, variant, n, shots, seed) {
            Ok((t, bond)) => {
                times.push(t);
                row.peak_bond_dim = row.peak_bond_dim.max(bond);
            }
            Err(SimError::Capacity(_)) => {
                row.status = Status::CapacityError;
                return Ok(row);
            }
            Err(e) => return Err(e.into()),
        }
    }
    row.seconds = Some(median(&mut times));
    if backend == Backend::Dense {
        row.amplitudes = Some(1u64 << qubits);
    }
    Ok(row)
}

pub fn write_csv(path: &Path, rows: &[BenchRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path.display(), e))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::io(path.display(), e))?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn read_csv(path: &Path) -> Result<Vec<BenchRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path.display(), e))?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub fits: BenchFits,
    pub output_dir: PathBuf,
}

/// Every (backend, variant, N) from `cfg.bench`, in order, written to
/// `bench.csv` and fitted into `bench_fits.json`. `progress` sees each row
/// as it completes.
pub fn run_bench(cfg: &RunConfig, mut progress: impl FnMut(&BenchRecord)) -> Result<BenchOutcome, CliError> {
    if cfg.bench.repetitions == 0 || cfg.bench.shots == 0 || cfg.bench.dense_shots == 0 {
        return Err(CliError::Config("bench repetitions and shot counts must be positive".into()));
    }
    let mut records = Vec::new();
    let plan = [
        (Backend::Dense, &cfg.bench.dense_variants, &cfg.bench.dense_atoms),
        (Backend::Mps, &cfg.bench.mps_variants, &cfg.bench.mps_atoms),
    ];
    for (backend, variants, sizes) in plan {
        for &variant in variants {
            for &n in sizes {
                let row = measure(cfg, backend, variant, n)?;
                progress(&row);
                records.push(row);
            }
        }
    }
    let dir = cfg.output_dir.clone();
    create_dir(&dir)?;
    write_csv(&dir.join(BENCH_FILE), &records)?;
    let fits = fit(&records);
    write_json(&dir.join(FITS_FILE), &fits)?;
    Ok(BenchOutcome {
        records,
        fits,
        output_dir: dir,
    })
}
