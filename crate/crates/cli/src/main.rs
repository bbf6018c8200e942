use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqmg_cli::config::RunConfig;
use sqmg_cli::{bench, generate, report, train, CliError};

/// Qubit-reuse molecular generation: train, sample, benchmark.
#[derive(Parser)]
#[command(name = "sqmg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set optimizer.kind=cobyla`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, CliError> {
        RunConfig::load(&self.config, &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize circuit parameters for Validity×Uniqueness.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Continue from an existing history.jsonl in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Sample molecules with fixed parameters.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// best_params.json from `train`, or a JSON array.
        #[arg(short, long)]
        params: PathBuf,
    },
    /// Time both backends over a range of molecule sizes.
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Decode a sample file (JSONL or binary) into molecules.
    Decode {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// samples.jsonl or a binary sample file
        #[arg(short, long)]
        input: PathBuf,
        /// Molecules JSONL; the summary goes next to it as <stem>.summary.json
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Export tidy CSV for plotting.
    Report {
        /// history.jsonl files; one trajectory per file.
        #[arg(long = "history")]
        histories: Vec<PathBuf>,
        /// bench.csv from `bench`.
        #[arg(long)]
        bench: Option<PathBuf>,
        /// Output directory for trajectories.csv / scaling.csv.
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { cfg, resume } => {
            let out = train::run_train(&cfg.load()?, resume)?;
            println!(
                "{} evaluations, best objective {:.4} at iteration {} → {}",
                out.history.len(),
                out.best.objective,
                out.best.iteration,
                out.output_dir.display()
            );
        }
        Command::Generate { cfg, params } => {
            let cfg = cfg.load()?;
            let out = generate::run_generate(&cfg, &generate::read_params(&params)?)?;
            let m = &out.summary.metrics;
            println!(
                "{} shots: validity {:.4}, uniqueness {:.4}, objective {:.4} → {}",
                m.shots,
                m.validity,
                m.uniqueness,
                m.objective,
                out.output_dir.display()
            );
        }
        Command::Bench { cfg } => {
            let out = bench::run_bench(&cfg.load()?, |r| {
                eprintln!(
                    "{:>5} {:>6} N={:<3} {}",
                    r.backend.to_string(),
                    format!("{:?}", r.variant).to_lowercase(),
                    r.n_atoms,
                    r.seconds.map_or("capacity_error".into(), |s| format!("{s:.4} s"))
                )
            })?;
            for f in &out.fits.fits {
                println!(
                    "{} {:?}: ×{:.2} per atom over {} sizes",
                    f.backend, f.variant, f.factor_per_atom, f.points
                );
            }
            for r in &out.fits.mps_reuse_ratios {
                println!("mps N={}: static/hybrid = {:.3}", r.n_atoms, r.static_over_hybrid);
            }
        }
        Command::Decode { cfg, input, output } => {
            let s = generate::run_decode(&cfg.load()?, &input, &output)?;
            println!(
                "{} shots decoded, validity {:.4}, uniqueness {:.4}",
                s.metrics.shots, s.metrics.validity, s.metrics.uniqueness
            );
        }
        Command::Report {
            histories,
            bench,
            out,
        } => {
            if histories.is_empty() && bench.is_none() {
                return Err(CliError::Config("nothing to report: pass --history and/or --bench".into()));
            }
            std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            if !histories.is_empty() {
                let refs: Vec<&std::path::Path> = histories.iter().map(|p| p.as_path()).collect();
                let n = report::write_trajectories(&refs, &out.join("trajectories.csv"))?;
                println!("{n} trajectory rows");
            }
            if let Some(b) = bench {
                let fits = report::write_scaling(&b, &out.join("scaling.csv"))?;
                let text = serde_json::to_string_pretty(&fits).expect("serializable");
                std::fs::write(out.join("fits.json"), text + "\n")
                    .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
