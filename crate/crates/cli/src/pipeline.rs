//! Build once, then sample and score parameter vectors.

use sqmg_core::ansatz::ParamLayout;
use sqmg_core::batch::SampleBatch;
use sqmg_core::circuit::Circuit;
use sqmg_core::molgraph::{Decoder, ValenceTable};
use sqmg_core::sim::dense::DenseSimulator;
use sqmg_core::sim::mps::MpsSimulator;

use crate::config::{Backend, RunConfig};
use crate::metrics::{compute_metrics, decode_records, DecodedShot, Metrics};
use crate::CliError;

pub struct Pipeline {
    pub config: RunConfig,
    pub circuit: Circuit,
    pub layout: ParamLayout,
    pub decoder: Decoder,
    pub valence: ValenceTable,
}

impl Pipeline {
    pub fn new(config: &RunConfig) -> Result<Pipeline, CliError> {
        config.validate()?;
        config.check_capacity()?;
        let (circuit, layout) = config
            .ansatz_spec()?
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Pipeline {
            config: config.clone(),
            circuit,
            layout,
            decoder: config.decoder()?,
            valence: config.valence_table()?,
        })
    }

    pub fn n_params(&self) -> usize {
        self.layout.total
    }

    pub fn check_params(&self, params: &[f64]) -> Result<(), CliError> {
        if params.len() != self.n_params() {
            return Err(CliError::Config(format!(
                "{} parameters given but the {:?} layout for N={} with {} free sites needs {}",
                params.len(),
                self.config.mode_spec()?.mode,
                self.config.n_atoms,
                self.config.mode_spec()?.free_sites.len(),
                self.n_params()
            )));
        }
        if let Some(v) = params.iter().find(|v| !v.is_finite()) {
            return Err(CliError::Numerical(format!("non-finite parameter {v}")));
        }
        Ok(())
    }

    pub fn sample(&self, params: &[f64], shots: usize, seed: u64) -> Result<SampleBatch, CliError> {
        self.check_params(params)?;
        let batch = match self.config.backend {
            Backend::Dense => DenseSimulator::default().run_shots(&self.circuit, params, shots, seed)?,
            Backend::Mps => {
                let sim = MpsSimulator {
                    chi_max: self.config.chi_max,
                    threshold: self.config.threshold,
                    ..MpsSimulator::default()
                };
                sim.run_shots(&self.circuit, params, shots, seed)?.0
            }
        };
        Ok(batch)
    }

    pub fn decode(&self, batch: &SampleBatch) -> Result<Vec<DecodedShot>, CliError> {
        if batch.n_atoms != self.config.n_atoms {
            return Err(CliError::Config(format!(
                "samples have N={} but the config says N={}",
                batch.n_atoms, self.config.n_atoms
            )));
        }
        decode_records(&batch.records, &self.decoder, &self.valence)
    }

    /// One objective evaluation: `config.shots` shots scored.
    pub fn evaluate(&self, params: &[f64], seed: u64) -> Result<Metrics, CliError> {
        let batch = self.sample(params, self.config.shots, seed)?;
        compute_metrics(&self.decode(&batch)?)
    }
}
