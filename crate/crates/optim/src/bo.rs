//! Bayesian optimization with expected improvement (maximization).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gp::{GpConfig, GpModel};
use crate::sequence::Kronecker;
use crate::ObjectiveSample;

/// Expected improvement over `f_best` for a maximization problem.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64, xi: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let n = Normal::standard();
    let gain = mu - f_best - xi;
    let z = gain / sigma;
    (gain * n.cdf(z) + sigma * n.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub candidates: usize,
    pub polish_steps: usize,
    /// Exploration margin, in standardized target units.
    pub xi: f64,
    /// Points taken from the low-discrepancy design before the surrogate is
    /// used.
    pub initial_points: usize,
    pub gp: GpConfig,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            candidates: 4096,
            polish_steps: 16,
            xi: 0.01,
            initial_points: 8,
            gp: GpConfig::default(),
        }
    }
}

fn to_unit(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, (l, h))| (v - l) / (h - l))
        .collect()
}

fn from_unit(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, (l, h))| l + v * (h - l)).collect()
}

/// Proposes the next point to evaluate.
///
/// With an empty history this is the first point of a randomly shifted
/// low-discrepancy sequence. Otherwise a GP is fitted to the history and EI is
/// maximized over `cfg.candidates` sequence points, followed by
/// `cfg.polish_steps` rounds of coordinate search from the best candidate.
pub fn bo_step(
    history: &[ObjectiveSample],
    bounds: &[(f64, f64)],
    rng: &mut impl Rng,
    cfg: &BoConfig,
) -> Vec<f64> {
    let dim = bounds.len();
    let seq = Kronecker::new(dim, rng);
    if history.is_empty() {
        return from_unit(&seq.point(0), bounds);
    }
    let xs: Vec<Vec<f64>> = history.iter().map(|s| to_unit(&s.x, bounds)).collect();
    let ys: Vec<f64> = history.iter().map(|s| s.y).collect();
    let gp = GpModel::fit(&xs, &ys, &cfg.gp);
    let f_best = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f_best = gp.standardize(f_best);
    let ei = |u: &[f64]| {
        let (mu, var) = gp.posterior(u);
        expected_improvement(mu, var.sqrt(), f_best, cfg.xi)
    };

    let mut best = seq.point(0);
    let mut best_ei = ei(&best);
    for k in 1..cfg.candidates {
        let p = seq.point(k);
        let v = ei(&p);
        if v > best_ei {
            best = p;
            best_ei = v;
        }
    }

    let mut h = 0.5 / (cfg.candidates as f64).powf(1.0 / dim as f64);
    for _ in 0..cfg.polish_steps {
        let mut moved = false;
        for i in 0..dim {
            for dir in [1.0, -1.0] {
                let mut p = best.clone();
                p[i] = (p[i] + dir * h).clamp(0.0, 1.0);
                let v = ei(&p);
                if v > best_ei {
                    best = p;
                    best_ei = v;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    from_unit(&best, bounds)
}

/// Ask/tell driver. Each proposal depends only on the seed and the history
/// told so far, so a run resumed from a saved history continues exactly as
/// the uninterrupted run would have.
#[derive(Debug, Clone)]
pub struct BayesOpt {
    bounds: Vec<(f64, f64)>,
    cfg: BoConfig,
    seed: u64,
    design: Kronecker,
    history: Vec<ObjectiveSample>,
}

impl BayesOpt {
    pub fn new(bounds: Vec<(f64, f64)>, cfg: BoConfig, seed: u64) -> BayesOpt {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let design = Kronecker::new(bounds.len(), &mut rng);
        BayesOpt {
            bounds,
            cfg,
            seed,
            design,
            history: Vec::new(),
        }
    }

    pub fn ask(&self) -> Vec<f64> {
        let t = self.history.len();
        if t < self.cfg.initial_points {
            return from_unit(&self.design.point(t), &self.bounds);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(t as u64);
        bo_step(&self.history, &self.bounds, &mut rng, &self.cfg)
    }

    pub fn tell(&mut self, x: Vec<f64>, y: f64) {
        self.history.push(ObjectiveSample { x, y });
    }

    pub fn history(&self) -> &[ObjectiveSample] {
        &self.history
    }

    pub fn best(&self) -> Option<&ObjectiveSample> {
        self.history
            .iter()
            .fold(None, |b: Option<&ObjectiveSample>, s| match b {
                Some(b) if b.y >= s.y => Some(b),
                _ => Some(s),
            })
    }
}
