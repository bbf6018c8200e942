//! Gaussian-process regression with a Matérn-5/2 kernel.
//!
//! Inputs are expected in the unit cube and targets are standardized before
//! fitting. Hyperparameters come from a fixed grid, picking the point with the
//! largest log marginal likelihood, so a fit is a deterministic function of its
//! data.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    /// Lengthscales to try, as multiples of `sqrt(dim)`.
    pub lengthscales: Vec<f64>,
    /// Observation-noise variances to try (standardized units).
    pub noise: Vec<f64>,
    /// Signal variances to try (standardized units).
    pub signal: Vec<f64>,
    pub noise_floor: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            lengthscales: (0..12).map(|k| 0.05 * 40f64.powf(k as f64 / 11.0)).collect(),
            noise: vec![1e-6, 1e-4, 1e-3, 1e-2, 0.03, 0.1, 0.3],
            signal: vec![0.5, 1.0, 2.0],
            noise_floor: 1e-6,
        }
    }
}

impl GpConfig {
    /// Grid reduced to a single noise level at the floor.
    pub fn noiseless() -> Self {
        GpConfig {
            noise: vec![1e-6],
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpModel {
    xs: Vec<Vec<f64>>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub log_likelihood: f64,
}

fn matern52(r: f64, ell: f64, s2: f64) -> f64 {
    let a = 5f64.sqrt() * r / ell;
    s2 * (1.0 + a + a * a / 3.0) * (-a).exp()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Cholesky with jitter escalating up to 1e-6 when the matrix is numerically
/// indefinite.
fn factor(k: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    for jitter in [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6] {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            return Some(c.unpack());
        }
    }
    None
}

impl GpModel {
    /// Panics on empty input or ragged dimensions.
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], cfg: &GpConfig) -> GpModel {
        assert!(!xs.is_empty() && xs.len() == ys.len(), "need matching nonempty data");
        let dim = xs[0].len();
        assert!(xs.iter().all(|x| x.len() == dim), "ragged inputs");
        let n = xs.len();
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - y_mean) / y_std));
        let dists = DMatrix::from_fn(n, n, |i, j| dist(&xs[i], &xs[j]));
        let scale = (dim.max(1) as f64).sqrt();

        let mut best: Option<GpModel> = None;
        for &l in &cfg.lengthscales {
            let ell = l * scale;
            for &s2 in &cfg.signal {
                for &noise in &cfg.noise {
                    let noise = noise.max(cfg.noise_floor);
                    let mut k = dists.map(|r| matern52(r, ell, s2));
                    for i in 0..n {
                        k[(i, i)] += noise;
                    }
                    let Some(chol) = factor(&k) else { continue };
                    let z = chol.solve_lower_triangular(&y).expect("nonsingular factor");
                    let alpha = chol
                        .transpose()
                        .solve_upper_triangular(&z)
                        .expect("nonsingular factor");
                    let logdet: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
                    let ll = -0.5 * z.norm_squared()
                        - logdet
                        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
                    if best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
                        best = Some(GpModel {
                            xs: xs.to_vec(),
                            chol,
                            alpha,
                            lengthscale: ell,
                            signal_variance: s2,
                            noise_variance: noise,
                            y_mean,
                            y_std,
                            log_likelihood: ll,
                        });
                    }
                }
            }
        }
        best.expect("covariance factorization failed for every grid point")
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Posterior mean and variance of the latent function, standardized units.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let n = self.xs.len();
        let ks = DVector::from_iterator(
            n,
            self.xs
                .iter()
                .map(|xi| matern52(dist(xi, x), self.lengthscale, self.signal_variance)),
        );
        let mu = ks.dot(&self.alpha);
        let v = self.chol.solve_lower_triangular(&ks).expect("nonsingular factor");
        (mu, (self.signal_variance - v.norm_squared()).max(0.0))
    }

    /// Posterior mean and variance in the units of the training targets.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (mu, var) = self.posterior(x);
        (self.y_mean + self.y_std * mu, var * self.y_std * self.y_std)
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }
}
