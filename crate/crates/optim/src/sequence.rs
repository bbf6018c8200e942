//! Additive-recurrence low-discrepancy points in the unit cube.

use rand::Rng;

/// Kronecker sequence with the generalized golden ratio as generator and a
/// random offset, so repeated runs with different seeds cover different
/// points while staying evenly spread.
#[derive(Debug, Clone)]
pub struct Kronecker {
    alpha: Vec<f64>,
    offset: Vec<f64>,
}

impl Kronecker {
    pub fn new(dim: usize, rng: &mut impl Rng) -> Kronecker {
        // unique positive root of x^(d+1) = x + 1
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dim as f64 + 1.0));
        }
        let alpha = (1..=dim).map(|i| phi.powi(-(i as i32)).fract()).collect();
        let offset = (0..dim).map(|_| rng.gen::<f64>()).collect();
        Kronecker { alpha, offset }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.alpha
            .iter()
            .zip(&self.offset)
            .map(|(a, o)| (o + k as f64 * a).fract())
            .collect()
    }
}
