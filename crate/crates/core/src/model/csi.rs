use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::complex_gaussian;
use crate::error::{Result, SlpError};

/// Bounded CSI error: ē ~ CN(0, ς²/N_t · I), projected onto ‖ē‖ ≤ ς.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorModel {
    pub error_bound: f64,
}

impl CsiErrorModel {
    pub fn new(error_bound: f64) -> Result<Self> {
        if !(error_bound >= 0.0 && error_bound.is_finite()) {
            return Err(SlpError::InvalidParameter {
                name: "error bound",
                value: error_bound,
            });
        }
        Ok(Self { error_bound })
    }

    pub fn draw_error<R: Rng>(&self, nt: usize, rng: &mut R) -> Vec<Complex64> {
        if self.error_bound == 0.0 {
            return vec![Complex64::new(0.0, 0.0); nt];
        }
        let var = self.error_bound * self.error_bound / nt as f64;
        let mut e: Vec<Complex64> = (0..nt).map(|_| complex_gaussian(rng, var)).collect();
        let norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > self.error_bound {
            let scale = self.error_bound / norm;
            for z in &mut e {
                *z *= scale;
            }
        }
        e
    }

    pub fn perturb<R: Rng>(&self, h: &[Complex64], rng: &mut R) -> Vec<Complex64> {
        if self.error_bound == 0.0 {
            return h.to_vec();
        }
        let e = self.draw_error(h.len(), rng);
        h.iter().zip(e).map(|(a, b)| a + b).collect()
    }
}

/// ĥ = h̄ + ē under [`CsiErrorModel`].
pub fn apply_csi_error(h_bar: &[Complex64], error_bound: f64, seed: u64) -> Result<Vec<Complex64>> {
    let model = CsiErrorModel::new(error_bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model.perturb(h_bar, &mut rng))
}

/// CDF of ‖ē‖ under [`CsiErrorModel`]; the mass beyond the boundary sits at ς.
pub fn truncated_norm_cdf(r: f64, error_bound: f64, nt: usize) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= error_bound {
        return 1.0;
    }
    // ‖ē‖² is Gamma(N_t, ς²/N_t).
    let x = r * r * nt as f64 / (error_bound * error_bound);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..nt {
        term *= x / k as f64;
        sum += term;
    }
    1.0 - (-x).exp() * sum
}
