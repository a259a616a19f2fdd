use nalgebra::DVector;
use num_complex::Complex64;

use super::{ChannelMatrix, ModulationSpec, Rotation, Swap};
use crate::error::{Result, SlpError};

/// Per-symbol SLP problem data.
#[derive(Debug, Clone, PartialEq)]
pub struct SlpInstance {
    /// Rotated stacked channels Λ_i, each of length 2N_t.
    pub channels: Vec<DVector<f64>>,
    /// Linear SINR targets Γ_i.
    pub targets: Vec<f64>,
    pub noise: f64,
    pub modulation: ModulationSpec,
    /// CSI error radius ς_i per user; zero for the nominal problem.
    pub error_bounds: Vec<f64>,
}

impl SlpInstance {
    pub fn new(
        channels: Vec<DVector<f64>>,
        targets: Vec<f64>,
        noise: f64,
        modulation: ModulationSpec,
    ) -> Result<Self> {
        let k = channels.len();
        if k == 0 {
            return Err(SlpError::ZeroDimension { what: "K" });
        }
        let dim = channels[0].len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(SlpError::OddLength(dim));
        }
        for c in &channels {
            if c.len() != dim {
                return Err(SlpError::DimensionMismatch {
                    context: "stacked channel",
                    expected: dim,
                    found: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(SlpError::InvalidParameter {
                    name: "channel entry",
                    value: f64::NAN,
                });
            }
        }
        if targets.len() != k {
            return Err(SlpError::DimensionMismatch {
                context: "SINR targets",
                expected: k,
                found: targets.len(),
            });
        }
        if let Some(&g) = targets.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(SlpError::InvalidParameter { name: "SINR target", value: g });
        }
        if !(noise > 0.0 && noise.is_finite()) {
            return Err(SlpError::InvalidParameter { name: "noise power", value: noise });
        }
        Ok(Self {
            channels,
            targets,
            noise,
            modulation,
            error_bounds: vec![0.0; k],
        })
    }

    /// Builds the instance from a complex channel and the transmitted symbols.
    pub fn from_channel(
        h: &ChannelMatrix,
        symbols: &[Complex64],
        targets: Vec<f64>,
        noise: f64,
        modulation: ModulationSpec,
        rotation: Rotation,
    ) -> Result<Self> {
        if symbols.len() != h.n_users() {
            return Err(SlpError::DimensionMismatch {
                context: "symbol vector",
                expected: h.n_users(),
                found: symbols.len(),
            });
        }
        let channels = (0..h.n_users())
            .map(|i| rotation.apply(h.row(i), symbols, i).map(|r| r.lambda))
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels, targets, noise, modulation)
    }

    pub fn with_error_bound(mut self, error_bound: f64) -> Result<Self> {
        if !(error_bound >= 0.0) {
            return Err(SlpError::InvalidParameter {
                name: "error bound",
                value: error_bound,
            });
        }
        self.error_bounds = vec![error_bound; self.channels.len()];
        Ok(self)
    }

    pub fn n_users(&self) -> usize {
        self.channels.len()
    }

    pub fn dim(&self) -> usize {
        self.channels[0].len()
    }

    pub fn n_antennas(&self) -> usize {
        self.dim() / 2
    }

    pub fn swap(&self) -> Swap {
        Swap::new(self.n_antennas()).unwrap()
    }

    /// √(Γ_i v0).
    pub fn margin(&self, i: usize) -> f64 {
        (self.targets[i] * self.noise).sqrt()
    }

    pub fn tan_phi(&self) -> f64 {
        self.modulation.tan_margin()
    }

    /// ΠᵀΛ_i.
    pub fn quadrature(&self, i: usize) -> DVector<f64> {
        self.swap().apply_transpose(&self.channels[i])
    }

    /// ς_i √(1 + tan²φ).
    pub fn effective_bound(&self, i: usize) -> f64 {
        let t = self.tan_phi();
        self.error_bounds[i] * (1.0 + t * t).sqrt()
    }

    pub fn is_robust(&self) -> bool {
        self.error_bounds.iter().any(|&e| e > 0.0)
    }

    /// Equivalent instance with every margin equal to one.
    pub fn normalized(&self) -> Self {
        let k = self.n_users();
        let mut channels = Vec::with_capacity(k);
        let mut error_bounds = Vec::with_capacity(k);
        for i in 0..k {
            let c = self.margin(i);
            channels.push(&self.channels[i] / c);
            error_bounds.push(self.error_bounds[i] / c);
        }
        Self {
            channels,
            targets: vec![1.0; k],
            noise: 1.0,
            modulation: self.modulation,
            error_bounds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let q = ModulationSpec::qpsk();
        let l = vec![DVector::from_vec(vec![1.0, 0.0])];
        assert!(SlpInstance::new(l.clone(), vec![0.0], 1.0, q).is_err());
        assert!(SlpInstance::new(l.clone(), vec![1.0], 0.0, q).is_err());
        assert!(SlpInstance::new(vec![DVector::from_vec(vec![f64::NAN, 0.0])], vec![1.0], 1.0, q).is_err());
        assert!(SlpInstance::new(l, vec![1.0], 1.0, q).is_ok());
    }

    #[test]
    fn normalized_margins() {
        let q = ModulationSpec::qpsk();
        let l = vec![DVector::from_vec(vec![2.0, 1.0]), DVector::from_vec(vec![0.0, 3.0])];
        let inst = SlpInstance::new(l, vec![4.0, 9.0], 1.0, q)
            .unwrap()
            .with_error_bound(0.3)
            .unwrap();
        let n = inst.normalized();
        assert_eq!(n.margin(0), 1.0);
        assert_eq!(n.channels[0].as_slice(), &[1.0, 0.5]);
        assert_eq!(n.channels[1].as_slice(), &[0.0, 1.0]);
        assert!((n.error_bounds[1] - 0.1).abs() < 1e-15);
    }
}
