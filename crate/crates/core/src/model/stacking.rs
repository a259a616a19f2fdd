use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Result, SlpError};

/// The real swap operator Π = [[0, −I], [I, 0]] acting on stacked vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Swap {
    nt: usize,
}

impl Swap {
    pub fn new(nt: usize) -> Result<Self> {
        if nt == 0 {
            return Err(SlpError::ZeroDimension { what: "N_t" });
        }
        Ok(Self { nt })
    }

    pub fn dim(&self) -> usize {
        2 * self.nt
    }

    pub fn apply(&self, w: &DVector<f64>) -> DVector<f64> {
        let n = self.nt;
        DVector::from_fn(2 * n, |r, _| if r < n { -w[r + n] } else { w[r - n] })
    }

    pub fn apply_transpose(&self, w: &DVector<f64>) -> DVector<f64> {
        let n = self.nt;
        DVector::from_fn(2 * n, |r, _| if r < n { w[r + n] } else { -w[r - n] })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.nt;
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            m[(r, r + n)] = -1.0;
            m[(r + n, r)] = 1.0;
        }
        m
    }
}

/// Stacks a complex vector as [Re; Im].
pub fn stack_parts(h: &[Complex64]) -> DVector<f64> {
    let n = h.len();
    DVector::from_fn(2 * n, |r, _| if r < n { h[r].re } else { h[r - n].im })
}

/// Real stacking of a rotated user channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedChannel {
    pub lambda: DVector<f64>,
    pub swap: Swap,
}

impl RotatedChannel {
    pub fn from_complex(h_hat: &[Complex64]) -> Result<Self> {
        Ok(Self {
            lambda: stack_parts(h_hat),
            swap: Swap::new(h_hat.len())?,
        })
    }

    /// ΠᵀΛ, the direction whose inner product gives the imaginary part.
    pub fn quadrature(&self) -> DVector<f64> {
        self.swap.apply_transpose(&self.lambda)
    }
}

fn check_unit(symbols: &[Complex64]) -> Result<()> {
    for (index, s) in symbols.iter().enumerate() {
        let modulus = s.norm();
        if (modulus - 1.0).abs() > 1e-9 {
            return Err(SlpError::NonUnitSymbol { index, modulus });
        }
    }
    Ok(())
}

/// ĥ_i = h_i Σ_k e^{j(φ_k − φ_i)} stacked as [Re; Im].
pub fn rotate_and_stack(h_i: &[Complex64], symbols: &[Complex64], user: usize) -> Result<RotatedChannel> {
    check_unit(symbols)?;
    if user >= symbols.len() {
        return Err(SlpError::DimensionMismatch {
            context: "user index",
            expected: symbols.len(),
            found: user,
        });
    }
    let factor: Complex64 = symbols.iter().map(|s| s * symbols[user].conj()).sum();
    let h_hat: Vec<Complex64> = h_i.iter().map(|h| h * factor).collect();
    RotatedChannel::from_complex(&h_hat)
}

/// ĥ_i = h_i s_i^*, the channel normalized by the user's own symbol.
pub fn rotate_per_user(h_i: &[Complex64], symbol: Complex64) -> Result<RotatedChannel> {
    check_unit(&[symbol])?;
    let h_hat: Vec<Complex64> = h_i.iter().map(|h| h * symbol.conj()).collect();
    RotatedChannel::from_complex(&h_hat)
}

/// How the channel rows are rotated by the symbol vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rotation {
    /// Each row multiplied by the conjugate of its own symbol.
    #[default]
    PerUser,
    /// Each row multiplied by Σ_k s_k s_i^*.
    SymbolSum,
}

impl Rotation {
    pub fn apply(self, h_i: &[Complex64], symbols: &[Complex64], user: usize) -> Result<RotatedChannel> {
        match self {
            Rotation::PerUser => rotate_per_user(h_i, symbols[user]),
            Rotation::SymbolSum => rotate_and_stack(h_i, symbols, user),
        }
    }
}

/// w1 = [w_R; −w_I].
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPrecoder {
    pub w1: DVector<f64>,
}

impl StackedPrecoder {
    pub fn new(w1: DVector<f64>) -> Result<Self> {
        if !w1.len().is_multiple_of(2) || w1.is_empty() {
            return Err(SlpError::OddLength(w1.len()));
        }
        Ok(Self { w1 })
    }

    pub fn from_complex(w: &[Complex64]) -> Self {
        Self { w1: stack(w) }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        unstack(self.w1.as_slice()).expect("even length by construction")
    }

    /// w2 = [w_I; w_R] = Π w1.
    pub fn w2(&self) -> DVector<f64> {
        Swap::new(self.w1.len() / 2).unwrap().apply(&self.w1)
    }

    pub fn power(&self) -> f64 {
        self.w1.norm_squared()
    }
}

pub fn stack(w: &[Complex64]) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |r, _| if r < n { w[r].re } else { -w[r - n].im })
}

pub fn unstack(w1: &[f64]) -> Result<Vec<Complex64>> {
    if !w1.len().is_multiple_of(2) {
        return Err(SlpError::OddLength(w1.len()));
    }
    let n = w1.len() / 2;
    Ok((0..n).map(|r| Complex64::new(w1[r], -w1[r + n])).collect())
}

/// Worst-case CSI error ball of radius ς with Q1 = Π − I tanφ, Q2 = Π + I tanφ.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustExtension {
    pub error_bound: f64,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
}

impl RobustExtension {
    pub fn new(nt: usize, tan_phi: f64, error_bound: f64) -> Result<Self> {
        if !(error_bound >= 0.0) {
            return Err(SlpError::InvalidParameter {
                name: "error bound",
                value: error_bound,
            });
        }
        let pi = Swap::new(nt)?.matrix();
        let eye = DMatrix::<f64>::identity(2 * nt, 2 * nt);
        Ok(Self {
            error_bound,
            q1: &pi - &eye * tan_phi,
            q2: &pi + &eye * tan_phi,
        })
    }

    /// ς·‖Q_j w‖ / ‖w‖, identical for both Q_j.
    pub fn effective_bound(&self, tan_phi: f64) -> f64 {
        self.error_bound * (1.0 + tan_phi * tan_phi).sqrt()
    }
}
