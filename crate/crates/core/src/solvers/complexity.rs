use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SlpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Blp,
    Slp,
    SlpDnet,
    SlpDnetStrict,
    RobustBlp,
    RobustSlp,
    RobustSlpDnet,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Blp,
        Scheme::Slp,
        Scheme::SlpDnet,
        Scheme::SlpDnetStrict,
        Scheme::RobustBlp,
        Scheme::RobustSlp,
        Scheme::RobustSlpDnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Blp => "BLP",
            Scheme::Slp => "SLP",
            Scheme::SlpDnet => "SLP-DNet",
            Scheme::SlpDnetStrict => "SLP-DNet-strict",
            Scheme::RobustBlp => "Robust-BLP",
            Scheme::RobustSlp => "Robust-SLP",
            Scheme::RobustSlpDnet => "Robust-SLP-DNet",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = SlpError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| SlpError::UnknownScheme(s.to_string()))
    }
}

/// Closed-form arithmetic-operation count of one scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityModel {
    pub scheme: Scheme,
    /// Listed complexity order for N_t = K = n.
    pub order: f64,
}

impl ComplexityModel {
    pub fn new(scheme: Scheme) -> Self {
        let order = match scheme {
            Scheme::SlpDnet | Scheme::SlpDnetStrict | Scheme::RobustSlpDnet => 3.0,
            Scheme::RobustBlp => 7.5,
            _ => 6.5,
        };
        Self { scheme, order }
    }

    pub fn count(&self, nt: usize, k: usize, epsilon: f64) -> Result<f64> {
        if nt == 0 || k == 0 {
            return Err(SlpError::ZeroDimension { what: "N_t and K" });
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(SlpError::InvalidParameter { name: "epsilon", value: epsilon });
        }
        let (n, kk) = (nt as f64, k as f64);
        let m = 2.0 * n * kk;
        let log = (1.0 / epsilon).ln();
        let q = 2.0 * n + 1.0;
        Ok(match self.scheme {
            Scheme::Blp => {
                (4.0 * n + kk + 2.0).sqrt() * (m * q + m * q * q + m * (kk + 1.0).powi(2) + m.powi(3)) * log
            }
            Scheme::Slp => q.sqrt() * (m * q + m * q * q + m.powi(3)) * log,
            Scheme::SlpDnet => 4.0 * kk * kk * n + 42.0 * kk * kk + 48.0 * kk * n + 512.0 * kk + 2.0,
            Scheme::SlpDnetStrict => 4.0 * kk * kk * n + 39.0 * kk * kk + 46.0 * kk * n + 512.0 * kk + 2.0,
            Scheme::RobustBlp => {
                (2.0 * kk * q).sqrt() * (m * kk * q.powi(3) + m * m * kk * q * q + m.powi(3)) * log
            }
            Scheme::RobustSlp => (2.0 * q).sqrt() * (2.0 * m * kk * q * q + m.powi(3)) * log,
            Scheme::RobustSlpDnet => 16.0 * kk * n * n + 42.0 * kk * kk + 48.0 * kk * n + 512.0 * kk,
        })
    }
}

pub fn complexity_count(scheme: &str, nt: usize, k: usize, epsilon: f64) -> Result<f64> {
    ComplexityModel::new(scheme.parse()?).count(nt, k, epsilon)
}
