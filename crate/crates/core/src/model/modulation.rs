use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SlpError};

/// M-PSK constellation with its constructive-interference half-angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationSpec {
    order: u32,
    phase_margin: f64,
}

impl ModulationSpec {
    pub fn new(order: u32) -> Result<Self> {
        if order < 2 {
            return Err(SlpError::InvalidParameter {
                name: "modulation order",
                value: order as f64,
            });
        }
        Ok(Self {
            order,
            phase_margin: PI / order as f64,
        })
    }

    pub fn qpsk() -> Self {
        Self::new(4).unwrap()
    }

    pub fn psk8() -> Self {
        Self::new(8).unwrap()
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Half-angle φ = π/M of the CI sector.
    pub fn phase_margin(&self) -> f64 {
        self.phase_margin
    }

    pub fn tan_margin(&self) -> f64 {
        self.phase_margin.tan()
    }

    /// Constellation point m, placed at angle (2m+1)π/M so QPSK is {±1±j}/√2.
    pub fn symbol(&self, index: u32) -> Complex64 {
        let m = (index % self.order) as f64;
        Complex64::from_polar(1.0, (2.0 * m + 1.0) * PI / self.order as f64)
    }
}
