//! Optimization-based reference precoders and their complexity models.

mod barrier;
mod blp;
mod complexity;
mod forward_backward;
mod slp;

use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;

pub use blp::{blp_feasibility_bound, sinr, solve_blp};
pub use complexity::{complexity_count, ComplexityModel, Scheme};
pub use forward_backward::{deficit, deficit_gradient, forward_backward, prox_sweep, SweepOutcome};
pub use slp::{constraint_residuals, rescale_to_feasible, solve_slp, transmit_power};

use crate::error::{Result, SlpError};
use crate::model::StackedPrecoder;
use crate::prox::BarrierKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Target duality gap ε, relative to max(1, |objective|).
    pub epsilon: f64,
    /// Barrier weight multiplier per outer stage.
    pub decrease: f64,
    /// Initial barrier weight, in units of max(1, |f(x0)|/ν).
    pub mu0: f64,
    pub max_outer: usize,
    pub max_newton_per_stage: usize,
    pub max_backtracks: usize,
    /// Newton decrement threshold, relative to 1 + |objective|.
    pub centering_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            decrease: 0.1,
            mu0: 1.0,
            max_outer: 60,
            max_newton_per_stage: 200,
            max_backtracks: 60,
            centering_tol: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(SlpError::InvalidParameter { name: "epsilon", value: self.epsilon });
        }
        if !(self.decrease > 0.0 && self.decrease < 1.0) {
            return Err(SlpError::InvalidParameter { name: "barrier decrease", value: self.decrease });
        }
        if !(self.mu0 > 0.0) {
            return Err(SlpError::InvalidParameter { name: "mu0", value: self.mu0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlpKind {
    Relaxed,
    Strict,
    Robust,
}

impl SlpKind {
    pub fn barrier(self) -> BarrierKind {
        match self {
            SlpKind::Relaxed => BarrierKind::RelaxedHyperslab,
            SlpKind::Strict => BarrierKind::StrictAffine,
            SlpKind::Robust => BarrierKind::RobustBall,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SlpKind::Relaxed => "relaxed",
            SlpKind::Strict => "strict",
            SlpKind::Robust => "robust",
        }
    }
}

impl FromStr for SlpKind {
    type Err = SlpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relaxed" => Ok(SlpKind::Relaxed),
            "strict" => Ok(SlpKind::Strict),
            "robust" => Ok(SlpKind::Robust),
            other => Err(SlpError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Iteration budget exhausted; the precoder is feasible but not certified.
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Precoder {
    Stacked(StackedPrecoder),
    /// One complex beamformer per user (block-level precoding).
    PerUser(Vec<Vec<Complex64>>),
}

/// Slack of one user's constraints: nonnegative `slack` means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSlack {
    pub slack: f64,
    /// Residual of the phase-alignment equality (strict kind only).
    pub equality: f64,
}

impl UserSlack {
    pub fn violation(&self) -> f64 {
        (-self.slack).max(0.0).max(self.equality.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub precoder: Option<Precoder>,
    /// Transmit power; +∞ when no precoder was found.
    pub power: f64,
    pub residuals: Vec<UserSlack>,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub wall_time: f64,
    pub status: SolveStatus,
    /// Objective after each outer stage.
    pub objective_trace: Vec<f64>,
}

impl SolveReport {
    pub(crate) fn infeasible(wall_time: f64, iterations: usize) -> Self {
        Self {
            precoder: None,
            power: f64::INFINITY,
            residuals: Vec::new(),
            iterations,
            outer_iterations: 0,
            wall_time,
            status: SolveStatus::Infeasible,
            objective_trace: Vec::new(),
        }
    }

    pub fn max_violation(&self) -> f64 {
        self.residuals.iter().map(UserSlack::violation).fold(0.0, f64::max)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.precoder.is_some() && self.max_violation() <= tol
    }

    pub fn stacked(&self) -> Option<&DVector<f64>> {
        match &self.precoder {
            Some(Precoder::Stacked(p)) => Some(&p.w1),
            _ => None,
        }
    }
}
