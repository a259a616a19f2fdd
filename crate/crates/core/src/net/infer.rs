use super::model::{Depth, SlpDnet};
use crate::error::Result;
use crate::model::{SlpInstance, StackedPrecoder};
use crate::solvers::{constraint_residuals, rescale_to_feasible, transmit_power, UserSlack};

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub factor: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub precoders: Vec<StackedPrecoder>,
    pub power: Vec<f64>,
    pub residuals: Vec<Vec<UserSlack>>,
    /// Present when rescaling was requested; `None` entries cannot be made feasible by scaling up.
    pub rescaled: Option<Vec<Option<Rescaled>>>,
}

impl InferenceReport {
    pub fn feasible(&self, i: usize, tol: f64) -> bool {
        self.residuals[i].iter().all(|r| r.violation() <= tol)
    }
}

/// One inference-mode forward pass over `batch`.
pub fn infer(model: &mut SlpDnet, batch: &[SlpInstance], rescale: bool) -> Result<InferenceReport> {
    let pass = model.forward(batch, Depth::Full, false)?;
    let kind = model.config.kind;
    let mut precoders = Vec::with_capacity(batch.len());
    let mut power = Vec::with_capacity(batch.len());
    let mut residuals = Vec::with_capacity(batch.len());
    let mut rescaled = Vec::with_capacity(batch.len());
    for (inst, w) in batch.iter().zip(pass.w) {
        residuals.push(constraint_residuals(kind, inst, &w)?);
        power.push(transmit_power(&w));
        if rescale {
            rescaled.push(rescale_to_feasible(kind, inst, &w)?.map(|f| Rescaled { factor: f, power: f * f * transmit_power(&w) }));
        }
        precoders.push(StackedPrecoder::new(w)?);
    }
    Ok(InferenceReport { precoders, power, residuals, rescaled: rescale.then_some(rescaled) })
}
