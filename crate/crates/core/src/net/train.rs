//! Block-wise training with Adam.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::loss::LossBreakdown;
use super::model::{Depth, SlpDnet};
use super::param::Param;
use crate::error::{Result, SlpError};
use crate::model::{db_to_linear, Dataset, ModulationSpec, SlpInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning-rate factor α applied after every epoch.
    pub decay: f64,
    /// Regularization weight ϑ.
    pub vartheta: f64,
    /// Epochs per PUM block.
    pub pum_iterations: usize,
    pub apb_iterations: usize,
    pub sinr_range_db: (f64, f64),
    pub noise: f64,
    /// CSI error bound ς used for robust training instances.
    pub error_bound: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            learning_rate: 1e-3,
            decay: 0.65,
            vartheta: 1e-3,
            pum_iterations: 15,
            apb_iterations: 10,
            sinr_range_db: (0.0, 45.0),
            noise: 1.0,
            error_bound: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(SlpError::ZeroDimension { what: "batch_size" });
        }
        let checks = [
            ("learning_rate", self.learning_rate, self.learning_rate >= 0.0 && self.learning_rate.is_finite()),
            ("decay", self.decay, self.decay > 0.0 && self.decay <= 1.0),
            ("vartheta", self.vartheta, self.vartheta >= 0.0),
            ("noise", self.noise, self.noise > 0.0),
            ("error_bound", self.error_bound, self.error_bound >= 0.0),
            ("sinr_range_db", self.sinr_range_db.1, self.sinr_range_db.0 <= self.sinr_range_db.1),
        ];
        for (name, value, ok) in checks {
            if !ok {
                return Err(SlpError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }
}

/// Training instances with one SINR target per sample drawn uniformly in dB.
pub fn training_instances(dataset: &Dataset, cfg: &TrainConfig, modulation: ModulationSpec) -> Result<Vec<SlpInstance>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5157_4e52);
    let (lo, hi) = cfg.sinr_range_db;
    (0..dataset.n)
        .map(|i| {
            let db = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let inst = dataset.instance(i, vec![db_to_linear(db); dataset.k], cfg.noise, modulation)?;
            if cfg.error_bound > 0.0 {
                inst.with_error_bound(cfg.error_bound)
            } else {
                Ok(inst)
            }
        })
        .collect()
}

/// A training phase of the block-wise schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pum(usize),
    Apb,
}

impl SlpDnet {
    /// Parameters updated in `phase`: the phase's block and the recovery multipliers.
    pub fn phase_params_mut(&mut self, phase: Phase) -> Vec<&mut Param> {
        let mut v = match phase {
            Phase::Pum(r) => self.blocks[r].params_mut(),
            Phase::Apb => self.apb.params_mut(),
        };
        v.extend(self.multipliers.iter_mut());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    /// PUM block index, or B_r for the APB phase.
    pub block: usize,
    pub loss: LossBreakdown,
}

/// Runs the block-wise schedule and returns one record per mini-batch step.
pub fn train(model: &mut SlpDnet, instances: &[SlpInstance], cfg: &TrainConfig) -> Result<Vec<LossRecord>> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(SlpError::ZeroDimension { what: "training set" });
    }
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let batches: Vec<Vec<SlpInstance>> = order
        .chunks(cfg.batch_size)
        .map(|c| c.iter().map(|&i| instances[i].clone()).collect())
        .collect();
    let n_blocks = model.blocks.len();
    let mut phases: Vec<(Phase, usize, Depth)> =
        (0..n_blocks).map(|r| (Phase::Pum(r), cfg.pum_iterations, Depth::Blocks(r + 1))).collect();
    phases.push((Phase::Apb, cfg.apb_iterations, Depth::Full));

    let mut trace = Vec::new();
    let mut step = 0;
    for (phase, epochs, depth) in phases {
        let block = match phase {
            Phase::Pum(r) => r,
            Phase::Apb => n_blocks,
        };
        let mut adam = AdamState::new(&model.phase_params_mut(phase));
        let mut lr = cfg.learning_rate;
        for _ in 0..epochs {
            for batch in &batches {
                let (loss, _) = model.loss_and_gradients(batch, depth, cfg.vartheta, true)?;
                if !loss.total.is_finite() {
                    return Err(SlpError::NonFinite { what: "loss", batch: step });
                }
                trace.push(LossRecord { iteration: step, block, loss });
                if lr > 0.0 {
                    adam.update(&mut model.phase_params_mut(phase), lr);
                    model.project_multipliers();
                }
                step += 1;
            }
            lr *= cfg.decay;
        }
    }
    Ok(trace)
}

pub fn write_loss_trace(trace: &[LossRecord], path: &Path) -> Result<()> {
    let to_err = |e: csv::Error| SlpError::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["iteration", "block", "loss", "objective", "constraint", "regularizer", "hinge"])
        .map_err(to_err)?;
    for r in trace {
        let l = &r.loss;
        w.write_record([
            r.iteration.to_string(),
            r.block.to_string(),
            l.total.to_string(),
            l.objective.to_string(),
            l.constraint.to_string(),
            l.regularizer.to_string(),
            l.hinge.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| SlpError::io(path, e))
}
