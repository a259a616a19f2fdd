//! Network training on the configured training draw.

use std::path::PathBuf;

use slp_core::net::{save_checkpoint, train, training_instances, write_loss_trace, LossRecord, SlpDnet};
use slp_core::solvers::SlpKind;

use crate::config::RunConfig;
use crate::data;
use crate::error::{BenchError, Result};

pub fn train_network(cfg: &RunConfig, kind: SlpKind) -> Result<(SlpDnet, Vec<LossRecord>)> {
    let draw = data::train_draw(cfg)?;
    let ds = data::dataset(&draw)?;
    let tc = cfg.train_config(kind);
    let inst = training_instances(&ds, &tc, cfg.modulation())?;
    let mut model = SlpDnet::new(cfg.net_config(kind))?;
    let trace = train(&mut model, &inst, &tc)?;
    Ok((model, trace))
}

/// Trains and writes the checkpoint and loss trace; returns their paths.
pub fn train_and_save(cfg: &RunConfig, kind: SlpKind) -> Result<(PathBuf, PathBuf)> {
    let (model, trace) = train_network(cfg, kind)?;
    let ckpt = cfg.checkpoint_path(kind);
    let dir = cfg.checkpoint_dir();
    std::fs::create_dir_all(&dir).map_err(|e| BenchError::io(&dir, e))?;
    save_checkpoint(&model, &ckpt)?;
    let loss = ckpt.with_extension("loss.csv");
    write_loss_trace(&trace, &loss)?;
    Ok((ckpt, loss))
}
