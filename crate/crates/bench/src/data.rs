//! Channel and symbol draws for training, testing and timing.

use num_complex::Complex64;
use slp_core::model::{
    build_dataset, db_to_linear, gen_channels, gen_symbols, ComplexChannelSet, Dataset, DatasetConfig, Rotation,
    SlpInstance,
};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    /// Timing draws for K users.
    Timing(usize),
}

impl Split {
    fn offset(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 2,
            Split::Timing(k) => 4 + 2 * k as u64,
        }
    }
}

/// (channel seed, symbol seed) of a split.
pub fn split_seeds(seed: u64, split: Split) -> (u64, u64) {
    let base = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    (base ^ split.offset(), base ^ (split.offset() + 1))
}

#[derive(Debug, Clone)]
pub struct Draw {
    pub channels: ComplexChannelSet,
    pub symbols: Vec<Vec<Complex64>>,
}

impl Draw {
    pub fn len(&self) -> usize {
        self.channels.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn draw(cfg: &RunConfig, split: Split, n: usize, n_users: usize, n_antennas: usize) -> Result<Draw> {
    let (cs, ss) = split_seeds(cfg.data.seed, split);
    let channels = gen_channels(n, n_users, n_antennas, cs)?;
    let symbols = gen_symbols(n, n_users, &cfg.modulation(), ss)?;
    Ok(Draw { channels, symbols })
}

pub fn train_draw(cfg: &RunConfig) -> Result<Draw> {
    let s = &cfg.scenario;
    draw(cfg, Split::Train, cfg.data.train_samples, s.n_users, s.n_antennas)
}

pub fn test_draw(cfg: &RunConfig) -> Result<Draw> {
    let s = &cfg.scenario;
    draw(cfg, Split::Test, cfg.data.test_samples, s.n_users, s.n_antennas)
}

pub fn dataset(d: &Draw) -> Result<Dataset> {
    Ok(build_dataset(&d.channels, &d.symbols, &DatasetConfig::default())?)
}

/// One instance per sample with every user at `sinr_db` and CSI error bound ς = √`error_bound_sq`.
pub fn instances(cfg: &RunConfig, d: &Draw, sinr_db: f64, error_bound_sq: f64) -> Result<Vec<SlpInstance>> {
    let gamma = db_to_linear(sinr_db);
    d.channels
        .samples
        .iter()
        .zip(&d.symbols)
        .map(|(h, s)| {
            let inst = SlpInstance::from_channel(
                h,
                s,
                vec![gamma; h.n_users()],
                cfg.scenario.noise_power,
                cfg.modulation(),
                Rotation::PerUser,
            )?;
            Ok(if error_bound_sq > 0.0 { inst.with_error_bound(error_bound_sq.sqrt())? } else { inst })
        })
        .collect()
}
