//! Channels, symbols, real stacking and datasets.

mod channel;
mod csi;
mod dataset;
mod instance;
mod modulation;
mod stacking;

pub use channel::{gen_channels, gen_symbols, ChannelMatrix, ComplexChannelSet};
pub(crate) use channel::complex_gaussian;
pub use csi::{apply_csi_error, truncated_norm_cdf, CsiErrorModel};
pub use dataset::{build_dataset, Dataset, DatasetConfig};
pub use instance::SlpInstance;
pub use modulation::ModulationSpec;
pub use stacking::{
    rotate_and_stack, rotate_per_user, stack, stack_parts, unstack, RobustExtension, RotatedChannel,
    Rotation, StackedPrecoder, Swap,
};

/// 10^(dB/10).
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
