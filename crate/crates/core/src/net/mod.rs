//! Deep-unfolded SLP network.

mod adam;
mod blocks;
mod checkpoint;
mod infer;
mod layers;
mod loss;
mod model;
mod param;
mod recover;
mod tensor;
mod train;

pub use adam::AdamState;
pub use blocks::{Apb, OutputMap, PumBlock, SubNet};
pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint};
pub use infer::{infer, InferenceReport, Rescaled};
pub use layers::{
    sigmoid, signed_softplus, softplus, softplus_inverse, AvgPool2d, BatchNorm2d, Conv2d, Linear, PRelu,
};
pub use loss::{loss_eval, regularizer, LossBreakdown};
pub use model::{unit_instance, Depth, ForwardPass, NetConfig, SlpDnet, TrainingLoss};
pub use param::Param;
pub use recover::{recover_precoder, Multipliers};
pub use tensor::TensorBuffer;
pub use train::{train, training_instances, write_loss_trace, LossRecord, Phase, TrainConfig};
