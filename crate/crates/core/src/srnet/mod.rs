//! From-scratch residual convolutional super-resolver: tensors, 3×3 conv
//! layers with exact gradients, mini-batch training, inference, and a
//! binary checkpoint format.

mod checkpoint;
mod conv;
mod model;
mod tensor;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader,
    DegradationTag, MAGIC, VERSION,
};
pub use conv::{conv2d_backward, conv2d_forward, Conv2d, LayerGrads, KERNEL};
pub use model::{ForwardCache, SrModel};
pub use tensor::{image_to_tensor, tensor_to_image, Tensor};
pub use train::{
    mse_loss, super_resolve, super_resolve_to, train, Degradation, OptimizerKind, TrainConfig,
};
