//! A small convolutional network engine with SRCNN and VDSR on top.

pub mod conv;
pub mod model;
pub mod tensor;
pub mod train;
pub mod weights;

pub use conv::{conv2d_backward, conv2d_forward, Activation, ConvLayer, LayerGrads};
pub use model::{forward_network, forward_sr, image_to_tensor, tensor_to_image, Arch, Network, SrModel};
pub use tensor::Tensor;
pub use train::{
    batch_gradients, extract_patches, sgdm_step, sgdm_update, train, train_with, EpochRecord, PatchSampling,
    TrainConfig, TrainState,
};
pub use weights::{load_weights, save_weights};
