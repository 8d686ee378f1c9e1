//! Tensor/layer engine with hand-derived gradients: everything the encoder
//! and the combined softmax + weighted-center-loss objective need.

pub mod adam;
pub mod layers;
pub mod loss;
pub mod model;
pub mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use layers::{
    conv2d, conv2d_grad, dense, dense_grad, flatten, maxpool2, maxpool2_grad, relu, relu_grad,
};
pub use loss::{
    class_weights, fuse_embeddings, softmax, softmax_cross_entropy, update_centers,
    weighted_center_loss, CenterBank, LossBreakdown,
};
pub use model::{BlockSpec, EncoderTape, Model, ModelConfig, ParamEntry, INPUT_SCALE};
pub use tensor::{Scalar, Tensor};
