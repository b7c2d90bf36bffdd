//! Class-agnostic foreground segmentation from RGB plus attention channels.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use model::{
    AttentionInput, Backbone, Conv, Grads, LikelihoodImage, ModelConfig, SegNet,
};
pub use train::{
    batch_loss, batch_loss_and_grad, train, OptimizerConfig, OptimizerState, TrainHyper,
    TrainState, TrainingExample,
};

use crate::error::Result;

pub fn build_model(config: &ModelConfig) -> Result<SegNet> {
    SegNet::build(config)
}

pub fn predict_likelihood(model: &SegNet, input: &AttentionInput) -> Result<LikelihoodImage> {
    model.predict_likelihood(input)
}
