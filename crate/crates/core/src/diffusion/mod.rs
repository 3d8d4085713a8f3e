//! Conditional denoising diffusion: noise schedule, step embedding, U-Net
//! denoiser, training and reverse-process reconstruction.
//!
//! The network predicts the clean image directly; each reverse step turns
//! that prediction into the Gaussian posterior mean of the previous iterate.

mod checkpoint;
mod embedding;
mod sample;
mod schedule;
mod train;
mod unet;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    QDDM_MAGIC, QDDM_VERSION,
};
pub use embedding::{time_embedding, TimeEmbeddingConfig};
pub use sample::{reconstruct, reconstruct_with, Denoiser, Reconstruction, SampleOptions};
pub use schedule::{build_schedule, forward_noise, NoiseSchedule, BETA_END, BETA_START};
pub use train::{
    checkpoint_epochs, train, training_step, validation_loss, TrainConfig, TrainEvent, TrainItem,
    TrainingHistory,
};
pub use unet::{
    denoiser_backward, denoiser_forward, denoiser_forward_cached, DenoiserParameters,
    ForwardCache, LayerKind, LayerShape, UNetConfig, DATA_CHANNELS,
};
