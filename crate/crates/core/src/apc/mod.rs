//! Autoregressive predictive coding: an LSTM stack reads log-mel frames and a
//! linear head predicts the frame `time_shift` steps ahead under MSE.

mod model;
mod pretrain;

pub use model::{ApcGrads, ApcMeta, ApcModel};
pub use pretrain::{
    load_manifest_features, pretrain, pretrain_with_callback, write_loss_curve, EpochLoss, PretrainConfig,
    PretrainOutcome,
};
