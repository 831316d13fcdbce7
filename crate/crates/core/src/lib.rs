//! Toolkit for studying audio augmentation in self-supervised speech
//! pre-training.
//!
//! The pipeline is: generate or ingest audio corpora ([`audio_io`]), compute
//! log-mel features ([`dsp`]), expand a base corpus with pitch-shifted,
//! noise-mixed or other-corpus audio ([`augment`]), pre-train an
//! autoregressive predictive coding model ([`apc`]) built from the
//! hand-differentiated layers in [`nn`], fit a frame-level phoneme probe
//! ([`probe`]) and run whole augmentation-ratio grids ([`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apc;
pub mod audio_io;
pub mod augment;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod nn;
pub mod probe;
pub mod seed;

pub use apc::{ApcModel, PretrainConfig};
pub use audio_io::{AudioBuffer, FrameLabels, Manifest, ManifestEntry, SourceTag};
pub use dsp::{FeatureSequence, MelConfig, StftConfig};
pub use error::{Error, Result};
pub use nn::Matrix;

/// Version of the AFEA feature file format written by this crate.
pub const FEATURE_FORMAT_VERSION: u32 = dsp::features::AFEA_VERSION;
/// Version of the ACKP checkpoint format written by this crate.
pub const CHECKPOINT_FORMAT_VERSION: u32 = nn::checkpoint::ACKP_VERSION;
