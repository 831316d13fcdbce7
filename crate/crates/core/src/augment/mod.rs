//! Augmentation operators (additive noise at a target SNR, pitch shifting)
//! and the planner that grows a base corpus by an integer ratio.

mod noise;
mod pitch;
mod plan;

pub use noise::{mix_noise, mix_noise_at, NoiseMix};
pub use pitch::{pitch_shift, time_stretch, PV_ANALYSIS_HOP, PV_FFT_SIZE};
pub use plan::{
    expand_plan, take_duration, AugmentationPlan, AugmentationStrategy, NoiseAugSpec, PitchAugSpec,
};
