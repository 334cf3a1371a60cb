//! Noise schedules, partial forward noising and the reverse sampler.

mod sampler;
mod schedule;

pub use sampler::{
    gaussian, partial_noise, posterior_coefficients, posterior_sample, q_sample, q_sample_batch,
    q_step, sample_window, ConditioningContext, Denoiser,
};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleConfig, ScheduleKind};
