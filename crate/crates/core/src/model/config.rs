use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the denoiser network and its input windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserConfig {
    pub model_width: usize,
    pub num_heads: usize,
    pub num_blocks: usize,
    pub mlp_ratio: usize,
    pub music_frames: usize,
    pub past_frames: usize,
    pub future_frames: usize,
    /// Width of one motion frame; 0 means "take it from the data".
    pub motion_dim: usize,
    /// Width of one music feature frame; 0 means "take it from the data".
    pub music_dim: usize,
    pub temporal_conv_kernel: usize,
    /// Global-trajectory modulation of the future tokens.
    pub gtm: bool,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            model_width: 64,
            num_heads: 4,
            num_blocks: 4,
            mlp_ratio: 2,
            music_frames: 240,
            past_frames: 120,
            future_frames: 20,
            motion_dim: 0,
            music_dim: 0,
            temporal_conv_kernel: 3,
            gtm: true,
        }
    }
}

impl DenoiserConfig {
    pub fn paper() -> Self {
        Self {
            model_width: 512,
            mlp_ratio: 4,
            ..Self::default()
        }
    }

    pub fn tokens(&self) -> usize {
        self.music_frames + self.past_frames + self.future_frames
    }

    pub fn head_dim(&self) -> usize {
        self.model_width / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.model_width == 0 || self.num_heads == 0 || self.model_width % self.num_heads != 0 {
            return fail(format!(
                "model_width {} must be a positive multiple of num_heads {}",
                self.model_width, self.num_heads
            ));
        }
        if self.music_frames == 0 || self.past_frames == 0 || self.future_frames == 0 {
            return fail("window sizes must be positive".into());
        }
        if self.motion_dim == 0 || self.music_dim == 0 {
            return fail("motion_dim and music_dim must be set".into());
        }
        if self.temporal_conv_kernel % 2 == 0 {
            return fail(format!(
                "temporal_conv_kernel must be odd for same-length padding, got {}",
                self.temporal_conv_kernel
            ));
        }
        if self.num_blocks == 0 || self.mlp_ratio == 0 {
            return fail("num_blocks and mlp_ratio must be positive".into());
        }
        Ok(())
    }
}
