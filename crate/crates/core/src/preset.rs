//! Scale presets: per-stage channel widths, mixed-aggregation block depths
//! and kernels, and the hypergraph stage's channel count and distance
//! threshold for the N/S/M/L model sizes.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalePreset {
    N,
    S,
    M,
    L,
}

impl ScalePreset {
    pub const ALL: [ScalePreset; 4] = [
        ScalePreset::N,
        ScalePreset::S,
        ScalePreset::M,
        ScalePreset::L,
    ];

    /// Channel widths of the five backbone stages B1..B5.
    pub fn channel_widths(self) -> [usize; 5] {
        match self {
            ScalePreset::N => [16, 32, 64, 128, 256],
            ScalePreset::S => [32, 64, 128, 256, 512],
            ScalePreset::M => [48, 96, 192, 384, 576],
            ScalePreset::L => [64, 128, 256, 512, 512],
        }
    }

    /// Mixed-aggregation chain depth `n` for stages 2..5 (stage 1 carries no
    /// block).
    pub fn manet_depths(self) -> [usize; 4] {
        match self {
            ScalePreset::N | ScalePreset::S => [1, 2, 2, 1],
            ScalePreset::M => [2, 4, 4, 2],
            ScalePreset::L => [3, 6, 6, 3],
        }
    }

    /// Mixed-aggregation kernel size `k` for stages 2..5.
    pub fn manet_kernels(self) -> [usize; 4] {
        [3, 5, 5, 3]
    }

    /// Distance threshold for epsilon-ball hypergraph construction.
    pub fn epsilon(self) -> f64 {
        match self {
            ScalePreset::N => 6.0,
            ScalePreset::S => 8.0,
            ScalePreset::M => 10.0,
            ScalePreset::L => 10.0,
        }
    }

    /// Channel count of the hypergraph convolution stage (input = output).
    pub fn hyper_channels(self) -> usize {
        match self {
            ScalePreset::N => 128,
            ScalePreset::S => 256,
            ScalePreset::M => 384,
            ScalePreset::L => 512,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "N" => Ok(ScalePreset::N),
            "S" => Ok(ScalePreset::S),
            "M" => Ok(ScalePreset::M),
            "L" => Ok(ScalePreset::L),
            other => Err(Error::InvalidParameter(format!(
                "unknown scale preset: {other}"
            ))),
        }
    }
}

impl fmt::Display for ScalePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScalePreset::N => "N",
            ScalePreset::S => "S",
            ScalePreset::M => "M",
            ScalePreset::L => "L",
        };
        f.write_str(s)
    }
}
