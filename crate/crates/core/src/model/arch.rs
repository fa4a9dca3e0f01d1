use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of resolution levels. Level ℓ sees the input unshuffled by 2^ℓ.
pub const LEVELS: usize = 4;

/// Channel-width multiplier applied uniformly to every level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum WidthScale {
    Full,
    Half,
    Quarter,
    Eighth,
}

impl WidthScale {
    pub const ALL: [WidthScale; 4] = [Self::Full, Self::Half, Self::Quarter, Self::Eighth];

    pub fn divisor(self) -> u32 {
        match self {
            Self::Full => 1,
            Self::Half => 2,
            Self::Quarter => 4,
            Self::Eighth => 8,
        }
    }

    pub fn from_divisor(d: u32) -> Result<Self> {
        match d {
            1 => Ok(Self::Full),
            2 => Ok(Self::Half),
            4 => Ok(Self::Quarter),
            8 => Ok(Self::Eighth),
            _ => Err(Error::config(format!("width scale 1/{d} is not one of 1, 1/2, 1/4, 1/8"))),
        }
    }

    pub fn as_f64(self) -> f64 {
        1.0 / self.divisor() as f64
    }
}

impl TryFrom<f64> for WidthScale {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.as_f64() == v)
            .ok_or_else(|| Error::config(format!("width scale {v} is not one of 1, 0.5, 0.25, 0.125")))
    }
}

impl From<WidthScale> for f64 {
    fn from(s: WidthScale) -> f64 {
        s.as_f64()
    }
}

impl fmt::Display for WidthScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

/// Residual dense and residual global blocks run at one level, interleaved
/// dense-first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCount {
    pub resdb: usize,
    pub resgb: usize,
}

impl BlockCount {
    pub const fn pairs(n: usize) -> Self {
        Self { resdb: n, resgb: n }
    }

    pub fn total(self) -> usize {
        self.resdb + self.resgb
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    /// Channels at the top (full-resolution) level before scaling.
    pub base_width: usize,
    pub width_scale: WidthScale,
    /// Indexed top (level 0) to bottom (level 3).
    pub blocks_per_level: [BlockCount; LEVELS],
    /// Dense-layer growth is `max(4, width / growth_divisor)`.
    pub growth_divisor: usize,
    pub attention_reduction: usize,
    pub leaky_slope: f64,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            base_width: 64,
            width_scale: WidthScale::Full,
            blocks_per_level: [
                BlockCount::pairs(2),
                BlockCount::pairs(1),
                BlockCount::pairs(1),
                BlockCount::pairs(1),
            ],
            growth_divisor: 2,
            attention_reduction: 16,
            leaky_slope: 0.2,
            in_channels: 3,
            out_channels: 31,
        }
    }
}

impl ArchConfig {
    /// The scaled-down network used for CPU training runs.
    pub fn desk() -> Self {
        Self {
            base_width: 16,
            ..Self::default()
        }
    }

    /// Smallest useful network: width 8, one block pair per level.
    pub fn tiny() -> Self {
        Self {
            base_width: 8,
            blocks_per_level: [BlockCount::pairs(1); LEVELS],
            attention_reduction: 4,
            ..Self::default()
        }
    }

    pub fn with_width_scale(mut self, s: WidthScale) -> Self {
        self.width_scale = s;
        self
    }

    pub fn level_width(&self, level: usize) -> usize {
        let raw = (self.base_width << level) as f64 / self.width_scale.divisor() as f64;
        (raw.round() as usize).max(4)
    }

    pub fn growth_rate(&self, width: usize) -> usize {
        (width / self.growth_divisor).max(4)
    }

    /// Hidden width of the attention MLP; never below one unit.
    pub fn attention_width(&self, width: usize) -> usize {
        (width / self.attention_reduction).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_width == 0 {
            return Err(Error::config("base_width must be positive"));
        }
        if self.growth_divisor == 0 || self.attention_reduction == 0 {
            return Err(Error::config("growth_divisor and attention_reduction must be positive"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config("channel counts must be positive"));
        }
        if !self.leaky_slope.is_finite() || self.leaky_slope < 0.0 {
            return Err(Error::config("leaky_slope must be finite and non-negative"));
        }
        let totals: Vec<usize> = self.blocks_per_level.iter().map(|b| b.total()).collect();
        if totals[0] < totals[1] || totals[0] < totals[2] || totals[1].min(totals[2]) < totals[3] {
            return Err(Error::config(format!(
                "top level must use the most blocks and bottom the fewest, got {totals:?}"
            )));
        }
        for level in 1..LEVELS {
            let w = self.level_width(level);
            if w % 4 != 0 {
                return Err(Error::config(format!(
                    "level {level} width {w} must be divisible by 4 for pixel shuffling"
                )));
            }
        }
        Ok(())
    }
}
