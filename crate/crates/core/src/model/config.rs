use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Global pooling head placed between the conv front-end and the linear layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// Global sum pooling.
    #[default]
    Gsp,
    /// Global average pooling.
    Gap,
}

impl Head {
    pub fn name(self) -> &'static str {
        match self {
            Head::Gsp => "gsp",
            Head::Gap => "gap",
        }
    }
}

impl std::fmt::Display for Head {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gsp" => Ok(Head::Gsp),
            "gap" => Ok(Head::Gap),
            _ => Err(Error::Config(format!("unknown head {s:?} (expected gsp|gap)"))),
        }
    }
}

/// One conv layer followed by ReLU and, optionally, a 2x2 stride-2 max-pool.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvBlock {
    pub out_channels: usize,
    #[serde(default = "default_kernel")]
    pub kernel: usize,
    #[serde(default = "one")]
    pub stride: usize,
    #[serde(default = "one")]
    pub padding: usize,
    #[serde(default)]
    pub pool_after: bool,
}

fn default_kernel() -> usize {
    3
}

fn one() -> usize {
    1
}

pub const POOL_WINDOW: usize = 2;
pub const POOL_STRIDE: usize = 2;

impl ConvBlock {
    pub fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize, pool_after: bool) -> Self {
        ConvBlock {
            out_channels,
            kernel,
            stride,
            padding,
            pool_after,
        }
    }

    /// Spatial output length for an input length `n`, or `None` if the block
    /// cannot be applied.
    fn output_len(&self, n: usize) -> Option<usize> {
        if self.kernel > n + 2 * self.padding {
            return None;
        }
        let conv = (n + 2 * self.padding - self.kernel) / self.stride + 1;
        if !self.pool_after {
            return Some(conv);
        }
        (conv >= POOL_WINDOW).then(|| (conv - POOL_WINDOW) / POOL_STRIDE + 1)
    }
}

/// Missing fields take their values from [`ModelConfig::default`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub head: Head,
    pub seed: u64,
    pub blocks: Vec<ConvBlock>,
}

impl Default for ModelConfig {
    /// Four 3x3 blocks with 16/32/64/64 channels, each followed by a 2x2
    /// max-pool: downsampling 16, feature dimension 64.
    fn default() -> Self {
        ModelConfig {
            in_channels: 1,
            head: Head::Gsp,
            seed: 0,
            blocks: [16, 32, 64, 64]
                .into_iter()
                .map(|c| ConvBlock::new(c, 3, 1, 1, true))
                .collect(),
        }
    }
}

const MAX_SEARCH: usize = 1 << 14;

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Config("model needs at least one conv block".into()));
        }
        if self.in_channels == 0 {
            return Err(Error::Config("in_channels must be >= 1".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.out_channels == 0 || b.kernel == 0 || b.stride == 0 {
                return Err(Error::Config(format!(
                    "block {i}: out_channels, kernel and stride must be >= 1 (got {b:?})"
                )));
            }
        }
        let min = self
            .try_min_input_size()
            .ok_or_else(|| Error::Config("no input size up to 16384 fits the conv stack".into()))?;
        let d = self.downsampling();
        if min % d != 0 {
            return Err(Error::Config(format!(
                "minimum input size {min} is not a multiple of the downsampling factor {d}"
            )));
        }
        Ok(())
    }

    /// Channels of the final feature map.
    pub fn feature_dim(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.out_channels)
    }

    /// Product of conv strides and pool strides.
    pub fn downsampling(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.stride * if b.pool_after { POOL_STRIDE } else { 1 })
            .product()
    }

    /// Feature-map length along one axis for an input length `n`.
    pub fn output_len(&self, n: usize) -> Option<usize> {
        self.blocks.iter().try_fold(n, |len, b| b.output_len(len))
    }

    fn try_min_input_size(&self) -> Option<usize> {
        (1..=MAX_SEARCH).find(|&n| self.output_len(n).is_some())
    }

    /// Smallest height/width the network accepts.
    pub fn min_input_size(&self) -> usize {
        self.try_min_input_size().unwrap_or(usize::MAX)
    }

    /// Σ (C_out·C_in·k² + C_out) over conv blocks, plus C_f + 1 for the linear layer.
    pub fn parameter_count(&self) -> usize {
        let mut c_in = self.in_channels;
        let mut total = 0;
        for b in &self.blocks {
            total += b.out_channels * c_in * b.kernel * b.kernel + b.out_channels;
            c_in = b.out_channels;
        }
        total + self.feature_dim() + 1
    }
}
