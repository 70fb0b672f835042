use serde::{Deserialize, Serialize};

use super::NeuralError;

pub const KERNEL: usize = 3;
pub const ACTIONS: usize = 3;
pub const INPUT_CHANNELS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Wrap around the torus; spatial size preserved.
    Periodic,
    /// Pad with zeros; spatial size preserved.
    Zero,
    /// No padding; each spatial side shrinks by 2.
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub padding: Padding,
}

impl ConvSpec {
    pub fn new(out_channels: usize, padding: Padding) -> Self {
        Self { out_channels, padding }
    }
}

/// `2×d×d` input, 3×3 stride-1 convolutions each followed by ReLU, then a
/// dense layer with three outputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QNetworkConfig {
    pub d: usize,
    pub convs: Vec<ConvSpec>,
}

impl QNetworkConfig {
    /// `channels` conv layers, the first periodic and the rest zero padded.
    pub fn uniform(d: usize, channels: &[usize]) -> Self {
        let convs = channels
            .iter()
            .enumerate()
            .map(|(i, &c)| ConvSpec::new(c, if i == 0 { Padding::Periodic } else { Padding::Zero }))
            .collect();
        Self { d, convs }
    }

    /// Desk-scale default: four 32-channel convolutions.
    pub fn desk(d: usize) -> Self {
        Self::uniform(d, &[32, 32, 32, 32])
    }

    /// The 11-convolution `d = 5` network with 899,320 parameters. The last
    /// convolution is unpadded, which brings the dense input to `64·3·3`.
    pub fn table_d5() -> Self {
        Self::tabulated(5, &[128, 128, 120, 111, 104, 103, 90, 80, 73, 71, 64])
    }

    /// The 20-convolution `d = 7` network with 8,990,907 parameters.
    pub fn table_d7() -> Self {
        Self::tabulated(
            7,
            &[256, 256, 251, 250, 240, 240, 235, 233, 233, 229, 225, 223, 220, 220, 220, 215, 214, 205, 204, 200],
        )
    }

    fn tabulated(d: usize, channels: &[usize]) -> Self {
        let mut cfg = Self::uniform(d, channels);
        if let Some(last) = cfg.convs.last_mut() {
            last.padding = Padding::Valid;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.d == 0 {
            return Err(NeuralError::InvalidConfig("d must be positive".into()));
        }
        if self.convs.iter().any(|c| c.out_channels == 0) {
            return Err(NeuralError::InvalidConfig("zero-channel convolution".into()));
        }
        let mut side = self.d;
        for c in &self.convs {
            if c.padding == Padding::Valid {
                if side < KERNEL {
                    return Err(NeuralError::InvalidConfig(format!("spatial size {side} too small for valid conv")));
                }
                side -= KERNEL - 1;
            }
        }
        Ok(())
    }

    /// Spatial side length after each convolution.
    pub fn sides(&self) -> Vec<usize> {
        let mut side = self.d;
        self.convs
            .iter()
            .map(|c| {
                if c.padding == Padding::Valid {
                    side -= KERNEL - 1;
                }
                side
            })
            .collect()
    }

    pub fn dense_inputs(&self) -> usize {
        match (self.convs.last(), self.sides().last()) {
            (Some(c), Some(&s)) => c.out_channels * s * s,
            _ => INPUT_CHANNELS * self.d * self.d,
        }
    }

    /// Per-layer parameter counts, convolutions first.
    pub fn layer_parameter_counts(&self) -> Vec<usize> {
        let mut in_c = INPUT_CHANNELS;
        let mut out = Vec::with_capacity(self.convs.len() + 1);
        for c in &self.convs {
            out.push(in_c * KERNEL * KERNEL * c.out_channels + c.out_channels);
            in_c = c.out_channels;
        }
        out.push(self.dense_inputs() * ACTIONS + ACTIONS);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_parameter_counts().iter().sum()
    }
}
