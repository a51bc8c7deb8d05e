//! The image-regression architectures: a two-layer perceptron and the
//! convolutional family with one to three convolution blocks.
//!
//! Naming follows `<convs>_<fcs>`: `cnn2_fc2` is two 5×5 convolution blocks
//! followed by two fully connected layers, i.e.
//! `C(32,5,1)-P-C(64,5,1)-P-Dropout-ReLU-Flatten(3136)-FC(1024)-FC(1)`.
//! All convolutions use same padding; pooling is 2×2 with stride 2, so a
//! 28×28 input shrinks 28 → 14 → 7 and the flatten width of the two-block
//! nets is 7·7·64 = 3136.

use serde::{Deserialize, Serialize};

use crate::layers::{DropoutSemantics, InitScheme, LayerSpec, Padding};
use crate::loss::Loss;
use crate::network::NetworkSpec;
use crate::optim::OptimizerSpec;

pub const IMAGE_SIDE: usize = 28;

pub const ARCHITECTURES: [&str; 5] = ["mlp_2fc", "cnn1_fc1", "cnn2_fc1", "cnn2_fc2", "cnn3_fc2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub mlp_hidden: usize,
    /// Filter counts of the first, second and third convolution blocks.
    pub filters: [usize; 3],
    pub fc_units: usize,
    pub dropout_rate: f64,
    pub dropout: DropoutSemantics,
    pub init: InitScheme,
    pub loss: Loss,
    pub optimizer: OptimizerSpec,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            mlp_hidden: 128,
            filters: [32, 64, 64],
            fc_units: 1024,
            dropout_rate: 0.9,
            dropout: DropoutSemantics::Keep,
            init: InitScheme::Normal { std: 0.1 },
            loss: Loss::L1,
            optimizer: OptimizerSpec::adam_default(),
        }
    }
}

fn conv(filters: usize, kernel: usize) -> LayerSpec {
    LayerSpec::Conv2d { filters, kernel, stride: 1, padding: Padding::Same }
}

const POOL: LayerSpec = LayerSpec::MaxPool { size: 2, stride: 2 };

fn spec(name: &str, layers: Vec<LayerSpec>, cfg: &ArchConfig) -> NetworkSpec {
    NetworkSpec {
        name: name.to_string(),
        input_shape: vec![IMAGE_SIDE, IMAGE_SIDE, 1],
        layers,
        loss: cfg.loss,
        optimizer: cfg.optimizer,
        init: cfg.init,
        dropout: cfg.dropout,
    }
}

/// Build one named architecture, or `None` for an unknown name.
pub fn build(name: &str, cfg: &ArchConfig) -> Option<NetworkSpec> {
    let [f1, f2, f3] = cfg.filters;
    let dropout = LayerSpec::Dropout { rate: cfg.dropout_rate };
    let layers = match name {
        "mlp_2fc" => vec![
            LayerSpec::Flatten { expect: Some(IMAGE_SIDE * IMAGE_SIDE) },
            LayerSpec::Dense { units: cfg.mlp_hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 1 },
        ],
        "cnn1_fc1" => vec![
            conv(f1, 5),
            POOL,
            dropout,
            LayerSpec::Relu,
            LayerSpec::Flatten { expect: Some(14 * 14 * f1) },
            LayerSpec::Dense { units: 1 },
        ],
        "cnn2_fc1" => vec![
            conv(f1, 5),
            POOL,
            conv(f2, 5),
            POOL,
            dropout,
            LayerSpec::Relu,
            LayerSpec::Flatten { expect: Some(7 * 7 * f2) },
            LayerSpec::Dense { units: 1 },
        ],
        "cnn2_fc2" => vec![
            conv(f1, 5),
            POOL,
            conv(f2, 5),
            POOL,
            dropout,
            LayerSpec::Relu,
            LayerSpec::Flatten { expect: Some(7 * 7 * f2) },
            LayerSpec::Dense { units: cfg.fc_units },
            LayerSpec::Dense { units: 1 },
        ],
        // 3×3 kernels; the third pool floors 7 → 3.
        "cnn3_fc2" => vec![
            conv(f1, 3),
            POOL,
            conv(f2, 3),
            POOL,
            conv(f3, 3),
            POOL,
            dropout,
            LayerSpec::Relu,
            LayerSpec::Flatten { expect: Some(3 * 3 * f3) },
            LayerSpec::Dense { units: cfg.fc_units },
            LayerSpec::Dense { units: 1 },
        ],
        _ => return None,
    };
    Some(spec(name, layers, cfg))
}

/// All five architectures with default widths.
pub fn builtin_architectures() -> Vec<NetworkSpec> {
    let cfg = ArchConfig::default();
    ARCHITECTURES.iter().map(|n| build(n, &cfg).expect("known name")).collect()
}
