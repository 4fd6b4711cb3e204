use serde::{Deserialize, Serialize};

use crate::autodiff::{Result as AdResult, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Elu,
    Tanh,
    LeakyRelu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply<'t>(self, x: Tensor<'t>) -> AdResult<Tensor<'t>> {
        match self {
            Activation::Elu => x.elu(1.0),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu => x.leaky_relu(0.2),
            Activation::Sigmoid => x.sigmoid(),
            Activation::Identity => Ok(x),
        }
    }
}

/// How the encoders' input node features are built from the structural graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitFeatures {
    /// Each node's structural connectivity profile (its adjacency row).
    AdjacencyRow,
    /// Identity matrix; not permutation-equivariant.
    OneHot,
}

/// Architecture of a [`DmbnModel`](super::DmbnModel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Output width of every MGCK layer (all heads concatenated).
    pub hidden_dim: usize,
    pub heads: usize,
    pub pos_layers: usize,
    pub neg_layers: usize,
    /// Node-wise hidden widths of the classification MLP; the last one is
    /// the saliency channel count.
    pub head_hidden: Vec<usize>,
    /// Threshold of δ(x) = [x > γ].
    pub gamma: f64,
    pub include_self: bool,
    pub init_features: InitFeatures,
    pub update_activation: Activation,
    pub head_activation: Activation,
    pub attention_slope: f64,
    /// Learned attention stage (off: uniform weights over the neighborhood).
    pub attention_aggregation: bool,
    /// Binary threshold stage (off: δ ≡ 0).
    pub threshold_aggregation: bool,
    /// Initial value of every head's α and β.
    pub mixer_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 128,
            heads: 4,
            pos_layers: 5,
            neg_layers: 4,
            head_hidden: vec![64],
            gamma: 0.0,
            include_self: true,
            init_features: InitFeatures::AdjacencyRow,
            update_activation: Activation::Elu,
            head_activation: Activation::Elu,
            attention_slope: 0.2,
            attention_aggregation: true,
            threshold_aggregation: true,
            mixer_init: 1.0,
        }
    }
}

impl ModelConfig {
    /// Per-head width F′.
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads.max(1)
    }

    /// Node feature width fed to the final classifier.
    pub fn class_feature_dim(&self) -> usize {
        self.head_hidden
            .last()
            .copied()
            .unwrap_or(2 * self.hidden_dim)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_owned()));
        if self.heads == 0 || self.hidden_dim == 0 {
            return bad("hidden_dim and heads must be positive");
        }
        if !self.hidden_dim.is_multiple_of(self.heads) {
            return bad("hidden_dim must be divisible by heads");
        }
        if self.pos_layers == 0 || self.neg_layers == 0 {
            return bad("each encoder needs at least one MGCK layer");
        }
        if self.head_hidden.contains(&0) {
            return bad("head_hidden widths must be positive");
        }
        if !self.gamma.is_finite()
            || !self.attention_slope.is_finite()
            || !self.mixer_init.is_finite()
        {
            return bad("gamma, attention_slope and mixer_init must be finite");
        }
        Ok(())
    }
}
