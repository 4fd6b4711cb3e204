//! The network: MGCK encoders for positive and negative functional
//! connectivity, bilinear edge decoders and the mean-pooled MLP classifier.

mod config;
mod mgck;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Axis, BoundParams, Matrix, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::graph::BrainGraph;

pub use config::{Activation, InitFeatures, ModelConfig};
pub use mgck::{
    attention_from_transformed, attention_scores, encode, mgck_aggregate, mgck_coefficients,
    mgck_layer, EncoderParams, GraphInputs, MgckHeadParams, MgckLayerParams,
};

/// Bilinear edge decoder. Θ = (P + Pᵀ)/2 for the stored raw matrix P, so
/// decoded networks are symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderParams {
    pub theta_raw: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpHeadParams {
    /// Node-wise hidden layers.
    pub hidden: Vec<DenseParams>,
    /// C×F_cls channel weights applied after mean pooling; no bias.
    pub classifier: ParamId,
}

/// Symmetric Θ from the raw decoder matrix.
pub fn symmetric_theta<'t>(raw: Tensor<'t>) -> autodiff::Result<Tensor<'t>> {
    raw.add(raw.transpose()?)?.scale(0.5)
}

/// `x̂_ij = sigmoid(h_iᵀ Θ h_j)` for all pairs.
pub fn decode_edges<'t>(h: Tensor<'t>, theta: Tensor<'t>) -> autodiff::Result<Tensor<'t>> {
    h.matmul(theta)?.matmul(h.transpose()?)?.sigmoid()
}

/// Node-wise MLP over `[h_pos ⊕ h_neg]`, global mean pool, final FC.
/// Returns `(logits 1×C, final node features N×F_cls)`.
pub fn classify<'t>(
    h_pos: Tensor<'t>,
    h_neg: Tensor<'t>,
    head: &MlpHeadParams,
    params: &BoundParams<'t>,
    activation: Activation,
) -> autodiff::Result<(Tensor<'t>, Tensor<'t>)> {
    let mut z = Tensor::concat(&[h_pos, h_neg], Axis::Cols)?;
    let n = z.shape()[0];
    for layer in &head.hidden {
        let w = params[layer.w];
        let width = w.shape()[1];
        let pre = z.matmul(w)?.add(params[layer.b].broadcast(n, width)?)?;
        z = activation.apply(pre)?;
    }
    let pooled = z.mean_axis(Axis::Rows)?;
    let logits = pooled.matmul(params[head.classifier].transpose()?)?;
    Ok((logits, z))
}

/// Everything one forward pass produces for one subject.
pub struct Forward<'t> {
    pub embed_pos: Tensor<'t>,
    pub embed_neg: Tensor<'t>,
    /// Decoded positive / negative connectivity; `None` when decoding was skipped.
    pub recon_pos: Option<Tensor<'t>>,
    pub recon_neg: Option<Tensor<'t>>,
    pub logits: Tensor<'t>,
    pub node_features: Tensor<'t>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    architecture: ModelConfig,
    n_nodes: usize,
    n_classes: usize,
    #[serde(default)]
    extra: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmbnModel {
    config: ModelConfig,
    n_nodes: usize,
    n_classes: usize,
    params: ParamStore,
    pub encoder_pos: EncoderParams,
    pub encoder_neg: EncoderParams,
    pub decoder_pos: DecoderParams,
    pub decoder_neg: DecoderParams,
    pub head: MlpHeadParams,
}

struct Init {
    rng: ChaCha8Rng,
    store: ParamStore,
}

impl Init {
    fn glorot(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let m = Matrix::from_fn(rows, cols, |_, _| self.rng.random_range(-bound..bound));
        self.store.add(name, m)
    }

    fn fixed(&mut self, name: String, value: Matrix) -> ParamId {
        self.store.add(name, value)
    }

    fn encoder(
        &mut self,
        prefix: &str,
        n_layers: usize,
        in_dim: usize,
        cfg: &ModelConfig,
    ) -> EncoderParams {
        let f_head = cfg.head_dim();
        let mut layers = Vec::with_capacity(n_layers);
        let mut f_in = in_dim;
        for l in 0..n_layers {
            let heads = (0..cfg.heads)
                .map(|k| {
                    let p = format!("{prefix}.l{l}.h{k}");
                    MgckHeadParams {
                        w: self.glorot(format!("{p}.w"), f_in, f_head),
                        a: self.fixed(format!("{p}.a"), Matrix::zeros(2 * f_head, 1)),
                        alpha: self.fixed(format!("{p}.alpha"), Matrix::scalar(cfg.mixer_init)),
                        beta: self.fixed(format!("{p}.beta"), Matrix::scalar(cfg.mixer_init)),
                    }
                })
                .collect();
            let post_fc = self.glorot(
                format!("{prefix}.l{l}.post_fc"),
                cfg.heads * f_head,
                cfg.hidden_dim,
            );
            let residual_proj = (f_in != cfg.hidden_dim)
                .then(|| self.glorot(format!("{prefix}.l{l}.residual"), f_in, cfg.hidden_dim));
            layers.push(MgckLayerParams {
                heads,
                post_fc,
                residual_proj,
            });
            f_in = cfg.hidden_dim;
        }
        EncoderParams { layers }
    }
}

impl DmbnModel {
    /// Fresh model with seeded Glorot-uniform matrices, zero attention
    /// vectors and biases, and α = β = `mixer_init`.
    pub fn new(config: ModelConfig, n_nodes: usize, n_classes: usize, seed: u64) -> Result<Self> {
        config.check()?;
        if n_nodes == 0 || n_classes == 0 {
            return Err(Error::Config(
                "model needs at least one node and one class".into(),
            ));
        }
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: ParamStore::new(),
        };
        let in_dim = n_nodes;
        let encoder_pos = init.encoder("pos", config.pos_layers, in_dim, &config);
        let encoder_neg = init.encoder("neg", config.neg_layers, in_dim, &config);
        let d = config.hidden_dim;
        let decoder_pos = DecoderParams {
            theta_raw: init.glorot("dec_pos.theta".into(), d, d),
        };
        let decoder_neg = DecoderParams {
            theta_raw: init.glorot("dec_neg.theta".into(), d, d),
        };
        let mut width = 2 * d;
        let mut hidden = Vec::new();
        for (k, &h) in config.head_hidden.iter().enumerate() {
            hidden.push(DenseParams {
                w: init.glorot(format!("head.fc{k}.w"), width, h),
                b: init.fixed(format!("head.fc{k}.b"), Matrix::zeros(1, h)),
            });
            width = h;
        }
        let classifier = init.glorot("head.out.w".into(), n_classes, width);
        Ok(Self {
            config,
            n_nodes,
            n_classes,
            params: init.store,
            encoder_pos,
            encoder_neg,
            decoder_pos,
            decoder_neg,
            head: MlpHeadParams { hidden, classifier },
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Replaces every parameter entry with a uniform draw from ±`scale`,
    /// keeping α and β near 1. Handy for gradient checks, where zero
    /// attention vectors would sit exactly on the leaky-rectifier kink.
    pub fn randomize(&mut self, seed: u64, scale: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<ParamId> = self.params.ids().collect();
        for id in ids {
            let is_mixer = {
                let name = self.params.name(id);
                name.ends_with(".alpha") || name.ends_with(".beta")
            };
            for v in self.params.get_mut(id).as_mut_slice() {
                let r = rng.random_range(-scale..scale);
                *v = if is_mixer { 1.0 + r } else { r };
            }
        }
    }

    /// The final FC channel weights (C×F_cls).
    pub fn classifier_weights(&self) -> &Matrix {
        self.params.get(self.head.classifier)
    }

    pub fn inputs(&self, structural: &BrainGraph) -> Result<GraphInputs> {
        if structural.n_nodes() != self.n_nodes {
            return Err(Error::Config(format!(
                "model expects {} nodes, graph has {}",
                self.n_nodes,
                structural.n_nodes()
            )));
        }
        Ok(GraphInputs::new(structural, &self.config))
    }

    /// Full forward pass. Decoders run only when `decode` is set.
    pub fn forward<'t>(
        &self,
        params: &BoundParams<'t>,
        inputs: &GraphInputs,
        decode: bool,
    ) -> autodiff::Result<Forward<'t>> {
        let tape = params[self.head.classifier].tape();
        let features = tape.constant(inputs.features.clone())?;
        let embed_pos = encode(inputs, &self.encoder_pos, params, &self.config, features)?;
        let embed_neg = encode(inputs, &self.encoder_neg, params, &self.config, features)?;
        let (recon_pos, recon_neg) = if decode {
            let pos = decode_edges(
                embed_pos,
                symmetric_theta(params[self.decoder_pos.theta_raw])?,
            )?;
            let neg = decode_edges(
                embed_neg,
                symmetric_theta(params[self.decoder_neg.theta_raw])?,
            )?;
            (Some(pos), Some(neg))
        } else {
            (None, None)
        };
        let (logits, node_features) = classify(
            embed_pos,
            embed_neg,
            &self.head,
            params,
            self.config.head_activation,
        )?;
        Ok(Forward {
            embed_pos,
            embed_neg,
            recon_pos,
            recon_neg,
            logits,
            node_features,
        })
    }

    /// Writes a checkpoint directory; `extra` is stored verbatim in the manifest.
    pub fn save(&self, dir: &Path, extra: serde_json::Value) -> Result<()> {
        let meta = CheckpointMeta {
            architecture: self.config.clone(),
            n_nodes: self.n_nodes,
            n_classes: self.n_classes,
            extra,
        };
        let meta = serde_json::to_value(meta).map_err(|e| Error::Format(e.to_string()))?;
        autodiff::save_checkpoint(dir, &self.params, meta)
    }

    /// Loads a checkpoint written by [`DmbnModel::save`]; returns the `extra` value too.
    pub fn load(dir: &Path) -> Result<(Self, serde_json::Value)> {
        let ckpt = autodiff::load_checkpoint(dir)?;
        let meta: CheckpointMeta = serde_json::from_value(ckpt.metadata).map_err(|e| {
            Error::Format(format!("{}: bad checkpoint metadata: {e}", dir.display()))
        })?;
        let mut model = Self::new(meta.architecture, meta.n_nodes, meta.n_classes, 0)?;
        if model.params.len() != ckpt.params.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} tensors, architecture needs {}",
                ckpt.params.len(),
                model.params.len()
            )));
        }
        for ((name, expected), (got_name, got)) in model.params.iter().zip(ckpt.params.iter()) {
            if name != got_name || expected.shape() != got.shape() {
                return Err(Error::Format(format!(
                    "checkpoint tensor `{got_name}` {:?} does not match `{name}` {:?}",
                    got.shape(),
                    expected.shape()
                )));
            }
        }
        model.params = ckpt.params;
        Ok((model, meta.extra))
    }
}

#[cfg(test)]
mod tests;
