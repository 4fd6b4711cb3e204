//! Multi-stage graph convolution kernel.
//!
//! For node i with neighborhood N(i) the aggregation is
//!
//! ```text
//! AGG(h_i) = Σ_{j∈N(i)} h_j · (x_ij + α) · (att_ij + β·δ(x_ij))
//! ```
//!
//! which mixes four stages: raw weight with attention, raw weight alone,
//! attention alone and the binary threshold δ(x) = [x > γ]. Each of K heads
//! then applies `act(AGG·w)`; the heads are concatenated, passed through a
//! fully connected layer and added to a (possibly projected) residual.

use crate::autodiff::{Axis, BoundParams, Mask, Matrix, ParamId, Result, Tensor};
use crate::graph::BrainGraph;

use super::{InitFeatures, ModelConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MgckHeadParams {
    /// F×F′ shared linear transform.
    pub w: ParamId,
    /// 2F′×1 attention vector.
    pub a: ParamId,
    pub alpha: ParamId,
    pub beta: ParamId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MgckLayerParams {
    pub heads: Vec<MgckHeadParams>,
    /// (K·F′)×F_out.
    pub post_fc: ParamId,
    /// F×F_out projection; `None` means identity (F == F_out).
    pub residual_proj: Option<ParamId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<MgckLayerParams>,
}

/// Per-graph constants consumed by the encoders.
#[derive(Clone, Debug)]
pub struct GraphInputs {
    /// Structural weights x_ij.
    pub weights: Matrix,
    /// N(i) membership, including i itself when configured.
    pub mask: Mask,
    /// Mask as a 0/1 matrix.
    pub mask_values: Matrix,
    /// δ(x_ij) restricted to the mask; all zero when the threshold stage is off.
    pub threshold: Matrix,
    /// Row-normalized mask, used in place of attention when that stage is off.
    pub uniform_attention: Matrix,
    /// Initial node features.
    pub features: Matrix,
}

impl GraphInputs {
    pub fn new(structural: &BrainGraph, config: &ModelConfig) -> Self {
        let weights = structural.weights().clone();
        let n = weights.rows();
        let mask = Mask::from_fn(n, n, |i, j| {
            (i == j && config.include_self) || (i != j && weights[(i, j)] != 0.0)
        });
        let mask_values = mask.to_matrix();
        let threshold = Matrix::from_fn(n, n, |i, j| {
            let on =
                config.threshold_aggregation && mask.get(i, j) && weights[(i, j)] > config.gamma;
            f64::from(u8::from(on))
        });
        let uniform_attention = Matrix::from_fn(n, n, |i, j| {
            let deg = mask.row(i).iter().filter(|&&b| b).count();
            if mask.get(i, j) {
                1.0 / deg as f64
            } else {
                0.0
            }
        });
        let features = match config.init_features {
            InitFeatures::AdjacencyRow => weights.clone(),
            InitFeatures::OneHot => Matrix::identity(n),
        };
        Self {
            weights,
            mask,
            mask_values,
            threshold,
            uniform_attention,
            features,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.rows()
    }
}

/// Attention from already transformed features `h̃ = H·w` (N×F′):
/// `softmax_{j∈N(i)} leaky(aᵀ[h̃_i ⊕ h̃_j])`.
pub fn attention_from_transformed<'t>(
    transformed: Tensor<'t>,
    a: Tensor<'t>,
    mask: &Mask,
    slope: f64,
) -> Result<Tensor<'t>> {
    let f = transformed.shape()[1];
    let src: Vec<usize> = (0..f).collect();
    let dst: Vec<usize> = (f..2 * f).collect();
    let own = transformed.matmul(a.gather_rows(&src)?)?;
    let other = transformed.matmul(a.gather_rows(&dst)?)?;
    let logits = own.outer_sum(other)?.leaky_relu(slope)?;
    logits.masked_softmax(mask)
}

/// Attention matrix X^ATT for node features `h` (N×F).
pub fn attention_scores<'t>(
    h: Tensor<'t>,
    w: Tensor<'t>,
    a: Tensor<'t>,
    mask: &Mask,
    slope: f64,
) -> Result<Tensor<'t>> {
    attention_from_transformed(h.matmul(w)?, a, mask, slope)
}

/// N×N aggregation coefficients `(x_ij + α)(att_ij + β·δ_ij)` on the mask.
pub fn mgck_coefficients<'t>(
    attention: Tensor<'t>,
    alpha: Tensor<'t>,
    beta: Tensor<'t>,
    weights: &Matrix,
    threshold: &Matrix,
    mask_values: &Matrix,
) -> Result<Tensor<'t>> {
    attention.mgck_mix(alpha, beta, weights, threshold, mask_values)
}

/// `AGG(h)` for all nodes at once (N×F).
pub fn mgck_aggregate<'t>(
    h: Tensor<'t>,
    attention: Tensor<'t>,
    alpha: Tensor<'t>,
    beta: Tensor<'t>,
    weights: &Matrix,
    threshold: &Matrix,
    mask_values: &Matrix,
) -> Result<Tensor<'t>> {
    mgck_coefficients(attention, alpha, beta, weights, threshold, mask_values)?.matmul(h)
}

/// One multi-head MGCK layer with residual connection.
pub fn mgck_layer<'t>(
    h: Tensor<'t>,
    inputs: &GraphInputs,
    layer: &MgckLayerParams,
    params: &BoundParams<'t>,
    config: &ModelConfig,
) -> Result<Tensor<'t>> {
    let tape = h.tape();
    let mut head_outputs = Vec::with_capacity(layer.heads.len());
    for head in &layer.heads {
        let transformed = h.matmul(params[head.w])?;
        let attention = if config.attention_aggregation {
            attention_from_transformed(
                transformed,
                params[head.a],
                &inputs.mask,
                config.attention_slope,
            )?
        } else {
            tape.constant(inputs.uniform_attention.clone())?
        };
        let coef = mgck_coefficients(
            attention,
            params[head.alpha],
            params[head.beta],
            &inputs.weights,
            &inputs.threshold,
            &inputs.mask_values,
        )?;
        // AGG(h)·w == C·(h·w); the right-hand grouping reuses h̃.
        head_outputs.push(config.update_activation.apply(coef.matmul(transformed)?)?);
    }
    let concat = if head_outputs.len() == 1 {
        head_outputs[0]
    } else {
        Tensor::concat(&head_outputs, Axis::Cols)?
    };
    let out = concat.matmul(params[layer.post_fc])?;
    let residual = match layer.residual_proj {
        Some(p) => h.matmul(params[p])?,
        None => h,
    };
    out.add(residual)
}

/// Runs the full encoder stack on the input features.
pub fn encode<'t>(
    inputs: &GraphInputs,
    encoder: &EncoderParams,
    params: &BoundParams<'t>,
    config: &ModelConfig,
    features: Tensor<'t>,
) -> Result<Tensor<'t>> {
    encoder.layers.iter().try_fold(features, |h, layer| {
        mgck_layer(h, inputs, layer, params, config)
    })
}
