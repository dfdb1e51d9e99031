//! Forward pass and hand-derived backward pass of the attention layers.
//!
//! For entity `i` with input state `x_i` and edges `e = (j, r)`:
//!
//! ```text
//! u_e = σ(x_i + x_j)        s_e = q·u_e        α_e = softmax(s)_e
//! m_e = x_j - 2 (r·x_j) r   z_i = Σ α_e m_e    h_i = σ(z_i)
//! ```
//!
//! Backward, given `g = ∂L/∂h_i`:
//!
//! ```text
//! g_z   = g ⊙ σ'(z_i)
//! g_α_e = g_z·m_e           g_s_e = α_e (g_α_e - Σ α g_α)
//! q    += g_s_e u_e         x_i, x_j += g_s_e (q ⊙ σ'(u_e))
//! g_m   = α_e g_z           x_j += g_m - 2 (r·g_m) r
//! r    += -2 ((r·x_j) g_m + (r·g_m) x_j)
//! ```

use rayon::prelude::*;

use super::loss::{triplet_loss_with_grad, NegativePool};
use super::{EmbedError, ModelParams, Result};
use crate::kg::{Edge, NeighborIndex};
use crate::matrix::{dot, Matrix};

/// Intermediate states kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `states[0]` is `h⁰`, `states[l]` the output of layer `l`.
    pub states: Vec<Matrix>,
    /// Attention weights per layer, per entity, aligned with the index's edges.
    pub alphas: Vec<Vec<Vec<f64>>>,
    pub output: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub entity_init: Matrix,
    pub relation_emb: Matrix,
    pub attention: Matrix,
}

fn check_shapes(params: &ModelParams, layer: usize, index: &NeighborIndex, h_in: &Matrix) -> Result<()> {
    let d = params.dim();
    if layer >= params.layer_count() {
        return Err(EmbedError::Dimension {
            expected: params.layer_count(),
            found: layer,
        });
    }
    if h_in.cols() != d {
        return Err(EmbedError::Dimension {
            expected: d,
            found: h_in.cols(),
        });
    }
    if h_in.rows() != index.num_entities() {
        return Err(EmbedError::Dimension {
            expected: index.num_entities(),
            found: h_in.rows(),
        });
    }
    if params.relation_emb.rows() < index.num_relations() || params.relation_emb.cols() != d {
        return Err(EmbedError::Dimension {
            expected: index.num_relations(),
            found: params.relation_emb.rows(),
        });
    }
    Ok(())
}

fn edge_scores(params: &ModelParams, q: &[f64], h_in: &Matrix, i: usize, edges: &[Edge]) -> Vec<f64> {
    let act = params.activation;
    let xi = h_in.row(i);
    let mut scores: Vec<f64> = edges
        .iter()
        .map(|e| {
            let xj = h_in.row(e.neighbor);
            xi.iter()
                .zip(xj)
                .zip(q)
                .map(|((a, b), qk)| qk * act.apply(a + b))
                .sum()
        })
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in &mut scores {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in &mut scores {
        *s /= total;
    }
    scores
}

fn layer_row(params: &ModelParams, q: &[f64], h_in: &Matrix, i: usize, edges: &[Edge]) -> (Vec<f64>, Vec<f64>) {
    let d = params.dim();
    let alpha = edge_scores(params, q, h_in, i, edges);
    let mut z = vec![0.0; d];
    for (e, &a) in edges.iter().zip(&alpha) {
        let xj = h_in.row(e.neighbor);
        let r = params.relation_emb.row(e.relation);
        let c = 2.0 * dot(r, xj);
        for k in 0..d {
            z[k] += a * (xj[k] - c * r[k]);
        }
    }
    z.iter_mut().for_each(|v| *v = params.activation.apply(*v));
    (z, alpha)
}

fn run_layer(
    params: &ModelParams,
    layer: usize,
    index: &NeighborIndex,
    h_in: &Matrix,
) -> (Matrix, Vec<Vec<f64>>) {
    let q = params.attention.row(layer);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..index.num_entities())
        .into_par_iter()
        .map(|i| layer_row(params, q, h_in, i, index.edges(i)))
        .collect();
    let mut out = Matrix::zeros(index.num_entities(), params.dim());
    let mut alphas = Vec::with_capacity(rows.len());
    for (i, (row, alpha)) in rows.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&row);
        alphas.push(alpha);
    }
    (out, alphas)
}

/// One attention layer (0-based `layer`) applied to `h_in`.
pub fn ragat_layer(
    params: &ModelParams,
    layer: usize,
    index: &NeighborIndex,
    h_in: &Matrix,
) -> Result<Matrix> {
    check_shapes(params, layer, index, h_in)?;
    Ok(run_layer(params, layer, index, h_in).0)
}

/// Attention distribution of every entity over its edges for one layer.
pub fn attention_weights(
    params: &ModelParams,
    layer: usize,
    index: &NeighborIndex,
    h_in: &Matrix,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(params, layer, index, h_in)?;
    Ok(run_layer(params, layer, index, h_in).1)
}

pub fn forward_with_cache(params: &ModelParams, index: &NeighborIndex) -> Result<ForwardCache> {
    let mut states = vec![params.entity_init.clone()];
    let mut alphas = Vec::with_capacity(params.layer_count());
    for layer in 0..params.layer_count() {
        let h_in = states.last().expect("at least h0");
        check_shapes(params, layer, index, h_in)?;
        let (h, a) = run_layer(params, layer, index, h_in);
        states.push(h);
        alphas.push(a);
    }
    let parts: Vec<&Matrix> = states.iter().collect();
    let output = Matrix::hconcat(&parts);
    Ok(ForwardCache {
        states,
        alphas,
        output,
    })
}

/// Output embeddings `[h⁰ | h¹ | … | hˡ]`.
pub fn forward(params: &ModelParams, index: &NeighborIndex) -> Result<Matrix> {
    Ok(forward_with_cache(params, index)?.output)
}

/// Backpropagates `grad_output` (same shape as `cache.output`) to the parameters.
pub fn backward(
    params: &ModelParams,
    index: &NeighborIndex,
    cache: &ForwardCache,
    grad_output: &Matrix,
) -> ParamGrads {
    let d = params.dim();
    let n = index.num_entities();
    let layers = params.layer_count();
    let act = params.activation;

    // Gradient w.r.t. each concatenated block.
    let mut block_grads: Vec<Matrix> = (0..=layers)
        .map(|l| {
            let mut g = Matrix::zeros(n, d);
            for i in 0..n {
                g.row_mut(i)
                    .copy_from_slice(&grad_output.row(i)[l * d..(l + 1) * d]);
            }
            g
        })
        .collect();
    let mut g_rel = Matrix::zeros(params.relation_emb.rows(), d);
    let mut g_att = Matrix::zeros(layers, d);

    let mut g_z = vec![0.0; d];
    let mut m = vec![0.0; d];
    let mut g_alpha = Vec::new();
    for layer in (0..layers).rev() {
        let x = &cache.states[layer];
        let h = &cache.states[layer + 1];
        let q = params.attention.row(layer);
        let g_out = block_grads[layer + 1].clone();
        let g_in = &mut block_grads[layer];
        for i in 0..n {
            let gh = g_out.row(i);
            if gh.iter().all(|&v| v == 0.0) {
                continue;
            }
            let hi = h.row(i);
            for k in 0..d {
                g_z[k] = gh[k] * act.derivative_from_output(hi[k]);
            }
            let edges = index.edges(i);
            let alpha = &cache.alphas[layer][i];
            g_alpha.clear();
            for e in edges {
                let xj = x.row(e.neighbor);
                let r = params.relation_emb.row(e.relation);
                reflect_into(r, xj, &mut m);
                g_alpha.push(dot(&g_z, &m));
            }
            let mean: f64 = alpha.iter().zip(&g_alpha).map(|(a, g)| a * g).sum();
            for ((e, &a), &ga) in edges.iter().zip(alpha).zip(&g_alpha) {
                let j = e.neighbor;
                let g_s = a * (ga - mean);
                // Attention branch.
                if g_s != 0.0 {
                    for k in 0..d {
                        let u = act.apply(x.get(i, k) + x.get(j, k));
                        g_att.row_mut(layer)[k] += g_s * u;
                        let g_pre = g_s * q[k] * act.derivative_from_output(u);
                        g_in.row_mut(i)[k] += g_pre;
                        g_in.row_mut(j)[k] += g_pre;
                    }
                }
                // Message branch: m = x_j - 2 (r·x_j) r with g_m = a g_z.
                let r = params.relation_emb.row(e.relation);
                let xj = x.row(j);
                let c = dot(r, xj);
                let rg = a * dot(r, &g_z);
                let gj = g_in.row_mut(j);
                for k in 0..d {
                    gj[k] += a * g_z[k] - 2.0 * rg * r[k];
                }
                let gr = g_rel.row_mut(e.relation);
                for k in 0..d {
                    gr[k] -= 2.0 * (c * a * g_z[k] + rg * xj[k]);
                }
            }
        }
    }
    ParamGrads {
        entity_init: block_grads.swap_remove(0),
        relation_emb: g_rel,
        attention: g_att,
    }
}

#[inline]
fn reflect_into(r: &[f64], x: &[f64], out: &mut [f64]) {
    super::reflect_unchecked(r, x, out);
}

/// Triplet loss over `pairs` (global index pairs) and its gradient with respect
/// to every parameter block, for a fixed negative pool.
pub fn loss_and_gradients(
    params: &ModelParams,
    index: &NeighborIndex,
    pairs: &[(usize, usize)],
    pool: &NegativePool,
    margin: f64,
) -> Result<(f64, ParamGrads)> {
    let cache = forward_with_cache(params, index)?;
    let (loss, grad_out) = triplet_loss_with_grad(&cache.output, pairs, pool, margin)?;
    Ok((loss, backward(params, index, &cache, &grad_out)))
}
