//! Group-mix attention.
//!
//! Channels are split into equal segments and each segment is summarized
//! by a depthwise convolution of its own kernel size before the Q/K/V
//! projection. A kernel-1 segment keeps per-token features; larger kernels
//! turn each token into a descriptor of its neighbourhood. Attention
//! between the mixed projections therefore relates tokens to tokens, tokens
//! to groups and groups to groups at once.

use super::layers::{to_map, to_tokens, Init, LayerNorm, Linear};
use super::spec::GmaBlockConfig;
use crate::error::{Error, Result};
use crate::numerics::{Element, Graph, ParamStore, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Runs each channel segment of `x` through its depthwise kernel.
///
/// `kernels[i]` has shape `[segment, 1, k_i, k_i]`.
pub fn group_aggregate<T: Element>(
    g: &mut Graph<T>,
    x: Var,
    kernels: &[Var],
    config: &GmaBlockConfig,
) -> Result<Var> {
    config.validate()?;
    let c = g.shape(x)[1];
    if c != config.dim {
        return Err(Error::dim(
            "group_aggregate",
            format!("input has {c} channels, block expects {}", config.dim),
        ));
    }
    if kernels.len() != config.group_kernels.len() {
        return Err(Error::Config(format!(
            "{} aggregator kernels for {} segments",
            kernels.len(),
            config.group_kernels.len()
        )));
    }
    let seg = config.segment_width();
    let mut parts = Vec::with_capacity(kernels.len());
    for (i, (&k, &w)) in config.group_kernels.iter().zip(kernels).enumerate() {
        let part = g.narrow(x, 1, i * seg, seg)?;
        parts.push(g.conv2d(part, w, None, seg, 1, k / 2)?);
    }
    if parts.len() == 1 {
        return Ok(parts[0]);
    }
    g.concat(&parts, 1)
}

/// Scaled dot-product attention over the token axis of `[b,n,c]` inputs.
/// Returns the `[b,n,c]` output and the `[b·heads,n,n]` attention weights.
pub fn multi_head_attention<T: Element>(
    g: &mut Graph<T>,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
) -> Result<(Var, Var)> {
    let s = g.shape(q).to_vec();
    let (b, n, c) = (s[0], s[1], s[2]);
    if c % heads != 0 {
        return Err(Error::Config(format!(
            "{c} channels not divisible by {heads} heads"
        )));
    }
    let d = c / heads;
    let split = |g: &mut Graph<T>, t: Var, axes: &[usize], shape: &[usize]| -> Result<Var> {
        let r = g.reshape(t, &[b, n, heads, d])?;
        let p = g.permute(r, axes)?;
        g.reshape(p, shape)
    };
    let qh = split(g, q, &[0, 2, 1, 3], &[b * heads, n, d])?;
    let kt = split(g, k, &[0, 2, 3, 1], &[b * heads, d, n])?;
    let vh = split(g, v, &[0, 2, 1, 3], &[b * heads, n, d])?;

    let scores = g.matmul(qh, kt)?;
    let scores = g.scale(scores, 1.0 / (d as f64).sqrt())?;
    let weights = g.softmax(scores, 2)?;
    let out = g.matmul(weights, vh)?;
    let out = g.reshape(out, &[b, heads, n, d])?;
    let out = g.permute(out, &[0, 2, 1, 3])?;
    let out = g.reshape(out, &[b, n, c])?;
    Ok((out, weights))
}

/// Pre-norm transformer block. With aggregators it is a GMA block; without,
/// a plain ViT block.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub config: GmaBlockConfig,
    pub norm1: LayerNorm,
    pub aggregators: Option<Vec<usize>>,
    pub qkv: Linear,
    pub proj: Linear,
    pub norm2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

/// Intermediate values of one block, for inspection in tests.
#[derive(Debug, Clone, Copy)]
pub struct BlockTrace {
    pub output: Var,
    pub attention: Var,
}

impl Block {
    pub fn new<T: Element>(
        init: &mut Init<'_, T>,
        prefix: &str,
        config: GmaBlockConfig,
        group_mix: bool,
    ) -> Result<Self> {
        config.validate()?;
        let dim = config.dim;
        let norm1 = LayerNorm::new(init, &format!("{prefix}.norm1"), dim)?;
        let aggregators = if group_mix {
            let seg = config.segment_width();
            let mut ids = Vec::new();
            for (i, &k) in config.group_kernels.iter().enumerate() {
                let name = format!("{prefix}.agg{i}.weight");
                // kernel 1 is the token-level path: a per-channel scale starting at identity
                let id = if k == 1 {
                    init.constant(name, &[seg, 1, 1, 1], 1.0)?
                } else {
                    init.weight(name, &[seg, 1, k, k])?
                };
                ids.push(id);
            }
            Some(ids)
        } else {
            None
        };
        let qkv = Linear::new(init, &format!("{prefix}.attn.qkv"), dim, 3 * dim)?;
        let proj = Linear::new(init, &format!("{prefix}.attn.proj"), dim, dim)?;
        let norm2 = LayerNorm::new(init, &format!("{prefix}.norm2"), dim)?;
        let hidden = config.mlp_hidden();
        let fc1 = Linear::new(init, &format!("{prefix}.mlp.fc1"), dim, hidden)?;
        let fc2 = Linear::new(init, &format!("{prefix}.mlp.fc2"), hidden, dim)?;
        Ok(Block {
            config,
            norm1,
            aggregators,
            qkv,
            proj,
            norm2,
            fc1,
            fc2,
        })
    }

    /// `[b,c,h,w]` in, `[b,c,h,w]` out.
    pub fn forward<T: Element>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<BlockTrace> {
        let s = g.shape(x).to_vec();
        let (h, w) = (s[2], s[3]);
        let dim = self.config.dim;
        let tokens = to_tokens(g, x)?;
        let normed = self.norm1.forward(g, p, tokens)?;
        let mixed = match &self.aggregators {
            Some(ids) => {
                let map = to_map(g, normed, h, w)?;
                let kernels: Vec<Var> = ids.iter().map(|&i| p[i]).collect();
                let agg = group_aggregate(g, map, &kernels, &self.config)?;
                to_tokens(g, agg)?
            }
            None => normed,
        };
        let qkv = self.qkv.forward(g, p, mixed)?;
        let q = g.narrow(qkv, 2, 0, dim)?;
        let k = g.narrow(qkv, 2, dim, dim)?;
        let v = g.narrow(qkv, 2, 2 * dim, dim)?;
        let (attn, weights) = multi_head_attention(g, q, k, v, self.config.heads)?;
        let attn = self.proj.forward(g, p, attn)?;
        let tokens = g.add(tokens, attn)?;

        let normed = self.norm2.forward(g, p, tokens)?;
        let hidden = self.fc1.forward(g, p, normed)?;
        let hidden = g.gelu(hidden)?;
        let mlp = self.fc2.forward(g, p, hidden)?;
        let tokens = g.add(tokens, mlp)?;
        if !g.value(tokens).all_finite() {
            return Err(Error::NumericDomain {
                op: "gma_attention",
                detail: "non-finite block output".into(),
            });
        }
        Ok(BlockTrace {
            output: to_map(g, tokens, h, w)?,
            attention: weights,
        })
    }
}

/// A standalone GMA block with its own parameters.
#[derive(Debug, Clone)]
pub struct GmaBlock<T> {
    block: Block,
    params: ParamStore<T>,
}

impl<T: Element> GmaBlock<T> {
    pub fn build(config: GmaBlockConfig, seed: u64) -> Result<Self> {
        let mut params = ParamStore::new();
        let mut init = Init {
            store: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let block = Block::new(&mut init, "block", config, true)?;
        Ok(GmaBlock { block, params })
    }

    pub fn config(&self) -> &GmaBlockConfig {
        &self.block.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    /// `p[i]` must hold parameter `i` of [`GmaBlock::params`].
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<BlockTrace> {
        self.block.forward(g, p, x)
    }

    /// Inference on a `[b,c,h,w]` tensor.
    pub fn apply(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p: Vec<Var> = self
            .params
            .iter()
            .map(|(_, t)| g.constant(t.clone()))
            .collect();
        let x = g.constant(x.clone());
        let y = self.forward(&mut g, &p, x)?.output;
        Ok(g.value(y).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ParamStore, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(shape: &[usize], scale: f64) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|i| ((i as f64) * 0.731 + 0.2).sin() * scale)
            .collect();
        Tensor::from_f64(shape, &data).unwrap()
    }

    #[test]
    fn identity_aggregators_pass_input_through() {
        let cfg = GmaBlockConfig::new(8, 2, &[1, 1], 2.0).unwrap();
        let mut g = Graph::<f64>::new();
        let x = g.constant(ramp(&[1, 8, 3, 3], 1.0));
        let k0 = g.constant(Tensor::ones(&[4, 1, 1, 1]));
        let k1 = g.constant(Tensor::ones(&[4, 1, 1, 1]));
        let y = group_aggregate(&mut g, x, &[k0, k1], &cfg).unwrap();
        assert!(g.value(y).bit_eq(g.value(x)));
    }

    #[test]
    fn mixed_kernels_preserve_shape() {
        let cfg = GmaBlockConfig::new(12, 1, &[1, 3, 5], 2.0).unwrap();
        assert_eq!(cfg.segment_width(), 4);
        let mut g = Graph::<f64>::new();
        let x = g.constant(ramp(&[2, 12, 6, 5], 1.0));
        let ks: Vec<Var> = [1usize, 3, 5]
            .iter()
            .map(|&k| g.constant(ramp(&[4, 1, k, k], 0.1)))
            .collect();
        let y = group_aggregate(&mut g, x, &ks, &cfg).unwrap();
        assert_eq!(g.shape(y), &[2, 12, 6, 5]);
        let wrong = g.constant(Tensor::zeros(&[1, 8, 6, 5]));
        assert!(group_aggregate(&mut g, wrong, &ks, &cfg).is_err());
    }

    #[test]
    fn averaging_kernel_keeps_constant_field_interior() {
        let cfg = GmaBlockConfig::new(4, 1, &[1, 3], 2.0).unwrap();
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::full(&[1, 4, 6, 6], 0.75));
        let k0 = g.constant(Tensor::ones(&[2, 1, 1, 1]));
        let k1 = g.constant(Tensor::full(&[2, 1, 3, 3], 1.0 / 9.0));
        let y = group_aggregate(&mut g, x, &[k0, k1], &cfg).unwrap();
        let out = g.value(y);
        for c in 2..4 {
            for i in 1..5 {
                for j in 1..5 {
                    let v = out.get(&[0, c, i, j]).unwrap();
                    assert!((v - 0.75).abs() < 1e-15, "({c},{i},{j}) = {v}");
                }
            }
        }
        // zero padding pulls the corner down
        assert!(out.get(&[0, 2, 0, 0]).unwrap() < 0.75);
    }

    #[test]
    fn uniform_logits_average_the_values() {
        // identical keys give every query the same logits, so each output
        // token is the mean of the value vectors
        let (n, c) = (6, 4);
        let mut g = Graph::<f64>::new();
        let q = g.constant(ramp(&[1, n, c], 1.0));
        let k = g.constant(Tensor::full(&[1, n, c], 0.3));
        let vals = ramp(&[1, n, c], 2.0);
        let v = g.constant(vals.clone());
        let (out, w) = multi_head_attention(&mut g, q, k, v, 1).unwrap();
        for &wt in g.value(w).to_f64_vec().iter() {
            assert!((wt - 1.0 / n as f64).abs() < 1e-15);
        }
        let vv = vals.to_f64_vec();
        let out = g.value(out);
        for t in 0..n {
            for ch in 0..c {
                let mean: f64 = (0..n).map(|r| vv[r * c + ch]).sum::<f64>() / n as f64;
                assert!((out.get(&[0, t, ch]).unwrap() - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_shapes_and_attention_rows() {
        let mut store = ParamStore::<f32>::new();
        let mut init = Init {
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(3),
        };
        let cfg = GmaBlockConfig::new(16, 2, &[1, 3, 5, 7], 2.0).unwrap();
        let block = Block::new(&mut init, "b", cfg, true).unwrap();
        let mut g = Graph::<f32>::new();
        let p: Vec<Var> = store.iter().map(|(_, t)| g.constant(t.clone())).collect();
        let x = g.constant(ramp(&[1, 16, 8, 8], 1.0).cast());
        let trace = block.forward(&mut g, &p, x).unwrap();
        assert_eq!(g.shape(trace.output), &[1, 16, 8, 8]);
        let w = g.value(trace.attention);
        assert_eq!(w.shape(), &[2, 64, 64]);
        for row in w.to_vec().chunks(64) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }
}
