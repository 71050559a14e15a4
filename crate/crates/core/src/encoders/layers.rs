use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::numerics::{Element, Graph, ParamStore, Tensor, Var};

pub const INIT_STD: f64 = 0.02;
pub const LN_EPS: f64 = 1e-6;

/// Allocates named parameters with the shared initialization scheme.
pub(crate) struct Init<'a, T> {
    pub store: &'a mut ParamStore<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Element> Init<'_, T> {
    /// Normal(0, 0.02) truncated to two standard deviations.
    pub fn weight(&mut self, name: String, shape: &[usize]) -> Result<usize> {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        while data.len() < n {
            let z: f64 = self.rng.sample(StandardNormal);
            if z.abs() <= 2.0 {
                data.push(T::from_f64(z * INIT_STD));
            }
        }
        self.store.insert(name, Tensor::from_vec(shape, data)?)
    }

    pub fn constant(&mut self, name: String, shape: &[usize], value: f64) -> Result<usize> {
        self.store
            .insert(name, Tensor::full(shape, T::from_f64(value)))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<T: Element>(
        init: &mut Init<'_, T>,
        prefix: &str,
        in_dim: usize,
        out_dim: usize,
    ) -> Result<Self> {
        Ok(Linear {
            w: init.weight(format!("{prefix}.weight"), &[in_dim, out_dim])?,
            b: init.constant(format!("{prefix}.bias"), &[out_dim], 0.0)?,
            in_dim,
            out_dim,
        })
    }

    /// Applies to the last axis of a `[.., in_dim]` tensor.
    pub fn forward<T: Element>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        let rows = shape.iter().product::<usize>() / self.in_dim;
        let flat = g.reshape(x, &[rows, self.in_dim])?;
        let y = g.matmul(flat, p[self.w])?;
        let y = g.add_bias(y, p[self.b])?;
        let mut out_shape = shape;
        *out_shape.last_mut().expect("rank >= 1") = self.out_dim;
        g.reshape(y, &out_shape)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Conv {
    pub w: usize,
    pub b: Option<usize>,
    pub groups: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Element>(
        init: &mut Init<'_, T>,
        prefix: &str,
        in_c: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Result<Self> {
        let w = init.weight(format!("{prefix}.weight"), &[out_c, in_c, kernel, kernel])?;
        let b = if bias {
            Some(init.constant(format!("{prefix}.bias"), &[out_c], 0.0)?)
        } else {
            None
        };
        Ok(Conv {
            w,
            b,
            groups: 1,
            stride,
            padding,
        })
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
        g.conv2d(
            x,
            p[self.w],
            self.b.map(|b| p[b]),
            self.groups,
            self.stride,
            self.padding,
        )
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerNorm {
    pub gamma: usize,
    pub beta: usize,
}

impl LayerNorm {
    pub fn new<T: Element>(init: &mut Init<'_, T>, prefix: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            gamma: init.constant(format!("{prefix}.weight"), &[dim], 1.0)?,
            beta: init.constant(format!("{prefix}.bias"), &[dim], 0.0)?,
        })
    }

    pub fn forward<T: Element>(&self, g: &mut Graph<T>, p: &[Var], x: Var) -> Result<Var> {
        g.layer_norm(x, p[self.gamma], p[self.beta], LN_EPS)
    }
}

/// `[b,c,h,w]` feature map to `[b,h·w,c]` tokens.
pub fn to_tokens<T: Element>(g: &mut Graph<T>, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let flat = g.reshape(x, &[s[0], s[1], s[2] * s[3]])?;
    g.permute(flat, &[0, 2, 1])
}

/// `[b,h·w,c]` tokens back to a `[b,c,h,w]` feature map.
pub fn to_map<T: Element>(g: &mut Graph<T>, t: Var, h: usize, w: usize) -> Result<Var> {
    let s = g.shape(t).to_vec();
    let chw = g.permute(t, &[0, 2, 1])?;
    g.reshape(chw, &[s[0], s[2], h, w])
}
