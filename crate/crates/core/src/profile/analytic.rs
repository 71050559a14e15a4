//! Closed-form parameter and FLOP counts, walked from a spec without building a model.

use std::fmt::Write as _;

use crate::encoders::{Architecture, EncoderSpec, GmaBlockConfig, OUTPUT_STRIDE};
use crate::error::{Error, Result};

/// Counting rules, printed at the top of every report.
pub const FLOP_CONVENTION: &str = "1 multiply-accumulate = 2 FLOPs; conv = 2*out*(cin/groups)*kh*kw (+out with bias); \
matmul = 2*m*n*k, attention QK^T and AV included; elementwise, bias, softmax, scale and layer norm = 1 per element; \
reshapes and permutes = 0";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRow {
    pub name: String,
    pub params: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileReport {
    pub model: String,
    /// `None` for a parameter-only report.
    pub input_shape: Option<Vec<usize>>,
    pub rows: Vec<LayerRow>,
}

impl ProfileReport {
    pub fn total_params(&self) -> u64 {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.rows.iter().map(|r| r.flops).sum()
    }

    /// Rolls each attention or residual block up into one row, keeping order.
    pub fn by_block(&self) -> ProfileReport {
        let mut rows: Vec<LayerRow> = Vec::new();
        for r in &self.rows {
            let parts: Vec<&str> = r.name.split('.').collect();
            let key = match parts.iter().position(|&p| p == "blocks") {
                Some(i) if i + 1 < parts.len() => parts[..=i + 1].join("."),
                _ => r.name.clone(),
            };
            match rows.last_mut() {
                Some(last) if last.name == key => {
                    last.params += r.params;
                    last.flops += r.flops;
                }
                _ => rows.push(LayerRow {
                    name: key,
                    params: r.params,
                    flops: r.flops,
                }),
            }
        }
        ProfileReport {
            rows,
            ..self.clone()
        }
    }

    fn header(&self) -> String {
        let shape = match &self.input_shape {
            Some(s) => s
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
            None => "none (parameters only)".into(),
        };
        format!(
            "# model: {}\n# input: {shape}\n# flops: {FLOP_CONVENTION}\n",
            self.model
        )
    }

    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = self.header();
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>20}",
            "layer", "params", "flops"
        );
        for r in &self.rows {
            let _ = writeln!(out, "{:<width$}  {:>14}  {:>20}", r.name, r.params, r.flops);
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>20}",
            "total",
            self.total_params(),
            self.total_flops()
        );
        let _ = writeln!(
            out,
            "# {:.2}M params, {:.2}M FLOPs",
            self.total_params() as f64 / 1e6,
            self.total_flops() as f64 / 1e6
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header();
        out.push_str("layer,params,flops\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.name, r.params, r.flops);
        }
        let _ = writeln!(out, "total,{},{}", self.total_params(), self.total_flops());
        out
    }
}

/// Feature map flowing through the walk.
#[derive(Debug, Clone, Copy)]
struct Map {
    b: u64,
    c: u64,
    h: u64,
    w: u64,
}

impl Map {
    fn numel(&self) -> u64 {
        self.b * self.c * self.h * self.w
    }

    fn tokens(&self) -> u64 {
        self.b * self.h * self.w
    }
}

#[derive(Default)]
struct Walker {
    rows: Vec<LayerRow>,
}

impl Walker {
    fn row(&mut self, name: String, params: u64, flops: u64) {
        self.rows.push(LayerRow {
            name,
            params,
            flops,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn conv(
        &mut self,
        name: String,
        x: Map,
        out_c: u64,
        k: u64,
        stride: u64,
        pad: u64,
        groups: u64,
        bias: bool,
    ) -> Map {
        let y = Map {
            b: x.b,
            c: out_c,
            h: (x.h + 2 * pad - k) / stride + 1,
            w: (x.w + 2 * pad - k) / stride + 1,
        };
        let per_out = x.c / groups * k * k;
        let params = out_c * per_out + if bias { out_c } else { 0 };
        let flops = 2 * y.numel() * per_out + if bias { y.numel() } else { 0 };
        self.row(name, params, flops);
        y
    }

    fn linear(&mut self, name: String, rows: u64, in_dim: u64, out_dim: u64) {
        self.row(
            name,
            in_dim * out_dim + out_dim,
            2 * rows * in_dim * out_dim + rows * out_dim,
        );
    }

    fn layer_norm(&mut self, name: String, rows: u64, dim: u64) {
        self.row(name, 2 * dim, rows * dim);
    }

    fn block(&mut self, prefix: &str, x: Map, cfg: &GmaBlockConfig, group_mix: bool) {
        let (dim, r, n) = (cfg.dim as u64, x.tokens(), x.h * x.w);
        self.layer_norm(format!("{prefix}.norm1"), r, dim);
        if group_mix {
            let seg = cfg.segment_width() as u64;
            for (i, &k) in cfg.group_kernels.iter().enumerate() {
                let k = k as u64;
                let part = Map { c: seg, ..x };
                self.conv(
                    format!("{prefix}.agg{i}"),
                    part,
                    seg,
                    k,
                    1,
                    k / 2,
                    seg,
                    false,
                );
            }
        }
        self.linear(format!("{prefix}.attn.qkv"), r, dim, 3 * dim);
        let heads = cfg.heads as u64;
        let d = dim / heads;
        let scores = x.b * heads * n * n;
        // QK^T, scale, softmax, AV
        self.row(
            format!("{prefix}.attn.core"),
            0,
            2 * scores * d + scores + scores + 2 * scores * d,
        );
        self.linear(format!("{prefix}.attn.proj"), r, dim, dim);
        self.row(format!("{prefix}.residual1"), 0, r * dim);
        self.layer_norm(format!("{prefix}.norm2"), r, dim);
        let hidden = cfg.mlp_hidden() as u64;
        self.linear(format!("{prefix}.mlp.fc1"), r, dim, hidden);
        self.row(format!("{prefix}.mlp.gelu"), 0, r * hidden);
        self.linear(format!("{prefix}.mlp.fc2"), r, hidden, dim);
        self.row(format!("{prefix}.residual2"), 0, r * dim);
    }

    fn encoder(&mut self, spec: &EncoderSpec, x: Map) -> Result<()> {
        let mut x = match &spec.arch {
            Architecture::TeacherVit(v) => {
                let p = v.patch_size as u64;
                let mut x = self.conv("patch_embed".into(), x, v.width as u64, p, p, 0, 1, true);
                let cfg = GmaBlockConfig::new(v.width, v.heads, &[1], spec.mlp_ratio)?;
                for i in 0..v.depth {
                    self.block(&format!("blocks.{i}"), x, &cfg, false);
                }
                x.c = v.width as u64;
                x
            }
            Architecture::StudentGmf {
                stages,
                group_kernels,
            } => {
                let s0 = stages.stem_stride() as u64;
                let mut x = self.conv(
                    "stem".into(),
                    x,
                    stages.stage_dims[0] as u64,
                    s0,
                    s0,
                    0,
                    1,
                    true,
                );
                for i in 0..stages.num_stages() {
                    let dim = stages.stage_dims[i];
                    if i > 0 {
                        let s = stages.transition_stride(i) as u64;
                        x = self.conv(
                            format!("stages.{i}.downsample"),
                            x,
                            dim as u64,
                            3,
                            s,
                            1,
                            1,
                            true,
                        );
                    }
                    let cfg =
                        GmaBlockConfig::new(dim, stages.heads[i], group_kernels, spec.mlp_ratio)?;
                    for j in 0..stages.serial_depths[i] {
                        self.block(&format!("stages.{i}.blocks.{j}"), x, &cfg, true);
                    }
                }
                x
            }
            Architecture::BaselineResnet(stages) => {
                let s0 = stages.stem_stride() as u64;
                let mut x = self.conv(
                    "stem".into(),
                    x,
                    stages.stage_dims[0] as u64,
                    s0,
                    s0,
                    0,
                    1,
                    true,
                );
                self.row("stem.relu".into(), 0, x.numel());
                for i in 0..stages.num_stages() {
                    let dim = stages.stage_dims[i] as u64;
                    if i > 0 {
                        let s = stages.transition_stride(i) as u64;
                        x = self.conv(format!("stages.{i}.downsample"), x, dim, 3, s, 1, 1, true);
                        self.row(format!("stages.{i}.downsample.relu"), 0, x.numel());
                    }
                    for j in 0..stages.serial_depths[i] {
                        let p = format!("stages.{i}.blocks.{j}");
                        self.conv(format!("{p}.conv1"), x, dim, 3, 1, 1, 1, true);
                        self.row(format!("{p}.relu1"), 0, x.numel());
                        self.conv(format!("{p}.conv2"), x, dim, 3, 1, 1, 1, true);
                        // residual add, then relu
                        self.row(format!("{p}.residual"), 0, 2 * x.numel());
                    }
                }
                x
            }
        };
        x = self.conv("neck".into(), x, spec.embed_out as u64, 1, 1, 0, 1, true);
        self.layer_norm("neck.norm".into(), x.tokens(), x.c);
        Ok(())
    }
}

fn check_input(shape: &[usize], channels: usize, stride: usize) -> Result<Map> {
    if shape.len() != 4 || shape[1] != channels || shape[0] == 0 {
        return Err(Error::dim(
            "profile",
            format!("input shape must be [b, {channels}, H, W], got {shape:?}"),
        ));
    }
    if shape[2] == 0
        || shape[3] == 0
        || !shape[2].is_multiple_of(stride)
        || !shape[3].is_multiple_of(stride)
    {
        return Err(Error::dim(
            "profile",
            format!(
                "{}x{} input is not a positive multiple of {stride}",
                shape[2], shape[3]
            ),
        ));
    }
    let d: Vec<u64> = shape.iter().map(|&v| v as u64).collect();
    Ok(Map {
        b: d[0],
        c: d[1],
        h: d[2],
        w: d[3],
    })
}

/// Per-layer parameter counts. FLOP columns are zero.
pub fn count_params(spec: &EncoderSpec) -> Result<ProfileReport> {
    spec.validate()?;
    let mut w = Walker::default();
    let probe = Map {
        b: 1,
        c: 3,
        h: OUTPUT_STRIDE as u64,
        w: OUTPUT_STRIDE as u64,
    };
    w.encoder(spec, probe)?;
    for r in &mut w.rows {
        r.flops = 0;
    }
    Ok(ProfileReport {
        model: spec.name.clone(),
        input_shape: None,
        rows: w.rows,
    })
}

/// Per-layer parameters and FLOPs for one forward pass at `input_shape` (`[b,3,H,W]`).
pub fn count_flops(spec: &EncoderSpec, input_shape: &[usize]) -> Result<ProfileReport> {
    spec.validate()?;
    let x = check_input(input_shape, 3, OUTPUT_STRIDE)?;
    let mut w = Walker::default();
    w.encoder(spec, x)?;
    Ok(ProfileReport {
        model: spec.name.clone(),
        input_shape: Some(input_shape.to_vec()),
        rows: w.rows,
    })
}

/// One group-mix block on a `[b, dim, h, w]` map, prefixed `block`.
pub fn count_block(config: &GmaBlockConfig, input_shape: &[usize]) -> Result<ProfileReport> {
    config.validate()?;
    let x = check_input(input_shape, config.dim, 1)?;
    let mut w = Walker::default();
    w.block("block", x, config, true);
    Ok(ProfileReport {
        model: "gma_block".into(),
        input_shape: Some(input_shape.to_vec()),
        rows: w.rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_layers() {
        let mut w = Walker::default();
        w.linear("fc".into(), 1, 8, 4);
        let x = Map {
            b: 1,
            c: 3,
            h: 4,
            w: 4,
        };
        w.conv("conv".into(), x, 16, 3, 1, 1, 1, true);
        let x = Map {
            b: 1,
            c: 8,
            h: 4,
            w: 4,
        };
        w.conv("pw".into(), x, 8, 1, 1, 0, 1, false);
        assert_eq!(w.rows[0].params, 36);
        assert_eq!(w.rows[1].params, 448);
        assert_eq!(w.rows[2].flops, 2048);
    }

    #[test]
    fn block_rollup_keeps_totals() {
        let spec = EncoderSpec::teacher_vit("t", 32, 2, 2);
        let full = count_flops(&spec, &[1, 3, 32, 32]).unwrap();
        let g = full.by_block();
        assert_eq!(g.total_params(), full.total_params());
        assert_eq!(g.total_flops(), full.total_flops());
        assert_eq!(
            g.rows
                .iter()
                .filter(|r| r.name.starts_with("blocks."))
                .count(),
            2
        );
    }

    #[test]
    fn bad_input_shapes() {
        let spec = EncoderSpec::teacher_vit("t", 32, 2, 2);
        assert!(count_flops(&spec, &[1, 3, 30, 32]).is_err());
        assert!(count_flops(&spec, &[1, 1, 32, 32]).is_err());
        assert!(count_flops(&spec, &[3, 32, 32]).is_err());
    }
}
