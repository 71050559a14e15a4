use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gma::Block;
use super::layers::{to_map, to_tokens, Conv, Init, LayerNorm};
use super::spec::{Architecture, EncoderSpec, GmaBlockConfig, EMBED_CHANNELS, OUTPUT_STRIDE};
use crate::error::{Error, Result};
use crate::numerics::{Element, Graph, ParamStore, Tensor, Var};

/// Encoder output: `[batch, 256, H/16, W/16]`, all finite.
#[derive(Debug, Clone)]
pub struct Embedding<T>(Tensor<T>);

impl<T: Element> Embedding<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        let s = t.shape();
        if s.len() != 4 || s[1] != EMBED_CHANNELS {
            return Err(Error::dim(
                "embedding",
                format!("expected [b, {EMBED_CHANNELS}, h, w], got {s:?}"),
            ));
        }
        if !t.all_finite() {
            return Err(Error::NumericDomain {
                op: "embedding",
                detail: "non-finite values".into(),
            });
        }
        Ok(Embedding(t))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }

    pub fn shape(&self) -> &[usize] {
        self.0.shape()
    }

    /// Item `i` of the batch as a batch-1 embedding.
    pub fn item(&self, i: usize) -> Result<Embedding<T>> {
        let s = self.shape();
        if i >= s[0] {
            return Err(Error::dim(
                "embedding",
                format!("item {i} of batch {}", s[0]),
            ));
        }
        let per = s[1] * s[2] * s[3];
        let data = self.0.contiguous().data()[i * per..(i + 1) * per].to_vec();
        Ok(Embedding(Tensor::from_vec(&[1, s[1], s[2], s[3]], data)?))
    }
}

#[derive(Debug, Clone)]
struct ResBlock {
    conv1: Conv,
    conv2: Conv,
}

#[derive(Debug, Clone)]
enum StageBlocks {
    Attention(Vec<Block>),
    Residual(Vec<ResBlock>),
}

#[derive(Debug, Clone)]
struct Stage {
    transition: Option<Conv>,
    blocks: StageBlocks,
}

#[derive(Debug, Clone)]
enum Network {
    Vit { patch: Conv, blocks: Vec<Block> },
    Hierarchical { stem: Conv, stages: Vec<Stage> },
}

/// A built encoder: its spec, parameters and layer wiring.
#[derive(Debug, Clone)]
pub struct EncoderModel<T> {
    spec: EncoderSpec,
    params: ParamStore<T>,
    network: Network,
    neck: Conv,
    neck_norm: LayerNorm,
}

impl<T: Element> EncoderModel<T> {
    /// Builds and initializes an encoder deterministically from `seed`.
    pub fn build(spec: &EncoderSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut params = ParamStore::new();
        let mut init = Init {
            store: &mut params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let (network, last_dim) = match &spec.arch {
            Architecture::TeacherVit(v) => {
                let patch = Conv::new(
                    &mut init,
                    "patch_embed",
                    3,
                    v.width,
                    v.patch_size,
                    v.patch_size,
                    0,
                    true,
                )?;
                let cfg = GmaBlockConfig::new(v.width, v.heads, &[1], spec.mlp_ratio)?;
                let blocks = (0..v.depth)
                    .map(|i| Block::new(&mut init, &format!("blocks.{i}"), cfg.clone(), false))
                    .collect::<Result<Vec<_>>>()?;
                (Network::Vit { patch, blocks }, v.width)
            }
            Architecture::StudentGmf {
                stages,
                group_kernels,
            } => {
                let s0 = stages.stem_stride();
                let stem = Conv::new(&mut init, "stem", 3, stages.stage_dims[0], s0, s0, 0, true)?;
                let mut built = Vec::new();
                for i in 0..stages.num_stages() {
                    let dim = stages.stage_dims[i];
                    let transition = transition(&mut init, stages, i)?;
                    let cfg =
                        GmaBlockConfig::new(dim, stages.heads[i], group_kernels, spec.mlp_ratio)?;
                    let blocks = (0..stages.serial_depths[i])
                        .map(|j| {
                            Block::new(
                                &mut init,
                                &format!("stages.{i}.blocks.{j}"),
                                cfg.clone(),
                                true,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    built.push(Stage {
                        transition,
                        blocks: StageBlocks::Attention(blocks),
                    });
                }
                let network = Network::Hierarchical {
                    stem,
                    stages: built,
                };
                (network, *stages.stage_dims.last().unwrap())
            }
            Architecture::BaselineResnet(stages) => {
                let s0 = stages.stem_stride();
                let stem = Conv::new(&mut init, "stem", 3, stages.stage_dims[0], s0, s0, 0, true)?;
                let mut built = Vec::new();
                for i in 0..stages.num_stages() {
                    let dim = stages.stage_dims[i];
                    let transition = transition(&mut init, stages, i)?;
                    let blocks = (0..stages.serial_depths[i])
                        .map(|j| {
                            let p = format!("stages.{i}.blocks.{j}");
                            Ok(ResBlock {
                                conv1: Conv::new(
                                    &mut init,
                                    &format!("{p}.conv1"),
                                    dim,
                                    dim,
                                    3,
                                    1,
                                    1,
                                    true,
                                )?,
                                conv2: Conv::new(
                                    &mut init,
                                    &format!("{p}.conv2"),
                                    dim,
                                    dim,
                                    3,
                                    1,
                                    1,
                                    true,
                                )?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    built.push(Stage {
                        transition,
                        blocks: StageBlocks::Residual(blocks),
                    });
                }
                let network = Network::Hierarchical {
                    stem,
                    stages: built,
                };
                (network, *stages.stage_dims.last().unwrap())
            }
        };
        let neck = Conv::new(&mut init, "neck", last_dim, spec.embed_out, 1, 1, 0, true)?;
        let neck_norm = LayerNorm::new(&mut init, "neck.norm", spec.embed_out)?;
        Ok(EncoderModel {
            spec: spec.clone(),
            params,
            network,
            neck,
            neck_norm,
        })
    }

    /// Rebuilds the wiring for `spec` and adopts `params`, which must match
    /// the expected inventory exactly.
    pub fn from_params(spec: &EncoderSpec, params: ParamStore<T>) -> Result<Self> {
        let mut model = Self::build(spec, 0)?;
        let want = model.params.inventory();
        let got = params.inventory();
        if want != got {
            let detail = want
                .iter()
                .zip(&got)
                .find(|(a, b)| a != b)
                .map(|(a, b)| format!("expected {} {:?}, found {} {:?}", a.0, a.1, b.0, b.1))
                .unwrap_or_else(|| format!("expected {} tensors, found {}", want.len(), got.len()));
            return Err(Error::Config(format!(
                "parameters do not fit spec `{}`: {detail}",
                spec.name
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// `(name, shape)` of every parameter tensor.
    pub fn inventory(&self) -> Vec<(String, Vec<usize>)> {
        self.params.inventory()
    }

    /// Number of attention blocks (GMA or ViT) in the network.
    pub fn attention_block_count(&self) -> usize {
        match &self.network {
            Network::Vit { blocks, .. } => blocks.len(),
            Network::Hierarchical { stages, .. } => stages
                .iter()
                .map(|s| match &s.blocks {
                    StageBlocks::Attention(b) => b.len(),
                    StageBlocks::Residual(_) => 0,
                })
                .sum(),
        }
    }

    pub fn cast<U: Element>(&self) -> EncoderModel<U> {
        EncoderModel {
            spec: self.spec.clone(),
            params: self.params.cast(),
            network: self.network.clone(),
            neck: self.neck.clone(),
            neck_norm: self.neck_norm.clone(),
        }
    }

    /// Registers every parameter on `g`, as trainable leaves or constants.
    pub fn bind(&self, g: &mut Graph<T>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|(_, t)| {
                if trainable {
                    g.param(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect()
    }

    fn check_image(shape: &[usize]) -> Result<()> {
        if shape.len() != 4 || shape[1] != 3 {
            return Err(Error::dim(
                "encode",
                format!("expected [b, 3, H, W] image, got {shape:?}"),
            ));
        }
        if !shape[2].is_multiple_of(OUTPUT_STRIDE) || !shape[3].is_multiple_of(OUTPUT_STRIDE) {
            return Err(Error::dim(
                "encode",
                format!(
                    "image {}x{} is not divisible by {OUTPUT_STRIDE}",
                    shape[2], shape[3]
                ),
            ));
        }
        Ok(())
    }

    /// First layer only: the patch or stem projection.
    pub fn stem_forward(&self, g: &mut Graph<T>, p: &[Var], image: Var) -> Result<Var> {
        match &self.network {
            Network::Vit { patch, .. } => patch.forward(g, p, image),
            Network::Hierarchical { stem, .. } => stem.forward(g, p, image),
        }
    }

    /// Full forward pass on a bound graph.
    pub fn forward(&self, g: &mut Graph<T>, p: &[Var], image: Var) -> Result<Var> {
        Self::check_image(g.shape(image))?;
        let mut x = self.stem_forward(g, p, image)?;
        match &self.network {
            Network::Vit { blocks, .. } => {
                for b in blocks {
                    x = b.forward(g, p, x)?.output;
                }
            }
            Network::Hierarchical { stages, .. } => {
                if matches!(
                    stages.first().map(|s| &s.blocks),
                    Some(StageBlocks::Residual(_))
                ) {
                    x = g.relu(x)?;
                }
                for stage in stages {
                    if let Some(t) = &stage.transition {
                        x = t.forward(g, p, x)?;
                        if let StageBlocks::Residual(_) = stage.blocks {
                            x = g.relu(x)?;
                        }
                    }
                    match &stage.blocks {
                        StageBlocks::Attention(blocks) => {
                            for b in blocks {
                                x = b.forward(g, p, x)?.output;
                            }
                        }
                        StageBlocks::Residual(blocks) => {
                            for b in blocks {
                                let h = b.conv1.forward(g, p, x)?;
                                let h = g.relu(h)?;
                                let h = b.conv2.forward(g, p, h)?;
                                let sum = g.add(x, h)?;
                                x = g.relu(sum)?;
                            }
                        }
                    }
                }
            }
        }
        let y = self.neck.forward(g, p, x)?;
        norm_map(g, p, &self.neck_norm, y)
    }

    /// Inference on a `[b,3,H,W]` image batch.
    pub fn encode(&self, image: &Tensor<T>) -> Result<Embedding<T>> {
        Self::check_image(image.shape())?;
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let x = g.constant(image.clone());
        let y = self.forward(&mut g, &p, x)?;
        Embedding::new(g.value(y).clone())
    }

    /// Runs a forward pass and returns the FLOPs every primitive reported.
    pub fn instrumented_flops(&self, input_shape: &[usize]) -> Result<u64> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let x = g.constant(Tensor::zeros(input_shape));
        self.forward(&mut g, &p, x)?;
        Ok(g.flops())
    }
}

/// Layer norm over the channels of each position of a `[b,c,h,w]` map.
fn norm_map<T: Element>(g: &mut Graph<T>, p: &[Var], norm: &LayerNorm, x: Var) -> Result<Var> {
    let (h, w) = (g.shape(x)[2], g.shape(x)[3]);
    let t = to_tokens(g, x)?;
    let t = norm.forward(g, p, t)?;
    to_map(g, t, h, w)
}

fn transition<T: Element>(
    init: &mut Init<'_, T>,
    stages: &super::spec::StageSpec,
    i: usize,
) -> Result<Option<Conv>> {
    if i == 0 {
        return Ok(None);
    }
    let conv = Conv::new(
        init,
        &format!("stages.{i}.downsample"),
        stages.stage_dims[i - 1],
        stages.stage_dims[i],
        3,
        stages.transition_stride(i),
        1,
        true,
    )?;
    Ok(Some(conv))
}

/// Convenience: encode a single `[3,H,W]` image.
pub fn encode_image<T: Element>(
    model: &EncoderModel<T>,
    image: &Tensor<T>,
) -> Result<Embedding<T>> {
    let s = image.shape();
    if s.len() != 3 {
        return Err(Error::dim(
            "encode",
            format!("expected [3, H, W], got {s:?}"),
        ));
    }
    model.encode(&image.reshape(&[1, s[0], s[1], s[2]])?)
}

/// Stack `[3,H,W]` images into one `[n,3,H,W]` batch.
pub fn stack_images<T: Element>(images: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = images
        .first()
        .ok_or_else(|| Error::dim("stack", "no images"))?
        .shape()
        .to_vec();
    let mut data = Vec::with_capacity(images.len() * first.iter().product::<usize>());
    for img in images {
        if img.shape() != first.as_slice() {
            return Err(Error::dim(
                "stack",
                format!("{:?} vs {:?}", img.shape(), first),
            ));
        }
        data.extend_from_slice(img.contiguous().data());
    }
    let mut shape = vec![images.len()];
    shape.extend(first);
    Tensor::from_vec(&shape, data)
}
