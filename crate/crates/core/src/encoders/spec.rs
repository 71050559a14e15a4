//! Encoder architecture descriptions and their plain-text config format.
//!
//! A spec file is a list of `key = value` lines; `#` starts a comment.
//! List values are comma separated. Example:
//!
//! ```text
//! name = gmf_2282
//! family = student_gmf
//! embed_out = 256
//! mlp_ratio = 4
//! serial_depths = 2,2,8,2
//! stage_dims = 40,80,160,160
//! heads = 1,2,4,4
//! group_kernels = 1,3,5,7
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Required embedding width of every encoder.
pub const EMBED_CHANNELS: usize = 256;
/// Required total downsampling of every encoder.
pub const OUTPUT_STRIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    TeacherVit,
    StudentGmf,
    BaselineResnet,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::TeacherVit => "teacher_vit",
            Family::StudentGmf => "student_gmf",
            Family::BaselineResnet => "baseline_resnet",
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "teacher_vit" => Ok(Family::TeacherVit),
            "student_gmf" => Ok(Family::StudentGmf),
            "baseline_resnet" => Ok(Family::BaselineResnet),
            other => Err(Error::Config(format!("unknown encoder family `{other}`"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-stage depth, width and head count of a hierarchical encoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageSpec {
    pub serial_depths: Vec<usize>,
    pub stage_dims: Vec<usize>,
    pub heads: Vec<usize>,
}

impl StageSpec {
    pub fn new(serial_depths: &[usize], stage_dims: &[usize], heads: &[usize]) -> Self {
        StageSpec {
            serial_depths: serial_depths.to_vec(),
            stage_dims: stage_dims.to_vec(),
            heads: heads.to_vec(),
        }
    }

    pub fn num_stages(&self) -> usize {
        self.serial_depths.len()
    }

    /// Stride of the patch stem so that the stages reach a total of 16.
    pub fn stem_stride(&self) -> usize {
        OUTPUT_STRIDE >> (self.num_stages() - 2)
    }

    /// Stride of the transition conv entering stage `i` (`i >= 1`). All but
    /// the final transition halve the resolution.
    pub fn transition_stride(&self, i: usize) -> usize {
        if i + 1 < self.num_stages() {
            2
        } else {
            1
        }
    }

    pub fn validate(&self, check_heads: bool) -> Result<()> {
        let n = self.serial_depths.len();
        if !(n == 3 || n == 4) {
            return Err(Error::Config(format!(
                "serial_depths must list 3 or 4 stages, got {n}"
            )));
        }
        if self.stage_dims.len() != n || self.heads.len() != n {
            return Err(Error::Config(format!(
                "serial_depths ({n}), stage_dims ({}) and heads ({}) must have equal length",
                self.stage_dims.len(),
                self.heads.len()
            )));
        }
        if self.serial_depths.contains(&0)
            || self.stage_dims.contains(&0)
            || self.heads.contains(&0)
        {
            return Err(Error::Config(
                "stage depths, dims and heads must be positive".into(),
            ));
        }
        if check_heads {
            for (dim, heads) in self.stage_dims.iter().zip(&self.heads) {
                if dim % heads != 0 {
                    return Err(Error::Config(format!(
                        "stage dim {dim} is not divisible by {heads} heads"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Plain ViT: patch-16 stem, `depth` pre-norm transformer blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VitSpec {
    pub patch_size: usize,
    pub width: usize,
    pub depth: usize,
    pub heads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    TeacherVit(VitSpec),
    StudentGmf {
        stages: StageSpec,
        group_kernels: Vec<usize>,
    },
    BaselineResnet(StageSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    /// Variant label used in reports.
    pub name: String,
    pub embed_out: usize,
    pub mlp_ratio: f64,
    pub arch: Architecture,
}

impl EncoderSpec {
    pub fn teacher_vit(name: &str, width: usize, depth: usize, heads: usize) -> Self {
        EncoderSpec {
            name: name.into(),
            embed_out: EMBED_CHANNELS,
            mlp_ratio: 2.0,
            arch: Architecture::TeacherVit(VitSpec {
                patch_size: OUTPUT_STRIDE,
                width,
                depth,
                heads,
            }),
        }
    }

    pub fn student_gmf(name: &str, stages: StageSpec, group_kernels: &[usize]) -> Self {
        EncoderSpec {
            name: name.into(),
            embed_out: EMBED_CHANNELS,
            mlp_ratio: 2.0,
            arch: Architecture::StudentGmf {
                stages,
                group_kernels: group_kernels.to_vec(),
            },
        }
    }

    pub fn baseline_resnet(name: &str, serial_depths: &[usize], stage_dims: &[usize]) -> Self {
        EncoderSpec {
            name: name.into(),
            embed_out: EMBED_CHANNELS,
            mlp_ratio: 2.0,
            arch: Architecture::BaselineResnet(StageSpec::new(
                serial_depths,
                stage_dims,
                &vec![1; serial_depths.len()],
            )),
        }
    }

    pub fn with_mlp_ratio(mut self, ratio: f64) -> Self {
        self.mlp_ratio = ratio;
        self
    }

    pub fn family(&self) -> Family {
        match self.arch {
            Architecture::TeacherVit(_) => Family::TeacherVit,
            Architecture::StudentGmf { .. } => Family::StudentGmf,
            Architecture::BaselineResnet(_) => Family::BaselineResnet,
        }
    }

    pub fn stages(&self) -> Option<&StageSpec> {
        match &self.arch {
            Architecture::TeacherVit(_) => None,
            Architecture::StudentGmf { stages, .. } | Architecture::BaselineResnet(stages) => {
                Some(stages)
            }
        }
    }

    pub fn mlp_hidden(&self, dim: usize) -> usize {
        ((dim as f64 * self.mlp_ratio).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_out != EMBED_CHANNELS {
            return Err(Error::Config(format!(
                "embed_out must be {EMBED_CHANNELS}, got {}",
                self.embed_out
            )));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(Error::Config(format!(
                "mlp_ratio must be positive, got {}",
                self.mlp_ratio
            )));
        }
        match &self.arch {
            Architecture::TeacherVit(v) => {
                if v.patch_size != OUTPUT_STRIDE {
                    return Err(Error::Config(format!(
                        "teacher patch_size must be {OUTPUT_STRIDE}, got {}",
                        v.patch_size
                    )));
                }
                if v.width == 0 || v.depth == 0 || v.heads == 0 {
                    return Err(Error::Config(
                        "teacher width, depth and heads must be positive".into(),
                    ));
                }
                if v.width % v.heads != 0 {
                    return Err(Error::Config(format!(
                        "teacher width {} is not divisible by {} heads",
                        v.width, v.heads
                    )));
                }
            }
            Architecture::StudentGmf {
                stages,
                group_kernels,
            } => {
                stages.validate(true)?;
                GmaBlockConfig::check_kernels(group_kernels)?;
                for &dim in &stages.stage_dims {
                    if dim % group_kernels.len() != 0 {
                        return Err(Error::Config(format!(
                            "stage dim {dim} is not divisible into {} aggregator segments",
                            group_kernels.len()
                        )));
                    }
                }
            }
            Architecture::BaselineResnet(stages) => stages.validate(false)?,
        }
        Ok(())
    }

    /// Canonical key-value text. Parsing it back yields an equal spec.
    pub fn to_kv(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let mut out = format!(
            "name = {}\nfamily = {}\nembed_out = {}\nmlp_ratio = {}\n",
            self.name,
            self.family(),
            self.embed_out,
            self.mlp_ratio
        );
        match &self.arch {
            Architecture::TeacherVit(v) => {
                out += &format!(
                    "patch_size = {}\nwidth = {}\ndepth = {}\nheads = {}\n",
                    v.patch_size, v.width, v.depth, v.heads
                );
            }
            Architecture::StudentGmf {
                stages,
                group_kernels,
            } => {
                out += &format!(
                    "serial_depths = {}\nstage_dims = {}\nheads = {}\ngroup_kernels = {}\n",
                    list(&stages.serial_depths),
                    list(&stages.stage_dims),
                    list(&stages.heads),
                    list(group_kernels)
                );
            }
            Architecture::BaselineResnet(stages) => {
                out += &format!(
                    "serial_depths = {}\nstage_dims = {}\n",
                    list(&stages.serial_depths),
                    list(&stages.stage_dims)
                );
            }
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = k.trim().to_string();
            if kv.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }

        let mut take = |key: &str| kv.remove(key);
        let family: Family = take("family")
            .ok_or_else(|| Error::Config("missing key `family`".into()))?
            .parse()?;
        let name = take("name").unwrap_or_else(|| family.as_str().to_string());
        let embed_out = match take("embed_out") {
            Some(v) => parse_usize("embed_out", &v)?,
            None => EMBED_CHANNELS,
        };
        let mlp_ratio = match take("mlp_ratio") {
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("mlp_ratio: `{v}` is not a number")))?,
            None => 2.0,
        };
        let mut need =
            |key: &str| take(key).ok_or_else(|| Error::Config(format!("missing key `{key}`")));

        let arch = match family {
            Family::TeacherVit => {
                let patch_size = parse_usize("patch_size", &need("patch_size")?)?;
                let width = parse_usize("width", &need("width")?)?;
                let depth = parse_usize("depth", &need("depth")?)?;
                let heads = parse_usize("heads", &need("heads")?)?;
                Architecture::TeacherVit(VitSpec {
                    patch_size,
                    width,
                    depth,
                    heads,
                })
            }
            Family::StudentGmf => {
                let stages = StageSpec {
                    serial_depths: parse_list("serial_depths", &need("serial_depths")?)?,
                    stage_dims: parse_list("stage_dims", &need("stage_dims")?)?,
                    heads: parse_list("heads", &need("heads")?)?,
                };
                let group_kernels = parse_list("group_kernels", &need("group_kernels")?)?;
                Architecture::StudentGmf {
                    stages,
                    group_kernels,
                }
            }
            Family::BaselineResnet => {
                let serial_depths = parse_list("serial_depths", &need("serial_depths")?)?;
                let stage_dims = parse_list("stage_dims", &need("stage_dims")?)?;
                let heads = vec![1; serial_depths.len()];
                Architecture::BaselineResnet(StageSpec {
                    serial_depths,
                    stage_dims,
                    heads,
                })
            }
        };
        if let Some(extra) = kv.keys().next() {
            return Err(Error::Config(format!(
                "unknown key `{extra}` for family {family}"
            )));
        }
        let spec = EncoderSpec {
            name,
            embed_out,
            mlp_ratio,
            arch,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().as_bytes()))
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_usize(key, s)).collect()
}

/// Shape of one group-mix attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct GmaBlockConfig {
    pub dim: usize,
    pub heads: usize,
    /// One odd kernel size per channel segment; 1 is the token-level path.
    pub group_kernels: Vec<usize>,
    pub mlp_ratio: f64,
}

impl GmaBlockConfig {
    pub fn new(dim: usize, heads: usize, group_kernels: &[usize], mlp_ratio: f64) -> Result<Self> {
        let cfg = GmaBlockConfig {
            dim,
            heads,
            group_kernels: group_kernels.to_vec(),
            mlp_ratio,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn check_kernels(kernels: &[usize]) -> Result<()> {
        if kernels.is_empty() {
            return Err(Error::Config("group_kernels must not be empty".into()));
        }
        if let Some(k) = kernels.iter().find(|&&k| k % 2 == 0) {
            return Err(Error::Config(format!("group kernel size {k} is not odd")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::check_kernels(&self.group_kernels)?;
        if self.dim == 0 || self.heads == 0 {
            return Err(Error::Config("block dim and heads must be positive".into()));
        }
        if !self.dim.is_multiple_of(self.group_kernels.len()) {
            return Err(Error::Config(format!(
                "dim {} is not divisible into {} aggregator segments",
                self.dim,
                self.group_kernels.len()
            )));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if !(self.mlp_ratio.is_finite() && self.mlp_ratio > 0.0) {
            return Err(Error::Config(format!(
                "mlp_ratio must be positive, got {}",
                self.mlp_ratio
            )));
        }
        Ok(())
    }

    pub fn segment_width(&self) -> usize {
        self.dim / self.group_kernels.len()
    }

    pub fn mlp_hidden(&self) -> usize {
        ((self.dim as f64 * self.mlp_ratio).round() as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gmf() -> EncoderSpec {
        EncoderSpec::student_gmf(
            "gmf_2282",
            StageSpec::new(&[2, 2, 8, 2], &[40, 80, 160, 160], &[1, 2, 4, 4]),
            &[1, 3, 5, 7],
        )
    }

    #[test]
    fn kv_round_trip_all_families() {
        for spec in [
            gmf(),
            EncoderSpec::teacher_vit("vit", 32, 4, 2),
            EncoderSpec::baseline_resnet("res", &[2, 2, 2, 2], &[16, 32, 64, 64])
                .with_mlp_ratio(1.5),
        ] {
            let text = spec.to_kv();
            let back = EncoderSpec::from_kv(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.to_kv(), text);
            assert_eq!(back.hash(), spec.hash());
        }
    }

    #[test]
    fn parser_reports_problems() {
        assert!(EncoderSpec::from_kv("family = nope").is_err());
        assert!(EncoderSpec::from_kv("family = teacher_vit\nwidth = 8").is_err());
        let extra = format!("{}bogus = 1\n", gmf().to_kv());
        let err = EncoderSpec::from_kv(&extra).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }

    #[test]
    fn indivisible_dim_is_rejected() {
        let spec = EncoderSpec::student_gmf(
            "bad",
            StageSpec::new(&[1, 1, 1, 1], &[33, 8, 8, 8], &[4, 1, 1, 1]),
            &[1],
        );
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("33") && err.contains("4 heads"), "{err}");
        assert!(GmaBlockConfig::new(33, 4, &[1], 2.0).is_err());
        assert!(GmaBlockConfig::new(12, 1, &[1, 2, 5], 2.0).is_err());
    }

    #[test]
    fn stage_count_and_lengths() {
        let s = StageSpec::new(&[1, 1], &[8, 8], &[1, 1]);
        assert!(s.validate(true).is_err());
        let s = StageSpec::new(&[1, 1, 1], &[8, 8], &[1, 1, 1]);
        assert!(s.validate(true).is_err());
    }

    #[test]
    fn strides_compose_to_sixteen() {
        for n in [3usize, 4] {
            let s = StageSpec::new(&vec![1; n], &vec![8; n], &vec![1; n]);
            let total: usize =
                s.stem_stride() * (1..n).map(|i| s.transition_stride(i)).product::<usize>();
            assert_eq!(total, OUTPUT_STRIDE);
        }
    }
}
