//! Line-oriented dataset manifests and the in-memory datasets they describe.
//!
//! ```text
//! # image_size=64
//! # split=train
//! synth_0000<TAB>synthetic:1234567
//! photo_a<TAB>images/a.ppm
//! ```
//!
//! `# key=value` lines carry metadata, other `#` lines are comments.
//! Relative file sources resolve against the manifest's directory.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::pnm::read_ppm;
use super::synth::{generate_image, generate_synthetic, ShapeInfo};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Synthetic(u64),
    File(PathBuf),
}

impl Source {
    fn parse(s: &str) -> Source {
        match s.strip_prefix("synthetic:").and_then(|n| n.parse().ok()) {
            Some(seed) => Source::Synthetic(seed),
            None => Source::File(PathBuf::from(s)),
        }
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Synthetic(seed) => write!(f, "synthetic:{seed}"),
            Source::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestItem {
    pub id: String,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub image_size: usize,
    pub split: String,
    items: Vec<ManifestItem>,
}

impl DatasetManifest {
    pub fn new(image_size: usize, split: &str, items: Vec<ManifestItem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for item in &items {
            if item.id.is_empty() || item.id.contains(['\t', '\n']) {
                return Err(Error::Config(format!("invalid item id {:?}", item.id)));
            }
            if !seen.insert(item.id.as_str()) {
                return Err(Error::Config(format!("duplicate item id {:?}", item.id)));
            }
        }
        Ok(DatasetManifest {
            image_size,
            split: split.to_string(),
            items,
        })
    }

    pub fn items(&self) -> &[ManifestItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("# image_size={}\n# split={}\n", self.image_size, self.split);
        for item in &self.items {
            let _ = writeln!(out, "{}\t{}", item.id, item.source);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut image_size = None;
        let mut split = "train".to_string();
        let mut items = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if let Some((k, v)) = meta.split_once('=') {
                    match k.trim() {
                        "image_size" => {
                            let v = v.trim();
                            image_size = Some(v.parse::<usize>().map_err(|_| {
                                Error::Config(format!(
                                    "manifest line {}: bad image_size {v:?}",
                                    n + 1
                                ))
                            })?);
                        }
                        "split" => split = v.trim().to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            let (id, source) = line.split_once('\t').ok_or_else(|| {
                Error::Config(format!(
                    "manifest line {}: expected `item_id<TAB>source`",
                    n + 1
                ))
            })?;
            items.push(ManifestItem {
                id: id.to_string(),
                source: Source::parse(source),
            });
        }
        let image_size = image_size
            .ok_or_else(|| Error::Config("manifest has no `# image_size=` header".into()))?;
        Self::new(image_size, &split, items)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    /// `[3, size, size]`, values in `[0, 1]`.
    pub image: Tensor<f32>,
    /// Drawn shapes for synthetic items, empty for files.
    pub shapes: Vec<ShapeInfo>,
}

/// Decoded images in manifest order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub image_size: usize,
    pub items: Vec<DatasetItem>,
}

impl Dataset {
    /// Decodes every item. `base` resolves relative file sources.
    pub fn from_manifest(manifest: &DatasetManifest, name: &str, base: &Path) -> Result<Self> {
        let size = manifest.image_size;
        let mut items = Vec::with_capacity(manifest.len());
        for item in manifest.items() {
            let ingest = |detail: String| Error::Ingestion {
                item: item.id.clone(),
                detail,
            };
            let (image, shapes) = match &item.source {
                Source::Synthetic(seed) => {
                    generate_image(*seed, size).map_err(|e| ingest(e.to_string()))?
                }
                Source::File(p) => {
                    let path = if p.is_absolute() {
                        p.clone()
                    } else {
                        base.join(p)
                    };
                    let image = read_ppm(&path).map_err(|e| ingest(e.to_string()))?;
                    if image.shape() != [3, size, size] {
                        return Err(ingest(format!(
                            "image is {}x{}, manifest expects {size}x{size}",
                            image.shape()[2],
                            image.shape()[1]
                        )));
                    }
                    (image, Vec::new())
                }
            };
            items.push(DatasetItem {
                id: item.id.clone(),
                image,
                shapes,
            });
        }
        Ok(Dataset {
            name: name.to_string(),
            image_size: size,
            items,
        })
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let name = manifest_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        Self::from_manifest(&manifest, &name, base)
    }

    pub fn synthetic(seed: u64, count: usize, image_size: usize) -> Result<Self> {
        let (manifest, _) = generate_synthetic(seed, count, image_size)?;
        Self::from_manifest(&manifest, "synthetic", Path::new("."))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items reordered by `order`.
    pub fn select(&self, order: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            image_size: self.image_size,
            items: order.iter().map(|&i| self.items[i].clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_text_round_trips() {
        let (m, _) = generate_synthetic(3, 5, 32).unwrap();
        let back = DatasetManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.items()[0].id, "synth_0000");
    }

    #[test]
    fn duplicate_ids_and_missing_size_are_errors() {
        assert!(
            DatasetManifest::parse("# image_size=16\na\tsynthetic:1\na\tsynthetic:2\n").is_err()
        );
        assert!(DatasetManifest::parse("a\tsynthetic:1\n").is_err());
        assert!(DatasetManifest::parse("# image_size=16\nno tab here\n").is_err());
    }

    #[test]
    fn missing_file_names_the_item() {
        let m = DatasetManifest::parse("# image_size=16\nphoto\t/nonexistent/x.ppm\n").unwrap();
        match Dataset::from_manifest(&m, "t", Path::new(".")) {
            Err(Error::Ingestion { item, .. }) => assert_eq!(item, "photo"),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }
}
