//! Precomputed teacher embeddings.
//!
//! The teacher is frozen, so its embedding of each training image never
//! changes. Computing them once and reading them back each epoch removes
//! the teacher from the training loop entirely.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use sha2::{Digest, Sha256};

use super::config::DistillConfig;
use crate::encoders::{encode_image, Embedding, EncoderModel, EMBED_CHANNELS, OUTPUT_STRIDE};
use crate::error::{Error, Result};
use crate::io::{load_checkpoint, save_checkpoint, Checkpoint, Dataset};
use crate::numerics::Element;
use crate::parallel;

pub const CACHE_FILE: &str = "cache.gmkd";
pub const META_FILE: &str = "cache.meta";

/// Identifies a teacher by its spec and every parameter bit.
pub fn teacher_hash<T: Element>(teacher: &EncoderModel<T>) -> String {
    let mut h = Sha256::new();
    h.update(teacher.spec().to_kv().as_bytes());
    let mut buf = Vec::new();
    for (name, t) in teacher.params().iter() {
        buf.clear();
        buf.extend_from_slice(name.as_bytes());
        buf.push(0);
        buf.push(T::DTYPE.code());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        t.contiguous()
            .data()
            .iter()
            .for_each(|v| v.write_le(&mut buf));
        h.update(&buf);
    }
    hex::encode(h.finalize())
}

/// What a cache was built from. Any difference invalidates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub teacher_hash: String,
    pub image_size: usize,
}

impl Provenance {
    pub fn of<T: Element>(teacher: &EncoderModel<T>, image_size: usize) -> Self {
        Provenance {
            teacher_hash: teacher_hash(teacher),
            image_size,
        }
    }

    fn embedding_shape(&self) -> [usize; 4] {
        let s = self.image_size / OUTPUT_STRIDE;
        [1, EMBED_CHANNELS, s, s]
    }
}

/// Item id → teacher embedding, with the provenance it was built under.
#[derive(Debug, Clone)]
pub struct TeacherCache<T> {
    provenance: Provenance,
    entries: IndexMap<String, Embedding<T>>,
}

impl<T: Element> TeacherCache<T> {
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Embedding<T>> {
        self.entries.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Embedding<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Fails unless this cache was built from exactly `expected`.
    pub fn check(&self, expected: &Provenance) -> Result<()> {
        if self.provenance.image_size != expected.image_size {
            return Err(Error::CacheInvalid(format!(
                "built at image_size {}, requested {}",
                self.provenance.image_size, expected.image_size
            )));
        }
        if self.provenance.teacher_hash != expected.teacher_hash {
            return Err(Error::CacheInvalid(format!(
                "built for teacher {}, current teacher is {}",
                &self.provenance.teacher_hash[..12.min(self.provenance.teacher_hash.len())],
                &expected.teacher_hash[..12.min(expected.teacher_hash.len())]
            )));
        }
        Ok(())
    }

    pub fn meta_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "teacher_hash = {}", self.provenance.teacher_hash);
        let _ = writeln!(out, "image_size = {}", self.provenance.image_size);
        let _ = writeln!(out, "items = {}", self.entries.len());
        out
    }

    /// Writes `cache.gmkd` and `cache.meta` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut ck = Checkpoint::new();
        for (id, e) in &self.entries {
            ck.insert(
                id.clone(),
                crate::io::AnyTensor::from_tensor(e.tensor().clone()),
            )?;
        }
        save_checkpoint(&ck, &dir.join(CACHE_FILE))?;
        let meta = dir.join(META_FILE);
        std::fs::write(&meta, self.meta_text()).map_err(|e| Error::io(&meta, e))
    }

    /// Reads a cache written by [`TeacherCache::save`] without checking provenance.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let mut fields = IndexMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::CacheInvalid(format!("malformed meta line {line:?}")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let field = |k: &str| {
            fields
                .get(k)
                .cloned()
                .ok_or_else(|| Error::CacheInvalid(format!("meta lacks `{k}`")))
        };
        let parse = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::CacheInvalid(format!("meta `{k}` is not an integer")))
        };
        let provenance = Provenance {
            teacher_hash: field("teacher_hash")?,
            image_size: parse("image_size")?,
        };
        let items = parse("items")?;
        let ck = load_checkpoint(&dir.join(CACHE_FILE))?;
        if ck.len() != items {
            return Err(Error::CacheInvalid(format!(
                "meta lists {items} items, container has {}",
                ck.len()
            )));
        }
        let want = provenance.embedding_shape();
        let mut entries = IndexMap::new();
        for (id, t) in ck.iter() {
            if t.shape() != want {
                return Err(Error::CacheInvalid(format!(
                    "entry {id:?} has shape {:?}, image_size {} implies {want:?}",
                    t.shape(),
                    provenance.image_size
                )));
            }
            entries.insert(id.to_string(), Embedding::new(t.to_tensor())?);
        }
        Ok(TeacherCache {
            provenance,
            entries,
        })
    }

    /// Loads and checks against the current teacher and image size.
    pub fn load_for(dir: &Path, teacher: &EncoderModel<T>, image_size: usize) -> Result<Self> {
        let cache = Self::load(dir)?;
        cache.check(&Provenance::of(teacher, image_size))?;
        Ok(cache)
    }
}

/// Runs the frozen teacher once over every item, on up to `jobs` threads.
pub fn cache_teacher<T: Element>(
    teacher: &EncoderModel<T>,
    dataset: &Dataset,
    config: &DistillConfig,
    jobs: usize,
) -> Result<TeacherCache<T>> {
    config.validate()?;
    let size = config.image_size;
    let embeddings = parallel::try_map(jobs, &dataset.items, |item| {
        if item.image.shape() != [3, size, size] {
            return Err(Error::Ingestion {
                item: item.id.clone(),
                detail: format!(
                    "image shape {:?}, expected [3, {size}, {size}]",
                    item.image.shape()
                ),
            });
        }
        encode_image(teacher, &item.image.cast()).map_err(|e| match e {
            e if e.is_numeric() => e,
            e => Error::Ingestion {
                item: item.id.clone(),
                detail: e.to_string(),
            },
        })
    })?;
    let entries = dataset
        .items
        .iter()
        .map(|i| i.id.clone())
        .zip(embeddings)
        .collect();
    Ok(TeacherCache {
        provenance: Provenance::of(teacher, size),
        entries,
    })
}
