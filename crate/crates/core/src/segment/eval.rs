use std::fmt::Write as _;
use std::path::Path;

use super::decode::{decode_mask, DEFAULT_TAU};
use super::mask::{iou, Mask};
use super::prompt::Prompt;
use crate::encoders::{encode_image, EncoderModel};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::numerics::{Element, Tensor};
use crate::parallel::try_map;

/// Image plus prompt in, mask out. Implementations must be read-only.
pub trait MaskPipeline: Sync {
    fn name(&self) -> &str;
    fn predict(&self, image: &Tensor<f32>, prompt: &Prompt) -> Result<Mask>;
}

/// An encoder followed by the shared similarity decoder.
pub struct EncoderPipeline<'a, T> {
    name: String,
    encoder: &'a EncoderModel<T>,
    tau: f64,
}

impl<'a, T: Element> EncoderPipeline<'a, T> {
    pub fn new(name: &str, encoder: &'a EncoderModel<T>) -> Self {
        Self::with_tau(name, encoder, DEFAULT_TAU)
    }

    pub fn with_tau(name: &str, encoder: &'a EncoderModel<T>, tau: f64) -> Self {
        EncoderPipeline {
            name: name.to_string(),
            encoder,
            tau,
        }
    }
}

impl<T: Element> MaskPipeline for EncoderPipeline<'_, T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn predict(&self, image: &Tensor<f32>, prompt: &Prompt) -> Result<Mask> {
        let s = image.shape();
        if s.len() != 3 {
            return Err(Error::dim(
                "predict",
                format!("expected [3, H, W], got {s:?}"),
            ));
        }
        prompt.validate(s[1], s[2])?;
        let emb = encode_image(self.encoder, &image.cast::<T>())?;
        decode_mask(&emb, prompt, (s[1], s[2]), self.tau, &self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub encoder: String,
    pub reference: String,
    pub prompt_kind: String,
    pub dataset: String,
    /// `(item id, IoU)` in dataset order.
    pub per_image: Vec<(String, f64)>,
    pub miou: f64,
}

impl EvalResult {
    /// `image_id,iou` rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,iou\n");
        for (id, v) in &self.per_image {
            let _ = writeln!(out, "{id},{v:.6}");
        }
        let _ = writeln!(out, "mean,{:.6}", self.miou);
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> String {
        format!(
            "encoder={} reference={} dataset={} prompts={} images={} mIoU={:.6}",
            self.encoder,
            self.reference,
            self.dataset,
            self.prompt_kind,
            self.per_image.len(),
            self.miou
        )
    }
}

/// Scores `student` masks against `teacher` masks, one prompt per image.
pub fn evaluate_miou(
    teacher: &dyn MaskPipeline,
    student: &dyn MaskPipeline,
    dataset: &Dataset,
    prompts: &[Prompt],
    jobs: usize,
) -> Result<EvalResult> {
    if dataset.is_empty() {
        return Err(Error::Protocol("dataset has no items".into()));
    }
    if prompts.len() != dataset.len() {
        return Err(Error::Protocol(format!(
            "{} prompts for {} images",
            prompts.len(),
            dataset.len()
        )));
    }
    let pairs: Vec<_> = dataset.items.iter().zip(prompts).collect();
    let scores = try_map(jobs, &pairs, |(item, prompt)| {
        let truth = teacher.predict(&item.image, prompt)?;
        let guess = student.predict(&item.image, prompt)?;
        iou(&guess, &truth)
    })?;
    let miou = scores.iter().sum::<f64>() / scores.len() as f64;
    let mut kinds: Vec<&str> = prompts.iter().map(Prompt::kind).collect();
    kinds.dedup();
    Ok(EvalResult {
        encoder: student.name().to_string(),
        reference: teacher.name().to_string(),
        prompt_kind: kinds.join("+"),
        dataset: dataset.name.clone(),
        per_image: dataset
            .items
            .iter()
            .map(|i| i.id.clone())
            .zip(scores)
            .collect(),
        miou,
    })
}
