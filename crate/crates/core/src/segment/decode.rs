//! The similarity-threshold mask decoder.
//!
//! A query vector is read from the embedding at the prompt, every embedding
//! cell is scored by cosine similarity to it, the score map is bilinearly
//! upsampled to image size and thresholded. Teacher and student pipelines
//! share this decoder, so mask differences come from the encoders alone.

use super::mask::Mask;
use super::prompt::Prompt;
use crate::encoders::{Embedding, OUTPUT_STRIDE};
use crate::error::{Error, Result};
use crate::numerics::Element;

pub const DEFAULT_TAU: f64 = 0.5;

/// Cosine similarity per embedding cell, `[h, w]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl SimilarityMap {
    /// Bilinear resize with pixel-centre alignment and edge clamping.
    pub fn upsample(&self, out_h: usize, out_w: usize) -> Vec<f64> {
        let axis = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
            let scale = n_in as f64 / n_out as f64;
            (0..n_out)
                .map(|i| {
                    let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                    let lo = pos.floor() as usize;
                    let hi = (lo + 1).min(n_in - 1);
                    (lo, hi, pos - lo as f64)
                })
                .collect()
        };
        let (ys, xs) = (axis(self.height, out_h), axis(self.width, out_w));
        let at = |y: usize, x: usize| self.values[y * self.width + x];
        let mut out = Vec::with_capacity(out_h * out_w);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        out
    }
}

/// Channel vectors of a batch-1 embedding, one per cell.
fn cells<T: Element>(embedding: &Embedding<T>) -> Result<(usize, usize, Vec<Vec<f64>>)> {
    let s = embedding.shape();
    if s[0] != 1 {
        return Err(Error::dim(
            "decode_mask",
            format!("batch size {} is not 1", s[0]),
        ));
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    let data = embedding.tensor().to_f64_vec();
    let vectors = (0..h * w)
        .map(|i| (0..c).map(|ch| data[ch * h * w + i]).collect())
        .collect();
    Ok((h, w, vectors))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Query at a continuous embedding coordinate, bilinearly interpolated.
fn sample(vectors: &[Vec<f64>], h: usize, w: usize, ey: f64, ex: f64) -> Vec<f64> {
    let (ey, ex) = (ey.clamp(0.0, (h - 1) as f64), ex.clamp(0.0, (w - 1) as f64));
    let (y0, x0) = (ey.floor() as usize, ex.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    let (fy, fx) = (ey - y0 as f64, ex - x0 as f64);
    let weights = [
        (y0, x0, (1.0 - fy) * (1.0 - fx)),
        (y0, x1, (1.0 - fy) * fx),
        (y1, x0, fy * (1.0 - fx)),
        (y1, x1, fy * fx),
    ];
    let mut q = vec![0.0; vectors[0].len()];
    for (y, x, wt) in weights {
        for (qv, v) in q.iter_mut().zip(&vectors[y * w + x]) {
            *qv += wt * v;
        }
    }
    q
}

/// Scores every embedding cell against the query picked out by `prompt`.
pub fn similarity_map<T: Element>(
    embedding: &Embedding<T>,
    prompt: &Prompt,
    image_size: (usize, usize),
) -> Result<SimilarityMap> {
    let (img_h, img_w) = image_size;
    prompt.validate(img_h, img_w)?;
    let (h, w, vectors) = cells(embedding)?;
    if h * OUTPUT_STRIDE != img_h || w * OUTPUT_STRIDE != img_w {
        return Err(Error::dim(
            "decode_mask",
            format!("{h}x{w} embedding does not belong to a {img_h}x{img_w} image"),
        ));
    }
    let stride = OUTPUT_STRIDE as f64;
    let query = match *prompt {
        Prompt::Point { x, y } => sample(&vectors, h, w, y / stride - 0.5, x / stride - 0.5),
        Prompt::Box { x0, y0, x1, y1 } => {
            let span = |lo: f64, hi: f64, n: usize| {
                let a = (lo / stride).floor() as usize;
                let b = ((hi / stride).ceil() as usize).clamp(a + 1, n);
                a..b
            };
            let (rows, cols) = (span(y0, y1, h), span(x0, x1, w));
            let mut q = vec![0.0; vectors[0].len()];
            let mut n = 0.0;
            for y in rows {
                for x in cols.clone() {
                    for (qv, v) in q.iter_mut().zip(&vectors[y * w + x]) {
                        *qv += v;
                    }
                    n += 1.0;
                }
            }
            q.iter_mut().for_each(|v| *v /= n);
            q
        }
    };
    Ok(SimilarityMap {
        height: h,
        width: w,
        values: vectors.iter().map(|v| cosine(&query, v)).collect(),
    })
}

/// Pixels whose upsampled similarity is at least `tau`.
pub fn decode_mask<T: Element>(
    embedding: &Embedding<T>,
    prompt: &Prompt,
    image_size: (usize, usize),
    tau: f64,
    source: &str,
) -> Result<Mask> {
    let sim = similarity_map(embedding, prompt, image_size)?;
    let (h, w) = image_size;
    let bits = sim.upsample(h, w).into_iter().map(|s| s >= tau).collect();
    Mask::new(h, w, bits, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    #[test]
    fn upsampling_a_constant_map_is_constant() {
        let m = SimilarityMap {
            height: 2,
            width: 3,
            values: vec![0.25; 6],
        };
        assert!(m.upsample(32, 48).iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn mismatched_image_size_is_rejected() {
        let e = Embedding::new(Tensor::<f32>::ones(&[1, 256, 2, 2])).unwrap();
        let p = Prompt::Point { x: 1.0, y: 1.0 };
        assert!(decode_mask(&e, &p, (32, 32), 0.5, "t").is_ok());
        assert!(decode_mask(&e, &p, (48, 32), 0.5, "t").is_err());
        assert!(matches!(
            decode_mask(&e, &Prompt::Point { x: 40.0, y: 1.0 }, (32, 32), 0.5, "t"),
            Err(Error::Prompt(_))
        ));
    }
}
