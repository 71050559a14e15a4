use std::path::Path;
use std::str::FromStr;

use super::pnm::write_pgm;
use crate::encoders::Embedding;
use crate::error::{Error, Result};
use crate::numerics::Element;

/// Which 2-D slice of an embedding to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    #[default]
    FirstChannel,
    ChannelMean,
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_channel" => Ok(FeatureMode::FirstChannel),
            "channel_mean" => Ok(FeatureMode::ChannelMean),
            _ => Err(Error::Config(format!(
                "unknown feature mode {s:?} (first_channel, channel_mean)"
            ))),
        }
    }
}

/// The `[h, w]` slice selected by `mode` from a batch-1 embedding.
pub fn feature_slice<T: Element>(
    embedding: &Embedding<T>,
    mode: FeatureMode,
) -> Result<(usize, usize, Vec<f64>)> {
    let s = embedding.shape();
    if s[0] != 1 {
        return Err(Error::dim(
            "export_feature_pgm",
            format!("batch size {} is not 1", s[0]),
        ));
    }
    let (c, h, w) = (s[1], s[2], s[3]);
    let data = embedding.tensor().to_f64_vec();
    let plane = h * w;
    let slice = match mode {
        FeatureMode::FirstChannel => data[..plane].to_vec(),
        FeatureMode::ChannelMean => (0..plane)
            .map(|i| (0..c).map(|ch| data[ch * plane + i]).sum::<f64>() / c as f64)
            .collect(),
    };
    Ok((h, w, slice))
}

/// Min-max scales to `0..=255`. A constant slice maps to 128; the flag reports that case.
pub fn normalize_to_gray(values: &[f64]) -> (Vec<u8>, bool) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return (vec![128; values.len()], true);
    }
    let px = values
        .iter()
        .map(|&v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect();
    (px, false)
}

/// Writes the selected slice as an `h16 × w16` P5 image. Returns true if the
/// slice was constant and the image is flat grey.
pub fn export_feature_pgm<T: Element>(
    embedding: &Embedding<T>,
    path: &Path,
    mode: FeatureMode,
) -> Result<bool> {
    let (h, w, slice) = feature_slice(embedding, mode)?;
    let (px, constant) = normalize_to_gray(&slice);
    if constant {
        log::warn!(
            "{}: feature slice is constant, writing mid-grey",
            path.display()
        );
    }
    write_pgm(path, w, h, &px)?;
    Ok(constant)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_maps_to_full_range() {
        let (px, constant) = normalize_to_gray(&[-1.0, 0.0, 1.0]);
        assert!(!constant);
        assert_eq!(px, vec![0, 128, 255]);
    }

    #[test]
    fn constant_slice_is_mid_grey() {
        assert_eq!(normalize_to_gray(&[2.5; 4]), (vec![128; 4], true));
    }
}
