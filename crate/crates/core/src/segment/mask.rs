use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_pgm;

/// Binary mask at image resolution, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    /// Which pipeline produced it.
    pub source: String,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>, source: &str) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::dim(
                "mask",
                format!("{} values for a {width}x{height} mask", bits.len()),
            ));
        }
        Ok(Mask {
            height,
            width,
            bits,
            source: source.to_string(),
        })
    }

    pub fn empty(height: usize, width: usize, source: &str) -> Self {
        Mask {
            height,
            width,
            bits: vec![false; height * width],
            source: source.to_string(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Writes 0 / 255 as a P5 image.
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let px: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        write_pgm(path, self.width, self.height, &px)
    }
}

/// `|a ∧ b| / |a ∨ b|`, and 1 when both masks are empty.
pub fn iou(a: &Mask, b: &Mask) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            "iou",
            format!("mask shapes {:?} and {:?} differ", a.shape(), b.shape()),
        ));
    }
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(h: usize, w: usize, filled: std::ops::Range<usize>) -> Mask {
        let bits = (0..h * w).map(|i| filled.contains(&(i / w))).collect();
        Mask::new(h, w, bits, "t").unwrap()
    }

    #[test]
    fn identity_disjoint_and_half() {
        let top = rows(4, 4, 0..2);
        let bottom = rows(4, 4, 2..4);
        let full = rows(4, 4, 0..4);
        assert_eq!(iou(&top, &top).unwrap(), 1.0);
        assert_eq!(iou(&top, &bottom).unwrap(), 0.0);
        assert_eq!(iou(&top, &full).unwrap(), 0.5);
    }

    #[test]
    fn two_empty_masks_agree() {
        assert_eq!(
            iou(&Mask::empty(3, 3, "a"), &Mask::empty(3, 3, "b")).unwrap(),
            1.0
        );
        assert!(iou(&Mask::empty(3, 3, "a"), &Mask::empty(3, 4, "b")).is_err());
    }
}
