//! Binary PPM (P6) input and PGM (P5) / PPM output, 8-bit only.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_at: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let bad = |offset: usize, detail: &str| Error::Format {
        offset: offset as u64,
        detail: detail.to_string(),
    };
    if bytes.len() < 2 {
        return Err(bad(0, "truncated header"));
    }
    let magic = [bytes[0], bytes[1]];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| bad(start, "expected a positive integer"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad(pos, "expected whitespace after maxval"));
    }
    Ok(Header {
        magic,
        width: fields[0],
        height: fields[1],
        maxval: fields[2],
        data_at: pos + 1,
    })
}

fn read_pnm(path: &Path, magic: &[u8; 2], channels: usize) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let h = parse_header(&bytes)?;
    if &h.magic != magic {
        return Err(Error::Format {
            offset: 0,
            detail: format!("expected {} binary image", String::from_utf8_lossy(magic)),
        });
    }
    if h.maxval > 255 {
        return Err(Error::Format {
            offset: 0,
            detail: format!(
                "maxval {} unsupported, only 8-bit images are read",
                h.maxval
            ),
        });
    }
    let n = h.width * h.height * channels;
    if bytes.len() != h.data_at + n {
        return Err(Error::Format {
            offset: h.data_at as u64,
            detail: format!(
                "expected {n} pixel bytes, found {}",
                bytes.len().saturating_sub(h.data_at)
            ),
        });
    }
    let scale = 255.0 / h.maxval as f64;
    let px = bytes[h.data_at..]
        .iter()
        .map(|&b| ((b as f64 * scale).round()).min(255.0) as u8)
        .collect();
    Ok((h.width, h.height, px))
}

/// Reads a P6 file as a `[3, h, w]` tensor scaled to `[0, 1]`.
pub fn read_ppm(path: &Path) -> Result<Tensor<f32>> {
    let (w, h, px) = read_pnm(path, b"P6", 3)?;
    let mut data = vec![0f32; 3 * w * h];
    for (i, rgb) in px.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * w * h + i] = rgb[c] as f32 / 255.0;
        }
    }
    Tensor::from_vec(&[3, h, w], data)
}

/// Writes a `[3, h, w]` tensor with values in `[0, 1]` as P6.
pub fn write_ppm(path: &Path, image: &Tensor<f32>) -> Result<()> {
    let s = image.shape();
    if s.len() != 3 || s[0] != 3 {
        return Err(Error::dim(
            "write_ppm",
            format!("expected [3, h, w], got {s:?}"),
        ));
    }
    let (h, w) = (s[1], s[2]);
    let data = image.to_vec();
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    for i in 0..h * w {
        for c in 0..3 {
            out.push((data[c * h * w + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes row-major 8-bit grey pixels as P5.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::dim(
            "write_pgm",
            format!("{} pixels for a {width}x{height} image", pixels.len()),
        ));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a P5 file as `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    read_pnm(path, b"P5", 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_round_trip_is_exact_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let data: Vec<f64> = (0..3 * 4 * 5)
            .map(|i| (i * 4 % 256) as f64 / 255.0)
            .collect();
        let img = Tensor::<f32>::from_f64(&[3, 4, 5], &data).unwrap();
        write_ppm(&path, &img).unwrap();
        let back = read_ppm(&path).unwrap();
        assert!(back.bit_eq(&img));
    }

    #[test]
    fn header_comments_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        std::fs::write(&path, b"P5\n# made by hand\n2 1\n255\n\x00\xff").unwrap();
        assert_eq!(read_pgm(&path).unwrap(), (2, 1, vec![0, 255]));
    }

    #[test]
    fn wrong_magic_and_short_data_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        std::fs::write(&path, b"P5\n1 1\n255\n\x00").unwrap();
        assert!(read_ppm(&path).is_err());
        std::fs::write(&path, b"P6\n2 2\n255\n\x00\x00").unwrap();
        assert!(matches!(read_ppm(&path), Err(Error::Format { .. })));
    }
}
