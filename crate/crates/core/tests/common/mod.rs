//! Helpers shared by several integration test targets.
#![allow(dead_code)]

use gmsam::io::{AnyTensor, Checkpoint};
use gmsam::numerics::Tensor;
use gmsam::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A checkpoint of up to six tensors with arbitrary bit patterns, NaNs included.
pub fn random_checkpoint(seed: u64) -> Checkpoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ck = Checkpoint::new();
    for i in 0..rng.random_range(0..=6) {
        let rank = rng.random_range(0..=4);
        let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..=5)).collect();
        let n = shape.iter().product();
        let name = format!("layer{i}.{}", "w".repeat(rng.random_range(1..4)));
        let t: AnyTensor = if rng.random_bool(0.5) {
            let data = (0..n).map(|_| f32::from_bits(rng.random())).collect();
            Tensor::from_vec(&shape, data).unwrap().into()
        } else {
            let data = (0..n).map(|_| f64::from_bits(rng.random())).collect();
            Tensor::from_vec(&shape, data).unwrap().into()
        };
        ck.insert(name, t).unwrap();
    }
    ck
}

/// Parses `bytes`, requiring either success or a format error. Panics propagate.
pub fn parse_is_clean(bytes: &[u8]) -> Result<bool, String> {
    match Checkpoint::from_bytes(bytes) {
        Ok(_) => Ok(true),
        Err(Error::Format { .. }) => Ok(false),
        Err(other) => Err(format!("unexpected error kind: {other}")),
    }
}

/// Every single-byte flip, every truncation and `extra` random blobs.
/// Returns the number of corrupted inputs that were wrongly accepted.
pub fn corruption_sweep(ck: &Checkpoint, extra: usize, seed: u64) -> Result<usize, String> {
    let bytes = ck.to_bytes();
    let mut accepted = 0;
    for i in 0..bytes.len() {
        for mask in [0x01u8, 0x80, 0xff] {
            let mut b = bytes.clone();
            b[i] ^= mask;
            accepted += parse_is_clean(&b)? as usize;
        }
    }
    for len in 0..bytes.len() {
        accepted += parse_is_clean(&bytes[..len])? as usize;
    }
    let mut grown = bytes.clone();
    grown.push(0);
    accepted += parse_is_clean(&grown)? as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra {
        let len = rng.random_range(0..64);
        let mut b: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        if rng.random_bool(0.5) && b.len() >= 11 {
            b[..5].copy_from_slice(b"GMKD1");
            b[5..7].copy_from_slice(&1u16.to_le_bytes());
        }
        // random blobs may legitimately decode; only panics and wrong kinds matter
        parse_is_clean(&b)?;
    }
    Ok(accepted)
}
