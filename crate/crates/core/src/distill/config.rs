use std::str::FromStr;

use crate::encoders::OUTPUT_STRIDE;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn bits(self) -> u32 {
        match self {
            Precision::F32 => 32,
            Precision::F64 => 64,
        }
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "32" => Ok(Precision::F32),
            "64" => Ok(Precision::F64),
            _ => Err(Error::Config(format!(
                "precision must be 32 or 64, got {s:?}"
            ))),
        }
    }
}

/// Hyperparameters of one distillation run.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    pub image_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub huber_delta: f64,
    pub seed: u64,
    pub precision: Precision,
}

impl DistillConfig {
    pub const PUBLISHED_IMAGE_SIZE: usize = 1024;
    pub const TOY_IMAGE_SIZE: usize = 64;

    /// The published schedule at full resolution.
    pub fn published() -> Self {
        DistillConfig {
            image_size: Self::PUBLISHED_IMAGE_SIZE,
            ..Self::default()
        }
    }

    /// `learning_rate` may be zero (a frozen run); everything else must be positive.
    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || !self.image_size.is_multiple_of(OUTPUT_STRIDE) {
            return Err(Error::Config(format!(
                "image_size {} must be a positive multiple of {OUTPUT_STRIDE}",
                self.image_size
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.huber_delta > 0.0 && self.huber_delta.is_finite()) {
            return Err(Error::Config(format!(
                "huber_delta must be positive, got {}",
                self.huber_delta
            )));
        }
        Ok(())
    }
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            image_size: Self::TOY_IMAGE_SIZE,
            batch_size: 8,
            learning_rate: 3e-4,
            epochs: 13,
            huber_delta: 1.0,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_published_schedule() {
        let c = DistillConfig::published();
        assert_eq!((c.image_size, c.batch_size, c.epochs), (1024, 8, 13));
        assert_eq!(c.learning_rate, 3e-4);
        c.validate().unwrap();
    }

    #[test]
    fn invalid_fields_are_rejected() {
        let base = DistillConfig::default();
        for bad in [
            DistillConfig {
                image_size: 60,
                ..base.clone()
            },
            DistillConfig {
                batch_size: 0,
                ..base.clone()
            },
            DistillConfig {
                epochs: 0,
                ..base.clone()
            },
            DistillConfig {
                learning_rate: -1.0,
                ..base.clone()
            },
            DistillConfig {
                huber_delta: 0.0,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        DistillConfig {
            learning_rate: 0.0,
            ..base
        }
        .validate()
        .unwrap();
    }
}
