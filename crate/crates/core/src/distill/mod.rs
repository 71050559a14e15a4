//! Decoupled feature distillation: a frozen teacher's embeddings are the
//! regression targets for the student encoder. No decoder is involved.

pub mod cache;
pub mod config;
pub mod report;
pub mod train;

pub use cache::{cache_teacher, teacher_hash, Provenance, TeacherCache};
pub use config::{DistillConfig, Precision};
pub use report::{feature_distance_report, DistanceReport, DistanceRow};
pub use train::{
    distill, distill_with_hook, epoch_order, EpochEvent, EpochRecord, LossCurve, StepRecord,
    TeacherSource,
};
