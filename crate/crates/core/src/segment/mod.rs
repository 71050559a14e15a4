//! Prompted masks from embeddings, and teacher-referenced mIoU.

mod decode;
mod eval;
mod mask;
mod prompt;

pub use decode::{decode_mask, similarity_map, SimilarityMap, DEFAULT_TAU};
pub use eval::{evaluate_miou, EncoderPipeline, EvalResult, MaskPipeline};
pub use mask::{iou, Mask};
pub use prompt::{box_prompt, point_prompt, Prompt, PromptSet};
