//! The three encoder families: ViT teacher, group-mix attention student and
//! a residual CNN baseline. All map `[b,3,H,W]` images to
//! `[b,256,H/16,W/16]` embeddings.

pub mod gma;
pub mod layers;
pub mod model;
pub mod presets;
pub mod spec;

pub use gma::{group_aggregate, multi_head_attention, BlockTrace, GmaBlock};
pub use model::{encode_image, stack_images, Embedding, EncoderModel};
pub use spec::{
    Architecture, EncoderSpec, Family, GmaBlockConfig, StageSpec, VitSpec, EMBED_CHANNELS,
    OUTPUT_STRIDE,
};
