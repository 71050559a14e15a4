//! Named specs: the toy encoders used for training runs and tests, and
//! full-size structures for cost accounting.

use super::spec::{EncoderSpec, StageSpec};

/// Kernel sizes of the four aggregator segments in every group-mix student.
pub const GROUP_KERNELS: [usize; 4] = [1, 3, 5, 7];

/// ViT, width 32, depth 4, 2 heads.
pub fn toy_teacher() -> EncoderSpec {
    EncoderSpec::teacher_vit("toy_teacher", 32, 4, 2)
}

/// Group-mix student, depths `[2,2,2,2]`, width 64 throughout.
pub fn toy_student() -> EncoderSpec {
    EncoderSpec::student_gmf(
        "toy_student",
        StageSpec::new(&[2, 2, 2, 2], &[64, 64, 64, 64], &[2, 2, 2, 2]),
        &GROUP_KERNELS,
    )
}

/// Three-stage group-mix student.
pub fn toy_student_3stage() -> EncoderSpec {
    EncoderSpec::student_gmf(
        "toy_student_3stage",
        StageSpec::new(&[1, 1, 2], &[16, 32, 48], &[1, 2, 2]),
        &GROUP_KERNELS,
    )
}

pub fn toy_resnet() -> EncoderSpec {
    EncoderSpec::baseline_resnet("toy_resnet", &[1, 1, 1, 1], &[16, 32, 32, 64])
}

pub fn toy_specs() -> Vec<EncoderSpec> {
    vec![
        toy_teacher(),
        toy_student(),
        toy_student_3stage(),
        toy_resnet(),
    ]
}

/// Full-size ViT teacher: width 192, depth 12, 3 heads, MLP ratio 4.
pub fn vit_t() -> EncoderSpec {
    EncoderSpec::teacher_vit("vit_t", 192, 12, 3).with_mlp_ratio(4.0)
}

/// Full-size group-mix student with the given serial depths (3 or 4 stages).
pub fn gmf(serial_depths: &[usize]) -> EncoderSpec {
    let dims = [40, 80, 160, 160];
    let heads = [1, 2, 4, 4];
    let n = serial_depths.len().min(4);
    let name = format!(
        "gmf_{}",
        serial_depths
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("")
    );
    EncoderSpec::student_gmf(
        &name,
        StageSpec::new(serial_depths, &dims[..n], &heads[..n]),
        &GROUP_KERNELS,
    )
    .with_mlp_ratio(4.0)
}

pub fn resnet18() -> EncoderSpec {
    EncoderSpec::baseline_resnet("resnet18", &[2, 2, 2, 2], &[64, 128, 256, 512])
}
