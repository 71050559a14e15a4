use gmsam::encoders::presets::{self, toy_specs};
use gmsam::encoders::{encode_image, EncoderModel, EncoderSpec, StageSpec};
use gmsam::io::generate_image;
use gmsam::numerics::{Graph, Tensor};
use proptest::prelude::*;

fn param_total(spec: &EncoderSpec) -> usize {
    EncoderModel::<f32>::build(spec, 0)
        .unwrap()
        .inventory()
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum()
}

#[test]
fn every_family_meets_the_shape_contract() {
    for spec in toy_specs() {
        let model = EncoderModel::<f32>::build(&spec, 3).unwrap();
        for size in [64, 128] {
            let (img, _) = generate_image(9, size).unwrap();
            let emb = encode_image(&model, &img).unwrap();
            assert_eq!(
                emb.shape(),
                &[1, 256, size / 16, size / 16],
                "{} at {size}",
                spec.name
            );
        }
    }
}

#[test]
fn bundled_spec_files_load_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let spec = EncoderSpec::load(&path).unwrap();
        spec.validate().unwrap();
        assert_eq!(EncoderSpec::from_kv(&spec.to_kv()).unwrap(), spec);
        seen += 1;
    }
    assert!(seen >= 8);
    assert_eq!(presets::gmf(&[2, 2, 8, 2]).name, "gmf_2282");
}

#[test]
fn stem_commutes_with_whole_stride_shifts() {
    for spec in toy_specs() {
        let model = EncoderModel::<f32>::build(&spec, 5).unwrap();
        let stride = match spec.stages() {
            Some(s) => s.stem_stride(),
            None => 16,
        };
        let (img, _) = generate_image(21, 64).unwrap();
        let src = img.to_vec();
        // move everything right by one stem step, zero-filling the left edge
        let mut shifted = vec![0f32; src.len()];
        for c in 0..3 {
            for y in 0..64 {
                for x in stride..64 {
                    shifted[(c * 64 + y) * 64 + x] = src[(c * 64 + y) * 64 + x - stride];
                }
            }
        }
        let run = |data: Vec<f32>| {
            let mut g = Graph::new();
            let p = model.bind(&mut g, false);
            let x = g.constant(Tensor::from_vec(&[1, 3, 64, 64], data).unwrap());
            let y = model.stem_forward(&mut g, &p, x).unwrap();
            g.value(y).clone()
        };
        let (a, b) = (run(src), run(shifted));
        let s = a.shape().to_vec();
        for c in 0..s[1] {
            for y in 0..s[2] {
                for x in 0..s[3] - 1 {
                    assert_eq!(
                        a.get(&[0, c, y, x]).unwrap(),
                        b.get(&[0, c, y, x + 1]).unwrap(),
                        "{} channel {c} at ({x},{y})",
                        spec.name
                    );
                }
            }
        }
    }
}

#[test]
fn single_and_double_precision_agree() {
    let (img, _) = generate_image(2, 32).unwrap();
    for spec in toy_specs() {
        let m32 = EncoderModel::<f32>::build(&spec, 1).unwrap();
        let m64: EncoderModel<f64> = m32.cast();
        let a = encode_image(&m32, &img).unwrap().tensor().to_f64_vec();
        let b = encode_image(&m64, &img.cast())
            .unwrap()
            .tensor()
            .to_f64_vec();
        let worst = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{}: {worst}", spec.name);
    }
}

fn gmf_spec(depths: &[usize], dims: &[usize]) -> EncoderSpec {
    let heads: Vec<usize> = dims
        .iter()
        .map(|&d| if d % 8 == 0 { 2 } else { 1 })
        .collect();
    EncoderSpec::student_gmf("p", StageSpec::new(depths, dims, &heads), &[1, 3, 5, 7])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn output_is_always_a_sixteenth(
        stages in 3usize..=4,
        h in 1usize..=3,
        w in 1usize..=3,
        family in 0usize..3,
    ) {
        let depths = vec![1; stages];
        let dims: Vec<usize> = (0..stages).map(|i| 8 * (i + 1)).collect();
        let spec = match family {
            0 => EncoderSpec::teacher_vit("v", 16, 1, 2),
            1 => gmf_spec(&depths, &dims),
            _ => EncoderSpec::baseline_resnet("r", &depths, &dims),
        };
        let model = EncoderModel::<f32>::build(&spec, 0).unwrap();
        let img = Tensor::zeros(&[2, 3, 16 * h, 16 * w]);
        let emb = model.encode(&img).unwrap();
        prop_assert_eq!(emb.shape(), &[2, 256, h, w]);
    }

    #[test]
    fn parameters_grow_with_depth_and_width(stage in 0usize..4, extra_depth in 1usize..3, extra_width in 1usize..3) {
        let depths = [1, 1, 2, 1];
        let dims = [8, 16, 24, 32];
        let base = param_total(&gmf_spec(&depths, &dims));
        let mut deeper = depths;
        deeper[stage] += extra_depth;
        prop_assert!(param_total(&gmf_spec(&deeper, &dims)) > base);
        let mut wider = dims;
        wider[stage] += 8 * extra_width;
        prop_assert!(param_total(&gmf_spec(&depths, &wider)) > base);
    }
}
