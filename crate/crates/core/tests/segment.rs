use gmsam::encoders::presets::{toy_student, toy_teacher};
use gmsam::encoders::{Embedding, EncoderModel};
use gmsam::io::Dataset;
use gmsam::numerics::Tensor;
use gmsam::segment::*;
use gmsam::{Error, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `[1, 256, h, w]` embedding whose cell vectors come from `f(y, x)`.
fn field(h: usize, w: usize, f: impl Fn(usize, usize) -> Vec<f32>) -> Embedding<f32> {
    let mut data = vec![0f32; 256 * h * w];
    for y in 0..h {
        for x in 0..w {
            for (c, v) in f(y, x).into_iter().enumerate() {
                data[(c * h + y) * w + x] = v;
            }
        }
    }
    Embedding::new(Tensor::from_vec(&[1, 256, h, w], data).unwrap()).unwrap()
}

fn unit(c: usize) -> Vec<f32> {
    let mut v = vec![0f32; 256];
    v[c] = 1.0;
    v
}

fn brute_iou(a: &[bool], b: &[bool]) -> f64 {
    let mut inter = 0;
    let mut union = 0;
    for i in 0..a.len() {
        if a[i] && b[i] {
            inter += 1;
        }
        if a[i] || b[i] {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[test]
fn constant_embedding_selects_everything() {
    let e = field(4, 4, |_, _| vec![0.3; 256]);
    let m = decode_mask(&e, &Prompt::Point { x: 10.0, y: 50.0 }, (64, 64), 0.5, "t").unwrap();
    assert_eq!(m.count(), 64 * 64);
}

#[test]
fn orthogonal_halves_split_at_the_boundary() {
    let e = field(4, 4, |_, x| if x < 2 { unit(0) } else { unit(1) });
    for prompt in [
        Prompt::Point { x: 5.0, y: 40.0 },
        Prompt::Box {
            x0: 0.0,
            y0: 0.0,
            x1: 20.0,
            y1: 64.0,
        },
    ] {
        let m = decode_mask(&e, &prompt, (64, 64), 0.5, "t").unwrap();
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(m.get(y, x), x < 32, "{prompt} at ({x},{y})");
            }
        }
        let again = decode_mask(&e, &prompt, (64, 64), 0.5, "t").unwrap();
        assert_eq!(m, again);
    }
}

#[test]
fn box_query_is_the_mean_of_covered_cells() {
    // cells along x carry distinct directions; a box over cells 1..3 should
    // match its own average best
    let e = field(1, 4, |_, x| unit(x));
    let sim = similarity_map(
        &e,
        &Prompt::Box {
            x0: 17.0,
            y0: 0.0,
            x1: 47.0,
            y1: 16.0,
        },
        (16, 64),
    )
    .unwrap();
    let expect = 1.0 / 2f64.sqrt();
    let got = &sim.values;
    assert_eq!(got[0], 0.0);
    assert!((got[1] - expect).abs() < 1e-12 && (got[2] - expect).abs() < 1e-12);
    assert_eq!(got[3], 0.0);
}

#[test]
fn zero_vectors_score_zero() {
    let e = field(2, 2, |y, _| if y == 0 { vec![0.0; 256] } else { unit(3) });
    let sim = similarity_map(&e, &Prompt::Point { x: 8.0, y: 24.0 }, (32, 32)).unwrap();
    assert_eq!(sim.values, vec![0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn out_of_bounds_prompts_are_rejected() {
    let e = field(2, 2, |_, _| unit(0));
    for p in [
        Prompt::Point { x: -1.0, y: 3.0 },
        Prompt::Point { x: 3.0, y: 32.0 },
        Prompt::Box {
            x0: 10.0,
            y0: 0.0,
            x1: 5.0,
            y1: 8.0,
        },
        Prompt::Box {
            x0: 0.0,
            y0: 0.0,
            x1: 33.0,
            y1: 8.0,
        },
    ] {
        assert!(
            matches!(
                decode_mask(&e, &p, (32, 32), 0.5, "t"),
                Err(Error::Prompt(_))
            ),
            "{p}"
        );
    }
}

#[test]
fn iou_reference_cases() {
    let top: Vec<bool> = (0..64).map(|i| i < 32).collect();
    let a = Mask::new(8, 8, top.clone(), "a").unwrap();
    let full = Mask::new(8, 8, vec![true; 64], "b").unwrap();
    let bottom = Mask::new(8, 8, top.iter().map(|b| !b).collect(), "c").unwrap();
    assert_eq!(iou(&a, &a).unwrap(), 1.0);
    assert_eq!(iou(&a, &bottom).unwrap(), 0.0);
    assert_eq!(iou(&a, &full).unwrap(), 0.5);
    assert!(matches!(
        iou(&a, &Mask::empty(4, 16, "d")),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn iou_matches_pixel_counting_on_random_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let density: f64 = rng.random();
        let a: Vec<bool> = (0..256).map(|_| rng.random_bool(density)).collect();
        let b: Vec<bool> = (0..256).map(|_| rng.random_bool(density)).collect();
        let ma = Mask::new(16, 16, a.clone(), "a").unwrap();
        let mb = Mask::new(16, 16, b.clone(), "b").unwrap();
        assert_eq!(iou(&ma, &mb).unwrap(), brute_iou(&a, &b));
    }
}

proptest! {
    #[test]
    fn iou_is_symmetric(a in prop::collection::vec(any::<bool>(), 64), b in prop::collection::vec(any::<bool>(), 64)) {
        let ma = Mask::new(8, 8, a, "a").unwrap();
        let mb = Mask::new(8, 8, b, "b").unwrap();
        prop_assert_eq!(iou(&ma, &mb).unwrap(), iou(&mb, &ma).unwrap());
    }

    #[test]
    fn raising_tau_never_adds_pixels(
        values in prop::collection::vec(-1.0f32..1.0, 256 * 4),
        x in 0.0f64..32.0, y in 0.0f64..32.0,
        lo in -1.0f64..1.0, step in 0.0f64..1.0,
    ) {
        let e = Embedding::new(Tensor::from_vec(&[1, 256, 2, 2], values).unwrap()).unwrap();
        let p = Prompt::Point { x, y };
        let loose = decode_mask(&e, &p, (32, 32), lo, "t").unwrap();
        let tight = decode_mask(&e, &p, (32, 32), lo + step, "t").unwrap();
        for (t, l) in tight.bits().iter().zip(loose.bits()) {
            prop_assert!(!t | l);
        }
    }
}

struct Blank;

impl MaskPipeline for Blank {
    fn name(&self) -> &str {
        "blank"
    }

    fn predict(&self, image: &Tensor<f32>, _: &Prompt) -> Result<Mask> {
        Ok(Mask::empty(image.shape()[1], image.shape()[2], "blank"))
    }
}

#[test]
fn pipeline_against_itself_and_against_nothing() {
    let data = Dataset::synthetic(5, 6, 32).unwrap();
    let prompts: Vec<Prompt> = data.items.iter().map(point_prompt).collect();
    let teacher = EncoderModel::<f32>::build(&toy_teacher(), 1).unwrap();
    let tp = EncoderPipeline::new("teacher", &teacher);
    for jobs in [1, 3] {
        let same = evaluate_miou(&tp, &tp, &data, &prompts, jobs).unwrap();
        assert_eq!(same.miou, 1.0);
        assert_eq!(same.per_image.len(), 6);
    }
    let none = evaluate_miou(&tp, &Blank, &data, &prompts, 1).unwrap();
    assert_eq!(none.miou, 0.0);
    assert!(none.to_csv().ends_with("mean,0.000000\n"));
}

#[test]
fn parallel_evaluation_matches_serial() {
    let data = Dataset::synthetic(8, 5, 32).unwrap();
    let prompts: Vec<Prompt> = data.items.iter().map(box_prompt).collect();
    let teacher = EncoderModel::<f32>::build(&toy_teacher(), 1).unwrap();
    let student = EncoderModel::<f32>::build(&toy_student(), 2).unwrap();
    let (tp, sp) = (
        EncoderPipeline::with_tau("t", &teacher, 0.9),
        EncoderPipeline::with_tau("s", &student, 0.9),
    );
    let a = evaluate_miou(&tp, &sp, &data, &prompts, 1).unwrap();
    let b = evaluate_miou(&tp, &sp, &data, &prompts, 4).unwrap();
    assert_eq!(a, b);
    assert!(a.per_image.iter().all(|(_, v)| (0.0..=1.0).contains(v)));
    let mean = a.per_image.iter().map(|(_, v)| v).sum::<f64>() / 5.0;
    assert_eq!(a.miou, mean);
}

#[test]
fn prompt_count_must_match_images() {
    let data = Dataset::synthetic(5, 3, 32).unwrap();
    let prompts = vec![Prompt::Point { x: 1.0, y: 1.0 }; 2];
    assert!(matches!(
        evaluate_miou(&Blank, &Blank, &data, &prompts, 1),
        Err(Error::Protocol(_))
    ));
    let mut set = PromptSet::new();
    set.insert("synth_0000", prompts[0]).unwrap();
    assert!(matches!(set.for_dataset(&data), Err(Error::Protocol(_))));
}
