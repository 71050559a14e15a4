mod common;

use common::{corruption_sweep, random_checkpoint};
use gmsam::encoders::presets::toy_specs;
use gmsam::encoders::EncoderModel;
use gmsam::io::{
    generate_synthetic, load_checkpoint, read_ppm, save_checkpoint, write_ppm, Checkpoint, Dataset,
    DatasetManifest, ManifestItem, Source,
};
use gmsam::numerics::Tensor;
use gmsam::Error;

#[test]
fn random_checkpoints_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..100 {
        let ck = random_checkpoint(seed);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert!(back.bit_eq(&ck), "seed {seed}");
        let names: Vec<_> = back.iter().map(|(n, _)| n.to_string()).collect();
        let want: Vec<_> = ck.iter().map(|(n, _)| n.to_string()).collect();
        assert_eq!(names, want);

        let path = dir.path().join(format!("{seed}.gmkd"));
        save_checkpoint(&ck, &path).unwrap();
        assert!(load_checkpoint(&path).unwrap().bit_eq(&ck));
    }
}

#[test]
fn model_parameters_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for spec in toy_specs() {
        let model = EncoderModel::<f32>::build(&spec, 11).unwrap();
        let path = dir.path().join(format!("{}.gmkd", spec.name));
        save_checkpoint(&Checkpoint::from_params(model.params()), &path).unwrap();
        let params = load_checkpoint(&path).unwrap().to_params::<f32>().unwrap();
        let back = EncoderModel::from_params(&spec, params).unwrap();
        assert!(back.params().bit_eq(model.params()), "{}", spec.name);
    }
}

#[test]
fn every_corruption_is_a_format_error() {
    for seed in 0..6 {
        let ck = random_checkpoint(1000 + seed);
        let accepted = corruption_sweep(&ck, 300, seed).unwrap();
        assert_eq!(accepted, 0, "seed {seed}");
    }
}

#[test]
fn format_errors_carry_plausible_offsets() {
    let mut ck = Checkpoint::new();
    ck.insert("a", Tensor::<f32>::ones(&[2, 2])).unwrap();
    let bytes = ck.to_bytes();
    for i in 0..bytes.len() {
        let mut b = bytes.clone();
        b[i] ^= 0x5a;
        match Checkpoint::from_bytes(&b) {
            Err(Error::Format { offset, .. }) => assert!(offset <= bytes.len() as u64),
            other => panic!("flip at {i}: {other:?}"),
        }
    }
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    assert!(matches!(
        load_checkpoint(std::path::Path::new("/nonexistent/x.gmkd")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn manifests_mix_synthetic_and_file_items() {
    let dir = tempfile::tempdir().unwrap();
    let (_, images) = generate_synthetic(4, 1, 32).unwrap();
    std::fs::create_dir(dir.path().join("images")).unwrap();
    write_ppm(&dir.path().join("images/a.ppm"), &images[0]).unwrap();
    let m = DatasetManifest::new(
        32,
        "val",
        vec![
            ManifestItem {
                id: "gen".into(),
                source: Source::Synthetic(77),
            },
            ManifestItem {
                id: "file".into(),
                source: Source::File("images/a.ppm".into()),
            },
        ],
    )
    .unwrap();
    let path = dir.path().join("manifest.tsv");
    m.save(&path).unwrap();
    assert_eq!(DatasetManifest::load(&path).unwrap(), m);

    let ds = Dataset::load(&path).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.items[1].image.shape(), &[3, 32, 32]);
    assert!(ds.items[1]
        .image
        .bit_eq(&read_ppm(&dir.path().join("images/a.ppm")).unwrap()));
    assert!(!ds.items[0].shapes.is_empty());
    assert!(ds.items[1].shapes.is_empty());
}

#[test]
fn wrongly_sized_files_are_ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (_, images) = generate_synthetic(4, 1, 16).unwrap();
    write_ppm(&dir.path().join("small.ppm"), &images[0]).unwrap();
    let path = dir.path().join("manifest.tsv");
    std::fs::write(&path, "# image_size=32\nsmall\tsmall.ppm\n").unwrap();
    match Dataset::load(&path) {
        Err(Error::Ingestion { item, .. }) => assert_eq!(item, "small"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn synthetic_generation_is_reproducible() {
    let (m1, a) = generate_synthetic(9, 4, 32).unwrap();
    let (m2, b) = generate_synthetic(9, 4, 32).unwrap();
    assert_eq!(m1, m2);
    assert!(a.iter().zip(&b).all(|(x, y)| x.bit_eq(y)));
    let (_, c) = generate_synthetic(10, 4, 32).unwrap();
    assert!(!a[0].bit_eq(&c[0]));
    for img in &a {
        assert!(img.to_vec().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
