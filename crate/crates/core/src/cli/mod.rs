//! The `gmsam` command line: generate, cache, distill, profile, eval, visualize.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numeric failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::distill::{
    cache_teacher, distill_with_hook, feature_distance_report, DistillConfig, Precision,
    TeacherCache, TeacherSource,
};
use crate::encoders::presets::{toy_student, toy_teacher};
use crate::encoders::{encode_image, EncoderModel, EncoderSpec};
use crate::error::{Error, Result};
use crate::io::{
    export_feature_pgm, generate_synthetic, load_checkpoint, save_checkpoint, write_ppm,
    Checkpoint, Dataset, DatasetManifest, FeatureMode, ManifestItem, Source,
};
use crate::numerics::Element;
use crate::profile::{compare_structures, count_flops, count_params, ledger};
use crate::segment::{
    box_prompt, decode_mask, evaluate_miou, point_prompt, EncoderPipeline, Prompt, PromptSet,
    DEFAULT_TAU,
};

#[derive(Parser, Debug)]
#[command(
    name = "gmsam",
    version,
    about = "Distill a group-mix attention image encoder from a ViT teacher, count its cost and score its prompted masks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded synthetic dataset manifest and a matching prompt file
    Generate(GenerateArgs),
    /// Run the frozen teacher once over a dataset and store its embeddings
    Cache(CacheArgs),
    /// Train a student encoder to reproduce the teacher's embeddings
    Distill(DistillArgs),
    /// Count parameters and FLOPs of encoder specs
    Profile(ProfileArgs),
    /// Score student masks against teacher masks (mIoU)
    Eval(EvalArgs),
    /// Export an embedding channel and, with a prompt, its mask as images
    Visualize(VisualizeArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; model inits and synthetic data derive from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for per-image work (teacher caching, evaluation)
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory receiving every output file
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct TeacherArgs {
    /// Teacher spec file [default: built-in toy ViT, width 32, depth 4, 2 heads]
    #[arg(long)]
    teacher: Option<PathBuf>,
    /// Teacher weights (.gmkd) [default: fresh init from --teacher-seed]
    #[arg(long)]
    teacher_weights: Option<PathBuf>,
    /// Teacher init seed [default: seed + 1]
    #[arg(long)]
    teacher_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct StudentArgs {
    /// Student spec file [default: built-in toy group-mix student, depths 2,2,2,2]
    #[arg(long)]
    student: Option<PathBuf>,
    /// Student weights (.gmkd) [default: fresh init from --student-seed]
    #[arg(long)]
    student_weights: Option<PathBuf>,
    /// Student init seed [default: seed + 2]
    #[arg(long)]
    student_seed: Option<u64>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset manifest [default: synthetic images derived from the seed]
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Number of synthetic images when no manifest is given
    #[arg(long)]
    items: Option<usize>,
    /// Image side in pixels [published: 1024; toy default: 64]
    #[arg(long)]
    image_size: Option<usize>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Number of images
    #[arg(long, default_value_t = 64)]
    count: usize,
    /// Image side in pixels [published: 1024; toy default: 64]
    #[arg(long, default_value_t = 64)]
    image_size: usize,
    /// Split label recorded in the manifest
    #[arg(long, default_value = "train")]
    split: String,
    /// Prompt written per image: centre point or bounding box of the topmost shape
    #[arg(long, value_enum, default_value_t = PromptKind::Point)]
    prompt: PromptKind,
    /// Also write every image as a PPM and reference the files from the manifest
    #[arg(long)]
    ppm: bool,
}

#[derive(Args, Debug)]
struct CacheArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    teacher: TeacherArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Float width of the cached embeddings
    #[arg(long, default_value = "32")]
    precision: Precision,
}

#[derive(Args, Debug)]
struct DistillArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    teacher: TeacherArgs,
    #[command(flatten)]
    student: StudentArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Teacher cache directory from `gmsam cache` [default: computed in memory]
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Training epochs [published: 13]
    #[arg(long, default_value_t = 13)]
    epochs: usize,
    /// Adam learning rate [published: 3e-4]
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    /// Images per step [published: 8]
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    /// Huber loss transition point [published: unspecified]
    #[arg(long, default_value_t = 1.0)]
    huber_delta: f64,
    /// Float width used for training
    #[arg(long, default_value = "32")]
    precision: Precision,
    /// Embedding slice written to the per-epoch feature images
    #[arg(long, default_value = "first_channel")]
    feature_mode: FeatureMode,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// Encoder spec files
    #[arg(long = "spec", num_args = 1..)]
    specs: Vec<PathBuf>,
    /// Input shape b,c,h,w used for FLOP counting [published: 1,3,1024,1024]
    #[arg(long, default_value = "1,3,1024,1024")]
    input_shape: InputShape,
    /// Print pairwise parameter and FLOP reductions between the specs
    #[arg(long)]
    compare: bool,
    /// Cross-check the analytic counts against a built model and an instrumented forward pass
    #[arg(long)]
    oracle: bool,
    /// One row per layer instead of one per block
    #[arg(long)]
    detail: bool,
    /// Print the published cost and accuracy tables
    #[arg(long)]
    show_published: bool,
    /// Also write CSV reports to this directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    teacher: TeacherArgs,
    #[command(flatten)]
    student: StudentArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Prompt file (`item_id point x y` / `item_id box x0 y0 x1 y1`) [default: derived from the synthetic shapes]
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// Prompt derived per image when no prompt file is given
    #[arg(long, value_enum, default_value_t = PromptKind::Point)]
    prompt_kind: PromptKind,
    /// Cosine-similarity threshold of the mask decoder
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Write teacher and student masks as PGM images
    #[arg(long)]
    save_masks: bool,
    /// Print the published mIoU table and exit
    #[arg(long)]
    show_published: bool,
}

#[derive(Args, Debug)]
struct VisualizeArgs {
    #[command(flatten)]
    common: Common,
    /// Encoder spec file [default: built-in toy student]
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Encoder weights (.gmkd) [default: fresh init from --seed]
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Input image (binary PPM) [default: one synthetic image from the seed]
    #[arg(long)]
    image: Option<PathBuf>,
    /// Synthetic image side when no image is given
    #[arg(long, default_value_t = 64)]
    image_size: usize,
    /// Prompt such as "point 31.5 20" or "box 4 4 40 36"
    #[arg(long)]
    prompt: Option<String>,
    /// Cosine-similarity threshold of the mask decoder
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Embedding slice written to the feature image
    #[arg(long, default_value = "first_channel")]
    feature_mode: FeatureMode,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PromptKind {
    Point,
    Box,
}

#[derive(Clone, Debug)]
struct InputShape(Vec<usize>);

impl std::str::FromStr for InputShape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{v}` is not a dimension"))
            })
            .collect::<std::result::Result<_, _>>()
            .map(InputShape)
    }
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Cache(a) => cmd_cache(&a),
        Command::Distill(a) => cmd_distill(&a),
        Command::Profile(a) => cmd_profile(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Visualize(a) => cmd_visualize(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}

/// Fails before any work starts if an input path is missing.
fn require(paths: &[Option<&PathBuf>]) -> Result<()> {
    for p in paths.iter().flatten() {
        if !p.exists() {
            return Err(Error::Config(format!("{} does not exist", p.display())));
        }
    }
    Ok(())
}

fn out_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_encoder<T: Element>(
    spec: Option<&PathBuf>,
    weights: Option<&PathBuf>,
    seed: u64,
    default: fn() -> EncoderSpec,
) -> Result<EncoderModel<T>> {
    let spec = match spec {
        Some(p) => EncoderSpec::load(p)?,
        None => default(),
    };
    match weights {
        Some(w) => EncoderModel::from_params(&spec, load_checkpoint(w)?.to_params()?),
        None => EncoderModel::build(&spec, seed),
    }
}

impl TeacherArgs {
    fn paths(&self) -> [Option<&PathBuf>; 2] {
        [self.teacher.as_ref(), self.teacher_weights.as_ref()]
    }

    fn load<T: Element>(&self, seed: u64) -> Result<EncoderModel<T>> {
        let seed = self.teacher_seed.unwrap_or(seed.wrapping_add(1));
        load_encoder(
            self.teacher.as_ref(),
            self.teacher_weights.as_ref(),
            seed,
            toy_teacher,
        )
    }
}

impl StudentArgs {
    fn paths(&self) -> [Option<&PathBuf>; 2] {
        [self.student.as_ref(), self.student_weights.as_ref()]
    }

    fn load<T: Element>(&self, seed: u64) -> Result<EncoderModel<T>> {
        let seed = self.student_seed.unwrap_or(seed.wrapping_add(2));
        load_encoder(
            self.student.as_ref(),
            self.student_weights.as_ref(),
            seed,
            toy_student,
        )
    }
}

impl DataArgs {
    /// The manifest if given, else `default_items` synthetic images from `synth_seed`.
    fn load(&self, synth_seed: u64, default_items: usize) -> Result<Dataset> {
        match &self.dataset {
            Some(path) => {
                let data = Dataset::load(path)?;
                if let Some(size) = self.image_size {
                    if size != data.image_size {
                        return Err(Error::Config(format!(
                            "--image-size {size} disagrees with the manifest's {}",
                            data.image_size
                        )));
                    }
                }
                Ok(data)
            }
            None => Dataset::synthetic(
                synth_seed,
                self.items.unwrap_or(default_items),
                self.image_size.unwrap_or(64),
            ),
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<i32> {
    let dir = out_dir(&a.common.out_dir)?;
    let (manifest, images) = generate_synthetic(a.common.seed, a.count, a.image_size)?;
    let manifest = if a.ppm {
        let img_dir = out_dir(&dir.join("images"))?;
        let mut items = Vec::with_capacity(manifest.len());
        for (item, image) in manifest.items().iter().zip(&images) {
            let rel = PathBuf::from("images").join(format!("{}.ppm", item.id));
            write_ppm(&img_dir.join(format!("{}.ppm", item.id)), image)?;
            items.push(ManifestItem {
                id: item.id.clone(),
                source: Source::File(rel),
            });
        }
        DatasetManifest::new(a.image_size, &a.split, items)?
    } else {
        DatasetManifest::new(a.image_size, &a.split, manifest.items().to_vec())?
    };
    manifest.save(&dir.join("manifest.tsv"))?;

    // prompts come from the shapes, which only the synthetic sources carry
    let (synthetic, _) = generate_synthetic(a.common.seed, a.count, a.image_size)?;
    let data = Dataset::from_manifest(&synthetic, "synthetic", &dir)?;
    let mut prompts = PromptSet::new();
    for item in &data.items {
        let p = match a.prompt {
            PromptKind::Point => point_prompt(item),
            PromptKind::Box => box_prompt(item),
        };
        prompts.insert(&item.id, p)?;
    }
    prompts.save(&dir.join("prompts.txt"))?;
    println!("wrote {} items to {}", manifest.len(), dir.display());
    Ok(0)
}

fn cmd_cache(a: &CacheArgs) -> Result<i32> {
    let mut inputs = a.teacher.paths().to_vec();
    inputs.push(a.data.dataset.as_ref());
    require(&inputs)?;
    match a.precision {
        Precision::F32 => cache_with::<f32>(a),
        Precision::F64 => cache_with::<f64>(a),
    }
}

fn cache_with<T: Element>(a: &CacheArgs) -> Result<i32> {
    let seed = a.common.seed;
    let teacher = a.teacher.load::<T>(seed)?;
    let data = a.data.load(seed.wrapping_add(3), 64)?;
    let config = DistillConfig {
        image_size: data.image_size,
        precision: a.precision,
        ..DistillConfig::default()
    };
    let cache = cache_teacher(&teacher, &data, &config, a.common.jobs)?;
    let dir = out_dir(&a.common.out_dir)?;
    cache.save(&dir)?;
    println!(
        "cached {} teacher embeddings in {}",
        cache.len(),
        dir.display()
    );
    Ok(0)
}

fn cmd_distill(a: &DistillArgs) -> Result<i32> {
    let mut inputs = a.teacher.paths().to_vec();
    inputs.extend(a.student.paths());
    inputs.push(a.data.dataset.as_ref());
    inputs.push(a.cache.as_ref());
    require(&inputs)?;
    match a.precision {
        Precision::F32 => distill_as::<f32>(a),
        Precision::F64 => distill_as::<f64>(a),
    }
}

fn distill_as<T: Element>(a: &DistillArgs) -> Result<i32> {
    let seed = a.common.seed;
    let data = a.data.load(seed.wrapping_add(3), 64)?;
    let config = DistillConfig {
        image_size: data.image_size,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        epochs: a.epochs,
        huber_delta: a.huber_delta,
        seed,
        precision: a.precision,
    };
    config.validate()?;
    let teacher = a.teacher.load::<T>(seed)?;
    let student = a.student.load::<T>(seed)?;
    let cache = match &a.cache {
        Some(dir) => TeacherCache::load_for(dir, &teacher, config.image_size)?,
        None => cache_teacher(&teacher, &data, &config, a.common.jobs)?,
    };
    for item in &data.items {
        if cache.get(&item.id).is_none() {
            return Err(Error::CacheInvalid(format!(
                "no cached embedding for item {:?}",
                item.id
            )));
        }
    }

    let dir = out_dir(&a.common.out_dir)?;
    let feat_dir = out_dir(&dir.join("features"))?;
    let probe = &data.items[0];
    if let Some(target) = cache.get(&probe.id) {
        export_feature_pgm(target, &feat_dir.join("teacher.pgm"), a.feature_mode)?;
    }
    let probe_image = probe.image.cast::<T>();
    let (student, curve) = distill_with_hook(
        student,
        TeacherSource::Cache(&cache),
        &data,
        &config,
        |ev| {
            let emb = encode_image(ev.student, &probe_image)?;
            export_feature_pgm(
                &emb,
                &feat_dir.join(format!("epoch_{:02}.pgm", ev.epoch + 1)),
                a.feature_mode,
            )?;
            Ok(())
        },
    )?;

    save_checkpoint(
        &Checkpoint::from_params(student.params()),
        &dir.join("student.gmkd"),
    )?;
    student.spec().save(&dir.join("student.spec"))?;
    write(&dir.join("loss_curve.csv"), &curve.steps_csv())?;
    write(&dir.join("epoch_loss.csv"), &curve.epochs_csv())?;
    write(&dir.join("timing.csv"), &curve.timing_csv())?;
    let report = feature_distance_report(
        &student,
        TeacherSource::Cache(&cache),
        &data,
        config.huber_delta,
        a.common.jobs,
    )?;
    write(&dir.join("feature_distance.csv"), &report.to_csv())?;

    let means = curve.epoch_means();
    if let (Some(first), Some(last)) = (means.first(), means.last()) {
        println!(
            "epochs={} first_loss={first:e} last_loss={last:e}",
            means.len()
        );
    }
    println!("wrote student checkpoint and curves to {}", dir.display());
    Ok(0)
}

fn cmd_profile(a: &ProfileArgs) -> Result<i32> {
    require(&a.specs.iter().map(Some).collect::<Vec<_>>())?;
    if a.show_published {
        print!("{}", ledger::ledger_text());
        if a.specs.is_empty() {
            return Ok(0);
        }
        println!();
    }
    if a.specs.is_empty() {
        return Err(Error::Config(
            "profile needs at least one --spec file".into(),
        ));
    }
    let specs = a
        .specs
        .iter()
        .map(|p| EncoderSpec::load(p))
        .collect::<Result<Vec<_>>>()?;
    let dir = match &a.out_dir {
        Some(d) => Some(out_dir(d)?),
        None => None,
    };
    let mut failed = false;
    for spec in &specs {
        let full = count_flops(spec, &a.input_shape.0)?;
        let shown = if a.detail {
            full.clone()
        } else {
            full.by_block()
        };
        print!("{}", shown.to_text());
        if let Some(dir) = &dir {
            write(
                &dir.join(format!("{}_profile.csv", spec.name)),
                &full.to_csv(),
            )?;
        }
        if a.oracle {
            let model = EncoderModel::<f32>::build(spec, 0)?;
            let walked: u64 = model
                .inventory()
                .iter()
                .map(|(_, s)| s.iter().product::<usize>() as u64)
                .sum();
            let executed = model.instrumented_flops(&a.input_shape.0)?;
            let params_ok =
                walked == count_params(spec)?.total_params() && walked == full.total_params();
            let flops_ok = executed == full.total_flops();
            let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!(
                "oracle params: analytic {} vs inventory {} {}",
                full.total_params(),
                walked,
                verdict(params_ok)
            );
            println!(
                "oracle flops: analytic {} vs instrumented {} {}",
                full.total_flops(),
                executed,
                verdict(flops_ok)
            );
            failed |= !(params_ok && flops_ok);
        }
        println!();
    }
    if a.compare {
        let cmp = compare_structures(&specs, &a.input_shape.0)?;
        print!("{}", cmp.to_text());
        if let Some(dir) = &dir {
            write(&dir.join("comparison.csv"), &cmp.to_csv())?;
        }
    }
    Ok(if failed { 2 } else { 0 })
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    if a.show_published {
        for r in &ledger::MIOU_ROWS {
            println!(
                "{} ({}) {} {} mIoU={:.3} [{}]",
                r.system, r.encoder, r.dataset, r.prompt, r.miou, r.citation
            );
        }
        return Ok(0);
    }
    let mut inputs = a.teacher.paths().to_vec();
    inputs.extend(a.student.paths());
    inputs.push(a.data.dataset.as_ref());
    inputs.push(a.prompts.as_ref());
    require(&inputs)?;
    let seed = a.common.seed;
    let data = a.data.load(seed.wrapping_add(1000), 32)?;
    if data.is_empty() {
        return Err(Error::Protocol("dataset has no items".into()));
    }
    let prompts: Vec<Prompt> = match &a.prompts {
        Some(path) => PromptSet::load(path)?.for_dataset(&data)?,
        None => data
            .items
            .iter()
            .map(|i| match a.prompt_kind {
                PromptKind::Point => point_prompt(i),
                PromptKind::Box => box_prompt(i),
            })
            .collect(),
    };
    let teacher = a.teacher.load::<f32>(seed)?;
    let student = a.student.load::<f32>(seed)?;
    let tp = EncoderPipeline::with_tau(&teacher.spec().name, &teacher, a.tau);
    let sp = EncoderPipeline::with_tau(&student.spec().name, &student, a.tau);
    let result = evaluate_miou(&tp, &sp, &data, &prompts, a.common.jobs)?;

    let dir = out_dir(&a.common.out_dir)?;
    result.save_csv(&dir.join("eval.csv"))?;
    if a.save_masks {
        use crate::segment::MaskPipeline;
        let mask_dir = out_dir(&dir.join("masks"))?;
        for (item, prompt) in data.items.iter().zip(&prompts) {
            tp.predict(&item.image, prompt)?
                .save_pgm(&mask_dir.join(format!("{}_teacher.pgm", item.id)))?;
            sp.predict(&item.image, prompt)?
                .save_pgm(&mask_dir.join(format!("{}_student.pgm", item.id)))?;
        }
    }
    println!("{}", result.summary());
    println!("mIoU={:.6}", result.miou);
    Ok(0)
}

fn parse_prompt(text: &str) -> Result<Prompt> {
    let set = PromptSet::parse(&format!("cli {text}"))?;
    set.get("cli")
        .copied()
        .ok_or_else(|| Error::Prompt(format!("cannot read prompt {text:?}")))
}

fn cmd_visualize(a: &VisualizeArgs) -> Result<i32> {
    require(&[a.encoder.as_ref(), a.weights.as_ref(), a.image.as_ref()])?;
    let prompt = a.prompt.as_deref().map(parse_prompt).transpose()?;
    let image = match &a.image {
        Some(p) => crate::io::read_ppm(p)?,
        None => crate::io::generate_image(a.common.seed, a.image_size)?.0,
    };
    let model = load_encoder::<f32>(
        a.encoder.as_ref(),
        a.weights.as_ref(),
        a.common.seed,
        toy_student,
    )?;
    let emb = encode_image(&model, &image)?;
    let dir = out_dir(&a.common.out_dir)?;
    write_ppm(&dir.join("input.ppm"), &image)?;
    export_feature_pgm(&emb, &dir.join("feature.pgm"), a.feature_mode)?;
    if let Some(p) = prompt {
        let s = image.shape();
        let mask = decode_mask(&emb, &p, (s[1], s[2]), a.tau, &model.spec().name)?;
        mask.save_pgm(&dir.join("mask.pgm"))?;
        println!("mask covers {} of {} pixels", mask.count(), s[1] * s[2]);
    }
    println!("wrote images to {}", dir.display());
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parse_failures_exit_one() {
        assert_eq!(run(["gmsam", "--bogus"]), 1);
        assert_eq!(run(["gmsam", "distill", "--epochs", "x"]), 1);
        assert_eq!(run(["gmsam", "--help"]), 0);
    }
}
