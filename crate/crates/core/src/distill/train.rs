use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cache::TeacherCache;
use super::config::DistillConfig;
use crate::encoders::{stack_images, EncoderModel};
use crate::error::{Error, Result};
use crate::io::{derive_seed, Dataset, DatasetItem};
use crate::numerics::{AdamConfig, Element, Graph, OptimizerState, Tensor};

/// Where training targets come from.
#[derive(Debug, Clone, Copy)]
pub enum TeacherSource<'a, T> {
    Cache(&'a TeacherCache<T>),
    /// Run the frozen teacher on every batch.
    Live(&'a EncoderModel<T>),
}

impl<T: Element> TeacherSource<'_, T> {
    /// `[n, 256, h, w]` targets for `items`, in order.
    pub fn targets(&self, items: &[&DatasetItem]) -> Result<Tensor<T>> {
        match self {
            TeacherSource::Cache(cache) => {
                let parts = items
                    .iter()
                    .map(|item| {
                        cache
                            .get(&item.id)
                            .map(|e| e.tensor().clone())
                            .ok_or_else(|| {
                                Error::CacheInvalid(format!("no entry for item {:?}", item.id))
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                concat_batch(&parts)
            }
            TeacherSource::Live(teacher) => {
                let images: Vec<Tensor<T>> = items.iter().map(|i| i.image.cast()).collect();
                let batch = stack_images(&images.iter().collect::<Vec<_>>())?;
                Ok(teacher.encode(&batch)?.into_tensor())
            }
        }
    }
}

/// Concatenates `[1, ..]` tensors into one `[n, ..]` batch.
fn concat_batch<T: Element>(parts: &[Tensor<T>]) -> Result<Tensor<T>> {
    let inner: Vec<Tensor<T>> = parts
        .iter()
        .map(|t| t.reshape(&t.shape()[1..]))
        .collect::<Result<_>>()?;
    stack_images(&inner.iter().collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_clock: Duration,
}

/// Every step's loss and every epoch's item-weighted mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
}

impl LossCurve {
    pub fn epoch_means(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }

    /// Final epoch mean.
    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    /// Trailing moving average over `window` epochs (shorter at the start).
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let m = self.epoch_means();
        (0..m.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(window.max(1));
                m[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }

    /// `(epoch, relative rise)` wherever the smoothed curve goes up.
    pub fn smoothed_increases(&self, window: usize) -> Vec<(usize, f64)> {
        let s = self.smoothed(window);
        s.windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] > w[0])
            .map(|(i, w)| (i + 1, (w[1] - w[0]) / w[1]))
            .collect()
    }

    /// `step,epoch,loss` rows. Deterministic for a fixed seed.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from("step,epoch,loss\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{},{:e}", s.step, s.epoch, s.loss);
        }
        out
    }

    /// `epoch,mean_loss` rows. Deterministic for a fixed seed.
    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,mean_loss\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:e}", e.epoch, e.mean_loss);
        }
        out
    }

    /// `epoch,seconds` rows. Varies from run to run.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("epoch,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{:.3}", e.epoch, e.wall_clock.as_secs_f64());
        }
        out
    }
}

/// Passed to the per-epoch hook after each epoch's last step.
pub struct EpochEvent<'a, T> {
    pub epoch: usize,
    pub mean_loss: f64,
    pub student: &'a EncoderModel<T>,
}

/// Item order for `epoch`: a fresh shuffle from a seed derived from the run seed.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        seed,
        epoch as u64,
    )));
    order
}

pub fn distill<T: Element>(
    student: EncoderModel<T>,
    teacher: TeacherSource<'_, T>,
    dataset: &Dataset,
    config: &DistillConfig,
) -> Result<(EncoderModel<T>, LossCurve)> {
    distill_with_hook(student, teacher, dataset, config, |_| Ok(()))
}

/// Trains `student` to reproduce the teacher's embeddings under a mean Huber loss.
pub fn distill_with_hook<T: Element>(
    mut student: EncoderModel<T>,
    teacher: TeacherSource<'_, T>,
    dataset: &Dataset,
    config: &DistillConfig,
    mut hook: impl FnMut(&EpochEvent<'_, T>) -> Result<()>,
) -> Result<(EncoderModel<T>, LossCurve)> {
    config.validate()?;
    if config.precision.bits() as usize != 8 * T::DTYPE.size() {
        return Err(Error::Config(format!(
            "config asks for {}-bit training, model is {}-bit",
            config.precision.bits(),
            8 * T::DTYPE.size()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Config("dataset has no items".into()));
    }
    if let TeacherSource::Cache(cache) = teacher {
        if cache.provenance().image_size != config.image_size {
            return Err(Error::CacheInvalid(format!(
                "cache built at image_size {}, config uses {}",
                cache.provenance().image_size,
                config.image_size
            )));
        }
    }

    let mut opt = OptimizerState::new(AdamConfig::with_lr(config.learning_rate), student.params());
    let mut curve = LossCurve::default();
    let mut step = 0;
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let order = epoch_order(config.seed, epoch, dataset.len());
        let (mut weighted, mut seen) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let items: Vec<&DatasetItem> = chunk.iter().map(|&i| &dataset.items[i]).collect();
            let loss = train_step(&mut student, &mut opt, &teacher, &items, config.huber_delta)
                .map_err(|e| match e {
                    Error::NumericDomain { .. } => Error::DivergentLoss { step },
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::DivergentLoss { step });
            }
            curve.steps.push(StepRecord { step, epoch, loss });
            weighted += loss * items.len() as f64;
            seen += items.len();
            step += 1;
        }
        let mean_loss = weighted / seen as f64;
        curve.epochs.push(EpochRecord {
            epoch,
            mean_loss,
            wall_clock: started.elapsed(),
        });
        log::info!("epoch {epoch}: mean loss {mean_loss:e}");
        hook(&EpochEvent {
            epoch,
            mean_loss,
            student: &student,
        })?;
    }
    Ok((student, curve))
}

/// One forward/backward/update on a batch. Returns the batch loss before the update.
fn train_step<T: Element>(
    student: &mut EncoderModel<T>,
    opt: &mut OptimizerState<T>,
    teacher: &TeacherSource<'_, T>,
    items: &[&DatasetItem],
    delta: f64,
) -> Result<f64> {
    let images: Vec<Tensor<T>> = items.iter().map(|i| i.image.cast()).collect();
    let batch = stack_images(&images.iter().collect::<Vec<_>>())?;
    let targets = teacher.targets(items)?;

    let mut g = Graph::new();
    let p = student.bind(&mut g, true);
    let x = g.constant(batch);
    let y = student.forward(&mut g, &p, x)?;
    let t = g.constant(targets);
    let loss = g.huber_loss(y, t, delta)?;
    let value = g.value(loss).item().as_f64();
    if !value.is_finite() {
        return Ok(value);
    }
    let grads = g.backward(loss)?;
    let grads: Vec<Tensor<T>> = p
        .iter()
        .map(|&v| {
            grads
                .get(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(g.shape(v)))
        })
        .collect();
    opt.step(student.params_mut(), &grads)?;
    Ok(value)
}
