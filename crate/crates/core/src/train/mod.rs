//! Patch-based training of a [`CountModel`].
//!
//! Every epoch draws `patches_per_image` patches from each training image
//! with a seed derived from `(seed, epoch, image, patch)`, shuffles them and
//! runs mini-batches. A batch gradient is the mean of per-sample gradients.
//! Training is a pure function of the model, the images and the config.

mod optimizer;

pub use optimizer::{optimizer_step, OptimizerConfig, OptimizerKind, OptimizerState};

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{infer_full, infer_tiled};
use crate::model::{CountModel, CountingNet, Head, Trainable};
use crate::synth::{
    derive_seed, extract_patch, sample_object_centered_patch, sample_random_patch, AnnotatedImage, LabelRule,
    PatchSample,
};
use crate::tensor::{Graph, LossKind, Tensor};

/// Training input size: the whole image, or square patches of a fixed side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchSize {
    Full,
    Square(usize),
}

impl Default for PatchSize {
    fn default() -> Self {
        PatchSize::Square(48)
    }
}

impl fmt::Display for PatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchSize::Full => f.write_str("full"),
            PatchSize::Square(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for PatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(PatchSize::Full);
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(PatchSize::Square(n)),
            _ => Err(Error::Config(format!("patch size {s:?} is neither \"full\" nor a positive integer"))),
        }
    }
}

impl Serialize for PatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PatchSize::Full => s.serialize_str("full"),
            PatchSize::Square(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for PatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Str(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Int(n) => n.to_string(),
            Repr::Str(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patch_size: PatchSize,
    /// Ignored for full-image training, which uses each image once per epoch.
    pub patches_per_image: usize,
    /// Probability that a patch is centered on a random object rather than placed uniformly.
    pub object_centered_fraction: f64,
    pub label_rule: LabelRule,
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    /// Train only the linear head.
    pub freeze_conv: bool,
    pub seed: u64,
    /// Fill the `seconds` column of the log. Off by default so logs are reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            patch_size: PatchSize::default(),
            patches_per_image: 8,
            object_centered_fraction: 0.0,
            label_rule: LabelRule::Dots,
            loss: LossKind::L1,
            optimizer: OptimizerConfig::default(),
            freeze_conv: false,
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train: batch_size must be >= 1".into()));
        }
        if self.patch_size != PatchSize::Full && self.patches_per_image == 0 {
            return Err(Error::Config("train: patches_per_image must be >= 1".into()));
        }
        if self.patch_size == PatchSize::Square(0) {
            return Err(Error::Config("train: patch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.object_centered_fraction) {
            return Err(Error::Config(format!(
                "train: object_centered_fraction {} outside [0, 1]",
                self.object_centered_fraction
            )));
        }
        self.optimizer.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub loss: f64,
    pub val_mae: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// CSV with header `epoch,loss,val_mae,seconds`; absent values are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let wrap = |e: csv::Error| Error::Numeric(format!("train log: {e}"));
        w.write_record(["epoch", "loss", "val_mae", "seconds"]).map_err(wrap)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.loss.to_string(), opt(e.val_mae), opt(e.seconds)])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("train log: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Trains on the train split of `ds`, validating on its val split.
pub fn train(model: CountModel, ds: &Dataset, cfg: &TrainConfig) -> Result<(CountModel, TrainLog)> {
    let train_images = ds.load_split(Split::Train)?;
    let val_images = ds.load_split(Split::Val)?;
    train_on(model, &train_images, &val_images, cfg)
}

/// Mean absolute count error on `images`. A sum head, or full-image training,
/// uses one pass per image; a mean head trained on patches predicts the sum
/// of its tile predictions.
pub fn validation_mae(model: &CountModel, images: &[AnnotatedImage], patch: PatchSize) -> Result<f64> {
    let mut total = 0.0;
    for im in images {
        let pred = match (model.head(), patch) {
            (Head::Gap, PatchSize::Square(s)) => infer_tiled(model, im, s, None)?.cumulative_prediction,
            _ => infer_full(model, im.pixels())?,
        };
        total += (pred - im.count() as f64).abs();
    }
    Ok(total / images.len() as f64)
}

fn draw_sample(image: &AnnotatedImage, cfg: &TrainConfig, seed: u64) -> Result<PatchSample> {
    match cfg.patch_size {
        PatchSize::Full => extract_patch(image, image.full_rect(), cfg.label_rule),
        PatchSize::Square(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centered = rng.random::<f64>() < cfg.object_centered_fraction && !image.dots().is_empty();
            if centered {
                sample_object_centered_patch(image, s, cfg.label_rule, &mut rng)
            } else {
                sample_random_patch(image, s, cfg.label_rule, &mut rng)
            }
        }
    }
}

/// Trains `model` on `train_images`. Images too small for the patch size or
/// the model are skipped with a warning; it is an error if none remain.
pub fn train_on(
    mut model: CountModel,
    train_images: &[AnnotatedImage],
    val_images: &[AnnotatedImage],
    cfg: &TrainConfig,
) -> Result<(CountModel, TrainLog)> {
    cfg.validate()?;
    let mut log = TrainLog::default();
    if cfg.epochs == 0 {
        return Ok((model, log));
    }
    let min = model.min_input_size();
    if let PatchSize::Square(s) = cfg.patch_size {
        if s < min {
            return Err(Error::Config(format!("train: patch size {s} below the model minimum {min}")));
        }
    }
    let eligible: Vec<usize> = train_images
        .iter()
        .enumerate()
        .filter(|(_, im)| {
            let side = match cfg.patch_size {
                PatchSize::Full => min,
                PatchSize::Square(s) => s,
            };
            let ok = im.height() >= side && im.width() >= side;
            if !ok {
                log::warn!("skipping {}: {}x{} smaller than {side}", im.id, im.height(), im.width());
            }
            ok
        })
        .map(|(i, _)| i)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Contract(format!(
            "no training image fits patch size {} (of {} images)",
            cfg.patch_size,
            train_images.len()
        )));
    }
    let per_image = match cfg.patch_size {
        PatchSize::Full => 1,
        PatchSize::Square(_) => cfg.patches_per_image,
    };
    let trainable = if cfg.freeze_conv { Trainable::LinearOnly } else { Trainable::All };
    let first_trained = if cfg.freeze_conv { 2 * model.convs().len() } else { 0 };
    let mut state = OptimizerState::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<(usize, usize)> =
            eligible.iter().flat_map(|&i| (0..per_image).map(move |j| (i, j))).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[epoch as u64, u64::MAX])));

        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let fail = |reason: String| Error::Training {
                epoch,
                batch: b,
                reason,
            };
            let mut grads: Option<Vec<Tensor>> = None;
            for &(i, j) in batch {
                let sample = draw_sample(
                    &train_images[i],
                    cfg,
                    derive_seed(cfg.seed, &[epoch as u64, i as u64, j as u64]),
                )?;
                debug_assert_eq!(
                    sample.count,
                    crate::synth::count_in_rect(&train_images[i], sample.rect, cfg.label_rule)?
                );
                let mut g = Graph::new();
                let x = g.constant(sample.pixels);
                let out = model.forward(&mut g, x, trainable)?;
                let loss = g
                    .loss(out.count, sample.count as f64, cfg.loss)
                    .map_err(|e| fail(e.to_string()))?;
                let value = g.value(loss).item();
                if !value.is_finite() {
                    return Err(fail(format!("loss is {value}")));
                }
                loss_sum += value;
                g.backward(loss).map_err(|e| fail(e.to_string()))?;
                let sample_grads: Vec<Tensor> = out.params[first_trained..]
                    .iter()
                    .map(|&p| g.take_grad(p).expect("trainable parameter has a gradient"))
                    .collect();
                match &mut grads {
                    None => grads = Some(sample_grads),
                    Some(acc) => {
                        for (a, s) in acc.iter_mut().zip(&sample_grads) {
                            for (x, y) in a.data_mut().iter_mut().zip(s.data()) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            let mut grads = grads.expect("non-empty batch");
            let inv = 1.0 / batch.len() as f64;
            for t in &mut grads {
                t.data_mut().iter_mut().for_each(|v| *v *= inv);
            }
            let mut params = model.parameters_mut();
            optimizer_step(&mut params[first_trained..], &grads, &mut state, &cfg.optimizer)
                .map_err(|e| fail(e.to_string()))?;
        }

        let loss = loss_sum / order.len() as f64;
        let val_mae = if val_images.is_empty() {
            None
        } else {
            Some(validation_mae(&model, val_images, cfg.patch_size)?)
        };
        let seconds = cfg.record_wall_time.then(|| started.elapsed().as_secs_f64());
        log::info!(
            "epoch {epoch}/{}: loss {loss:.5}{}",
            cfg.epochs,
            val_mae.map(|v| format!(", val MAE {v:.4}")).unwrap_or_default()
        );
        log.epochs.push(EpochLog {
            epoch,
            loss,
            val_mae,
            seconds,
        });
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConvBlock, ModelConfig};
    use crate::synth::{generate_image, SceneSpec};

    fn tiny_model(head: Head) -> CountModel {
        CountModel::new(ModelConfig {
            in_channels: 1,
            head,
            seed: 5,
            blocks: vec![ConvBlock::new(4, 3, 1, 1, true), ConvBlock::new(8, 3, 1, 1, true)],
        })
        .unwrap()
    }

    fn scenes(n: u64, side: usize, counts: (usize, usize)) -> Vec<AnnotatedImage> {
        let spec = SceneSpec {
            height: side,
            width: side,
            count_min: counts.0,
            count_max: counts.1,
            ..SceneSpec::default()
        };
        (0..n).map(|i| generate_image(&spec, 100 + i, format!("s{i}")).unwrap()).collect()
    }

    #[test]
    fn zero_epochs_returns_model_unchanged() {
        let m = tiny_model(Head::Gsp);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (out, log) = train_on(m.clone(), &scenes(2, 32, (1, 3)), &[], &cfg).unwrap();
        assert_eq!(out, m);
        assert!(log.epochs.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let ims = scenes(3, 32, (1, 4));
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            patch_size: PatchSize::Square(16),
            patches_per_image: 3,
            object_centered_fraction: 0.5,
            ..TrainConfig::default()
        };
        let (a, la) = train_on(tiny_model(Head::Gsp), &ims, &ims[..1], &cfg).unwrap();
        let (b, lb) = train_on(tiny_model(Head::Gsp), &ims, &ims[..1], &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = train_on(tiny_model(Head::Gsp), &ims, &[], &TrainConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, c);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        la.write_csv(&mut ca).unwrap();
        lb.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(String::from_utf8(ca).unwrap().starts_with("epoch,loss,val_mae,seconds\n1,"));
    }

    #[test]
    fn overfits_ten_samples() {
        let ims = scenes(10, 32, (0, 6));
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 10,
            patch_size: PatchSize::Full,
            optimizer: OptimizerConfig::adam(1e-2),
            ..TrainConfig::default()
        };
        let (_, log) = train_on(tiny_model(Head::Gsp), &ims, &[], &cfg).unwrap();
        let l = log.losses();
        assert!(l[199] < 0.1 * l[0], "first {} last {}", l[0], l[199]);
    }

    #[test]
    fn linear_only_full_batch_loss_is_monotone() {
        let ims = scenes(6, 32, (1, 6));
        let model = tiny_model(Head::Gsp);
        // Step below 1/L for the MSE quadratic in (w, b).
        let curvature: f64 = ims
            .iter()
            .map(|im| 1.0 + model.pooled_features(im.pixels()).unwrap().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            * 2.0
            / ims.len() as f64;
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: ims.len(),
            patch_size: PatchSize::Full,
            loss: LossKind::Mse,
            freeze_conv: true,
            optimizer: OptimizerConfig::sgd(0.5 / curvature, 0.0),
            ..TrainConfig::default()
        };
        let (trained, log) = train_on(model.clone(), &ims, &[], &cfg).unwrap();
        assert_eq!(trained.convs(), model.convs());
        let l = log.losses();
        assert!(l.windows(2).all(|w| w[1] <= w[0]), "{l:?}");
        assert!(l[29] < l[0]);
    }

    #[test]
    fn gap_validation_uses_tiles() {
        let ims = scenes(2, 32, (2, 4));
        let m = tiny_model(Head::Gap);
        let tiled = validation_mae(&m, &ims, PatchSize::Square(16)).unwrap();
        let mut expect = 0.0;
        for im in &ims {
            let t = infer_tiled(&m, im, 16, None).unwrap();
            expect += (t.cumulative_prediction - im.count() as f64).abs();
        }
        assert!((tiled - expect / 2.0).abs() < 1e-12);
    }

    #[test]
    fn undersized_images_are_skipped_or_rejected() {
        let small = scenes(2, 8, (0, 1));
        let cfg = TrainConfig {
            epochs: 1,
            patch_size: PatchSize::Square(16),
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_on(tiny_model(Head::Gsp), &small, &[], &cfg),
            Err(Error::Contract(_))
        ));
        let mut mixed = small;
        mixed.extend(scenes(1, 32, (1, 2)));
        let (_, log) = train_on(tiny_model(Head::Gsp), &mixed, &[], &cfg).unwrap();
        assert_eq!(log.epochs.len(), 1);
    }

    #[test]
    fn patch_size_parsing() {
        assert_eq!("full".parse::<PatchSize>().unwrap(), PatchSize::Full);
        assert_eq!("48".parse::<PatchSize>().unwrap(), PatchSize::Square(48));
        assert!("0".parse::<PatchSize>().is_err());
        #[derive(Deserialize)]
        struct W {
            p: PatchSize,
        }
        assert_eq!(toml::from_str::<W>("p = 32").unwrap().p, PatchSize::Square(32));
        assert_eq!(toml::from_str::<W>("p = \"full\"").unwrap().p, PatchSize::Full);
    }
}
