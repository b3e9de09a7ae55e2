//! Sum pooling is additive across a vertical cut up to the feature mass the
//! cut can influence.

use gsp_count::model::{ConvParams, CountModel, CountingNet, Head, ModelConfig};
use gsp_count::synth::{generate_image, SceneSpec};
use gsp_count::tensor::Tensor;
use gsp_count::train::{train_on, OptimizerConfig, PatchSize, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Receptive field side of a conv stack with 2x2/2 pools.
fn receptive_field(cfg: &ModelConfig) -> usize {
    let (mut rf, mut jump) = (1, 1);
    for b in &cfg.blocks {
        rf += (b.kernel - 1) * jump;
        jump *= b.stride;
        if b.pool_after {
            rf += jump;
            jump *= 2;
        }
    }
    rf
}

/// Σ_c |w_c| · Σ |F[c, :, cols]|.
fn weighted_mass(f: &Tensor, w: &[f64], cols: std::ops::Range<usize>) -> f64 {
    let (c, h, _) = f.dims3().unwrap();
    let mut total = 0.0;
    for ch in 0..c {
        for y in 0..h {
            for x in cols.clone() {
                total += w[ch].abs() * f.at3(ch, y, x).abs();
            }
        }
    }
    total
}

fn check_cut(model: &CountModel, image: &Tensor) {
    let cfg = model.config();
    let d = cfg.downsampling();
    let (_, h, w) = image.dims3().unwrap();
    let half = w / 2;
    assert!(half % d == 0);
    // Feature columns whose receptive field can see the cut or its zero padding.
    let r = receptive_field(cfg).div_ceil(d) + 1;
    let left = image.crop(0, 0, half, h).unwrap();
    let right = image.crop(half, 0, half, h).unwrap();
    let (ff, fl, fr) = (
        model.feature_map(image).unwrap(),
        model.feature_map(&left).unwrap(),
        model.feature_map(&right).unwrap(),
    );
    let (cut, wl) = (ff.shape()[2] / 2, fl.shape()[2]);
    assert!(wl > r, "halves too narrow for radius {r}");
    for ch in 0..ff.shape()[0] {
        for y in 0..ff.shape()[1] {
            for x in 0..cut - r {
                assert!((ff.at3(ch, y, x) - fl.at3(ch, y, x)).abs() <= 1e-12);
            }
            for x in cut + r..ff.shape()[2] {
                assert!((ff.at3(ch, y, x) - fr.at3(ch, y, x - cut)).abs() <= 1e-12);
            }
        }
    }
    let b = model.bias();
    let whole = model.predict(image).unwrap() - b;
    let parts = (model.predict(&left).unwrap() - b) + (model.predict(&right).unwrap() - b);
    let wt = model.weight().data();
    let bound = weighted_mass(&ff, wt, cut - r..cut + r) + weighted_mass(&fl, wt, wl - r..wl) + weighted_mass(&fr, wt, 0..r);
    assert!((whole - parts).abs() <= bound + 1e-9, "diff {} bound {bound}", (whole - parts).abs());
}

fn scene(h: usize, w: usize) -> SceneSpec {
    SceneSpec::default().resized(h, w, true)
}

#[test]
fn random_models_respect_the_border_bound() {
    assert_eq!(receptive_field(&ModelConfig::default()), 46);
    for seed in 0..3 {
        let template = CountModel::new(ModelConfig { seed, ..ModelConfig::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = template
            .convs()
            .iter()
            .map(|c| ConvParams {
                kernel: c.kernel.clone(),
                bias: Tensor::new(c.bias.shape().to_vec(), (0..c.bias.len()).map(|_| rng.random_range(-0.05..0.1)).collect()).unwrap(),
            })
            .collect();
        let weight = Tensor::new(vec![64], (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let model = CountModel::from_parts(template.config().clone(), convs, weight, 0.5).unwrap();
        let img = generate_image(&scene(96, 256), seed, "b").unwrap();
        check_cut(&model, img.pixels());
    }
}

#[test]
fn briefly_trained_model_respects_the_border_bound() {
    let train: Vec<_> = (0..4).map(|i| generate_image(&scene(96, 96), 100 + i, format!("t{i}")).unwrap()).collect();
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 4,
        patch_size: PatchSize::Square(48),
        patches_per_image: 4,
        optimizer: OptimizerConfig::adam(1e-3),
        seed: 1,
        ..TrainConfig::default()
    };
    let (model, _) = train_on(CountModel::new(ModelConfig { head: Head::Gsp, ..ModelConfig::default() }).unwrap(), &train, &[], &cfg).unwrap();
    let img = generate_image(&scene(64, 192), 7, "b").unwrap();
    check_cut(&model, img.pixels());
}
