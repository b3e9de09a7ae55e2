//! Trains a sum-pooling counter on random 48 px patches of small synthetic
//! scenes, then counts objects in larger test images it never saw at that
//! size. Saves the checkpoint if a path is given.
//!
//! cargo run --release --example train_counter [-- model.ckpt]

use gsp_count::dataset::{generate_dataset, DatasetPlan, Split};
use gsp_count::eval::{evaluate_suite, format_summary, EvalMode};
use gsp_count::model::{save_model, CountModel, ModelConfig};
use gsp_count::synth::{LabelRule, SceneSpec};
use gsp_count::train::{train, OptimizerConfig, TrainConfig};

fn main() -> gsp_count::Result<()> {
    let scene = SceneSpec {
        height: 128,
        width: 128,
        count_min: 3,
        count_max: 12,
        ..SceneSpec::default()
    };
    let plan = DatasetPlan {
        train: 24,
        val: 4,
        test: 8,
        test_sizes: vec![128, 256],
        ..DatasetPlan::default()
    };
    let ds = generate_dataset(&scene, &plan, 1)?;
    let cfg = TrainConfig {
        epochs: 12,
        patches_per_image: 12,
        optimizer: OptimizerConfig::adam(2e-3),
        seed: 1,
        ..TrainConfig::default()
    };
    let (model, log) = train(CountModel::new(ModelConfig::default())?, &ds, &cfg)?;
    for e in &log.epochs {
        println!(
            "epoch {:>2}: loss {:.4}, val MAE {}",
            e.epoch,
            e.loss,
            e.val_mae.map_or("-".into(), |v| format!("{v:.3}"))
        );
    }

    let report = evaluate_suite(&model, &ds, EvalMode::Full, LabelRule::Dots)?;
    print!("{}", format_summary(&report));
    for (im, e) in ds.load_split(Split::Test)?.iter().zip(&report.images) {
        println!("{:>10} {}x{}: gt {:>3}, predicted {:.2}", e.id, im.width(), im.height(), e.gt, e.prediction);
    }
    if let Some(path) = std::env::args().nth(1) {
        save_model(&model, &path)?;
        println!("saved {path}");
    }
    Ok(())
}
