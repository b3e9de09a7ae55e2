//! Tiled inference with an average-pooling and a sum-pooling model. Per-tile
//! over- and undercounts partly cancel when tile counts are summed, so the
//! image-level error understates the tile-level error.
//!
//! cargo run --release --example tiled_cancellation

use gsp_count::dataset::{generate_dataset, DatasetPlan, Split};
use gsp_count::eval::{evaluate_suite, infer_tiled, EvalMode};
use gsp_count::model::{CountModel, Head, ModelConfig};
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
        train: 16,
        test: 4,
        test_sizes: vec![192],
        ..DatasetPlan::default()
    };
    let ds = generate_dataset(&scene, &plan, 4)?;
    let cfg = TrainConfig {
        epochs: 6,
        optimizer: OptimizerConfig::adam(2e-3),
        ..TrainConfig::default()
    };

    for head in [Head::Gap, Head::Gsp] {
        let (model, _) = train(CountModel::new(ModelConfig { head, ..ModelConfig::default() })?, &ds, &cfg)?;
        let report = evaluate_suite(&model, &ds, EvalMode::Tiled(48), LabelRule::Dots)?;
        let c = report.cancellation.expect("tiled mode");
        println!(
            "{head}: cumulative MAE {:.3}, patch-summed MAE {:.3}, mean apparent {:.3}, mean actual {:.3}",
            report.metrics.mae,
            report.patch_summed.expect("tiled mode").mae,
            c.mean_apparent,
            c.mean_actual
        );
        let image = &ds.load_split(Split::Test)?[0];
        let tiled = infer_tiled(&model, image, 48, Some(LabelRule::Dots))?;
        for t in tiled.tiles.iter().take(4) {
            println!("  tile {}: predicted {:.2}, gt {}", t.rect, t.prediction, t.gt.unwrap_or(0));
        }
        let c = tiled.cancellation.expect("labelled tiles");
        println!(
            "  {}: E_over {:.2}, E_under {:.2}, apparent {:.2}, actual {:.2}",
            tiled.image_id, c.e_over, c.e_under, c.apparent, c.actual
        );
    }
    Ok(())
}
