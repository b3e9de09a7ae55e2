//! Class activation map of a counting model: the heatmap `Σ w_c F_c` sums
//! (sum head) or averages (mean head) to the predicted count minus the bias.
//! Writes the heatmap and an overlay next to the given prefix.
//!
//! cargo run --release --example cam [-- OUT_PREFIX]

use gsp_count::eval::{compute_cam, render_cam_overlay};
use gsp_count::model::{CountModel, Head, ModelConfig};
use gsp_count::synth::{generate_image, SceneSpec};
use gsp_count::train::{train_on, OptimizerConfig, TrainConfig};

fn main() -> gsp_count::Result<()> {
    let scene = SceneSpec {
        height: 96,
        width: 96,
        ..SceneSpec::default()
    };
    let train_images: Vec<_> = (0..12).map(|i| generate_image(&scene, i, format!("train{i}"))).collect::<Result<_, _>>()?;
    let cfg = TrainConfig {
        epochs: 5,
        optimizer: OptimizerConfig::adam(2e-3),
        ..TrainConfig::default()
    };
    let (model, _) = train_on(CountModel::new(ModelConfig::default())?, &train_images, &[], &cfg)?;

    let image = generate_image(&scene.resized(160, 224, true), 99, "probe")?;
    for head in [Head::Gsp, Head::Gap] {
        let m = model.with_head(head);
        let cam = compute_cam(&m, image.pixels())?;
        println!(
            "{head}: heatmap {:?}, prediction {:.4}, from heatmap {:.4}, gt {}",
            cam.heatmap.shape(),
            cam.prediction,
            cam.reconstructed_count(),
            image.count()
        );
    }
    let prefix = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("gsp_cam_example"));
    let cam = compute_cam(&model, image.pixels())?;
    let (heat, overlay) = render_cam_overlay(&cam, image.pixels(), &prefix)?;
    println!("wrote {} and {}", heat.display(), overlay.display());
    Ok(())
}
