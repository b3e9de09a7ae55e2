//! Sum-pooled features of image halves against the whole image. Away from
//! the cut the features are local, so each half carries roughly its share of
//! the activation mass and the two halves add up to nearly the full image.
//!
//! cargo run --release --example linearity_probe

use gsp_count::eval::{half_crops, linearity_probe};
use gsp_count::model::{CountModel, ModelConfig};
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

    let image = generate_image(&scene.resized(192, 192, true), 42, "probe")?;
    let crops = half_crops(image.width(), image.height());
    let table = linearity_probe(&model, image.pixels(), &crops, 8)?;
    let total = |v: &[f64]| v.iter().sum::<f64>();
    let full = total(&table.rows[0].values);
    println!("top {} channels, full-image mass {full:.3}", table.channels.len());
    for row in &table.rows[1..] {
        let r = row.rect.expect("crop row");
        println!("  {r}: mass {:.3} ({:.1}% of full)", total(&row.values), 100.0 * total(&row.values) / full);
    }
    let (left, right) = (total(&table.rows[1].values), total(&table.rows[2].values));
    println!("left + right = {:.3} vs full {full:.3}", left + right);
    table.write_csv(std::io::stdout().lock())?;
    Ok(())
}
