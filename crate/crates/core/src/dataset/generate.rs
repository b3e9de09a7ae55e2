use serde::{Deserialize, Serialize};

use super::{Dataset, Split};
use crate::error::Result;
use crate::synth::{derive_seed, generate_image, SceneSpec};

/// How many synthetic images to draw per split and at which sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetPlan {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Square side lengths cycled through per split; empty means the scene size.
    pub train_sizes: Vec<usize>,
    pub val_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    /// Scale the scene's count range with image area so object density stays constant.
    pub scale_counts_with_area: bool,
}

impl Default for DatasetPlan {
    fn default() -> Self {
        DatasetPlan {
            train: 64,
            val: 0,
            test: 32,
            train_sizes: vec![],
            val_sizes: vec![],
            test_sizes: vec![192, 256, 320, 384],
            scale_counts_with_area: true,
        }
    }
}

impl DatasetPlan {
    fn split_plan(&self, split: Split) -> (usize, &[usize]) {
        match split {
            Split::Train => (self.train, &self.train_sizes),
            Split::Val => (self.val, &self.val_sizes),
            Split::Test => (self.test, &self.test_sizes),
        }
    }
}

/// Draws every image of the plan. Image `i` of split `s` uses the seed
/// `derive_seed(seed, [s, i])`, so any subset can be regenerated alone.
pub fn generate_dataset(scene: &SceneSpec, plan: &DatasetPlan, seed: u64) -> Result<Dataset> {
    scene.validate()?;
    let mut images = Vec::new();
    for (si, split) in Split::ALL.into_iter().enumerate() {
        let (n, sizes) = plan.split_plan(split);
        for i in 0..n {
            let spec = match sizes {
                [] => scene.clone(),
                _ => {
                    let side = sizes[i % sizes.len()];
                    scene.resized(side, side, plan.scale_counts_with_area)
                }
            };
            let id = format!("{split}_{i:04}");
            let image = generate_image(&spec, derive_seed(seed, &[si as u64, i as u64]), id)?;
            images.push((split, image));
        }
    }
    Ok(Dataset::from_images(images))
}
