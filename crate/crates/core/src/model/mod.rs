//! The one-look counting network and its analytic stand-in.

mod checkpoint;
mod config;
mod gradcheck;
mod idealized;
mod network;

pub use checkpoint::{load_model, read_model, save_model, write_model};
pub use config::{ConvBlock, Head, ModelConfig, POOL_STRIDE, POOL_WINDOW};
pub use gradcheck::{check_model_gradients, ParamGradCheck};
pub use idealized::{idealized_scaling_check, IdealizedBlockModel};
pub use network::{ConvParams, CountModel, ForwardVars, Trainable};

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

/// A model whose output is `linear(pool(feature_map(image)))`.
///
/// Implemented by the trainable [`CountModel`] and the analytic
/// [`IdealizedBlockModel`] so evaluation, CAM export and the linearity probe
/// work on either.
pub trait CountingNet {
    fn head(&self) -> Head;

    fn min_input_size(&self) -> usize;

    /// Final feature map `[C_f, H', W']`.
    fn feature_map(&self, image: &Tensor) -> Result<Tensor>;

    fn linear_weight(&self) -> &[f64];

    fn linear_bias(&self) -> f64;

    /// Pooled `C_f` vector under this model's head.
    fn pooled_features(&self, image: &Tensor) -> Result<Vec<f64>> {
        let features = self.feature_map(image)?;
        let mut g = Graph::new();
        let f = g.constant(features);
        let pooled = match self.head() {
            Head::Gsp => g.gsp(f)?,
            Head::Gap => g.gap(f)?,
        };
        Ok(g.value(pooled).data().to_vec())
    }

    /// Scalar count, unclamped.
    fn predict(&self, image: &Tensor) -> Result<f64> {
        let pooled = self.pooled_features(image)?;
        let w = self.linear_weight();
        if pooled.len() != w.len() {
            return Err(Error::dim(format!(
                "pooled vector has {} entries, linear weight {}",
                pooled.len(),
                w.len()
            )));
        }
        Ok(pooled.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + self.linear_bias())
    }
}
