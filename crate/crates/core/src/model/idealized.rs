use super::config::Head;
use super::CountingNet;
use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor};

/// Analytic feature extractor for uniformly distributed objects: every
/// `block_size x block_size` region of a unit-intensity input holds
/// `block_count` objects.
///
/// The single feature channel is the constant density
/// `block_count / block_size²` scaled by the channel-mean pixel intensity.
/// The linear weight is 1 under a sum head and `block_size²` under an
/// average head, so both heads predict `block_count` on one block.
#[derive(Clone, Debug, PartialEq)]
pub struct IdealizedBlockModel {
    block_size: usize,
    block_count: f64,
    head: Head,
    weight: [f64; 1],
}

impl IdealizedBlockModel {
    pub fn new(block_size: usize, block_count: f64, head: Head) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::Config("idealized block size must be >= 1".into()));
        }
        if !(block_count >= 0.0 && block_count.is_finite()) {
            return Err(Error::Config(format!(
                "idealized block count must be finite and >= 0, got {block_count}"
            )));
        }
        let weight = match head {
            Head::Gsp => 1.0,
            Head::Gap => (block_size * block_size) as f64,
        };
        Ok(IdealizedBlockModel {
            block_size,
            block_count,
            head,
            weight: [weight],
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block_count(&self) -> f64 {
        self.block_count
    }

    /// Feature value per spatial cell for a unit-intensity input.
    pub fn density(&self) -> f64 {
        self.block_count / (self.block_size * self.block_size) as f64
    }

    pub fn with_head(&self, head: Head) -> Self {
        Self::new(self.block_size, self.block_count, head).expect("already validated")
    }
}

impl CountingNet for IdealizedBlockModel {
    fn head(&self) -> Head {
        self.head
    }

    fn min_input_size(&self) -> usize {
        1
    }

    fn feature_map(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.dims3()?;
        let d = self.density();
        let plane = h * w;
        let mut out = vec![0.0; plane];
        for ch in image.data().chunks(plane) {
            out.iter_mut().zip(ch).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o *= d / c as f64);
        Tensor::new(vec![1, h, w], out)
    }

    fn linear_weight(&self) -> &[f64] {
        &self.weight
    }

    fn linear_bias(&self) -> f64 {
        0.0
    }
}

/// Evaluates both heads of `model` on a uniform `mW x mW` input and returns
/// `(sum-head prediction, average-head prediction)`, which should equal
/// `(m² · count, count)`.
pub fn idealized_scaling_check(model: &IdealizedBlockModel, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::Config("scaling factor m must be >= 1".into()));
    }
    let side = m * model.block_size();
    let input = Tensor::full(&[1, side, side], 1.0);
    let mut preds = [0.0; 2];
    for (slot, head) in preds.iter_mut().zip([Head::Gsp, Head::Gap]) {
        let variant = model.with_head(head);
        let mut g = Graph::new();
        let f = g.constant(variant.feature_map(&input)?);
        let pooled = match head {
            Head::Gsp => g.gsp(f)?,
            Head::Gap => g.gap(f)?,
        };
        let w = g.constant(Tensor::new(vec![1], variant.linear_weight().to_vec())?);
        let b = g.constant(Tensor::scalar(variant.linear_bias()));
        let y = g.linear(pooled, w, b)?;
        *slot = g.value(y).item();
    }
    Ok((preds[0], preds[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_arithmetic() {
        let m = IdealizedBlockModel::new(8, 5.0, Head::Gsp).unwrap();
        assert_eq!(m.density(), 5.0 / 64.0);
        let f = m.feature_map(&Tensor::full(&[1, 8, 8], 1.0)).unwrap();
        assert!(f.data().iter().all(|&v| v == 5.0 / 64.0));
    }

    #[test]
    fn zero_count_is_zero_model() {
        let m = IdealizedBlockModel::new(4, 0.0, Head::Gsp).unwrap();
        assert_eq!(m.predict(&Tensor::full(&[1, 12, 12], 1.0)).unwrap(), 0.0);
        assert_eq!(idealized_scaling_check(&m, 3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn unit_count_one_block_is_exactly_one() {
        for w in [1, 2, 4, 8, 16] {
            let m = IdealizedBlockModel::new(w, 1.0, Head::Gsp).unwrap();
            assert_eq!(m.predict(&Tensor::full(&[1, w, w], 1.0)).unwrap(), 1.0, "W={w}");
        }
        // 1/W² is not representable for other W; the sum is off by rounding only.
        for w in [3, 5, 7, 12] {
            let m = IdealizedBlockModel::new(w, 1.0, Head::Gsp).unwrap();
            let p = m.predict(&Tensor::full(&[1, w, w], 1.0)).unwrap();
            assert!((p - 1.0).abs() <= 1e-12, "W={w}: {p}");
        }
    }

    #[test]
    fn scaling_examples() {
        let m = IdealizedBlockModel::new(8, 5.0, Head::Gsp).unwrap();
        assert_eq!(idealized_scaling_check(&m, 3).unwrap(), (45.0, 5.0));
        assert_eq!(idealized_scaling_check(&m, 1).unwrap(), (5.0, 5.0));
        let m = IdealizedBlockModel::new(4, 2.5, Head::Gap).unwrap();
        assert_eq!(idealized_scaling_check(&m, 2).unwrap(), (10.0, 2.5));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(IdealizedBlockModel::new(0, 1.0, Head::Gsp).is_err());
        assert!(IdealizedBlockModel::new(4, -1.0, Head::Gsp).is_err());
        let m = IdealizedBlockModel::new(4, 1.0, Head::Gsp).unwrap();
        assert!(idealized_scaling_check(&m, 0).is_err());
    }
}
