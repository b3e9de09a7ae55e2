use crate::error::Result;
use crate::model::CountingNet;
use crate::synth::{count_in_rect, tile_patches, AnnotatedImage, LabelRule, Rect};
use crate::tensor::Tensor;

/// Single forward pass over the whole image; the count is not clamped.
pub fn infer_full<M: CountingNet + ?Sized>(model: &M, image: &Tensor) -> Result<f64> {
    model.predict(image)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TileRecord {
    pub rect: Rect,
    pub prediction: f64,
    pub gt: Option<usize>,
    /// Zero pixels appended to bring an undersized edge tile up to the model minimum.
    pub padded_area: usize,
}

/// Overestimate/underestimate split of per-tile errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cancellation {
    /// Σ of positive per-tile errors.
    pub e_over: f64,
    /// Σ of |negative per-tile errors|.
    pub e_under: f64,
    /// `|e_over - e_under|`: the error visible after summing tile counts.
    pub apparent: f64,
    /// `e_over + e_under`: the summed per-tile error.
    pub actual: f64,
}

impl Cancellation {
    pub fn from_errors(errors: impl IntoIterator<Item = f64>) -> Self {
        let (mut e_over, mut e_under) = (0.0, 0.0);
        for e in errors {
            if e > 0.0 {
                e_over += e;
            } else {
                e_under -= e;
            }
        }
        Cancellation {
            e_over,
            e_under,
            apparent: (e_over - e_under).abs(),
            actual: e_over + e_under,
        }
    }

    /// `apparent / actual`, `None` when every tile is exact.
    pub fn ratio(&self) -> Option<f64> {
        (self.actual > 0.0).then(|| self.apparent / self.actual)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TiledInferenceReport {
    pub image_id: String,
    pub tiles: Vec<TileRecord>,
    pub cumulative_prediction: f64,
    /// Σ per-tile ground truth; `None` when tiles carry no labels.
    pub tile_gt_sum: Option<usize>,
    pub cancellation: Option<Cancellation>,
}

impl TiledInferenceReport {
    /// Aggregates per-tile records. Cancellation accounting is only
    /// available when every tile has a ground truth.
    pub fn from_tiles(image_id: impl Into<String>, tiles: Vec<TileRecord>) -> Self {
        let cumulative_prediction = tiles.iter().map(|t| t.prediction).sum();
        let gts: Option<Vec<usize>> = tiles.iter().map(|t| t.gt).collect();
        let cancellation = gts.as_ref().map(|g| {
            Cancellation::from_errors(tiles.iter().zip(g).map(|(t, &y)| t.prediction - y as f64))
        });
        TiledInferenceReport {
            image_id: image_id.into(),
            tile_gt_sum: gts.map(|g| g.iter().sum()),
            tiles,
            cumulative_prediction,
            cancellation,
        }
    }
}

/// Runs the model on adjacent non-overlapping tiles. Edge tiles smaller than
/// the model minimum are zero-padded on the bottom/right. Per-tile ground
/// truth follows `rule`; pass `None` when the image has no usable
/// annotations, in which case only predictions are reported.
pub fn infer_tiled<M: CountingNet + ?Sized>(
    model: &M,
    image: &AnnotatedImage,
    patch_size: usize,
    rule: Option<LabelRule>,
) -> Result<TiledInferenceReport> {
    let min = model.min_input_size();
    let mut tiles = Vec::new();
    for rect in tile_patches(image, patch_size)? {
        let crop = image.pixels().crop(rect.x0, rect.y0, rect.w, rect.h)?;
        let (h, w) = (rect.h.max(min), rect.w.max(min));
        let padded_area = h * w - rect.area();
        let input = if padded_area > 0 { crop.pad_to(h, w)? } else { crop };
        let gt = match rule {
            Some(r) => Some(count_in_rect(image, rect, r)?),
            None => None,
        };
        tiles.push(TileRecord {
            rect,
            prediction: model.predict(&input)?,
            gt,
            padded_area,
        });
    }
    Ok(TiledInferenceReport::from_tiles(image.id.clone(), tiles))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(pred: f64, gt: usize) -> TileRecord {
        TileRecord {
            rect: Rect::new(0, 0, 1, 1),
            prediction: pred,
            gt: Some(gt),
            padded_area: 0,
        }
    }

    #[test]
    fn hand_computed_cancellation() {
        let r = TiledInferenceReport::from_tiles("a", vec![tile(5.0, 3), tile(1.0, 2)]);
        let c = r.cancellation.unwrap();
        assert_eq!((c.e_over, c.e_under, c.apparent, c.actual), (2.0, 1.0, 1.0, 3.0));
        assert_eq!(r.cumulative_prediction, 6.0);
        assert_eq!(r.tile_gt_sum, Some(5));
    }

    #[test]
    fn exact_tiles_have_no_error() {
        let r = TiledInferenceReport::from_tiles("a", vec![tile(3.0, 3), tile(0.0, 0)]);
        let c = r.cancellation.unwrap();
        assert_eq!((c.apparent, c.actual), (0.0, 0.0));
        assert_eq!(c.ratio(), None);
    }

    #[test]
    fn single_tile_apparent_equals_actual() {
        let r = TiledInferenceReport::from_tiles("a", vec![tile(1.5, 4)]);
        let c = r.cancellation.unwrap();
        assert_eq!(c.apparent, c.actual);
    }

    #[test]
    fn unlabeled_tiles_have_no_accounting() {
        let mut t = tile(1.0, 0);
        t.gt = None;
        let r = TiledInferenceReport::from_tiles("a", vec![t, tile(2.0, 1)]);
        assert!(r.cancellation.is_none() && r.tile_gt_sum.is_none());
        assert_eq!(r.cumulative_prediction, 3.0);
    }
}
