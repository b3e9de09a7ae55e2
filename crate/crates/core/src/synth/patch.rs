use rand::Rng;

use super::annotation::{count_in_rect, AnnotatedImage, LabelRule, Rect};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cropped region with its count label.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSample {
    pub pixels: Tensor,
    pub count: usize,
    pub source_id: String,
    pub rect: Rect,
}

/// Crops `rect` from `image` and labels it under `rule`.
pub fn extract_patch(image: &AnnotatedImage, rect: Rect, rule: LabelRule) -> Result<PatchSample> {
    let count = count_in_rect(image, rect, rule)?;
    Ok(PatchSample {
        pixels: image.pixels().crop(rect.x0, rect.y0, rect.w, rect.h)?,
        count,
        source_id: image.id.clone(),
        rect,
    })
}

fn check_size(image: &AnnotatedImage, size: usize) -> Result<()> {
    if size == 0 || size > image.width() || size > image.height() {
        return Err(Error::dim(format!(
            "patch size {size} does not fit {}x{} image {}",
            image.height(),
            image.width(),
            image.id
        )));
    }
    Ok(())
}

/// Square patch whose top-left corner is uniform over all valid integer positions.
pub fn sample_random_patch<R: Rng + ?Sized>(
    image: &AnnotatedImage,
    size: usize,
    rule: LabelRule,
    rng: &mut R,
) -> Result<PatchSample> {
    check_size(image, size)?;
    let x0 = rng.random_range(0..=image.width() - size);
    let y0 = rng.random_range(0..=image.height() - size);
    extract_patch(image, Rect::new(x0, y0, size, size), rule)
}

/// Square patch centered on a uniformly chosen dot, shifted to stay inside
/// the image.
pub fn sample_object_centered_patch<R: Rng + ?Sized>(
    image: &AnnotatedImage,
    size: usize,
    rule: LabelRule,
    rng: &mut R,
) -> Result<PatchSample> {
    check_size(image, size)?;
    if image.dots().is_empty() {
        return Err(Error::Annotation(format!(
            "{}: object-centered sampling needs at least one dot",
            image.id
        )));
    }
    let dot = image.dots()[rng.random_range(0..image.dots().len())];
    let corner = |c: f64, len: usize| -> usize {
        let start = (c - size as f64 / 2.0).round().max(0.0) as usize;
        start.min(len - size)
    };
    let rect = Rect::new(corner(dot.x, image.width()), corner(dot.y, image.height()), size, size);
    extract_patch(image, rect, rule)
}

/// Row-major grid of adjacent, non-overlapping `size x size` tiles covering a
/// `width x height` image; the last column/row is clipped to the border.
pub fn tile_rects(width: usize, height: usize, size: usize) -> Vec<Rect> {
    assert!(size >= 1, "tile size must be >= 1");
    let mut out = Vec::new();
    for y0 in (0..height).step_by(size) {
        for x0 in (0..width).step_by(size) {
            out.push(Rect::new(x0, y0, size.min(width - x0), size.min(height - y0)));
        }
    }
    out
}

/// Tiles covering `image`; see [`tile_rects`].
pub fn tile_patches(image: &AnnotatedImage, size: usize) -> Result<Vec<Rect>> {
    if size == 0 {
        return Err(Error::dim("tile size must be >= 1"));
    }
    Ok(tile_rects(image.width(), image.height(), size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::annotation::Dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn blank(w: usize, h: usize, dots: Vec<Dot>) -> AnnotatedImage {
        AnnotatedImage::new("p", Tensor::zeros(&[1, h, w]), dots, None).unwrap()
    }

    #[test]
    fn full_size_patch_is_whole_image() {
        let im = blank(32, 32, vec![Dot { x: 1.0, y: 2.0 }, Dot { x: 30.0, y: 31.5 }]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = sample_random_patch(&im, 32, LabelRule::Dots, &mut rng).unwrap();
        assert_eq!(p.rect, im.full_rect());
        assert_eq!(p.count, 2);
        assert_eq!(&p.pixels, im.pixels());
    }

    #[test]
    fn oversize_patch_rejected() {
        let im = blank(32, 20, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_random_patch(&im, 21, LabelRule::Dots, &mut rng),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn empty_image_always_zero() {
        let im = blank(40, 40, vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            assert_eq!(sample_random_patch(&im, 16, LabelRule::Dots, &mut rng).unwrap().count, 0);
        }
        assert!(matches!(
            sample_object_centered_patch(&im, 16, LabelRule::Dots, &mut rng),
            Err(Error::Annotation(_))
        ));
    }

    #[test]
    fn centered_on_single_dot() {
        let im = blank(128, 128, vec![Dot { x: 64.0, y: 64.0 }]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_object_centered_patch(&im, 32, LabelRule::Dots, &mut rng).unwrap();
        assert_eq!(p.rect, Rect::new(48, 48, 32, 32));
        assert_eq!(p.count, 1);
    }

    #[test]
    fn corner_dot_is_clamped_and_kept() {
        let im = blank(100, 80, vec![Dot { x: 99.5, y: 0.2 }]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_object_centered_patch(&im, 24, LabelRule::Dots, &mut rng).unwrap();
        assert_eq!(p.rect, Rect::new(76, 0, 24, 24));
        assert_eq!(p.count, 1);
    }

    #[test]
    fn tiling_examples() {
        assert_eq!(tile_rects(128, 128, 64).len(), 4);
        let t = tile_rects(100, 100, 64);
        assert_eq!(
            t,
            vec![
                Rect::new(0, 0, 64, 64),
                Rect::new(64, 0, 36, 64),
                Rect::new(0, 64, 64, 36),
                Rect::new(64, 64, 36, 36)
            ]
        );
        assert_eq!(tile_rects(50, 30, 64), vec![Rect::new(0, 0, 50, 30)]);
    }
}
