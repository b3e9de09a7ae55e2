use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Fraction each box side keeps when reduced to its central region.
pub const SHRINK_FACTOR: f64 = 0.25;

/// Object center in pixel coordinates; pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dot {
    pub x: f64,
    pub y: f64,
}

/// Axis-aligned box with real-valued corner and extent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRect {
    pub x0: f64,
    pub y0: f64,
    pub w: f64,
    pub h: f64,
}

/// Integer pixel rectangle `[x0, x0+w) x [y0, y0+h)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Rect { x0, y0, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        self.x0 as f64 <= x && x < (self.x0 + self.w) as f64 && self.y0 as f64 <= y && y < (self.y0 + self.h) as f64
    }

    pub fn contains_box(&self, b: &BoxRect) -> bool {
        self.x0 as f64 <= b.x0
            && b.x0 + b.w <= (self.x0 + self.w) as f64
            && self.y0 as f64 <= b.y0
            && b.y0 + b.h <= (self.y0 + self.h) as f64
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x0 + other.w
            && other.x0 < self.x0 + self.w
            && self.y0 < other.y0 + other.h
            && other.y0 < self.y0 + self.h
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.x0, self.y0, self.w, self.h)
    }
}

/// How a rectangle's count label is derived from annotations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Dots inside the half-open rectangle.
    #[default]
    Dots,
    /// Instances whose box, shrunk to 25% per side about its center, lies
    /// entirely inside the rectangle.
    ShrunkBoxes,
}

impl std::str::FromStr for LabelRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dots" => Ok(LabelRule::Dots),
            "shrunk_boxes" | "boxes" => Ok(LabelRule::ShrunkBoxes),
            _ => Err(Error::Config(format!("unknown label rule {s:?} (expected dots|shrunk_boxes)"))),
        }
    }
}

/// Centered box with both sides scaled by `factor`.
pub fn shrink_box(b: BoxRect, factor: f64) -> Result<BoxRect> {
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(Error::Geometry(format!("box {b:?} has non-positive size")));
    }
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::Geometry(format!("shrink factor {factor} outside (0, 1]")));
    }
    let (w, h) = (b.w * factor, b.h * factor);
    Ok(BoxRect {
        x0: b.x0 + (b.w - w) / 2.0,
        y0: b.y0 + (b.h - h) / 2.0,
        w,
        h,
    })
}

/// Raster in `[0, 1]` with one dot per object and optional boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedImage {
    pub id: String,
    pixels: Tensor,
    dots: Vec<Dot>,
    boxes: Option<Vec<BoxRect>>,
}

impl AnnotatedImage {
    /// Validates that pixels are rank 3 in `[0, 1]`, dots lie in
    /// `[0, W) x [0, H)`, boxes lie within the image and match dots 1:1.
    pub fn new(id: impl Into<String>, pixels: Tensor, dots: Vec<Dot>, boxes: Option<Vec<BoxRect>>) -> Result<Self> {
        let id = id.into();
        let (_, h, w) = pixels.dims3()?;
        if pixels.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Annotation(format!("{id}: pixel values must lie in [0, 1]")));
        }
        for (i, d) in dots.iter().enumerate() {
            if !(d.x >= 0.0 && d.x < w as f64 && d.y >= 0.0 && d.y < h as f64) {
                return Err(Error::Annotation(format!(
                    "{id}: dot {i} at ({}, {}) outside [0,{w})x[0,{h})",
                    d.x, d.y
                )));
            }
        }
        if let Some(bs) = &boxes {
            if bs.len() != dots.len() {
                return Err(Error::Annotation(format!(
                    "{id}: {} boxes for {} dots",
                    bs.len(),
                    dots.len()
                )));
            }
            for (i, b) in bs.iter().enumerate() {
                let inside = b.w > 0.0
                    && b.h > 0.0
                    && b.x0 >= 0.0
                    && b.y0 >= 0.0
                    && b.x0 + b.w <= w as f64
                    && b.y0 + b.h <= h as f64;
                if !inside {
                    return Err(Error::Annotation(format!("{id}: box {i} {b:?} outside {w}x{h} image")));
                }
            }
        }
        Ok(AnnotatedImage { id, pixels, dots, boxes })
    }

    pub fn pixels(&self) -> &Tensor {
        &self.pixels
    }

    pub fn dots(&self) -> &[Dot] {
        &self.dots
    }

    pub fn boxes(&self) -> Option<&[BoxRect]> {
        self.boxes.as_deref()
    }

    pub fn count(&self) -> usize {
        self.dots.len()
    }

    pub fn channels(&self) -> usize {
        self.pixels.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }

    pub fn full_rect(&self) -> Rect {
        Rect::new(0, 0, self.width(), self.height())
    }
}

/// Count label of `rect` under `rule`.
pub fn count_in_rect(image: &AnnotatedImage, rect: Rect, rule: LabelRule) -> Result<usize> {
    if rect.w == 0 || rect.h == 0 || rect.x0 + rect.w > image.width() || rect.y0 + rect.h > image.height() {
        return Err(Error::Geometry(format!(
            "rect {rect} outside {}x{} image {}",
            image.width(),
            image.height(),
            image.id
        )));
    }
    match rule {
        LabelRule::Dots => Ok(image.dots.iter().filter(|d| rect.contains_point(d.x, d.y)).count()),
        LabelRule::ShrunkBoxes => {
            let boxes = image
                .boxes()
                .ok_or_else(|| Error::Annotation(format!("{}: shrunk-box rule needs boxes", image.id)))?;
            let mut n = 0;
            for b in boxes {
                if rect.contains_box(&shrink_box(*b, SHRINK_FACTOR)?) {
                    n += 1;
                }
            }
            Ok(n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, dots: Vec<Dot>, boxes: Option<Vec<BoxRect>>) -> AnnotatedImage {
        AnnotatedImage::new("t", Tensor::zeros(&[1, h, w]), dots, boxes).unwrap()
    }

    #[test]
    fn dot_counting_half_open() {
        let im = img(64, 64, vec![Dot { x: 5.0, y: 5.0 }, Dot { x: 50.0, y: 50.0 }], None);
        assert_eq!(count_in_rect(&im, Rect::new(0, 0, 32, 32), LabelRule::Dots).unwrap(), 1);
        let im = img(64, 64, vec![Dot { x: 32.0, y: 10.0 }], None);
        assert_eq!(count_in_rect(&im, Rect::new(0, 0, 32, 32), LabelRule::Dots).unwrap(), 0);
        assert_eq!(count_in_rect(&im, Rect::new(32, 0, 32, 32), LabelRule::Dots).unwrap(), 1);
    }

    #[test]
    fn shrunk_rule_needs_boxes() {
        let im = img(8, 8, vec![], None);
        assert!(matches!(
            count_in_rect(&im, Rect::new(0, 0, 8, 8), LabelRule::ShrunkBoxes),
            Err(Error::Annotation(_))
        ));
    }

    #[test]
    fn shrunk_rule_counts_central_regions() {
        // Box straddles x = 16 but its central quarter lies left of it.
        let b = BoxRect { x0: 4.0, y0: 4.0, w: 16.0, h: 8.0 };
        let im = img(32, 16, vec![Dot { x: 12.0, y: 8.0 }], Some(vec![b]));
        assert_eq!(count_in_rect(&im, Rect::new(0, 0, 16, 16), LabelRule::ShrunkBoxes).unwrap(), 1);
        assert_eq!(count_in_rect(&im, Rect::new(16, 0, 16, 16), LabelRule::ShrunkBoxes).unwrap(), 0);
        assert_eq!(count_in_rect(&im, Rect::new(0, 0, 12, 16), LabelRule::ShrunkBoxes).unwrap(), 0);
    }

    #[test]
    fn shrink_examples() {
        let b = shrink_box(BoxRect { x0: 0.0, y0: 0.0, w: 40.0, h: 40.0 }, 0.25).unwrap();
        assert_eq!(b, BoxRect { x0: 15.0, y0: 15.0, w: 10.0, h: 10.0 });
        let orig = BoxRect { x0: 3.5, y0: 1.0, w: 7.0, h: 2.0 };
        assert_eq!(shrink_box(orig, 1.0).unwrap(), orig);
        let b = shrink_box(BoxRect { x0: 10.0, y0: 10.0, w: 4.0, h: 8.0 }, 0.25).unwrap();
        assert_eq!(b, BoxRect { x0: 11.5, y0: 13.0, w: 1.0, h: 2.0 });
        assert!(matches!(
            shrink_box(BoxRect { x0: 0.0, y0: 0.0, w: 0.0, h: 1.0 }, 0.5),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn invariants_enforced() {
        let px = Tensor::zeros(&[1, 10, 10]);
        assert!(AnnotatedImage::new("a", px.clone(), vec![Dot { x: 10.0, y: 0.0 }], None).is_err());
        let b = BoxRect { x0: 5.0, y0: 5.0, w: 6.0, h: 1.0 };
        assert!(AnnotatedImage::new("a", px.clone(), vec![Dot { x: 6.0, y: 5.5 }], Some(vec![b])).is_err());
        assert!(AnnotatedImage::new("a", px.clone(), vec![], Some(vec![b])).is_err());
        assert!(AnnotatedImage::new("a", Tensor::full(&[1, 2, 2], 1.5), vec![], None).is_err());
    }

    #[test]
    fn rect_outside_image_rejected() {
        let im = img(10, 10, vec![], None);
        assert!(count_in_rect(&im, Rect::new(5, 5, 6, 2), LabelRule::Dots).is_err());
    }
}
