use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::{AnnotatedImage, BoxRect, Dot};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Attempts allowed per requested object (times 10) before placement gives up.
const ATTEMPTS_PER_OBJECT: usize = 10 * 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    /// Radially symmetric bump with a raised-cosine falloff reaching zero at the radius.
    #[default]
    Disk,
    /// Gaussian with sigma = radius / 2, truncated at the radius.
    Gaussian,
    /// Filled axis-aligned square of half-side = radius.
    Square,
}

impl ObjectKind {
    fn profile(self, dx: f64, dy: f64, r: f64) -> f64 {
        match self {
            ObjectKind::Disk => {
                let d = (dx * dx + dy * dy).sqrt();
                if d < r {
                    0.5 * (1.0 + (std::f64::consts::PI * d / r).cos())
                } else {
                    0.0
                }
            }
            ObjectKind::Gaussian => {
                let d2 = dx * dx + dy * dy;
                if d2 < r * r {
                    let s = r / 2.0;
                    (-d2 / (2.0 * s * s)).exp()
                } else {
                    0.0
                }
            }
            ObjectKind::Square => {
                if dx.abs() <= r && dy.abs() <= r {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Parameters of a synthetic counting scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub count_min: usize,
    pub count_max: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Minimum distance between object centers.
    pub min_separation: f64,
    /// Mean background level.
    pub background: f64,
    /// Amplitude of uniform background noise.
    pub noise: f64,
    /// Peak intensity added by an object.
    pub intensity: f64,
    pub kind: ObjectKind,
    pub channels: usize,
    /// Permit `min_separation < 2 * radius_max`.
    pub allow_overlap: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            height: 192,
            width: 192,
            count_min: 5,
            count_max: 25,
            radius_min: 3.0,
            radius_max: 4.5,
            min_separation: 9.0,
            background: 0.1,
            noise: 0.15,
            intensity: 0.7,
            kind: ObjectKind::Disk,
            channels: 1,
            allow_overlap: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("scene: {m}")));
        if self.height == 0 || self.width == 0 || self.channels == 0 {
            return fail("height, width and channels must be >= 1".into());
        }
        if self.count_min > self.count_max {
            return fail(format!("count_min {} > count_max {}", self.count_min, self.count_max));
        }
        if !(self.radius_min > 0.0 && self.radius_min <= self.radius_max && self.radius_max.is_finite()) {
            return fail(format!(
                "need 0 < radius_min <= radius_max (got {}, {})",
                self.radius_min, self.radius_max
            ));
        }
        if !(self.min_separation >= 0.0) {
            return fail(format!("min_separation {} must be >= 0", self.min_separation));
        }
        if !self.allow_overlap && self.min_separation < 2.0 * self.radius_max {
            return fail(format!(
                "min_separation {} < 2 * radius_max {}; set allow_overlap to permit overlapping objects",
                self.min_separation, self.radius_max
            ));
        }
        for (name, v) in [("background", self.background), ("noise", self.noise), ("intensity", self.intensity)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Copy with a new size, optionally scaling the count range by the area ratio.
    pub fn resized(&self, height: usize, width: usize, scale_counts: bool) -> SceneSpec {
        let mut s = self.clone();
        if scale_counts {
            let ratio = (height * width) as f64 / (self.height * self.width) as f64;
            s.count_min = (self.count_min as f64 * ratio).round() as usize;
            s.count_max = (self.count_max as f64 * ratio).round() as usize;
        }
        s.height = height;
        s.width = width;
        s
    }
}

/// Renders a scene. Output is a pure function of `(spec, seed)`; pixel
/// values are quantized to multiples of 1/255 so 8-bit rasters store them
/// exactly.
pub fn generate_image(spec: &SceneSpec, seed: u64, id: impl Into<String>) -> Result<AnnotatedImage> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(spec.count_min..=spec.count_max);
    let (h, w) = (spec.height, spec.width);

    let budget = ATTEMPTS_PER_OBJECT * spec.count_max;
    let mut attempts = 0;
    let mut centers: Vec<(f64, f64, f64)> = Vec::with_capacity(n);
    while centers.len() < n {
        if attempts >= budget {
            return Err(Error::Capacity {
                requested: n,
                attempts,
            });
        }
        attempts += 1;
        let x = rng.random_range(0.0..w as f64);
        let y = rng.random_range(0.0..h as f64);
        let sep2 = spec.min_separation * spec.min_separation;
        if centers.iter().all(|&(cx, cy, _)| (cx - x).powi(2) + (cy - y).powi(2) >= sep2) {
            let r = if spec.radius_max > spec.radius_min {
                rng.random_range(spec.radius_min..=spec.radius_max)
            } else {
                spec.radius_min
            };
            centers.push((x, y, r));
        }
    }

    let plane = h * w;
    let mut data = vec![0.0; spec.channels * plane];
    for v in data.iter_mut() {
        *v = spec.background + spec.noise * (rng.random::<f64>() - 0.5);
    }
    let mut objects = vec![0.0f64; plane];
    for &(cx, cy, r) in &centers {
        let (x_lo, x_hi) = pixel_span(cx, r, w);
        let (y_lo, y_hi) = pixel_span(cy, r, h);
        for py in y_lo..y_hi {
            for px in x_lo..x_hi {
                let p = spec.kind.profile(px as f64 + 0.5 - cx, py as f64 + 0.5 - cy, r);
                let o = &mut objects[py * w + px];
                *o = o.max(p);
            }
        }
    }
    for ch in data.chunks_mut(plane) {
        for (v, o) in ch.iter_mut().zip(&objects) {
            *v = quantize(*v + spec.intensity * o);
        }
    }

    let dots = centers.iter().map(|&(x, y, _)| Dot { x, y }).collect();
    let boxes = centers
        .iter()
        .map(|&(cx, cy, r)| {
            let (x0, x1) = ((cx - r).max(0.0), (cx + r).min(w as f64));
            let (y0, y1) = ((cy - r).max(0.0), (cy + r).min(h as f64));
            BoxRect {
                x0,
                y0,
                w: x1 - x0,
                h: y1 - y0,
            }
        })
        .collect();
    AnnotatedImage::new(id, Tensor::new(vec![spec.channels, h, w], data)?, dots, Some(boxes))
}

fn pixel_span(c: f64, r: f64, len: usize) -> (usize, usize) {
    let lo = (c - r - 1.0).floor().max(0.0) as usize;
    let hi = ((c + r + 1.0).ceil().max(0.0) as usize).min(len);
    (lo.min(len), hi)
}

fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}
