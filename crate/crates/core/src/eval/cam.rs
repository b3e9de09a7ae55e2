use std::path::{Path, PathBuf};

use crate::dataset::raster::{write_pgm, write_ppm};
use crate::error::{Error, Result};
use crate::model::{CountingNet, Head};
use crate::tensor::Tensor;

/// Overlay weight of the heatmap in the red channel.
pub const OVERLAY_ALPHA: f64 = 0.5;

/// Class activation map `Σ_c w_c F_c` of a counting model.
///
/// Under a sum head `Σ heatmap + bias` is the prediction; under a mean head
/// `mean(heatmap) + bias` is.
#[derive(Clone, Debug, PartialEq)]
pub struct CamMap {
    /// `[1, H', W']`.
    pub heatmap: Tensor,
    pub head: Head,
    pub bias: f64,
    pub prediction: f64,
}

impl CamMap {
    /// The count reconstructed from the heatmap under this map's head.
    pub fn reconstructed_count(&self) -> f64 {
        let s = self.heatmap.sum();
        match self.head {
            Head::Gsp => s + self.bias,
            Head::Gap => s / self.heatmap.len() as f64 + self.bias,
        }
    }

    /// `|reconstructed - prediction| / max(1, |reconstructed|, |prediction|)`.
    pub fn identity_error(&self) -> f64 {
        let r = self.reconstructed_count();
        (r - self.prediction).abs() / 1f64.max(r.abs()).max(self.prediction.abs())
    }
}

pub fn compute_cam<M: CountingNet + ?Sized>(model: &M, image: &Tensor) -> Result<CamMap> {
    let features = model.feature_map(image)?;
    let (c, h, w) = features.dims3()?;
    let weight = model.linear_weight();
    if weight.len() != c {
        return Err(Error::dim(format!("{c} feature channels, linear weight {}", weight.len())));
    }
    let plane = h * w;
    let mut heat = vec![0.0; plane];
    for (ch, &wc) in features.data().chunks(plane).zip(weight) {
        for (o, &f) in heat.iter_mut().zip(ch) {
            *o += wc * f;
        }
    }
    Ok(CamMap {
        heatmap: Tensor::new(vec![1, h, w], heat)?,
        head: model.head(),
        bias: model.linear_bias(),
        prediction: model.predict(image)?,
    })
}

/// Nearest-neighbour upsampling of `[1, h', w']` to `[1, h, w]`, min-max
/// normalized to `[0, 1]`. A constant map normalizes to all zeros.
pub fn normalized_heatmap(heatmap: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (_, hh, ww) = heatmap.dims3()?;
    let d = heatmap.data();
    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = (y * hh / h).min(hh - 1);
        for x in 0..w {
            let fx = (x * ww / w).min(ww - 1);
            let v = d[fy * ww + fx];
            out.push(if span > 0.0 { (v - lo) / span } else { 0.0 });
        }
    }
    Tensor::new(vec![1, h, w], out)
}

/// Writes `<prefix>_heatmap.pgm` (normalized map at input resolution) and
/// `<prefix>_overlay.ppm` (grayscale input with the map blended into red).
pub fn render_cam_overlay(cam: &CamMap, image: &Tensor, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let (c, h, w) = image.dims3()?;
    let heat = normalized_heatmap(&cam.heatmap, h, w)?;
    let plane = h * w;
    let mut rgb = vec![0.0; 3 * plane];
    for i in 0..plane {
        let g = (0..c).map(|ch| image.data()[ch * plane + i]).sum::<f64>() / c as f64;
        let base = (1.0 - OVERLAY_ALPHA) * g;
        rgb[i] = base + OVERLAY_ALPHA * heat.data()[i];
        rgb[plane + i] = base;
        rgb[2 * plane + i] = base;
    }
    let stem = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let heat_path = prefix.with_file_name(format!("{stem}_heatmap.pgm"));
    let overlay_path = prefix.with_file_name(format!("{stem}_overlay.ppm"));
    write_pgm(&heat_path, &heat)?;
    write_ppm(&overlay_path, &Tensor::new(vec![3, h, w], rgb)?)?;
    Ok((heat_path, overlay_path))
}
