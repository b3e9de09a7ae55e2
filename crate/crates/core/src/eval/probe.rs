use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{CountingNet, Head};
use crate::synth::Rect;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRow {
    /// `None` for the full image.
    pub rect: Option<Rect>,
    pub values: Vec<f64>,
}

/// Sum-pooled activations of the full image and of each crop, restricted to
/// the `k` channels that are largest on the full image.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeTable {
    /// Channel indices, full-image value descending, ties by index.
    pub channels: Vec<usize>,
    /// Full image first, then crops in input order.
    pub rows: Vec<ProbeRow>,
}

impl ProbeTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["crop".to_string(), "x0".into(), "y0".into(), "w".into(), "h".into()];
        header.extend(self.channels.iter().map(|c| format!("f{c}")));
        let wrap = |e: csv::Error| Error::Numeric(format!("probe csv: {e}"));
        w.write_record(&header).map_err(wrap)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = match row.rect {
                None => vec!["full".to_string(), String::new(), String::new(), String::new(), String::new()],
                Some(r) => vec![
                    format!("crop{i}"),
                    r.x0.to_string(),
                    r.y0.to_string(),
                    r.w.to_string(),
                    r.h.to_string(),
                ],
            };
            rec.extend(row.values.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::Numeric(format!("probe csv: {e}")))
    }
}

/// Left, right, top and bottom halves of a `width x height` image.
pub fn half_crops(width: usize, height: usize) -> Vec<Rect> {
    let (hw, hh) = (width / 2, height / 2);
    vec![
        Rect::new(0, 0, hw, height),
        Rect::new(hw, 0, width - hw, height),
        Rect::new(0, 0, width, hh),
        Rect::new(0, hh, width, height - hh),
    ]
}

/// Compares sum-pooled features of crops against the full image. `k` is
/// clamped to the feature dimension. Only meaningful for a sum head, so a
/// mean-head model is rejected.
pub fn linearity_probe<M: CountingNet + ?Sized>(
    model: &M,
    image: &Tensor,
    crops: &[Rect],
    k: usize,
) -> Result<ProbeTable> {
    if model.head() != Head::Gsp {
        return Err(Error::Contract("linearity probe needs a gsp head".into()));
    }
    let (_, h, w) = image.dims3()?;
    let full = model.pooled_features(image)?;
    let mut channels: Vec<usize> = (0..full.len()).collect();
    channels.sort_by(|&a, &b| full[b].total_cmp(&full[a]).then(a.cmp(&b)));
    channels.truncate(k.min(full.len()));
    let pick = |v: &[f64]| channels.iter().map(|&c| v[c]).collect::<Vec<_>>();

    let mut rows = vec![ProbeRow {
        rect: None,
        values: pick(&full),
    }];
    for &r in crops {
        if r.w == 0 || r.h == 0 || r.x0 + r.w > w || r.y0 + r.h > h {
            return Err(Error::Geometry(format!("crop {r} outside {w}x{h} image")));
        }
        let pooled = model.pooled_features(&image.crop(r.x0, r.y0, r.w, r.h)?)?;
        rows.push(ProbeRow {
            rect: Some(r),
            values: pick(&pooled),
        });
    }
    Ok(ProbeTable { channels, rows })
}
