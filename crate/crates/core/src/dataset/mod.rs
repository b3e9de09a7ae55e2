//! On-disk dataset format, loading, writing, generation and statistics.
//!
//! ```text
//! <root>/
//!   manifest.csv            id,split   (split: train | val | test)
//!   images/<id>.pgm|.png    8-bit rasters
//!   annotations/<id>.csv    one "x,y" dot per line
//!   boxes/<id>.csv          optional, one "x0,y0,w,h" box per line
//! ```

mod generate;
pub mod raster;
mod stats;

pub use generate::{generate_dataset, DatasetPlan};
pub use stats::{dataset_stats, format_stats_table, SplitStats};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{AnnotatedImage, BoxRect, Dot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?} (expected train|val|test)"))),
        }
    }
}

#[derive(Clone, Debug)]
enum Source {
    Memory(AnnotatedImage),
    Disk {
        image_path: PathBuf,
        dots: Vec<Dot>,
        boxes: Option<Vec<BoxRect>>,
    },
}

#[derive(Clone, Debug)]
pub struct DatasetEntry {
    pub id: String,
    pub split: Split,
    /// `(channels, height, width)`
    pub dims: (usize, usize, usize),
    source: Source,
}

impl DatasetEntry {
    pub fn count(&self) -> usize {
        match &self.source {
            Source::Memory(im) => im.count(),
            Source::Disk { dots, .. } => dots.len(),
        }
    }

    /// Decodes (or clones) the annotated image.
    pub fn load(&self) -> Result<AnnotatedImage> {
        match &self.source {
            Source::Memory(im) => Ok(im.clone()),
            Source::Disk {
                image_path,
                dots,
                boxes,
            } => {
                let pixels = raster::read_raster(image_path)?;
                AnnotatedImage::new(self.id.clone(), pixels, dots.clone(), boxes.clone())
            }
        }
    }
}

/// Annotated images with split labels; on-disk pixels are decoded lazily.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub root: Option<PathBuf>,
    entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn from_images(images: impl IntoIterator<Item = (Split, AnnotatedImage)>) -> Self {
        let entries = images
            .into_iter()
            .map(|(split, im)| DatasetEntry {
                id: im.id.clone(),
                split,
                dims: (im.channels(), im.height(), im.width()),
                source: Source::Memory(im),
            })
            .collect();
        Dataset { root: None, entries }
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Decodes every image of `split` in manifest order.
    pub fn load_split(&self, split: Split) -> Result<Vec<AnnotatedImage>> {
        self.split(split).map(DatasetEntry::load).collect()
    }
}

/// Writes `ds` under `root` in the directory format above and returns every
/// file written, manifest last.
pub fn write_dataset(ds: &Dataset, root: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for sub in ["images", "annotations"] {
        fs::create_dir_all(root.join(sub)).map_err(|e| Error::io(root.join(sub), e))?;
    }
    let mut manifest = String::from("id,split\n");
    for entry in &ds.entries {
        let im = entry.load()?;
        let ext = raster::extension_for(im.channels());
        let p = root.join("images").join(format!("{}.{ext}", im.id));
        raster::write_raster(&p, im.pixels())?;
        written.push(p);

        let mut dots = String::new();
        for d in im.dots() {
            dots.push_str(&format!("{},{}\n", d.x, d.y));
        }
        let p = root.join("annotations").join(format!("{}.csv", im.id));
        fs::write(&p, dots).map_err(|e| Error::io(&p, e))?;
        written.push(p);

        if let Some(boxes) = im.boxes() {
            let dir = root.join("boxes");
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut text = String::new();
            for b in boxes {
                text.push_str(&format!("{},{},{},{}\n", b.x0, b.y0, b.w, b.h));
            }
            let p = dir.join(format!("{}.csv", im.id));
            fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
            written.push(p);
        }
        manifest.push_str(&format!("{},{}\n", im.id, entry.split));
    }
    let p = root.join("manifest.csv");
    fs::write(&p, manifest).map_err(|e| Error::io(&p, e))?;
    written.push(p);
    Ok(written)
}

fn read_float_rows(path: &Path, arity: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, None, e.to_string()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(path, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != arity {
            return Err(Error::load(path, line, format!("expected {arity} fields, found {}", rec.len())));
        }
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::load(path, line, format!("malformed number in {:?}", rec.as_slice())))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads and validates a dataset directory. Pixels are decoded on demand.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let manifest = root.join("manifest.csv");
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&manifest)
        .map_err(|e| Error::load(&manifest, None, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::load(&manifest, Some(1), e.to_string()))?
        .clone();
    if headers.len() < 2 || &headers[0] != "id" || &headers[1] != "split" {
        return Err(Error::load(&manifest, Some(1), "header must be 'id,split'"));
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::load(&manifest, e.position().map(|p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize);
        let (id, split) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""));
        if id.is_empty() {
            return Err(Error::load(&manifest, line, "empty id"));
        }
        let split: Split = split
            .parse()
            .map_err(|e: Error| Error::load(&manifest, line, e.to_string()))?;

        let image_path = ["pgm", "png"]
            .iter()
            .map(|ext| root.join("images").join(format!("{id}.{ext}")))
            .find(|p| p.exists())
            .ok_or_else(|| Error::load(&manifest, line, format!("image for id {id:?} not found under images/")))?;
        let (c, h, w) = raster::raster_dims(&image_path)?;

        let ann = root.join("annotations").join(format!("{id}.csv"));
        if !ann.exists() {
            return Err(Error::load(&ann, None, format!("annotation file for id {id:?} missing")));
        }
        let dots: Vec<Dot> = read_float_rows(&ann, 2)?
            .into_iter()
            .map(|r| Dot { x: r[0], y: r[1] })
            .collect();
        for (i, d) in dots.iter().enumerate() {
            if !(d.x >= 0.0 && d.x < w as f64 && d.y >= 0.0 && d.y < h as f64) {
                return Err(Error::load(
                    &ann,
                    Some(i + 1),
                    format!("dot ({}, {}) outside [0,{w})x[0,{h})", d.x, d.y),
                ));
            }
        }

        let box_path = root.join("boxes").join(format!("{id}.csv"));
        let boxes = if box_path.exists() {
            let boxes: Vec<BoxRect> = read_float_rows(&box_path, 4)?
                .into_iter()
                .map(|r| BoxRect {
                    x0: r[0],
                    y0: r[1],
                    w: r[2],
                    h: r[3],
                })
                .collect();
            if boxes.len() != dots.len() {
                return Err(Error::load(
                    &box_path,
                    None,
                    format!("{} boxes for {} dots", boxes.len(), dots.len()),
                ));
            }
            for (i, b) in boxes.iter().enumerate() {
                if !(b.w > 0.0 && b.h > 0.0 && b.x0 >= 0.0 && b.y0 >= 0.0 && b.x0 + b.w <= w as f64 && b.y0 + b.h <= h as f64)
                {
                    return Err(Error::load(&box_path, Some(i + 1), format!("box {b:?} outside {w}x{h} image")));
                }
            }
            Some(boxes)
        } else {
            None
        };

        entries.push(DatasetEntry {
            id: id.to_string(),
            split,
            dims: (c, h, w),
            source: Source::Disk {
                image_path,
                dots,
                boxes,
            },
        });
    }
    Ok(Dataset {
        root: Some(root.to_path_buf()),
        entries,
    })
}
