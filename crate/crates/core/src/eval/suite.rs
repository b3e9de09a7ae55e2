use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use super::metrics::{compute_metrics, metrics_from_errors, MetricsReport};
use super::tiled::{infer_full, infer_tiled, TiledInferenceReport};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::CountingNet;
use crate::synth::{AnnotatedImage, LabelRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    /// One forward pass per image.
    Full,
    /// Non-overlapping tiles of the given side; the image prediction is the
    /// sum of tile predictions.
    Tiled(usize),
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::Full => f.write_str("full"),
            EvalMode::Tiled(s) => write!(f, "tiled({s})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageEval {
    pub id: String,
    pub gt: usize,
    pub prediction: f64,
    pub tiled: Option<TiledInferenceReport>,
}

/// Means over images of apparent and actual tile error. The ratio mean skips
/// images whose tiles are all exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CancellationSummary {
    pub mean_apparent: f64,
    pub mean_actual: f64,
    pub mean_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub mode: EvalMode,
    pub images: Vec<ImageEval>,
    /// Metrics of the image-level prediction (cumulative in tiled mode).
    pub metrics: MetricsReport,
    /// Tiled mode only: metrics of the summed absolute per-tile errors.
    pub patch_summed: Option<MetricsReport>,
    pub cancellation: Option<CancellationSummary>,
}

impl SuiteReport {
    /// Mean of `prediction / gt` over images with a positive ground truth.
    pub fn mean_prediction_ratio(&self) -> Option<f64> {
        let r: Vec<f64> = self
            .images
            .iter()
            .filter(|e| e.gt > 0)
            .map(|e| e.prediction / e.gt as f64)
            .collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }
}

pub fn evaluate_images<M: CountingNet + ?Sized>(
    model: &M,
    images: &[AnnotatedImage],
    mode: EvalMode,
    rule: LabelRule,
) -> Result<SuiteReport> {
    let mut evals = Vec::with_capacity(images.len());
    for image in images {
        let (prediction, tiled) = match mode {
            EvalMode::Full => (infer_full(model, image.pixels())?, None),
            EvalMode::Tiled(size) => {
                let t = infer_tiled(model, image, size, Some(rule))?;
                (t.cumulative_prediction, Some(t))
            }
        };
        evals.push(ImageEval {
            id: image.id.clone(),
            gt: image.count(),
            prediction,
            tiled,
        });
    }
    let gts: Vec<f64> = evals.iter().map(|e| e.gt as f64).collect();
    let preds: Vec<f64> = evals.iter().map(|e| e.prediction).collect();
    let metrics = compute_metrics(&preds, &gts)?;

    let (patch_summed, cancellation) = match mode {
        EvalMode::Full => (None, None),
        EvalMode::Tiled(_) => {
            let cs: Vec<_> = evals
                .iter()
                .map(|e| e.tiled.as_ref().and_then(|t| t.cancellation).expect("labeled tiles"))
                .collect();
            let actual: Vec<f64> = cs.iter().map(|c| c.actual).collect();
            let n = cs.len() as f64;
            let ratios: Vec<f64> = cs.iter().filter_map(|c| c.ratio()).collect();
            let summary = CancellationSummary {
                mean_apparent: cs.iter().map(|c| c.apparent).sum::<f64>() / n,
                mean_actual: actual.iter().sum::<f64>() / n,
                mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
            };
            (Some(metrics_from_errors(&actual, &gts)?), Some(summary))
        }
    };
    Ok(SuiteReport {
        mode,
        images: evals,
        metrics,
        patch_summed,
        cancellation,
    })
}

/// Evaluates the test split of `ds`.
pub fn evaluate_suite<M: CountingNet + ?Sized>(
    model: &M,
    ds: &Dataset,
    mode: EvalMode,
    rule: LabelRule,
) -> Result<SuiteReport> {
    let images = ds.load_split(Split::Test)?;
    if images.is_empty() {
        return Err(Error::Contract("dataset has no test images".into()));
    }
    evaluate_images(model, &images, mode, rule)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::load(path, None, e.to_string()))?;
    let wrap = |e: csv::Error| Error::load(path, None, e.to_string());
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(&r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn metric_rows(prefix: &str, m: &MetricsReport) -> Vec<Vec<String>> {
    [
        ("n", Some(m.n as f64)),
        ("mae", Some(m.mae)),
        ("rmse", Some(m.rmse)),
        ("pct_mae", m.pct_mae),
        ("pct_rmse", m.pct_rmse),
        ("pct_rmae", m.pct_rmae),
    ]
    .into_iter()
    .map(|(k, v)| vec![format!("{prefix}{k}"), opt(v)])
    .collect()
}

/// Writes `metrics.csv`, `predictions.csv` and `summary.txt`, plus
/// `tiles.csv` and `cancellation.csv` in tiled mode. Returns the paths written.
pub fn write_suite_report(report: &SuiteReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join("metrics.csv");
    let mut rows = metric_rows("", &report.metrics);
    if let Some(p) = &report.patch_summed {
        rows.extend(metric_rows("patch_summed_", p));
    }
    if let Some(c) = &report.cancellation {
        rows.push(vec!["mean_apparent".into(), c.mean_apparent.to_string()]);
        rows.push(vec!["mean_actual".into(), c.mean_actual.to_string()]);
        rows.push(vec!["mean_ratio".into(), opt(c.mean_ratio)]);
    }
    write_csv(&path, &["metric", "value"], rows)?;
    written.push(path);

    let path = dir.join("predictions.csv");
    write_csv(
        &path,
        &["id", "gt", "prediction", "abs_error"],
        report.images.iter().map(|e| {
            vec![
                e.id.clone(),
                e.gt.to_string(),
                e.prediction.to_string(),
                (e.prediction - e.gt as f64).abs().to_string(),
            ]
        }),
    )?;
    written.push(path);

    if matches!(report.mode, EvalMode::Tiled(_)) {
        let path = dir.join("tiles.csv");
        let rows = report.images.iter().flat_map(|e| {
            e.tiled.iter().flat_map(|t| &t.tiles).map(|t| {
                vec![
                    e.id.clone(),
                    t.rect.x0.to_string(),
                    t.rect.y0.to_string(),
                    t.rect.w.to_string(),
                    t.rect.h.to_string(),
                    t.prediction.to_string(),
                    t.gt.map(|g| g.to_string()).unwrap_or_default(),
                    t.padded_area.to_string(),
                ]
            })
        });
        write_csv(&path, &["id", "x0", "y0", "w", "h", "prediction", "gt", "padded_area"], rows)?;
        written.push(path);

        let path = dir.join("cancellation.csv");
        let rows = report.images.iter().filter_map(|e| {
            let c = e.tiled.as_ref()?.cancellation?;
            Some(vec![
                e.id.clone(),
                c.e_over.to_string(),
                c.e_under.to_string(),
                c.apparent.to_string(),
                c.actual.to_string(),
                opt(c.ratio()),
            ])
        });
        write_csv(&path, &["id", "e_over", "e_under", "apparent", "actual", "ratio"], rows)?;
        written.push(path);
    }

    let path = dir.join("summary.txt");
    fs::write(&path, format_summary(report)).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Human-readable summary; relative metrics print `n/a` when undefined.
pub fn format_summary(report: &SuiteReport) -> String {
    let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}%")).unwrap_or_else(|| "n/a".into());
    let line = |label: &str, m: &MetricsReport| {
        format!(
            "{label}: n={} MAE={:.4} RMSE={:.4} %MAE={} %RMSE={} %RMAE={}\n",
            m.n,
            m.mae,
            m.rmse,
            pct(m.pct_mae),
            pct(m.pct_rmse),
            pct(m.pct_rmae)
        )
    };
    let mut s = format!("mode: {}\n", report.mode);
    s += &line("image", &report.metrics);
    if let Some(p) = &report.patch_summed {
        s += &line("patch-summed", p);
    }
    if let Some(c) = &report.cancellation {
        s += &format!(
            "cancellation: mean apparent={:.4} mean actual={:.4} mean ratio={}\n",
            c.mean_apparent,
            c.mean_actual,
            c.mean_ratio.map(|r| format!("{r:.4}")).unwrap_or_else(|| "n/a".into())
        );
    }
    if let Some(r) = report.mean_prediction_ratio() {
        s += &format!("mean prediction/gt: {r:.4}\n");
    }
    s
}
