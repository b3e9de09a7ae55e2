//! Full-image and tiled inference, count metrics, tile-error cancellation
//! accounting, class activation maps and the sum-pooling linearity probe.

mod cam;
mod metrics;
mod probe;
mod suite;
mod tiled;

pub use cam::{compute_cam, normalized_heatmap, render_cam_overlay, CamMap, OVERLAY_ALPHA};
pub use metrics::{compute_metrics, metrics_from_errors, MetricsReport};
pub use probe::{half_crops, linearity_probe, ProbeRow, ProbeTable};
pub use suite::{
    evaluate_images, evaluate_suite, format_summary, write_suite_report, CancellationSummary, EvalMode, ImageEval,
    SuiteReport,
};
pub use tiled::{infer_full, infer_tiled, Cancellation, TileRecord, TiledInferenceReport};
