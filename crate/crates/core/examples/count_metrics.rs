//! Count-regression metrics on a handful of predictions, including the
//! relative variants and what happens when a ground truth is zero.
//!
//! cargo run --example count_metrics

use gsp_count::eval::{compute_metrics, Cancellation};

fn main() -> gsp_count::Result<()> {
    let gts = [10.0, 20.0, 35.0, 8.0];
    let preds = [12.0, 16.0, 33.5, 9.0];
    let m = compute_metrics(&preds, &gts)?;
    let (pct_mae, pct_rmse, pct_rmae) = m.relative()?;
    println!("n={} MAE={:.4} RMSE={:.4}", m.n, m.mae, m.rmse);
    println!("%MAE={pct_mae:.3} %RMSE={pct_rmse:.3} %RMAE={pct_rmae:.3}");

    let m = compute_metrics(&[1.0, 3.0], &[0.0, 2.0])?;
    println!("with a zero ground truth: MAE={} relative={:?}", m.mae, m.pct_mae);

    // Four tiles: +3, -2, +1, -2. Summed, the errors cancel exactly.
    let c = Cancellation::from_errors([3.0, -2.0, 1.0, -2.0]);
    println!(
        "tiles: E_over={} E_under={} apparent={} actual={} ratio={:?}",
        c.e_over,
        c.e_under,
        c.apparent,
        c.actual,
        c.ratio()
    );
    Ok(())
}
