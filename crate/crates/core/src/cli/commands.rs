use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, OUT_DIR_ENV};
use crate::dataset::raster::read_raster;
use crate::dataset::{dataset_stats, format_stats_table, generate_dataset, load_dataset, write_dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{
    compute_cam, evaluate_images, format_summary, half_crops, linearity_probe, render_cam_overlay, write_suite_report,
};
use crate::model::{check_model_gradients, load_model, save_model, CountModel, CountingNet, ModelConfig};
use crate::synth::Rect;
use crate::tensor::{op_gradient_suite, LossKind, Tensor};
use crate::train::train;

/// Largest tolerated CAM identity error.
pub const CAM_IDENTITY_TOL: f64 = 1e-9;

/// Human-readable report plus every file the command wrote.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutput {
    pub report: String,
    pub outputs: Vec<PathBuf>,
}

impl CommandOutput {
    /// `{"outputs":[...]}`, the machine-parsable final line.
    pub fn outputs_json(&self) -> String {
        let paths: Vec<String> = self.outputs.iter().map(|p| p.display().to_string()).collect();
        serde_json::json!({ "outputs": paths }).to_string()
    }
}

fn env_dir(sub: &str) -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(sub))
}

fn resolve(flag: Option<&Path>, configured: Option<&PathBuf>, env_sub: &str, what: &str) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| configured.cloned())
        .or_else(|| env_dir(env_sub))
        .ok_or_else(|| Error::Config(format!("no {what} given (flag, config [paths] or ${OUT_DIR_ENV})")))
}

fn dataset_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    resolve(flag, cfg.paths.dataset.as_ref(), "data", "dataset directory")
}

fn out_dir(cfg: &ExperimentConfig, flag: Option<&Path>) -> Result<PathBuf> {
    resolve(flag, cfg.paths.out_dir.as_ref(), "run", "output directory")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generates the synthetic dataset described by `cfg` into `out`. An
/// existing non-empty directory is refused unless `force`, in which case the
/// previous dataset files are removed first.
pub fn cmd_gen_data(cfg: &ExperimentConfig, out: Option<&Path>, force: bool) -> Result<CommandOutput> {
    cfg.scene.validate()?;
    let root = dataset_dir(cfg, out)?;
    if let Ok(mut entries) = fs::read_dir(&root) {
        if entries.next().is_some() {
            if !force {
                return Err(Error::Config(format!(
                    "{} is not empty; pass --force to overwrite",
                    root.display()
                )));
            }
            for sub in ["images", "annotations", "boxes"] {
                let d = root.join(sub);
                if d.is_dir() {
                    fs::remove_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                }
            }
        }
    }
    create_dir(&root)?;
    let ds = generate_dataset(&cfg.scene, &cfg.data, cfg.data_seed())?;
    let outputs = write_dataset(&ds, &root)?;
    let report = format_stats_table("synthetic", &dataset_stats(&ds));
    Ok(CommandOutput { report, outputs })
}

/// Trains a fresh model from `cfg.model` on the dataset's train split and
/// writes `model.ckpt` (or `[paths].checkpoint`), `train_log.csv` and the
/// resolved `config.toml` to the output directory.
pub fn cmd_train(cfg: &ExperimentConfig, data: Option<&Path>, out: Option<&Path>) -> Result<CommandOutput> {
    cfg.validate()?;
    let root = dataset_dir(cfg, data)?;
    let dir = out_dir(cfg, out)?;
    let ds = load_dataset(&root)?;
    if ds.split(Split::Train).next().is_none() {
        return Err(Error::load(&root, None, "dataset has no training images"));
    }
    let model = CountModel::new(cfg.model.clone())?;
    let (model, log) = train(model, &ds, &cfg.train)?;

    create_dir(&dir)?;
    let ckpt = cfg.paths.checkpoint.clone().unwrap_or_else(|| dir.join("model.ckpt"));
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_model(&model, &ckpt)?;
    let log_path = dir.join("train_log.csv");
    log.save_csv(&log_path)?;
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, cfg.to_toml()?).map_err(|e| Error::io(&cfg_path, e))?;

    let mut report = format!(
        "trained {} head, {} parameters, {} epochs\n",
        model.head(),
        model.parameter_count(),
        log.epochs.len()
    );
    if let Some(last) = log.epochs.last() {
        let _ = writeln!(
            report,
            "final loss {:.6}{}",
            last.loss,
            last.val_mae.map(|v| format!(", val MAE {v:.4}")).unwrap_or_default()
        );
    }
    Ok(CommandOutput {
        report,
        outputs: vec![ckpt, log_path, cfg_path],
    })
}

/// Evaluates a checkpoint on one split of a dataset and writes the report
/// files to `out` (default `<out_dir>/eval`).
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    checkpoint: Option<&Path>,
    data: Option<&Path>,
    out: Option<&Path>,
) -> Result<CommandOutput> {
    cfg.validate()?;
    let ckpt = match (checkpoint, &cfg.paths.checkpoint) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p.clone(),
        (None, None) => out_dir(cfg, None)?.join("model.ckpt"),
    };
    let dir = match out {
        Some(o) => o.to_path_buf(),
        None => out_dir(cfg, None)?.join("eval"),
    };
    let root = dataset_dir(cfg, data)?;
    let model = load_model(&ckpt)?;
    let ds = load_dataset(&root)?;
    let images = ds.load_split(cfg.eval.split)?;
    if images.is_empty() {
        return Err(Error::load(&root, None, format!("split {} is empty", cfg.eval.split)));
    }
    let report = evaluate_images(&model, &images, cfg.eval.eval_mode(), cfg.eval.rule)?;
    let outputs = write_suite_report(&report, &dir)?;
    Ok(CommandOutput {
        report: format!("{} head, split {}\n{}", model.head(), cfg.eval.split, format_summary(&report)),
        outputs,
    })
}

/// Writes `<prefix>_heatmap.pgm` and `<prefix>_overlay.ppm` and checks that
/// the heatmap reproduces the prediction.
pub fn cmd_cam(checkpoint: &Path, image: &Path, prefix: &Path) -> Result<CommandOutput> {
    let model = load_model(checkpoint)?;
    let pixels = read_raster(image)?;
    let cam = compute_cam(&model, &pixels)?;
    let err = cam.identity_error();
    if err > CAM_IDENTITY_TOL {
        return Err(Error::Numeric(format!(
            "CAM identity error {err:e} exceeds {CAM_IDENTITY_TOL:e}"
        )));
    }
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let (heat, overlay) = render_cam_overlay(&cam, &pixels, prefix)?;
    let (_, h, w) = cam.heatmap.dims3()?;
    let report = format!(
        "{} head: prediction {:.6}, heatmap {h}x{w}, reconstructed {:.6}, identity error {err:e}\n",
        model.head(),
        cam.prediction,
        cam.reconstructed_count()
    );
    Ok(CommandOutput {
        report,
        outputs: vec![heat, overlay],
    })
}

/// Linearity probe CSV of `crops` (default: the four image halves).
pub fn cmd_probe(checkpoint: &Path, image: &Path, crops: &[Rect], k: usize, out: &Path) -> Result<CommandOutput> {
    let model = load_model(checkpoint)?;
    let pixels = read_raster(image)?;
    let (_, h, w) = pixels.dims3()?;
    let crops = if crops.is_empty() { half_crops(w, h) } else { crops.to_vec() };
    let table = linearity_probe(&model, &pixels, &crops, k)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let f = fs::File::create(out).map_err(|e| Error::io(out, e))?;
    table.write_csv(std::io::BufWriter::new(f))?;
    let mut report = format!("{} rows x {} channels\n", table.rows.len(), table.channels.len());
    let full = &table.rows[0].values;
    let full_sum: f64 = full.iter().sum();
    for row in &table.rows[1..] {
        let r = row.rect.expect("crop row");
        let s: f64 = row.values.iter().sum();
        let _ = writeln!(
            report,
            "crop {r}: area fraction {:.4}, activation fraction {:.4}",
            r.area() as f64 / (w * h) as f64,
            if full_sum != 0.0 { s / full_sum } else { f64::NAN }
        );
    }
    Ok(CommandOutput {
        report,
        outputs: vec![out.to_path_buf()],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckOptions {
    pub eps: f64,
    pub tol: f64,
    /// Input side; `None` uses the model minimum.
    pub size: Option<usize>,
    pub max_per_param: Option<usize>,
    pub seed: u64,
    pub loss: LossKind,
    /// Optional CSV of per-check results.
    pub out: Option<PathBuf>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            eps: 1e-5,
            tol: 1e-5,
            size: None,
            max_per_param: None,
            seed: 0,
            loss: LossKind::L1,
            out: None,
        }
    }
}

/// Checks every graph op and the full model loss against central
/// differences. Fails with a numeric error when any error exceeds `tol`.
pub fn cmd_gradcheck(model_cfg: &ModelConfig, opts: &GradcheckOptions) -> Result<CommandOutput> {
    let model = CountModel::new(model_cfg.clone())?;
    let side = opts.size.unwrap_or_else(|| model.min_input_size());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = model_cfg.in_channels * side * side;
    let image = Tensor::new(vec![model_cfg.in_channels, side, side], (0..n).map(|_| rng.random()).collect())?;
    let target = model.predict(&image)? + 1.0;

    let mut rows: Vec<(String, usize, usize, f64)> = op_gradient_suite(opts.seed, opts.eps)?
        .into_iter()
        .map(|(name, r)| (format!("op.{name}"), r.checked, r.skipped, r.max_rel_error))
        .collect();
    for c in check_model_gradients(&model, &image, target, opts.loss, opts.eps, opts.max_per_param)? {
        rows.push((format!("model.{}", c.name), c.report.checked, c.report.skipped, c.report.max_rel_error));
    }

    let mut report = String::from("check | checked | skipped | max rel error\n");
    for (name, checked, skipped, err) in &rows {
        let _ = writeln!(report, "{name} | {checked} | {skipped} | {err:.3e}");
    }
    let worst = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let _ = writeln!(report, "max rel error {worst:.3e} (tolerance {:.1e})", opts.tol);

    let mut outputs = Vec::new();
    if let Some(path) = &opts.out {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::load(path, None, e.to_string()))?;
        let wrap = |e: csv::Error| Error::load(path, None, e.to_string());
        w.write_record(["check", "checked", "skipped", "max_rel_error"]).map_err(wrap)?;
        for (name, checked, skipped, err) in &rows {
            w.write_record([name.clone(), checked.to_string(), skipped.to_string(), err.to_string()])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        outputs.push(path.clone());
    }
    if !(worst <= opts.tol) {
        return Err(Error::Numeric(format!(
            "gradient check failed: max rel error {worst:e} > {:e}\n{report}",
            opts.tol
        )));
    }
    Ok(CommandOutput { report, outputs })
}

/// Dataset statistics table for an on-disk dataset.
pub fn cmd_stats(data: &Path) -> Result<CommandOutput> {
    let ds = load_dataset(data)?;
    let name = data.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
    Ok(CommandOutput {
        report: format_stats_table(&name, &dataset_stats(&ds)),
        outputs: vec![],
    })
}
