//! Command-line surface. Each subcommand is a plain function over an
//! [`ExperimentConfig`] so it can be driven from tests; [`run`] adds
//! argument parsing, flag overrides and exit codes.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric or training error.

mod commands;
mod config;

pub use commands::{
    cmd_cam, cmd_eval, cmd_gen_data, cmd_gradcheck, cmd_probe, cmd_stats, cmd_train, CommandOutput, GradcheckOptions,
    CAM_IDENTITY_TOL,
};
pub use config::{EvalConfig, EvalModeKind, ExperimentConfig, PathsConfig, OUT_DIR_ENV};

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::dataset::Split;
use crate::error::Error;
use crate::model::Head;
use crate::synth::{LabelRule, Rect};
use crate::tensor::LossKind;
use crate::train::{OptimizerKind, PatchSize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Contract(_) => EXIT_USAGE,
        Error::NonFinite { .. } | Error::Numeric(_) | Error::Training { .. } => EXIT_NUMERIC,
        Error::Dimension(_)
        | Error::Format { .. }
        | Error::Geometry(_)
        | Error::Annotation(_)
        | Error::Capacity { .. }
        | Error::Load { .. }
        | Error::Io { .. } => EXIT_DATA,
    }
}

#[derive(Parser, Debug)]
#[command(name = "gsp", version, about = "Object counting with global sum pooling")]
struct Cli {
    /// Experiment config (TOML). Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset and print its statistics.
    GenData(GenDataArgs),
    /// Train a model on the train split of a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint with full-image or tiled inference.
    Eval(EvalArgs),
    /// Export the class activation map of one image.
    Cam(CamArgs),
    /// Compare sum-pooled features of image crops with the full image.
    Probe(ProbeArgs),
    /// Check analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Print statistics of a dataset directory.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Dataset directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    /// Overwrite a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    head: Option<Head>,
    /// Square patch side, or "full".
    #[arg(long)]
    patch_size: Option<PatchSize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patches_per_image: Option<usize>,
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    rule: Option<LabelRule>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train only the linear head.
    #[arg(long)]
    freeze_conv: bool,
    /// Record per-epoch wall time in the log (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<EvalModeKind>,
    /// Tile side in tiled mode.
    #[arg(long)]
    patch_size: Option<usize>,
    #[arg(long)]
    rule: Option<LabelRule>,
    #[arg(long)]
    split: Option<Split>,
}

#[derive(Args, Debug)]
struct CamArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// PGM/PPM/PNG image.
    #[arg(long)]
    image: PathBuf,
    /// Output prefix; files are <prefix>_heatmap.pgm and <prefix>_overlay.ppm.
    #[arg(long)]
    out: PathBuf,
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{s:?}: {e}"))?;
    match v[..] {
        [x0, y0, w, h] => Ok(Rect::new(x0, y0, w, h)),
        _ => Err(format!("{s:?}: expected x0,y0,w,h")),
    }
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// Crop as x0,y0,w,h; repeatable. Default: the four image halves.
    #[arg(long = "crop", value_parser = parse_rect)]
    crops: Vec<Rect>,
    /// Number of leading channels to report.
    #[arg(long, default_value_t = 48)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Input side; default is the model minimum.
    #[arg(long)]
    size: Option<usize>,
    /// Check at most this many elements per parameter tensor.
    #[arg(long)]
    max_per_param: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional CSV of per-check results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
}

fn load_config(path: Option<&PathBuf>) -> crate::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_seed();
    Ok(cfg)
}

fn execute(cli: Cli) -> crate::Result<CommandOutput> {
    let mut cfg = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::GenData(a) => {
            if let Some(s) = a.seed {
                cfg.set_seed(s);
            }
            for (field, v) in [(&mut cfg.data.train, a.train), (&mut cfg.data.val, a.val), (&mut cfg.data.test, a.test)] {
                if let Some(v) = v {
                    *field = v;
                }
            }
            cmd_gen_data(&cfg, a.out.as_deref(), a.force)
        }
        Command::Train(a) => {
            if let Some(s) = a.seed {
                cfg.set_seed(s);
            }
            let t = &mut cfg.train;
            if let Some(h) = a.head {
                cfg.model.head = h;
            }
            if let Some(v) = a.patch_size {
                t.patch_size = v;
            }
            if let Some(v) = a.epochs {
                t.epochs = v;
            }
            if let Some(v) = a.batch_size {
                t.batch_size = v;
            }
            if let Some(v) = a.patches_per_image {
                t.patches_per_image = v;
            }
            if let Some(v) = a.optimizer {
                t.optimizer.kind = v;
            }
            if let Some(v) = a.lr {
                t.optimizer.learning_rate = v;
            }
            if let Some(v) = a.loss {
                t.loss = v;
            }
            if let Some(v) = a.rule {
                t.label_rule = v;
            }
            t.freeze_conv |= a.freeze_conv;
            t.record_wall_time |= a.timing;
            cmd_train(&cfg, a.data.as_deref(), a.out.as_deref())
        }
        Command::Eval(a) => {
            let e = &mut cfg.eval;
            if let Some(v) = a.mode {
                e.mode = v;
            }
            if let Some(v) = a.patch_size {
                e.patch_size = v;
            }
            if let Some(v) = a.rule {
                e.rule = v;
            }
            if let Some(v) = a.split {
                e.split = v;
            }
            cmd_eval(&cfg, a.checkpoint.as_deref(), a.data.as_deref(), a.out.as_deref())
        }
        Command::Cam(a) => cmd_cam(&a.checkpoint, &a.image, &a.out),
        Command::Probe(a) => cmd_probe(&a.checkpoint, &a.image, &a.crops, a.k, &a.out),
        Command::Gradcheck(a) => {
            let opts = GradcheckOptions {
                eps: a.eps,
                tol: a.tol,
                size: a.size,
                max_per_param: a.max_per_param,
                seed: a.seed,
                loss: cfg.train.loss,
                out: a.out,
            };
            cmd_gradcheck(&cfg.model, &opts)
        }
        Command::Stats(a) => cmd_stats(&a.data),
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code. The report goes to `out`, followed by a
/// final `{"outputs":[...]}` line; errors go to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(o) => {
            let _ = write!(out, "{}", o.report);
            let _ = writeln!(out, "{}", o.outputs_json());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
