//! `cscdmd`: generate data, train a dictionary, fit DMD, estimate beds,
//! evaluate and export modes.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cscdmd_core::datasets::{
    derive_seed, frame_file_name, generate_synthetic, read_field, read_series, rmse, sample_patches,
    write_field, write_series, SnapshotSeries,
};
use cscdmd_core::dictionary::ConvDictionary;
use cscdmd_core::estimation::{
    dictionary_norms, step_size_margin, EstimatorConfig, StateLayout,
};
use cscdmd_core::field::Field;
use cscdmd_core::pipeline::{fit_method, rmse_csv, train_dictionary, SavedModel};
use cscdmd_core::Error;

use config::RunConfig;

const EXIT_HELP: &str = "\
Exit status:
  0  success
  2  invalid usage or configuration
  3  file could not be read or written, or has a bad format
  4  numerical failure (divergence, rank deficiency, non-finite values, ...)
  5  PDS step sizes violate 1/gamma1 - gamma2*sigma1(D)^2 >= beta/2";

#[derive(Parser)]
#[command(name = "cscdmd", version, about = "CSC-DMD training and river-bed estimation", after_help = EXIT_HELP)]
struct Cli {
    /// JSON run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic surface/bed series directory
    Generate(GenerateArgs),
    /// Learn a tight convolutional dictionary from training patches
    TrainDict(TrainDictArgs),
    /// Encode training frames and fit the DMD model
    FitDmd(FitDmdArgs),
    /// Restore beds of the test frames from their surfaces
    Estimate(EstimateArgs),
    /// Write per-frame bed RMSE of predictions and restorations
    Evaluate(EvaluateArgs),
    /// Write output modes and eigenvalues of a model
    ExportModes(ExportModesArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct TrainDictArgs {
    /// Series directory; only its training frames are used
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write realized kernels as CSV
    #[arg(long)]
    kernels: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patches: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Sparsity weight of the coefficient step
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct FitDmdArgs {
    #[arg(long)]
    series: PathBuf,
    /// Dictionary JSON, or `identity` for plain DMD on raw states
    #[arg(long)]
    dict: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rank: Option<usize>,
    /// Sparsity weight used to encode snapshots
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    series: PathBuf,
    /// NAME=MODEL: bare prediction of a fitted model (repeatable)
    #[arg(long = "prediction", value_parser = parse_named)]
    predictions: Vec<(String, PathBuf)>,
    /// NAME=DIR: beds written by `estimate` (repeatable)
    #[arg(long = "restoration", value_parser = parse_named)]
    restorations: Vec<(String, PathBuf)>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportModesArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() && !name.contains(',') => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        _ => Err(format!("expected NAME=PATH, got `{s}`")),
    }
}

/// A failed command: exit status plus a one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::InvalidGeometry(_) | Error::RankBudget { .. } => 2,
            Error::Io { .. }
            | Error::Json(_)
            | Error::BadMagic
            | Error::TruncatedPayload { .. }
            | Error::DimOverflow
            | Error::TrailingBytes(_)
            | Error::UnsupportedRank(_) => 3,
            Error::StepSizeCondition { .. } => 5,
            _ => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<SavedModel, Failure> {
    Ok(SavedModel::from_json(&read_text(path)?)?)
}

fn test_frames(series: &SnapshotSeries, train_frames: usize) -> Result<SnapshotSeries, Failure> {
    let (_, test) = series.split_at(train_frames)?;
    if test.is_empty() {
        return Err(Failure::config(format!(
            "series has {} frames, none left after {train_frames} training frames",
            series.len()
        )));
    }
    Ok(test)
}

fn generate(mut cfg: RunConfig, a: GenerateArgs) -> CmdResult {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.frames {
        cfg.synthetic.n_frames = n;
    }
    if let Some(r) = a.rows {
        cfg.synthetic.grid[0] = r;
    }
    if let Some(c) = a.cols {
        cfg.synthetic.grid[1] = c;
    }
    if let Some(n) = a.noise {
        cfg.synthetic.noise_sigma = n;
    }
    cfg.validate()?;
    let series = generate_synthetic(&cfg.synthetic_params())?;
    write_series(&a.out, &series)?;
    eprintln!("wrote {} frames to {}", series.len(), a.out.display());
    Ok(())
}

fn train_dict(mut cfg: RunConfig, a: TrainDictArgs) -> CmdResult {
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let d = &mut cfg.dictionary;
    if let Some(e) = a.epochs {
        d.train.epochs = e;
    }
    if let Some(p) = a.patches {
        d.patches = p;
    }
    if let Some(lr) = a.lr {
        d.train.lr = lr;
    }
    if let Some(l) = a.lambda {
        d.train.ista.lambda = l;
    }
    cfg.validate()?;
    let series = read_series(&a.series)?;
    let (train, _) = series.split_at(cfg.train_frames.min(series.len()))?;
    let patches = sample_patches(
        &train,
        cfg.dictionary.patches,
        cfg.dictionary.patch_dims,
        derive_seed(cfg.seed, "train-dict", 0),
    )?;
    let epochs = cfg.dictionary.train.epochs;
    let dict = train_dictionary(
        cfg.dictionary.geometry(),
        &patches,
        &cfg.dictionary.train,
        derive_seed(cfg.seed, "train-dict", 1),
        |log| {
            eprintln!(
                "epoch {}/{epochs}: objective {:.6e} reconstruction {:.6e} density {:.4}",
                log.epoch + 1,
                log.objective,
                log.reconstruction,
                log.density
            )
        },
    )?;
    write_text(&a.out, &(dict.to_json()? + "\n"))?;
    if let Some(path) = a.kernels {
        write_text(&path, &dict.kernels_csv()?)?;
    }
    Ok(())
}

fn fit_dmd(mut cfg: RunConfig, a: FitDmdArgs) -> CmdResult {
    if let Some(r) = a.rank {
        cfg.dmd.rank = r;
    }
    if let Some(l) = a.lambda {
        cfg.dmd.ista.lambda = l;
    }
    cfg.validate()?;
    let series = read_series(&a.series)?;
    let shape = series
        .shape()
        .ok_or_else(|| Failure::config("series has no frames"))?;
    let (train, _) = series.split_at(cfg.train_frames.min(series.len()))?;
    let (dict, encoding) = if a.dict == "identity" {
        (ConvDictionary::identity(shape)?, None)
    } else {
        let dict = ConvDictionary::from_json(&read_text(Path::new(&a.dict))?)?;
        (dict.with_field_shape(shape)?, Some(cfg.dmd.ista))
    };
    let method = fit_method(&dict, &train, cfg.dmd.rank, encoding.as_ref())?;
    eprintln!("fitted rank-{} model on {} frames", method.model.rank(), train.len());
    let saved = SavedModel::new(&method, encoding, train.len());
    write_text(&a.out, &(saved.to_json()? + "\n"))
}

fn estimate(mut cfg: RunConfig, a: EstimateArgs) -> CmdResult {
    let e = &mut cfg.estimator;
    if let Some(v) = a.epsilon {
        e.epsilon = v;
    }
    if let Some(v) = a.lambda {
        e.lambda = v;
    }
    if let Some(v) = a.gamma1 {
        e.gamma1 = v;
    }
    if let Some(v) = a.gamma2 {
        e.gamma2 = v;
    }
    if let Some(v) = a.max_iters {
        e.max_iters = v;
    }
    if let Some(v) = a.tol {
        e.tol = v;
    }
    cfg.estimator.validate()?;
    let saved = load_model(&a.model)?;
    let method = saved.method()?;
    let layout = StateLayout::surface_bed(method.dict.field_shape())?;
    check_gate(&cfg.estimator, &method.dict, &layout)?;

    let series = read_series(&a.series)?;
    let test = test_frames(&series, saved.train_frames)?;
    let surfaces = test
        .frames
        .iter()
        .map(|f| layout.surface_field(f))
        .collect::<Result<Vec<_>, _>>()?;
    let estimates = method.restore(&layout, &surfaces, &cfg.estimator)?;

    create_dir(&a.out)?;
    let mut log = String::from(
        "frame,iterations,converged,objective,center_distance,constraint_residual,rmse\n",
    );
    for (k, (est, truth)) in estimates.iter().zip(&test.frames).enumerate() {
        write_field(&a.out.join(frame_file_name(k + 1)), &est.bed)?;
        let o = &est.outcome;
        let err = rmse(&est.bed, &layout.bed_field(truth)?)?;
        writeln!(
            log,
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            k + 1,
            o.iterations,
            o.converged,
            o.objective,
            o.center_distance,
            (o.center_distance - cfg.estimator.epsilon).max(0.0),
            err
        )
        .expect("write to string");
    }
    write_text(&a.out.join("log.csv"), &log)?;
    eprintln!("estimated {} frames into {}", estimates.len(), a.out.display());
    Ok(())
}

fn check_gate(cfg: &EstimatorConfig, dict: &ConvDictionary, layout: &StateLayout) -> CmdResult {
    let (s_d, s_pd) = dictionary_norms(dict, layout);
    let (lhs, rhs) = step_size_margin(cfg, s_d, s_pd);
    if lhs >= rhs {
        Ok(())
    } else {
        Err(Error::StepSizeCondition { lhs, rhs }.into())
    }
}

fn evaluate(cfg: RunConfig, a: EvaluateArgs) -> CmdResult {
    if a.predictions.is_empty() && a.restorations.is_empty() {
        return Err(Failure::config("evaluate needs at least one --prediction or --restoration"));
    }
    let series = read_series(&a.series)?;
    let shape = series
        .shape()
        .ok_or_else(|| Failure::config("series has no frames"))?;
    let layout = StateLayout::surface_bed(shape)?;

    let mut names = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (name, path) in &a.predictions {
        let saved = load_model(path)?;
        let method = saved.method()?;
        let test = test_frames(&series, saved.train_frames)?;
        let preds = method.bare_predictions(test.len())?;
        let col = preds
            .iter()
            .zip(&test.frames)
            .map(|(p, t)| Ok(rmse(&layout.bed_field(p)?, &layout.bed_field(t)?)?))
            .collect::<Result<Vec<_>, Failure>>()?;
        names.push(name.as_str());
        columns.push(col);
    }
    for (name, dir) in &a.restorations {
        let test = test_frames(&series, cfg.train_frames)?;
        let col = test
            .frames
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let bed: Field = read_field(&dir.join(frame_file_name(k + 1)))?;
                Ok(rmse(&bed, &layout.bed_field(t)?)?)
            })
            .collect::<Result<Vec<_>, Failure>>()?;
        names.push(name.as_str());
        columns.push(col);
    }
    let refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
    write_text(&a.out, &rmse_csv(&names, &refs))
}

fn export_modes(a: ExportModesArgs) -> CmdResult {
    let saved = load_model(&a.model)?;
    let method = saved.method()?;
    create_dir(&a.out)?;
    for (k, (re, im)) in method.model.output_modes(&method.dict)?.iter().enumerate() {
        write_field(&a.out.join(format!("mode_{:04}_re.fld", k + 1)), re)?;
        write_field(&a.out.join(format!("mode_{:04}_im.fld", k + 1)), im)?;
    }
    write_text(&a.out.join("eigenvalues.csv"), &method.model.eigenvalues_csv())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => generate(cfg, a),
        Command::TrainDict(a) => train_dict(cfg, a),
        Command::FitDmd(a) => fit_dmd(cfg, a),
        Command::Estimate(a) => estimate(cfg, a),
        Command::Evaluate(a) => evaluate(cfg, a),
        Command::ExportModes(a) => export_modes(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
