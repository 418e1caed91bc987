use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use camlens_core::analysis::{
    compare_degradations, sweep_gaussian_ordered, write_sweep_csv, SweepGrid,
};
use camlens_core::metrics::{psnr, psnr_luminance, psnr_serde, ssim, MetricsReport};
use camlens_core::rectify::{rectify_pair, sample_checker};
use camlens_core::srnet::{
    load_checkpoint, super_resolve, super_resolve_to, train, write_checkpoint, Degradation,
    OptimizerKind, TrainConfig,
};
use camlens_core::synth::{SynthSpec, TextureKind};
use camlens_core::{
    load_dataset, load_image, BlurOrder, Dataset, Error, GaussianParams, Image, PairedScene,
    Result, ScaleFactor,
};

use crate::atomic;

#[derive(Subcommand)]
pub enum Command {
    /// Generate a reproducible synthetic paired dataset.
    Synth(SynthArgs),
    /// Align, bias-compensate, and color-calibrate one raw pair.
    Rectify(RectifyArgs),
    /// Degrade an HR image with a synthetic degradation model.
    Degrade(DegradeArgs),
    /// Traverse Gaussian blur parameters against the realistic LR frames.
    Sweep(SweepArgs),
    /// Compare bicubic, Gaussian, and realistic LR observations per scene.
    Compare(CompareArgs),
    /// PSNR and SSIM between two images.
    Metrics(MetricsArgs),
    /// Train a super-resolver under a chosen degradation model.
    Train(TrainArgs),
    /// Super-resolve one image with a trained checkpoint.
    Sr(SrArgs),
    /// Evaluate a checkpoint or the interpolation baseline on a dataset split.
    Eval(EvalArgs),
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Rectify(args) => cmd_rectify(args),
        Command::Degrade(args) => cmd_degrade(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Train(args) => cmd_train(args),
        Command::Sr(args) => cmd_sr(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.into(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn parse_pair_f64(text: &str, what: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(invalid(format!("{what} expects two comma-separated values")));
    }
    let a = parts[0].trim().parse().map_err(|_| invalid(format!("bad {what}: {text}")))?;
    let b = parts[1].trim().parse().map_err(|_| invalid(format!("bad {what}: {text}")))?;
    Ok((a, b))
}

fn dataset_scale(dataset: &Dataset, flag: Option<f64>) -> Result<ScaleFactor> {
    let ratio = flag
        .or(dataset.working_scale())
        .ok_or_else(|| invalid("dataset is empty and no --scale given"))?;
    ScaleFactor::new(ratio)
}

// ---------------------------------------------------------------------------
// synth

#[derive(Args)]
pub struct SynthArgs {
    /// Output dataset directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// JSON file with a full synthesis spec; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenes: Option<usize>,
    /// Square HR frame size in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scene content: detail (strokes/checkers) or waves (band-limited).
    #[arg(long, value_enum)]
    texture: Option<TextureArg>,
    /// Wave period range MIN,MAX in pixels (with --texture waves).
    #[arg(long)]
    wave_periods: Option<String>,
    /// Hidden Gaussian chain K,SIGMA; omitted means bicubic downsampling.
    #[arg(long)]
    gauss: Option<String>,
    /// Hidden LR-frame shift DX,DY in LR pixels.
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    bias: Option<f64>,
    /// Hidden color map coefficients C0,C1[,C2...] applied to all channels.
    #[arg(long, allow_hyphen_values = true)]
    color: Option<String>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    nval: Option<usize>,
    #[arg(long)]
    ntest: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextureArg {
    Detail,
    Waves,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec: SynthSpec = match &args.config {
        Some(path) => load_json_config(path)?,
        None => SynthSpec::default(),
    };
    if let Some(n) = args.scenes {
        spec.n_scenes = n;
    }
    if let Some(s) = args.size {
        spec.hr_size = s;
    }
    if let Some(s) = args.scale {
        spec.scale = s;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    match args.texture {
        Some(TextureArg::Detail) => spec.texture = TextureKind::Detail,
        Some(TextureArg::Waves) => {
            let (lo, hi) = match &args.wave_periods {
                Some(text) => parse_pair_f64(text, "--wave-periods")?,
                None => (10.0, 30.0),
            };
            spec.texture = TextureKind::Waves {
                min_period: lo,
                max_period: hi,
            };
        }
        None => {}
    }
    if let Some(text) = &args.gauss {
        let (k, sigma) = parse_pair_f64(text, "--gauss")?;
        spec.hidden.gauss = Some((k as usize, sigma));
    }
    if let Some(text) = &args.shift {
        spec.hidden.shift = Some(parse_pair_f64(text, "--shift")?);
    }
    if let Some(b) = args.bias {
        spec.hidden.bias = b;
    }
    if let Some(text) = &args.color {
        let coeffs: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| invalid(format!("bad --color: {text}"))))
            .collect::<Result<_>>()?;
        spec.hidden.color = Some(vec![coeffs; 3]);
    }
    if let Some(s) = args.noise {
        spec.hidden.noise_sigma = s;
    }
    if let Some(n) = args.nval {
        spec.n_val = n;
    }
    if let Some(n) = args.ntest {
        spec.n_test = n;
    }

    std::fs::create_dir_all(&args.out).map_err(|source| Error::Write {
        path: args.out.clone(),
        source,
    })?;
    let scenes = spec.generate()?;
    for scene in &scenes {
        atomic::save_png(&scene.hr, args.out.join(format!("{}_hr.png", scene.id)), 16)?;
        atomic::save_png(&scene.lr, args.out.join(format!("{}_lr.png", scene.id)), 16)?;
    }
    let manifest = camlens_core::Manifest {
        scale: spec.scale,
        splits: Some(spec.split()),
    };
    atomic::write_json(args.out.join("manifest.json"), &manifest)?;
    atomic::write_json(args.out.join("truth.json"), &spec)?;
    println!(
        "wrote {} scenes to {} (scale {})",
        scenes.len(),
        args.out.display(),
        spec.scale
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// rectify

#[derive(Args)]
pub struct RectifyArgs {
    /// Raw LR capture.
    #[arg(long)]
    lr: PathBuf,
    /// HR ground-truth capture.
    #[arg(long)]
    hr: PathBuf,
    /// HR/LR scale ratio; inferred from the dimensions when omitted.
    #[arg(long)]
    scale: Option<f64>,
    /// Checker capture from the LR camera (enables color calibration).
    #[arg(long, requires = "checker_hr")]
    checker_lr: Option<PathBuf>,
    /// Checker capture from the HR camera.
    #[arg(long, requires = "checker_lr")]
    checker_hr: Option<PathBuf>,
    /// Checker grid ROWSxCOLS.
    #[arg(long, default_value = "4x6")]
    grid: String,
    /// Fraction of each checker cell trimmed on every side.
    #[arg(long, default_value_t = 0.25)]
    margin: f64,
    /// Color polynomial degree.
    #[arg(long, default_value_t = 3)]
    degree: usize,
    /// Rectified LR output path.
    #[arg(long)]
    out_lr: PathBuf,
    /// JSON report output path.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    bit_depth: u8,
}

fn cmd_rectify(args: RectifyArgs) -> Result<()> {
    let raw_lr = load_image(&args.lr)?;
    let hr = load_image(&args.hr)?;
    let ratio = args
        .scale
        .unwrap_or_else(|| hr.width() as f64 / raw_lr.width() as f64);
    let scale = ScaleFactor::new(ratio)?;

    let (rows, cols) = {
        let parts: Vec<&str> = args.grid.split('x').collect();
        if parts.len() != 2 {
            return Err(invalid("--grid expects ROWSxCOLS"));
        }
        (
            parts[0].parse().map_err(|_| invalid("bad --grid rows"))?,
            parts[1].parse().map_err(|_| invalid("bad --grid cols"))?,
        )
    };

    let checker = match (&args.checker_lr, &args.checker_hr) {
        (Some(lr_path), Some(hr_path)) => {
            let lr_chart = load_image(lr_path)?;
            let hr_chart = load_image(hr_path)?;
            Some((
                sample_checker(&lr_chart, rows, cols, args.margin)?,
                sample_checker(&hr_chart, rows, cols, args.margin)?,
            ))
        }
        _ => None,
    };

    let id = args
        .out_lr
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "rectified".into());
    let (scene, report) = rectify_pair(
        &id,
        &raw_lr,
        &hr,
        scale,
        checker.as_ref().map(|(a, b)| (a, b)),
        args.degree,
    )?;
    atomic::save_png(&scene.lr, &args.out_lr, args.bit_depth)?;
    if let Some(report_path) = &args.report {
        atomic::write_json(report_path, &report)?;
    }
    println!(
        "translation ({:+.3}, {:+.3}) px, bias {:+.4}, stages: {}",
        report.translation.dx,
        report.translation.dy,
        report.intensity_bias,
        report
            .stage_psnr
            .iter()
            .map(|s| format!("{} {:.2} dB", s.stage, s.psnr_db))
            .collect::<Vec<_>>()
            .join(", ")
    );
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// degrade

#[derive(Clone, Copy, ValueEnum)]
enum DegradeModel {
    Bicubic,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    BlurFirst,
    InterpFirst,
}

impl From<OrderArg> for BlurOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::BlurFirst => BlurOrder::BlurThenInterp,
            OrderArg::InterpFirst => BlurOrder::InterpThenBlur,
        }
    }
}

#[derive(Args)]
pub struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 2.9)]
    scale: f64,
    #[arg(long, value_enum, default_value_t = DegradeModel::Bicubic)]
    model: DegradeModel,
    /// Gaussian kernel size (odd).
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2.65)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = OrderArg::BlurFirst)]
    order: OrderArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    bit_depth: u8,
}

fn cmd_degrade(args: DegradeArgs) -> Result<()> {
    let img = load_image(&args.input)?;
    let scale = ScaleFactor::new(args.scale)?;
    let out = match args.model {
        DegradeModel::Bicubic => camlens_core::degrade_bicubic(&img, scale)?,
        DegradeModel::Gaussian => camlens_core::degrade_gaussian_ordered(
            &img,
            GaussianParams::new(args.k, args.sigma)?,
            scale,
            args.order.into(),
        )?,
    };
    atomic::save_png(&out, &args.out, args.bit_depth)?;
    println!("{}x{} -> {}x{}", img.width(), img.height(), out.width(), out.height());
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Clone, Copy, ValueEnum)]
enum SweepOrderArg {
    BlurFirst,
    InterpFirst,
    Both,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated odd kernel sizes, e.g. 3,5,7,9.
    #[arg(long, default_value = "3,5,7,9")]
    k: String,
    /// Sigma values: START:END:STEP or a comma-separated list.
    #[arg(long, default_value = "0.5:4.0:0.05")]
    sigma: String,
    /// Scale ratio; defaults to the dataset manifest.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, value_enum, default_value_t = SweepOrderArg::BlurFirst)]
    order: SweepOrderArg,
    /// Output CSV; with --order both a second file gets an
    /// `.interp_first.csv` suffix.
    #[arg(long)]
    out: PathBuf,
}

fn parse_k_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| invalid(format!("bad k list: {text}"))))
        .collect()
}

fn parse_sigma_list(text: &str) -> Result<Vec<f64>> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid("--sigma range expects START:END:STEP"));
        }
        let start: f64 = parts[0].parse().map_err(|_| invalid("bad sigma start"))?;
        let end: f64 = parts[1].parse().map_err(|_| invalid("bad sigma end"))?;
        let step: f64 = parts[2].parse().map_err(|_| invalid("bad sigma step"))?;
        if step <= 0.0 || end < start {
            return Err(invalid("--sigma range must be increasing"));
        }
        let n = ((end - start) / step).round() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        text.split(',')
            .map(|t| t.trim().parse().map_err(|_| invalid(format!("bad sigma list: {text}"))))
            .collect()
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let scale = dataset_scale(&dataset, args.scale)?;
    let grid = SweepGrid::new(parse_k_list(&args.k)?, parse_sigma_list(&args.sigma)?)?;

    let orders: Vec<(BlurOrder, PathBuf)> = match args.order {
        SweepOrderArg::BlurFirst => vec![(BlurOrder::BlurThenInterp, args.out.clone())],
        SweepOrderArg::InterpFirst => vec![(BlurOrder::InterpThenBlur, args.out.clone())],
        SweepOrderArg::Both => vec![
            (BlurOrder::BlurThenInterp, args.out.clone()),
            (BlurOrder::InterpThenBlur, args.out.with_extension("interp_first.csv")),
        ],
    };
    for (order, path) in orders {
        let result = sweep_gaussian_ordered(&dataset, &grid, scale, order)?;
        let mut buf = Vec::new();
        write_sweep_csv(&result, &mut buf).expect("in-memory write");
        atomic::write_bytes(&path, &buf)?;
        println!(
            "{:?}: best {:?} -> {}",
            order,
            result.best,
            path.display()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// compare

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2.65)]
    sigma: f64,
    /// JSON output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let scale = dataset_scale(&dataset, args.scale)?;
    let report = compare_degradations(&dataset, scale, GaussianParams::new(args.k, args.sigma)?)?;
    match &args.out {
        Some(path) => atomic::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("serializes")),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics

#[derive(Args)]
pub struct MetricsArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Compute PSNR on BT.601 luminance instead of the RGB average.
    #[arg(long)]
    luma: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let psnr_db = if args.luma {
        psnr_luminance(&a, &b, 1.0)?
    } else {
        psnr(&a, &b, 1.0)?
    };
    let report = MetricsReport {
        psnr_db,
        ssim: ssim(&a, &b)?,
        per_channel_psnr_db: None,
    };
    match &args.out {
        Some(path) => atomic::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string(&report).expect("serializes")),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train

#[derive(Clone, Copy, ValueEnum)]
enum DegradationArg {
    Bicubic,
    Gaussian,
    Camera,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Momentum,
    Adam,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    degradation: DegradationArg,
    /// Gaussian kernel size (with --degradation gaussian).
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 2.65)]
    sigma: f64,
    /// JSON training config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    patch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Gradient-norm clip bound; 0 disables clipping.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Scale ratio override for the synthetic degradations.
    #[arg(long)]
    scale: Option<f64>,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-step loss CSV.
    #[arg(long)]
    loss_out: Option<PathBuf>,
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut dataset = load_dataset(&args.data)?;
    if let Some(s) = args.scale {
        dataset.nominal_scale = Some(s);
    }

    let mut config: TrainConfig = match &args.config {
        Some(path) => load_json_config(path)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = args.steps {
        config.steps = v;
    }
    if let Some(v) = args.batch {
        config.batch_size = v;
    }
    if let Some(v) = args.patch {
        config.patch = v;
    }
    if let Some(v) = args.lr {
        config.learning_rate = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.optimizer {
        config.optimizer = match v {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Momentum => OptimizerKind::Momentum,
            OptimizerArg::Adam => OptimizerKind::Adam,
        };
    }
    if let Some(v) = args.clip {
        config.clip = if v > 0.0 { Some(v) } else { None };
    }
    if let Some(v) = args.depth {
        config.depth = v;
    }
    if let Some(v) = args.width {
        config.width = v;
    }
    if config.steps == 0 {
        return Err(invalid("--steps must be given (directly or via --config)"));
    }

    let degradation = match args.degradation {
        DegradationArg::Bicubic => Degradation::Bicubic,
        DegradationArg::Gaussian => Degradation::Gaussian(GaussianParams::new(args.k, args.sigma)?),
        DegradationArg::Camera => Degradation::Camera,
    };
    let scale = dataset
        .working_scale()
        .ok_or_else(|| invalid("dataset is empty"))?;

    let (model, trace) = train(&dataset, degradation, &config)?;

    let mut buf = Vec::new();
    write_checkpoint(&mut buf, &model, scale, degradation.into())?;
    atomic::write_bytes(&args.out, &buf)?;

    if let Some(path) = &args.loss_out {
        let mut csv = String::from("step,loss\n");
        for (i, loss) in trace.iter().enumerate() {
            csv.push_str(&format!("{i},{loss:.9}\n"));
        }
        atomic::write_bytes(path, csv.as_bytes())?;
    }
    println!(
        "trained {} steps: loss {:.6e} -> {:.6e}; checkpoint {}",
        trace.len(),
        trace.first().copied().unwrap_or(0.0),
        trace.last().copied().unwrap_or(0.0),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sr

#[derive(Args)]
pub struct SrArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Tile size for bounded-memory inference.
    #[arg(long)]
    tile: Option<usize>,
    /// Scale override; defaults to the checkpoint's training scale.
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, default_value_t = 16)]
    bit_depth: u8,
}

fn cmd_sr(args: SrArgs) -> Result<()> {
    let (model, header) = load_checkpoint(&args.model)?;
    let lr = load_image(&args.input)?;
    let scale = ScaleFactor::new(args.scale.unwrap_or(header.scale))?;
    let out = super_resolve(&model, &lr, scale, args.tile)?;
    atomic::save_png(&out, &args.out, args.bit_depth)?;
    println!(
        "{}x{} -> {}x{} (scale {})",
        lr.width(),
        lr.height(),
        out.width(),
        out.height(),
        scale.ratio()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Interp,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Evaluate a fixed baseline instead of a model.
    #[arg(long, value_enum, conflicts_with = "model")]
    baseline: Option<BaselineArg>,
    /// Checkpoint to evaluate.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SceneEval {
    id: String,
    #[serde(with = "psnr_serde")]
    psnr_db: f64,
    #[serde(with = "psnr_serde")]
    psnr_luma_db: f64,
    ssim: f64,
}

#[derive(Serialize)]
struct EvalReport {
    candidate: String,
    split: String,
    n_scenes: usize,
    scenes: Vec<SceneEval>,
    #[serde(with = "psnr_serde")]
    mean_psnr_db: f64,
    #[serde(with = "psnr_serde")]
    mean_psnr_luma_db: f64,
    mean_ssim: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let (split_name, pairs): (&str, Vec<&PairedScene>) = match args.split {
        SplitArg::Train => ("train", dataset.train_pairs()),
        SplitArg::Val => ("val", dataset.val_pairs()),
        SplitArg::Test => ("test", dataset.test_pairs()),
        SplitArg::All => ("all", dataset.pairs.iter().collect()),
    };
    if pairs.is_empty() {
        return Err(invalid(format!("split {split_name:?} has no scenes")));
    }

    let model = match (&args.baseline, &args.model) {
        (None, Some(path)) => Some(load_checkpoint(path)?),
        (Some(BaselineArg::Interp), None) => None,
        (None, None) => return Err(invalid("give either --baseline interp or --model CKPT")),
        _ => unreachable!("clap conflicts_with"),
    };

    let candidate_for = |scene: &PairedScene| -> Result<Image> {
        let (hw, hh) = scene.hr.dims();
        match &model {
            None => camlens_core::resize_bicubic(&scene.lr, hw, hh),
            Some((m, _)) => super_resolve_to(m, &scene.lr, hw, hh, args.tile),
        }
    };

    let mut scenes = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let candidate = candidate_for(pair)?;
        scenes.push(SceneEval {
            id: pair.id.clone(),
            psnr_db: psnr(&pair.hr, &candidate, 1.0)?,
            psnr_luma_db: psnr_luminance(&pair.hr, &candidate, 1.0)?,
            ssim: ssim(&pair.hr, &candidate)?,
        });
    }
    let n = scenes.len() as f64;
    let report = EvalReport {
        candidate: match &model {
            None => "interp".to_string(),
            Some((_, header)) => format!("{:?}", header.degradation),
        },
        split: split_name.to_string(),
        n_scenes: scenes.len(),
        mean_psnr_db: scenes.iter().map(|s| s.psnr_db).sum::<f64>() / n,
        mean_psnr_luma_db: scenes.iter().map(|s| s.psnr_luma_db).sum::<f64>() / n,
        mean_ssim: scenes.iter().map(|s| s.ssim).sum::<f64>() / n,
        scenes,
    };
    match &args.out {
        Some(path) => atomic::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("serializes")),
    }
    Ok(())
}
