//! The `axmag` command line: magnify, datagen, train, eval, track, physical.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use axmag_core::datagen::{write_dataset, DatasetConfig, EvalMode, SceneSource};
use axmag_core::eval::{
    compare_amplified_trajectories, klt_track, magnifier_method, physical_displacement, run_curve,
    second_derivative_spectral, write_curve_csv, write_curve_svg, write_tracks_csv, KltParams, PhysicalSetup,
};
use axmag_core::frame::{load_sequence, save_sequence};
use axmag_core::magnify::{MagMap, ReferenceMode};
use axmag_core::pyramid::Bandwidth;
use axmag_core::temporal::{FilterKind, TemporalFilterSpec};
use axmag_core::{datagen, Error, MagnificationSpec, MagnifierRegistry, MagnifyRequest, MethodConfig};
use axmag_msm::train::load_training_set;
use axmag_msm::{LossConfig, Model, ModelConfig, TrainConfig, TrainOutput};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_COMPUTE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "axmag", version, about = "Axial and generic video motion magnification")]
pub struct Cli {
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Magnify a directory of numbered frames.
    Magnify(MagnifyArgs),
    /// Generate a synthetic training or evaluation set.
    Datagen(DatagenArgs),
    /// Train the learned magnifier.
    Train(TrainArgs),
    /// SSIM curve of a method on an evaluation set.
    Eval(EvalArgs),
    /// KLT-track points through a frame directory.
    Track(TrackArgs),
    /// Pixel displacement of a vibrating target.
    Physical(PhysicalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Filter {
    Ideal,
    Butter,
    Diff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Band {
    Octave,
    HalfOctave,
}

#[derive(Debug, Args)]
pub struct MagnifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// linear, phase, axial-phase or msm.
    #[arg(long)]
    pub method: String,
    /// Amplification along the axis (along both axes for generic methods).
    #[arg(long)]
    pub alpha: f64,
    /// Amplification across the axis; defaults to --alpha.
    #[arg(long)]
    pub alpha_perp: Option<f64>,
    /// Axis angle in degrees; required by axial-phase, 0 for msm if omitted.
    #[arg(long)]
    pub angle: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Static)]
    pub mode: Mode,
    #[arg(long, value_enum)]
    pub filter: Option<Filter>,
    /// Low cut-off (Hz).
    #[arg(long)]
    pub fl: Option<f64>,
    /// High cut-off (Hz).
    #[arg(long)]
    pub fh: Option<f64>,
    /// Frame rate of the input.
    #[arg(long)]
    pub fps: Option<f64>,
    /// Trained model (directory or model.txt) for msm.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-pixel factor map (AXTF, shape H×W×2).
    #[arg(long)]
    pub mag_map: Option<PathBuf>,
    /// Orientations of the generic phase pyramid.
    #[arg(long, default_value_t = 4)]
    pub orientations: usize,
    #[arg(long, value_enum, default_value_t = Band::HalfOctave)]
    pub bandwidth: Band,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataMode {
    Train,
    Subpixel,
    SubpixelGeneric,
    Noise,
}

#[derive(Debug, Args)]
pub struct DatagenArgs {
    /// Samples (per level for evaluation sets).
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 384)]
    pub size: usize,
    /// Extra rendered border, cropped away.
    #[arg(long, default_value_t = 0)]
    pub margin: usize,
    #[arg(long, value_enum, default_value_t = DataMode::Train)]
    pub mode: DataMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Layers including the background.
    #[arg(long, default_value_t = 8)]
    pub k_min: usize,
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 80.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub angle_min: f64,
    #[arg(long, default_value_t = 90.0)]
    pub angle_max: f64,
    /// Directory with backgrounds/, objects/ and masks/ instead of procedural scenes.
    #[arg(long)]
    pub source: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 2e-4)]
    pub lr: f64,
    /// Model manifest (`.txt`) or output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub channels: usize,
    #[arg(long, default_value_t = 64)]
    pub decoder_channels: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Weight the y-shape term by beta as well.
    #[arg(long)]
    pub symmetric: bool,
    /// Use frame 2 itself as the shape target.
    #[arg(long)]
    pub no_perturb: bool,
    /// Start from these weights instead of a fresh initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Curve CSV; the input-vs-truth curve goes next to it.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Track CSV.
    #[arg(long)]
    pub report: PathBuf,
    /// Points as `x,y;x,y;...`; corners are detected when omitted.
    #[arg(long)]
    pub points: Option<String>,
    /// Magnified clip to compare against the input clip.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Expected amplification along --axis for --compare.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Axis angle in degrees for --compare.
    #[arg(long, default_value_t = 0.0)]
    pub axis: f64,
    #[arg(long, default_value_t = 15)]
    pub window: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
}

#[derive(Debug, Args)]
pub struct PhysicalArgs {
    /// Vibration frequency (Hz).
    #[arg(long)]
    pub freq: f64,
    /// Peak acceleration (m/s²).
    #[arg(long)]
    pub accel: f64,
    /// Camera-to-target distance (m).
    #[arg(long)]
    pub distance: f64,
    /// Focal length (m).
    #[arg(long)]
    pub focal: f64,
    /// Pixel pitch (m).
    #[arg(long)]
    pub pixel_size: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub fps: f64,
    /// Use the frequency value directly as ω instead of 2π·f.
    #[arg(long)]
    pub omega_in_hz: bool,
    /// Write `t,metres,pixels` rows here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            _ if e.is_io() => EXIT_IO,
            Error::InvalidArgument(_) | Error::UnknownMethod(_) => EXIT_USAGE,
            _ => EXIT_COMPUTE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

pub type CliResult = std::result::Result<(), CliError>;

pub fn registry() -> MagnifierRegistry {
    let mut r = MagnifierRegistry::with_classical();
    axmag_msm::register(&mut r);
    r
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Magnify(a) => magnify(a),
        Command::Datagen(a) => datagen_cmd(a, cli.seed),
        Command::Train(a) => train_cmd(a, cli.seed),
        Command::Eval(a) => eval_cmd(a),
        Command::Track(a) => track_cmd(a),
        Command::Physical(a) => physical_cmd(a),
    }
}

fn temporal_filter(a: &MagnifyArgs) -> Result<Option<TemporalFilterSpec>, CliError> {
    let Some(kind) = a.filter else {
        return Ok(None);
    };
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("--filter needs {flag}")));
    let kind = match kind {
        Filter::Ideal => FilterKind::IdealFft,
        Filter::Butter => FilterKind::Butterworth,
        Filter::Diff => FilterKind::DifferenceOfFrames,
    };
    Ok(Some(TemporalFilterSpec::new(
        kind,
        need(a.fl, "--fl")?,
        need(a.fh, "--fh")?,
        need(a.fps, "--fps")?,
    )?))
}

/// Magnification request from the magnify flags.
pub fn magnify_request(a: &MagnifyArgs) -> Result<MagnifyRequest, CliError> {
    let angle = match (a.method.as_str(), a.angle) {
        ("axial-phase", None) => return Err(usage("method axial-phase needs --angle")),
        (_, angle) => angle.unwrap_or(0.0),
    };
    let mut spec = MagnificationSpec::axial(angle, a.alpha, a.alpha_perp.unwrap_or(a.alpha));
    if a.mode == Mode::Dynamic {
        spec = spec.with_mode(ReferenceMode::Dynamic);
    }
    if let Some(p) = &a.mag_map {
        spec = spec.with_map(MagMap::load(p)?);
    }
    let mut req = MagnifyRequest::new(spec);
    if let Some(tf) = temporal_filter(a)? {
        req = req.with_filter(tf);
    }
    Ok(req)
}

fn magnify(a: MagnifyArgs) -> CliResult {
    let reg = registry();
    if !reg.contains(&a.method) {
        return Err(usage(format!(
            "unknown method `{}` (choose from {})",
            a.method,
            reg.names().join(", ")
        )));
    }
    let request = magnify_request(&a)?;
    let cfg = MethodConfig {
        model: a.model.clone(),
        orientations: a.orientations,
        bandwidth: match a.bandwidth {
            Band::Octave => Bandwidth::Octave,
            Band::HalfOctave => Bandwidth::HalfOctave,
        },
        ..MethodConfig::default()
    };
    let method = reg.build(&a.method, &cfg)?;
    let frames = load_sequence(&a.input)?;
    let start = Instant::now();
    let out = method.magnify(&frames, &request)?;
    let elapsed = start.elapsed().as_secs_f64();
    save_sequence(&out, &a.output)?;
    println!(
        "{}: {} frames in {:.2} s ({:.1} ms/frame) -> {}",
        method.name(),
        out.len(),
        elapsed,
        1000.0 * elapsed / out.len() as f64,
        a.output.display()
    );
    Ok(())
}

fn datagen_cmd(a: DatagenArgs, seed: u64) -> CliResult {
    let cfg = DatasetConfig {
        count: a.count,
        seed,
        size: a.size,
        margin: a.margin,
        k_min: a.k_min,
        k_max: a.k_max,
        alpha_min: a.alpha_min,
        alpha_max: a.alpha_max,
        angle_min: a.angle_min,
        angle_max: a.angle_max,
        source: a.source.map_or(SceneSource::Procedural, SceneSource::Directory),
        eval_mode: match a.mode {
            DataMode::Train => EvalMode::None,
            DataMode::Subpixel => EvalMode::Subpixel,
            DataMode::SubpixelGeneric => EvalMode::SubpixelGeneric,
            DataMode::Noise => EvalMode::Noise,
        },
    };
    let n = write_dataset(&cfg, &a.out)?;
    println!("wrote {n} samples to {}", a.out.display());
    Ok(())
}

/// Directory that holds the model manifest, log and checkpoints.
pub fn train_dir(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "txt") {
        out.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        out.to_path_buf()
    }
}

fn train_cmd(a: TrainArgs, seed: u64) -> CliResult {
    let mut model = match &a.init {
        Some(p) => Model::<f32>::load(p)?,
        None => Model::new(ModelConfig {
            channels: a.channels,
            decoder_channels: a.decoder_channels,
            seed,
            ..ModelConfig::default()
        })?,
    };
    let data = load_training_set(&a.data)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch: a.batch,
        lr: a.lr,
        seed,
        loss: LossConfig {
            beta: a.beta,
            symmetric: a.symmetric,
            perturb: !a.no_perturb,
        },
        max_steps: a.max_steps,
    };
    let output = TrainOutput {
        dir: train_dir(&a.out),
        checkpoints: true,
    };
    log::info!(
        "training {} parameters on {} samples",
        model.parameter_count(),
        data.len()
    );
    let start = Instant::now();
    let report = axmag_msm::train(&mut model, &data, &cfg, Some(&output))?;
    let path = model.save(&a.out)?;
    let last = report.history.last().map_or(f64::NAN, |t| t.total);
    println!(
        "{} steps over {} epochs in {:.1} s, final loss {last:.5}; model at {}",
        report.steps,
        report.epochs,
        start.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    let reg = registry();
    if !reg.contains(&a.method) {
        return Err(usage(format!("unknown method `{}`", a.method)));
    }
    let cfg = MethodConfig {
        model: a.model.clone(),
        ..MethodConfig::default()
    };
    let method = reg.build(&a.method, &cfg)?;
    let dirs = datagen::list_samples(&a.data)?;
    let report = run_curve(&dirs, magnifier_method(method.as_ref()))?;
    ensure_parent(&a.report)?;
    write_curve_csv(&report.method, &a.report)?;
    let stem = a.report.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    let reference = a.report.with_file_name(format!("{stem}_reference.csv"));
    write_curve_csv(&report.reference, &reference)?;
    if let Some(svg) = &a.svg {
        ensure_parent(svg)?;
        write_curve_svg(&[(method.name(), &report.method), ("input", &report.reference)], svg)?;
    }
    println!("level  x_value    ssim_{:<10} ssim_input", method.name());
    for (m, r) in report.method.iter().zip(&report.reference) {
        println!("{:5}  {:<9.4}  {:<15.4} {:.4}", m.level, m.x_value, m.ssim_mean, r.ssim_mean);
    }
    if report.skipped > 0 {
        println!("{} samples skipped", report.skipped);
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn parse_points(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (x, y) = p.split_once(',').ok_or_else(|| usage(format!("bad point `{p}`")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| usage(format!("bad point `{p}`")));
            Ok((num(x)?, num(y)?))
        })
        .collect()
}

fn track_cmd(a: TrackArgs) -> CliResult {
    let params = KltParams {
        window: a.window,
        levels: a.levels,
        ..KltParams::default()
    };
    let points = a.points.as_deref().map(parse_points).transpose()?;
    let frames = load_sequence(&a.input)?;
    let tracks = klt_track(&frames, points.as_deref(), &params)?;
    ensure_parent(&a.report)?;
    write_tracks_csv(&tracks, &a.report)?;
    println!("{} tracks over {} frames -> {}", tracks.len(), frames.len(), a.report.display());
    if let Some(dir) = &a.compare {
        let other = load_sequence(dir)?;
        let starts: Vec<(f64, f64)> = tracks.iter().map(|t| t.positions[0]).collect();
        let mag = klt_track(&other, Some(&starts), &params)?;
        let r = compare_amplified_trajectories(&tracks, &mag, a.alpha, a.axis)?;
        println!(
            "axis {:.1}°: rms(mag - {}·orig) = {:.4} px, orthogonal rms(mag - orig) = {:.4} px over {} samples",
            a.axis, a.alpha, r.axis_rms, r.orthogonal_rms, r.samples
        );
    }
    Ok(())
}

fn physical_cmd(a: PhysicalArgs) -> CliResult {
    let setup = PhysicalSetup {
        freq: a.freq,
        accel_peak: a.accel,
        distance: a.distance,
        focal: a.focal,
        pixel_size: a.pixel_size,
    };
    let base = physical_displacement(&setup, 1.0, a.duration, a.fps, a.omega_in_hz)?;
    let wave = physical_displacement(&setup, a.alpha, a.duration, a.fps, a.omega_in_hz)?;
    let accel = second_derivative_spectral(&base.metres, a.fps);
    let rms = (accel.iter().map(|v| v * v).sum::<f64>() / accel.len() as f64).sqrt();
    println!("omega {:.4} rad/s", base.omega);
    println!("peak displacement {:.4e} m", setup.accel_peak / (base.omega * base.omega));
    println!("peak {:.3} px (alpha=1)", base.peak_px);
    println!("peak {:.3} px (alpha={})", wave.peak_px, a.alpha);
    println!("recovered peak acceleration {:.4} m/s^2", rms * std::f64::consts::SQRT_2);
    if let Some(path) = &a.out {
        let mut text = String::from("t,metres,pixels\n");
        for i in 0..wave.times.len() {
            text.push_str(&format!("{},{},{}\n", wave.times[i], wave.metres[i], wave.pixels[i]));
        }
        ensure_parent(path)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
