//! The `holo` command-line front end.
//!
//! Every subcommand writes its artifacts into `--out` together with a
//! `run.json` manifest echoing the arguments, the effective seed, and the
//! tool version; `holo replay <run.json>` re-executes a recorded run.
//! Exit codes: 0 success, 1 runtime error, 2 invalid arguments.
//! All lengths are micrometers.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use crate::autofocus::{autofocus_spectrum, FocusCriterion, SearchStrategy};
use crate::dataset::{build_dataset, generate_scenes, DatasetConfig, DefocusSpec, Distribution, TargetMode};
use crate::error::{Error, Result};
use crate::field::{CaptureGeometry, ImageKind, RealImage};
use crate::io::{read_field, read_real, write_complex, write_json, write_real, StoredField};
use crate::metrics::sweep::{export_sweep_inputs, Backprop, FromDirectory, Mhpr};
use crate::metrics::{
    defocus_sweep, dz_grid, fwhm, timing_study, Axis, Reconstructor, SsimParams, SweepCase, SweepMetric,
    TimingConfig,
};
use crate::phase_retrieval::{mhpr, HologramStack, MhprParams};
use crate::preview::write_preview;
use crate::propagation::{intensity_to_field, propagate, AngularSpectrum};
use crate::rng::Rng;
use crate::simulator::{
    add_sensor_noise, generate_scene, render_hologram, render_stack, SceneContent, SceneSpec,
};

pub const SEED_ENV: &str = "HOLO_SEED";
pub const RUN_MANIFEST: &str = "run.json";

#[derive(Parser, Debug, Clone, Serialize)]
#[command(name = "holo", version, about = "In-line digital holography toolkit")]
pub struct Cli {
    /// Random seed; the HOLO_SEED environment variable takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "holo_out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Generate a synthetic sample and render its hologram(s).
    Simulate(SimulateArgs),
    /// Propagate a field (or the square root of a hologram) by a distance.
    Propagate(PropagateArgs),
    /// Find the focus distance of a hologram.
    Autofocus(AutofocusArgs),
    /// Multi-height phase recovery from a stack of holograms.
    Mhpr(MhprArgs),
    /// Build a defocus-augmented training dataset.
    Dataset(DatasetArgs),
    /// Reproduce a reconstruction-quality figure as CSV.
    Eval(EvalArgs),
    /// Time the per-particle classical pipeline against a fixed-cost path.
    Bench(BenchArgs),
    /// Re-execute a run from its run.json manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpticsArgs {
    #[arg(long = "wavelength-um", default_value_t = 0.53)]
    pub wavelength_um: f64,
    #[arg(long = "pitch-um", default_value_t = 1.12)]
    pub pitch_um: f64,
    /// Sample-to-sensor distance.
    #[arg(long = "z2-um", default_value_t = 1000.0)]
    pub z2_um: f64,
}

impl OpticsArgs {
    pub fn geometry(&self) -> Result<CaptureGeometry> {
        CaptureGeometry::new(self.wavelength_um, self.pitch_um, self.z2_um)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Particles,
    Texture,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SceneArgs {
    #[arg(long, value_enum, default_value_t = Mode::Particles)]
    pub mode: Mode,
    /// Particles per scene.
    #[arg(long, default_value_t = 20, allow_negative_numbers = true)]
    pub count: i64,
    /// Grid side in pixels (default 512; 64 for dataset).
    #[arg(long)]
    pub fov: Option<usize>,
    #[arg(long = "radius-min-um")]
    pub radius_min_um: Option<f64>,
    #[arg(long = "radius-max-um")]
    pub radius_max_um: Option<f64>,
    #[arg(long = "opacity-min")]
    pub opacity_min: Option<f64>,
    #[arg(long = "opacity-max")]
    pub opacity_max: Option<f64>,
    /// Particle depth offsets around z2.
    #[arg(long = "depth-min-um", allow_negative_numbers = true)]
    pub depth_min_um: Option<f64>,
    #[arg(long = "depth-max-um", allow_negative_numbers = true)]
    pub depth_max_um: Option<f64>,
    #[arg(long = "correlation-um")]
    pub correlation_um: Option<f64>,
    #[arg(long = "phase-amplitude-rad")]
    pub phase_amplitude_rad: Option<f64>,
    #[arg(long = "absorption-min")]
    pub absorption_min: Option<f64>,
    #[arg(long = "absorption-max")]
    pub absorption_max: Option<f64>,
}

impl SceneArgs {
    /// The scene template described by the flags, validated.
    pub fn spec(&self, optics: &OpticsArgs, seed: u64, default_fov: usize) -> Result<SceneSpec> {
        let mut spec = match self.mode {
            Mode::Particles => {
                if self.count < 0 {
                    return Err(Error::spec("count", format!("must be non-negative, got {}", self.count)));
                }
                SceneSpec::particles(self.count as usize, seed)
            }
            Mode::Texture => SceneSpec::texture(seed),
        };
        spec.fov = self.fov.unwrap_or(default_fov);
        spec.pixel_pitch_um = optics.pitch_um;
        spec.wavelength_um = optics.wavelength_um;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        match &mut spec.content {
            SceneContent::Particles {
                radius_um,
                opacity,
                depth_um,
                ..
            } => {
                set(&mut radius_um[0], self.radius_min_um);
                set(&mut radius_um[1], self.radius_max_um);
                set(&mut opacity[0], self.opacity_min);
                set(&mut opacity[1], self.opacity_max);
                set(&mut depth_um[0], self.depth_min_um);
                set(&mut depth_um[1], self.depth_max_um);
            }
            SceneContent::Texture {
                correlation_um,
                phase_amplitude_rad,
                absorption,
            } => {
                set(correlation_um, self.correlation_um);
                set(phase_amplitude_rad, self.phase_amplitude_rad);
                set(&mut absorption[0], self.absorption_min);
                set(&mut absorption[1], self.absorption_max);
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Holograms in the stack; more than one also writes stack_NN.hidf.
    #[arg(long, default_value_t = 1)]
    pub heights: usize,
    #[arg(long = "height-spacing-um", default_value_t = 15.0)]
    pub height_spacing_um: f64,
    /// Standard deviation of additive sensor noise, in intensity units.
    #[arg(long = "noise-sigma", default_value_t = 0.0)]
    pub noise_sigma: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PropagateArgs {
    /// HIDF field or hologram.
    pub input: PathBuf,
    #[arg(long = "z-um", allow_negative_numbers = true)]
    pub z_um: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AutofocusArgs {
    /// HIDF hologram (intensity) or complex field.
    pub input: PathBuf,
    #[arg(long = "zmin-um", alias = "zmin", allow_negative_numbers = true)]
    pub zmin_um: f64,
    #[arg(long = "zmax-um", alias = "zmax", allow_negative_numbers = true)]
    pub zmax_um: f64,
    /// tog, tamura, or gini.
    #[arg(long, default_value = "tog", value_parser = parse_criterion)]
    pub criterion: FocusCriterion,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 21)]
    pub points: usize,
    /// Single uniform grid of this many points instead of coarse-to-fine.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MhprArgs {
    /// HIDF holograms, nearest the sample first.
    #[arg(required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated sample-to-sensor distances, one per input.
    #[arg(long = "heights-um", value_delimiter = ',')]
    pub heights_um: Option<Vec<f64>>,
    /// First height, when --heights-um is not given.
    #[arg(long = "z2-um", default_value_t = 1000.0)]
    pub z2_um: f64,
    #[arg(long = "spacing-um", default_value_t = 15.0)]
    pub spacing_um: f64,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub relaxation: f64,
    /// Autofocus each hologram around its nominal height first.
    #[arg(long)]
    pub refine: bool,
    #[arg(long = "refine-bracket-um", default_value_t = 20.0)]
    pub refine_bracket_um: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionArg {
    Random,
    Grid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetArg {
    GroundTruth,
    Mhpr,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    /// Source regions before rotation.
    #[arg(long, default_value_t = 176)]
    pub sources: usize,
    /// Focus errors per source (default 81 for particles, 41 for texture).
    #[arg(long)]
    pub distances: Option<usize>,
    #[arg(long = "dz-min-um", alias = "dz-min", default_value_t = -100.0, allow_negative_numbers = true)]
    pub dz_min_um: f64,
    #[arg(long = "dz-max-um", alias = "dz-max", default_value_t = 100.0, allow_negative_numbers = true)]
    pub dz_max_um: f64,
    #[arg(long, value_enum, default_value_t = DistributionArg::Random)]
    pub distribution: DistributionArg,
    #[arg(long, value_enum, default_value_t = TargetArg::GroundTruth)]
    pub target: TargetArg,
    /// One set of focus errors for all sources.
    #[arg(long = "share-distances")]
    pub share_distances: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Mean SSIM against focus error.
    Fig4,
    /// Particle width against focus error.
    Fwhm,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub figure: Figure,
    #[arg(long = "dz-min-um", alias = "dz-min", default_value_t = -100.0, allow_negative_numbers = true)]
    pub dz_min_um: f64,
    #[arg(long = "dz-max-um", alias = "dz-max", default_value_t = 100.0, allow_negative_numbers = true)]
    pub dz_max_um: f64,
    #[arg(long = "step-um", alias = "step", default_value_t = 5.0)]
    pub step_um: f64,
    /// Simulated scenes averaged per focus error.
    #[arg(long, default_value_t = 4)]
    pub scenes: usize,
    #[arg(long, default_value_t = 128)]
    pub fov: usize,
    /// Sample type for fig4; fwhm always uses single small particles.
    #[arg(long, value_enum, default_value_t = Mode::Texture)]
    pub mode: Mode,
    #[arg(long, default_value_t = 8)]
    pub mhpr_heights: usize,
    #[arg(long = "mhpr-spacing-um", default_value_t = 15.0)]
    pub mhpr_spacing_um: f64,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    /// Externally reconstructed outputs, added as a "network" column when complete.
    #[arg(long = "network-dir")]
    pub network_dir: Option<PathBuf>,
    /// Write the defocused inputs for an external reconstructor here.
    #[arg(long = "export-inputs")]
    pub export_inputs: Option<PathBuf>,
    #[command(flatten)]
    pub optics: OpticsArgs,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    #[arg(long = "n-list", value_delimiter = ',', default_value = "5,10,20,40")]
    pub n_list: Vec<usize>,
    #[arg(long = "m-list", value_delimiter = ',', default_value = "5,10,20,40")]
    pub m_list: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    pub fov: usize,
    #[arg(long, default_value_t = 32)]
    pub roi: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

fn parse_criterion(s: &str) -> std::result::Result<FocusCriterion, String> {
    s.parse()
}

/// Provenance of one run, written as `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub seed: u64,
    /// `flag` or the environment variable that supplied the seed.
    pub seed_source: String,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    pub started_unix_s: u64,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec { .. } | Error::InvalidGeometry(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let argv = args[1..].iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let (seed, source) = match std::env::var(SEED_ENV).ok().and_then(|v| v.parse::<u64>().ok()) {
        Some(s) => (s, SEED_ENV.to_string()),
        None => (cli.seed, "flag".to_string()),
    };
    match execute(cli, argv, seed, source) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    run_from(std::env::args_os())
}

fn execute(cli: Cli, argv: Vec<String>, seed: u64, seed_source: String) -> Result<()> {
    if let Command::Replay(r) = &cli.command {
        return replay(&r.manifest, &cli);
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::spec("threads", "must be at least 1"));
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.clone();
    let outputs = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, seed, &out)?,
        Command::Propagate(a) => cmd_propagate(a, &out)?,
        Command::Autofocus(a) => cmd_autofocus(a, &out)?,
        Command::Mhpr(a) => cmd_mhpr(a, &out)?,
        Command::Dataset(a) => cmd_dataset(a, seed, &out)?,
        Command::Eval(a) => cmd_eval(a, seed, &out)?,
        Command::Bench(a) => cmd_bench(a, seed, &out)?,
        Command::Replay(_) => unreachable!(),
    };
    let manifest = RunManifest {
        tool: "holo".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        seed,
        seed_source,
        threads: cli.threads,
        config: serde_json::to_value(&cli.command)?,
        outputs,
        started_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&out.join(RUN_MANIFEST), &manifest)
}

/// Re-runs a recorded command with its recorded seed. An explicit `--out`
/// on the replay command redirects the outputs.
fn replay(path: &Path, current: &Cli) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e.to_string()))?;
    let mut args = vec!["holo".to_string()];
    args.extend(m.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(&args).map_err(|e| Error::corrupt(path, e.to_string()))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::corrupt(path, "a replay manifest cannot replay itself"));
    }
    if current.out != Path::new("holo_out") {
        cli.out = current.out.clone();
    }
    info!("replaying {:?} with seed {}", m.argv, m.seed);
    execute(cli, m.argv, m.seed, m.seed_source)
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        create_out(dir)?;
        Ok(Self { dir, names: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.names.push(name.to_string());
        self.dir.join(name)
    }

    fn preview(&mut self, img: &RealImage, name: &str) -> Result<()> {
        let p = self.path(&format!("{name}.png"));
        self.names.push(format!("{name}.json"));
        write_preview(img, &p)?;
        Ok(())
    }
}

fn cmd_simulate(a: &SimulateArgs, seed: u64, out: &Path) -> Result<Vec<String>> {
    let spec = a.scene.spec(&a.optics, seed, 512)?;
    let mut geometry = a.optics.geometry()?;
    if a.heights == 0 {
        return Err(Error::spec("heights", "must be at least 1"));
    }
    if a.heights > 1 {
        geometry = geometry.with_height_series(a.heights, a.height_spacing_um)?;
    }
    if !(a.noise_sigma >= 0.0 && a.noise_sigma.is_finite()) {
        return Err(Error::spec("noise_sigma", "must be non-negative"));
    }
    let root = Rng::new(seed);
    let scene = generate_scene(&spec, &mut root.fork(0))?;
    let mut noise_rng = root.fork(1);
    let mut o = Outputs::new(out)?;
    let holo = render_hologram(&scene, &geometry)?;
    let holo = if a.noise_sigma > 0.0 {
        add_sensor_noise(&holo, a.noise_sigma, &mut noise_rng)?
    } else {
        holo
    };
    write_real(&holo, &o.path("hologram.hidf"))?;
    let object = scene.object_field();
    write_complex(&object, &o.path("object.hidf"))?;
    if a.heights > 1 {
        let stack = render_stack(&scene, &geometry)?;
        for (i, h) in stack.holograms().iter().enumerate() {
            let h = if a.noise_sigma > 0.0 {
                add_sensor_noise(h, a.noise_sigma, &mut noise_rng)?
            } else {
                h.clone()
            };
            write_real(&h, &o.path(&format!("stack_{i:02}.hidf")))?;
        }
    }
    write_json(
        &o.path("scene.json"),
        &serde_json::json!({
            "spec": spec,
            "geometry": geometry,
            "particles": scene.particles,
            "plane_depths_um": scene.planes.iter().map(|p| p.depth_um).collect::<Vec<_>>(),
        }),
    )?;
    o.preview(&holo, "hologram")?;
    o.preview(&object.amplitude(), "object_amplitude")?;
    o.preview(&object.phase(), "object_phase")?;
    info!("simulated {}x{} scene into {}", spec.fov, spec.fov, out.display());
    Ok(o.names)
}

fn spectrum_of(path: &Path) -> Result<AngularSpectrum> {
    match read_field(path)? {
        StoredField::Complex(f) => Ok(AngularSpectrum::new(&f)),
        StoredField::Real(img) if img.kind() == ImageKind::Intensity => AngularSpectrum::from_hologram(&img),
        StoredField::Real(img) => Err(Error::corrupt(
            path,
            format!("expected a hologram or complex field, found {:?}", img.kind()),
        )),
    }
}

fn cmd_propagate(a: &PropagateArgs, out: &Path) -> Result<Vec<String>> {
    if !a.z_um.is_finite() {
        return Err(Error::spec("z_um", "must be finite"));
    }
    let field = match read_field(&a.input)? {
        StoredField::Complex(f) => f,
        StoredField::Real(img) if img.kind() == ImageKind::Intensity => intensity_to_field(&img)?,
        StoredField::Real(img) => {
            return Err(Error::corrupt(&a.input, format!("cannot propagate a {:?} image", img.kind())))
        }
    };
    let result = propagate(&field, a.z_um)?;
    let mut o = Outputs::new(out)?;
    write_complex(&result, &o.path("propagated.hidf"))?;
    o.preview(&result.amplitude(), "amplitude")?;
    o.preview(&result.phase(), "phase")?;
    Ok(o.names)
}

fn cmd_autofocus(a: &AutofocusArgs, out: &Path) -> Result<Vec<String>> {
    let criterion = a.criterion;
    let strategy = match a.grid {
        Some(n_steps) => SearchStrategy::Grid { n_steps },
        None => SearchStrategy::CoarseToFine {
            levels: a.levels,
            n_per_level: a.points,
        },
    };
    strategy.validate()?;
    let spectrum = spectrum_of(&a.input)?;
    let result = autofocus_spectrum(&spectrum, a.zmin_um, a.zmax_um, criterion, strategy)?;
    let mut o = Outputs::new(out)?;
    result.write_csv(&o.path("sweep.csv"))?;
    write_json(&o.path("focus.json"), &result)?;
    o.preview(&spectrum.at(-result.z_hat)?.amplitude(), "focused_amplitude")?;
    println!(
        "z_hat_um={:.4} score={:.6} evaluations={} boundary_hit={}",
        result.z_hat, result.score, result.evaluations, result.boundary_hit
    );
    Ok(o.names)
}

fn cmd_mhpr(a: &MhprArgs, out: &Path) -> Result<Vec<String>> {
    let heights = match &a.heights_um {
        Some(h) => h.clone(),
        None => (0..a.inputs.len()).map(|k| a.z2_um + k as f64 * a.spacing_um).collect(),
    };
    if heights.len() != a.inputs.len() {
        return Err(Error::spec(
            "heights_um",
            format!("{} heights for {} holograms", heights.len(), a.inputs.len()),
        ));
    }
    crate::field::validate_heights(&heights).map_err(|r| Error::spec("heights_um", r))?;
    let params = MhprParams {
        iterations: a.iterations,
        relaxation: a.relaxation,
        refine_heights: a.refine,
        refine_bracket_um: a.refine_bracket_um,
        ..MhprParams::default()
    };
    params.validate()?;
    let holograms = a
        .inputs
        .iter()
        .map(|p| read_real(p, ImageKind::Intensity))
        .collect::<Result<Vec<_>>>()?;
    let result = mhpr(&HologramStack::new(holograms, heights)?, &params)?;
    let mut o = Outputs::new(out)?;
    write_complex(&result.field, &o.path("mhpr.hidf"))?;
    result.write_residual_csv(&o.path("residuals.csv"))?;
    write_json(&o.path("heights.json"), &result.heights)?;
    o.preview(&result.field.amplitude(), "amplitude")?;
    o.preview(&result.field.phase(), "phase")?;
    println!(
        "passes={} final_residual={:.6e}",
        result.residuals.len(),
        result.residuals.last().copied().unwrap_or(f64::NAN)
    );
    Ok(o.names)
}

fn cmd_dataset(a: &DatasetArgs, seed: u64, out: &Path) -> Result<Vec<String>> {
    let template = a.scene.spec(&a.optics, seed, 64)?;
    let mut config = match a.scene.mode {
        Mode::Particles => DatasetConfig::particles(seed),
        Mode::Texture => DatasetConfig::texture(seed),
    };
    config.geometry = a.optics.geometry()?;
    config.defocus = DefocusSpec::new(
        a.dz_min_um,
        a.dz_max_um,
        a.distances.unwrap_or(config.defocus.n_distances),
        match a.distribution {
            DistributionArg::Random => Distribution::UniformRandom,
            DistributionArg::Grid => Distribution::UniformGrid,
        },
        seed,
    )?;
    config.target_mode = match a.target {
        TargetArg::GroundTruth => TargetMode::GroundTruth,
        TargetArg::Mhpr => TargetMode::Mhpr,
    };
    config.share_distances = a.share_distances;
    config.validate()?;
    if a.sources == 0 {
        return Err(Error::spec("sources", "must be at least 1"));
    }
    create_out(out)?;
    let scenes = generate_scenes(&template, a.sources, seed)?;
    let manifest = build_dataset(&scenes, &config, out)?;
    println!(
        "sources={} regions={} pairs={} skipped={}",
        manifest.source_count,
        manifest.regions,
        manifest.pairs.len(),
        manifest.skipped.len()
    );
    Ok(vec![crate::dataset::MANIFEST_FILE.to_string(), crate::dataset::PAIR_DIR.to_string()])
}

fn cmd_eval(a: &EvalArgs, seed: u64, out: &Path) -> Result<Vec<String>> {
    let grid = dz_grid(a.dz_min_um, a.dz_max_um, a.step_um)?;
    if a.scenes == 0 {
        return Err(Error::spec("scenes", "must be at least 1"));
    }
    let geometry = a
        .optics
        .geometry()?
        .with_height_series(a.mhpr_heights.max(1), a.mhpr_spacing_um)?;
    let template = match (a.figure, a.mode) {
        (Figure::Fwhm, _) => {
            let mut s = SceneSpec::particles(1, seed);
            if let SceneContent::Particles { radius_um, opacity, .. } = &mut s.content {
                *radius_um = [2.0, 2.0];
                *opacity = [1.0, 1.0];
            }
            s
        }
        (Figure::Fig4, Mode::Particles) => SceneSpec::particles(10, seed),
        (Figure::Fig4, Mode::Texture) => SceneSpec::texture(seed),
    };
    let mut template = template.with_fov(a.fov);
    template.pixel_pitch_um = a.optics.pitch_um;
    template.wavelength_um = a.optics.wavelength_um;
    template.validate()?;
    let params = MhprParams {
        iterations: a.iterations,
        ..MhprParams::default()
    };
    params.validate()?;

    let scenes = generate_scenes(&template, a.scenes, seed)?;
    let cases = scenes
        .iter()
        .map(|s| SweepCase::simulate(s, &geometry))
        .collect::<Result<Vec<_>>>()?;
    let mut o = Outputs::new(out)?;
    if let Some(dir) = &a.export_inputs {
        export_sweep_inputs(&cases, &grid, dir)?;
    }
    let mhpr_method = Mhpr { params };
    let mut methods: Vec<&dyn Reconstructor> = vec![&Backprop, &mhpr_method];
    let network = a.network_dir.as_ref().map(|d| FromDirectory {
        label: "network".into(),
        dir: d.clone(),
    });
    if let Some(n) = &network {
        if n.covers(cases.len(), &grid) {
            methods.push(n);
        } else {
            log::warn!("{} lacks outputs for this sweep; network column omitted", n.dir.display());
        }
    }
    let (metric, name) = match a.figure {
        Figure::Fig4 => (SweepMetric::Ssim(SsimParams::default()), "fig4.csv"),
        Figure::Fwhm => (SweepMetric::Fwhm { axis: Axis::X }, "fwhm.csv"),
    };
    let result = defocus_sweep(&methods, &cases, &grid, &metric)?;
    result.write_csv(&o.path(name))?;
    if a.figure == Figure::Fwhm {
        let truth: Vec<f64> = cases
            .iter()
            .map(|c| fwhm(&c.reference, c.peak_hint.unwrap_or((0, 0)), Axis::X))
            .collect::<Result<_>>()?;
        write_json(
            &o.path("fwhm_ground_truth.json"),
            &serde_json::json!({ "per_scene_um": truth, "mean_um": truth.iter().sum::<f64>() / truth.len() as f64 }),
        )?;
    }
    let first = &cases[0];
    let focused = AngularSpectrum::from_hologram(&first.hologram)?.at(-first.z_star_um)?;
    o.preview(&focused.amplitude(), "backprop_amplitude")?;
    o.preview(&focused.phase(), "backprop_phase")?;
    o.preview(&first.reference, "reference_amplitude")?;
    println!("rows={} methods={}", result.dz_um.len(), result.methods.join(","));
    Ok(o.names)
}

fn cmd_bench(a: &BenchArgs, seed: u64, out: &Path) -> Result<Vec<String>> {
    let config = TimingConfig {
        fov: a.fov,
        roi: a.roi,
        repeats: a.repeats,
        seed,
        ..TimingConfig::default()
    };
    let study = timing_study(&a.n_list, &a.m_list, &config)?;
    let mut o = Outputs::new(out)?;
    study.write_csv(&o.path("timing.csv"))?;
    write_json(&o.path("timing.json"), &study)?;
    println!(
        "classical slope vs m {:.3}, vs n {:.3}; fixed-cost slope vs m {:.3}, vs n {:.3}",
        study.classical_slope_m, study.classical_slope_n, study.fixed_cost_slope_m, study.fixed_cost_slope_n
    );
    Ok(o.names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_flag_spellings() {
        let cli = Cli::try_parse_from(["holo", "autofocus", "--zmin", "800", "--zmax", "1200", "--criterion", "tog", "in.hidf"]).unwrap();
        match cli.command {
            Command::Autofocus(a) => assert_eq!((a.zmin_um, a.zmax_um), (800.0, 1200.0)),
            _ => panic!(),
        }
        let cli = Cli::try_parse_from(["holo", "eval", "--figure", "fig4", "--dz-min", "-100", "--dz-max", "100", "--step", "5"]).unwrap();
        match cli.command {
            Command::Eval(a) => assert_eq!((a.dz_min_um, a.step_um), (-100.0, 5.0)),
            _ => panic!(),
        }
    }

    #[test]
    fn negative_count_names_field() {
        let cli = Cli::try_parse_from(["holo", "simulate", "--count", "-1"]).unwrap();
        let Command::Simulate(a) = &cli.command else { panic!() };
        let e = a.scene.spec(&a.optics, 0, 512).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("count"));
    }
}
