//! Command line front end: `sample`, `train`, `render`, `reconstruct`,
//! `eval`, `bench` and the chained `pipeline`.
//!
//! Every command writes a `<command>-manifest.txt` of `key = value` lines
//! into the output directory recording the resolved settings.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{DdfError, Result};
use crate::field::{BruteForceField, DdfBackend, NeuralField, OracleField};
use crate::mesh::{load_mesh, primitives, write_obj, TriangleMesh, Vec3};
use crate::metrics::{self, MetricReport, CHAMFER_REPORT_SCALE};
use crate::nn::{self, load_model, save_model, write_loss_csv, TrainConfig};
use crate::recon::{default_iso, marching_cubes, udf_grid};
use crate::render::{self, bench, write_bench_csv, Camera, Framebuffer, RenderConfig, RenderMode};
use crate::sampler::{self, build_dataset, read_dataset, write_dataset, SamplerConfig, Strategy};

#[derive(Parser, Debug)]
#[command(name = "ddf", version, about = "Directed distance field toolkit")]
pub struct Cli {
    /// Worker threads (1 gives bit-identical reruns).
    #[arg(long, global = true, env = "DDF_THREADS")]
    pub threads: Option<usize>,

    /// Directory for all outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a training dataset from a mesh.
    Sample(SampleCmd),
    /// Fit a network to a dataset.
    Train(TrainCmd),
    /// Render an image of a field.
    Render(RenderCmd),
    /// Extract a mesh from a field's unsigned distance.
    Reconstruct(ReconCmd),
    /// Compare a reconstruction with its ground truth.
    Eval(EvalCmd),
    /// Time repeated renders per backend.
    Bench(BenchCmd),
    /// sample, train, reconstruct, render and eval in one go.
    Pipeline(PipelineCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Oracle,
    Neural,
    Brute,
}

#[derive(Args, Debug, Clone)]
pub struct SampleOpts {
    #[arg(long, default_value = "ours")]
    pub strategy: Strategy,
    /// Surface points per face.
    #[arg(long, default_value_t = 10)]
    pub sfc: usize,
    /// Directions per surface point.
    #[arg(long, default_value_t = 10)]
    pub sdr: usize,
    /// March points per ray.
    #[arg(long, default_value_t = 10)]
    pub sp: usize,
    /// March step (default: derived from the mesh size and `--sp`).
    #[arg(long)]
    pub step: Option<f64>,
    /// Sample count for the random strategy.
    #[arg(long = "n", default_value_t = 100_000)]
    pub count: usize,
    /// Film size for the pov strategy.
    #[arg(long, default_value_t = 64)]
    pub film: usize,
    /// Keep marched rays even where they enter the mesh.
    #[arg(long)]
    pub no_inside_test: bool,
}

impl SampleOpts {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            s_fc: self.sfc,
            s_dr: self.sdr,
            s_p: self.sp,
            step: self.step,
            strategy: self.strategy,
            seed,
            count: self.count,
            film: self.film,
            inside_test: !self.no_inside_test,
        }
    }

    fn record(&self, m: &mut Manifest) {
        m.set("strategy", self.strategy);
        m.set("s_fc", self.sfc);
        m.set("s_dr", self.sdr);
        m.set("s_p", self.sp);
        m.set("step", self.step.map_or("auto".to_string(), |s| format!("{s:?}")));
        m.set("random_count", self.count);
        m.set("pov_film", self.film);
        m.set("inside_test", !self.no_inside_test);
    }
}

#[derive(Args, Debug, Clone)]
pub struct TrainOpts {
    /// Hidden layers.
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    /// Hidden layer width.
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    /// Dropout probability on hidden layers (off when absent).
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Clamp distance of the loss and the field.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

impl TrainOpts {
    fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            delta: self.delta,
            lr: self.lr,
            batch_size: self.batch_size,
            iterations: self.iterations,
            dropout: self.dropout.is_some_and(|p| p > 0.0),
            dropout_p: self.dropout.unwrap_or(0.5),
            hidden: vec![self.width; self.layers],
            seed,
            log_every: 100,
        }
    }

    fn record(&self, m: &mut Manifest) {
        m.set("layers", self.layers);
        m.set("width", self.width);
        m.set("dropout", self.dropout.map_or("off".to_string(), |p| format!("{p:?}")));
        m.set("lr", format!("{:?}", self.lr));
        m.set("batch_size", self.batch_size);
        m.set("iterations", self.iterations);
        m.set("delta", format!("{:?}", self.delta));
    }
}

#[derive(Args, Debug, Clone)]
pub struct ReconOpts {
    /// Grid vertices per axis.
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    /// Directions per grid point for the sampled unsigned distance
    /// (oracle backends use the exact closest point instead).
    #[arg(long, default_value_t = 512)]
    pub n_dirs: usize,
    /// Iso level (default: half a voxel, at least 0.01).
    #[arg(long)]
    pub iso: Option<f64>,
}

impl ReconOpts {
    fn run(&self, backend: &dyn DdfBackend, m: &mut Manifest) -> Result<TriangleMesh> {
        if self.resolution < 8 || self.n_dirs == 0 {
            return Err(DdfError::InvalidArgument("resolution must be at least 8 and n-dirs at least 1".into()));
        }
        let grid = udf_grid(backend, self.resolution, self.n_dirs);
        let iso = self.iso.unwrap_or_else(|| default_iso(&grid));
        m.set("resolution", self.resolution);
        m.set("n_dirs", self.n_dirs);
        m.set("iso", format!("{iso:?}"));
        let mesh = marching_cubes(&grid, iso);
        if mesh.is_empty() {
            log::warn!("reconstruction produced no triangles");
        }
        Ok(mesh)
    }
}

#[derive(Args, Debug, Clone)]
pub struct EvalOpts {
    /// Points sampled on each mesh.
    #[arg(long, default_value_t = metrics::DEFAULT_EVAL_POINTS)]
    pub points: usize,
    /// f-score distance threshold.
    #[arg(long, default_value_t = metrics::DEFAULT_TAU)]
    pub tau: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ViewOpts {
    #[arg(long, default_value_t = 128)]
    pub image_width: usize,
    #[arg(long, default_value_t = 128)]
    pub image_height: usize,
    /// Vertical field of view in degrees.
    #[arg(long, default_value_t = 50.0)]
    pub fov: f64,
    #[arg(long, default_value_t = 3.5)]
    pub distance: f64,
    /// Camera azimuth in degrees.
    #[arg(long, default_value_t = 30.0)]
    pub azimuth: f64,
    /// Camera elevation in degrees.
    #[arg(long, default_value_t = 20.0)]
    pub elevation: f64,
    /// Treat +z as up (default +y).
    #[arg(long)]
    pub z_up: bool,
}

impl ViewOpts {
    pub fn camera(&self) -> Result<Camera> {
        if self.image_width == 0 || self.image_height == 0 || !(self.fov > 0.0 && self.fov < 180.0) || !(self.distance > 0.0) {
            return Err(DdfError::InvalidArgument("bad camera settings".into()));
        }
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        let (horizontal, vertical) = (el.cos() * self.distance, el.sin() * self.distance);
        let (position, up) = if self.z_up {
            (Vec3::new(horizontal * az.sin(), -horizontal * az.cos(), vertical), Vec3::z())
        } else {
            (Vec3::new(horizontal * az.sin(), vertical, horizontal * az.cos()), Vec3::y())
        };
        if el.cos().abs() < 1e-9 {
            return Err(DdfError::InvalidArgument("elevation of +-90 degrees leaves no up direction".into()));
        }
        Ok(Camera::new(position, Vec3::zeros(), up, self.fov.to_radians(), self.image_width, self.image_height))
    }

    fn record(&self, m: &mut Manifest) {
        m.set("image", format!("{}x{}", self.image_width, self.image_height));
        m.set("fov_degrees", format!("{:?}", self.fov));
        m.set("camera_distance", format!("{:?}", self.distance));
        m.set("azimuth_degrees", format!("{:?}", self.azimuth));
        m.set("elevation_degrees", format!("{:?}", self.elevation));
        m.set("z_up", self.z_up);
    }
}

#[derive(Args, Debug, Clone)]
pub struct ShadeOpts {
    #[arg(long, default_value = "depth")]
    pub mode: RenderMode,
    /// Samples per pixel (path and environment shading).
    #[arg(long, default_value_t = 16)]
    pub spp: usize,
    /// Surface interactions per path.
    #[arg(long, default_value_t = 3)]
    pub bounces: usize,
    #[arg(long, default_value_t = 0.8)]
    pub albedo: f64,
    /// Environment radiance for path tracing.
    #[arg(long, default_value_t = 1.0)]
    pub environment: f64,
}

impl ShadeOpts {
    fn config(&self, seed: u64) -> RenderConfig {
        RenderConfig {
            mode: self.mode,
            spp: self.spp,
            bounces: self.bounces,
            albedo: self.albedo,
            environment: self.environment,
            seed,
            ..Default::default()
        }
    }

    fn record(&self, m: &mut Manifest) {
        m.set("mode", self.mode);
        m.set("spp", self.spp);
        m.set("bounces", self.bounces);
        m.set("albedo", format!("{:?}", self.albedo));
        m.set("environment", format!("{:?}", self.environment));
    }
}

#[derive(Args, Debug, Clone)]
pub struct FieldSource {
    #[arg(long, value_enum, default_value = "oracle")]
    pub backend: BackendKind,
    /// Mesh for the oracle and brute backends: an OBJ path or
    /// `builtin:icosphere-N`, `builtin:cube`, `builtin:blob`.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Checkpoint for the neural backend.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

impl FieldSource {
    fn open(&self, m: &mut Manifest) -> Result<Box<dyn DdfBackend>> {
        m.set("backend", format!("{:?}", self.backend).to_lowercase());
        open_backend(self.backend, self.mesh.as_deref(), self.checkpoint.as_deref(), m)
    }
}

#[derive(Args, Debug)]
pub struct SampleCmd {
    #[arg(long)]
    pub mesh: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: SampleOpts,
    /// Dataset path (default `<out-dir>/dataset.ddf`).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainCmd {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Args, Debug)]
pub struct RenderCmd {
    #[command(flatten)]
    pub source: FieldSource,
    #[command(flatten)]
    pub shade: ShadeOpts,
    #[command(flatten)]
    pub view: ViewOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ReconCmd {
    #[command(flatten)]
    pub source: FieldSource,
    #[command(flatten)]
    pub opts: ReconOpts,
}

#[derive(Args, Debug)]
pub struct EvalCmd {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub opts: EvalOpts,
}

#[derive(Args, Debug)]
pub struct BenchCmd {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "oracle,neural")]
    pub backends: Vec<BackendKind>,
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[command(flatten)]
    pub shade: ShadeOpts,
    #[command(flatten)]
    pub view: ViewOpts,
}

#[derive(Args, Debug)]
pub struct PipelineCmd {
    #[arg(long)]
    pub mesh: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sample: SampleOpts,
    #[command(flatten)]
    pub train: TrainOpts,
    #[command(flatten)]
    pub recon: ReconOpts,
    #[command(flatten)]
    pub eval: EvalOpts,
    #[command(flatten)]
    pub view: ViewOpts,
}

/// Ordered `key = value` record of a run.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, threads: usize) -> Self {
        let mut m = Manifest::default();
        m.set("ddf_version", env!("CARGO_PKG_VERSION"));
        m.set("checkpoint_version", nn::CHECKPOINT_VERSION);
        m.set("command", command);
        m.set("threads", threads);
        m
    }

    /// Adds or replaces a key.
    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| DdfError::io(path, e))
    }
}

/// Loads a mesh (file or builtin) and normalizes it into `[-1, 1]^3`.
pub fn load_normalized(spec: &str) -> Result<TriangleMesh> {
    let mesh = match spec.strip_prefix("builtin:") {
        Some("cube") => primitives::box_mesh(Vec3::repeat(-1.0), Vec3::repeat(1.0), 4),
        Some("blob") => primitives::blob(32),
        Some(other) => match other.strip_prefix("icosphere-").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) if n <= 6 => primitives::icosphere(n),
            _ => return Err(DdfError::InvalidArgument(format!("unknown builtin mesh '{other}'"))),
        },
        None => load_mesh(spec)?,
    };
    mesh.normalize()
}

fn open_backend(
    kind: BackendKind,
    mesh: Option<&str>,
    checkpoint: Option<&Path>,
    m: &mut Manifest,
) -> Result<Box<dyn DdfBackend>> {
    let need_mesh = || {
        mesh.ok_or_else(|| DdfError::InvalidArgument("this backend needs --mesh".into()))
    };
    Ok(match kind {
        BackendKind::Oracle => {
            let spec = need_mesh()?;
            m.set("mesh", spec);
            Box::new(OracleField::new(load_normalized(spec)?))
        }
        BackendKind::Brute => {
            let spec = need_mesh()?;
            m.set("mesh", spec);
            Box::new(BruteForceField::new(load_normalized(spec)?))
        }
        BackendKind::Neural => {
            let path = checkpoint.ok_or_else(|| DdfError::InvalidArgument("the neural backend needs --checkpoint".into()))?;
            m.set("checkpoint", path.display());
            Box::new(NeuralField::over_unit_cube(load_model(path)?))
        }
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| DdfError::io(path, e))
}

fn write_image(fb: &Framebuffer, stem: &Path) -> Result<()> {
    fb.write_ppm(stem.with_extension("ppm"))?;
    fb.write_pfm(stem.with_extension("pfm"))
}

/// Paths under the output directory are recorded relative to it, so runs
/// into different directories produce identical manifests.
fn shown(path: &Path, out: &Path) -> String {
    path.strip_prefix(out).unwrap_or(path).display().to_string()
}

fn print_report(report: &MetricReport) {
    println!(
        "chamfer (x1e3): {:.6}  f-score@{}: {:.4}  points: {}",
        report.chamfer * CHAMFER_REPORT_SCALE,
        report.tau,
        report.f_score,
        report.points
    );
}

fn run_sample(cmd: &SampleCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    let mesh = load_normalized(&cmd.mesh)?;
    let config = cmd.opts.config(cmd.seed);
    m.set("mesh", &cmd.mesh);
    m.set("seed", cmd.seed);
    cmd.opts.record(m);
    let data = build_dataset(&mesh, &config)?;
    let path = cmd.output.clone().unwrap_or_else(|| out.join("dataset.ddf"));
    write_dataset(&data, &path)?;
    let t = sampler::tally(&data, config.strategy);
    m.set("dataset", shown(&path, out));
    m.set("samples", data.len());
    println!(
        "{} samples: {} finite, {} miss, {} perpendicular -> {}",
        data.len(),
        t.finite,
        t.miss,
        t.perpendicular,
        path.display()
    );
    Ok(())
}

fn train_to(dataset: &Path, opts: &TrainOpts, seed: u64, out: &Path, m: &mut Manifest) -> Result<PathBuf> {
    let (data, _) = read_dataset(dataset)?;
    if data.is_empty() {
        return Err(DdfError::InvalidArgument(format!("{} holds no samples", dataset.display())));
    }
    let config = opts.config(seed);
    m.set("dataset", shown(dataset, out));
    m.set("seed", seed);
    opts.record(m);
    let outcome = nn::train(&data, &config)?;
    let model_path = out.join("model.ddfn");
    save_model(&outcome.model, &model_path)?;
    write_loss_csv(&outcome.losses, out.join("loss.csv"))?;
    if let Some((_, last)) = outcome.losses.last() {
        m.set("final_loss", format!("{last:?}"));
        println!("trained {} iterations, final batch loss {last:.6e} -> {}", config.iterations, model_path.display());
    }
    m.set("checkpoint", shown(&model_path, out));
    Ok(model_path)
}

fn run_render(cmd: &RenderCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    let backend = cmd.source.open(m)?;
    let camera = cmd.view.camera()?;
    let config = cmd.shade.config(cmd.seed);
    m.set("seed", cmd.seed);
    cmd.shade.record(m);
    cmd.view.record(m);
    let fb = render::render(backend.as_ref(), &camera, &config)?;
    let stem = out.join(format!("render-{}", config.mode));
    write_image(&fb, &stem)?;
    println!("wrote {}.ppm/.pfm", stem.display());
    Ok(())
}

fn run_reconstruct(cmd: &ReconCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    let backend = cmd.source.open(m)?;
    let mesh = cmd.opts.run(backend.as_ref(), m)?;
    let path = out.join("recon.obj");
    write_obj(&mesh, &path)?;
    m.set("triangles", mesh.faces.len());
    println!("{} vertices, {} triangles -> {}", mesh.vertices.len(), mesh.faces.len(), path.display());
    Ok(())
}

fn evaluate(pred: &TriangleMesh, gt: &TriangleMesh, opts: &EvalOpts, seed: u64, out: &Path, m: &mut Manifest) -> Result<MetricReport> {
    let report = metrics::evaluate_meshes(pred, gt, opts.points, seed, opts.tau)?;
    metrics::write_report_csv(&report, out.join("metrics.csv"))?;
    m.set("eval_points", opts.points);
    m.set("tau", format!("{:?}", opts.tau));
    m.set("chamfer_x1e3", format!("{:?}", report.chamfer * CHAMFER_REPORT_SCALE));
    m.set("f_score", format!("{:?}", report.f_score));
    print_report(&report);
    Ok(report)
}

fn run_eval(cmd: &EvalCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    // The prediction already lives in the normalized frame; only the
    // ground truth is normalized.
    let pred = load_mesh(&cmd.pred)?;
    let gt = load_normalized(&cmd.gt)?;
    m.set("pred", cmd.pred.display());
    m.set("gt", &cmd.gt);
    m.set("seed", cmd.seed);
    evaluate(&pred, &gt, &cmd.opts, cmd.seed, out, m)?;
    Ok(())
}

fn run_bench(cmd: &BenchCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    let camera = cmd.view.camera()?;
    let config = cmd.shade.config(0);
    let mut backends = Vec::new();
    for kind in &cmd.backends {
        backends.push(open_backend(*kind, cmd.mesh.as_deref(), cmd.checkpoint.as_deref(), m)?);
    }
    let refs: Vec<&dyn DdfBackend> = backends.iter().map(|b| b.as_ref()).collect();
    m.set("backends", cmd.backends.iter().map(|b| format!("{b:?}").to_lowercase()).collect::<Vec<_>>().join(","));
    m.set("frames", cmd.frames);
    cmd.shade.record(m);
    cmd.view.record(m);
    let rows = bench(&refs, &camera, &config, cmd.frames)?;
    write_bench_csv(&rows, out.join("bench.csv"))?;
    for (name, first, later) in render::summarize_bench(&rows) {
        println!("{name}: first frame {first:.2} ms, later frames {later:.2} ms mean");
    }
    Ok(())
}

fn run_pipeline(cmd: &PipelineCmd, out: &Path, m: &mut Manifest) -> Result<()> {
    let mesh = load_normalized(&cmd.mesh)?;
    m.set("mesh", &cmd.mesh);
    m.set("seed", cmd.seed);
    cmd.sample.record(m);
    let config = cmd.sample.config(cmd.seed);
    let data = build_dataset(&mesh, &config)?;
    let dataset = out.join("dataset.ddf");
    write_dataset(&data, &dataset)?;
    m.set("samples", data.len());
    println!("sampled {} records", data.len());

    let model_path = train_to(&dataset, &cmd.train, cmd.seed, out, m)?;
    let field = NeuralField::over_unit_cube(load_model(&model_path)?);

    let camera = cmd.view.camera()?;
    cmd.view.record(m);
    for mode in [RenderMode::Depth, RenderMode::Normal] {
        let config = RenderConfig {
            mode,
            seed: cmd.seed,
            ..Default::default()
        };
        let fb = render::render(&field, &camera, &config)?;
        write_image(&fb, &out.join(format!("render-{mode}")))?;
    }

    let recon = cmd.recon.run(&field, m)?;
    write_obj(&recon, out.join("recon.obj"))?;
    m.set("triangles", recon.faces.len());
    evaluate(&recon, &mesh, &cmd.eval, cmd.seed, out, m)?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if threads == 0 {
        return Err(DdfError::InvalidArgument("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DdfError::InvalidArgument(format!("thread pool: {e}")))?;
    let out = cli.out_dir.as_path();
    create_dir(out)?;
    let name = match &cli.command {
        Command::Sample(_) => "sample",
        Command::Train(_) => "train",
        Command::Render(_) => "render",
        Command::Reconstruct(_) => "reconstruct",
        Command::Eval(_) => "eval",
        Command::Bench(_) => "bench",
        Command::Pipeline(_) => "pipeline",
    };
    let mut m = Manifest::new(name, threads);
    pool.install(|| match &cli.command {
        Command::Sample(c) => run_sample(c, out, &mut m),
        Command::Train(c) => train_to(&c.dataset, &c.opts, c.seed, out, &mut m).map(|_| ()),
        Command::Render(c) => run_render(c, out, &mut m),
        Command::Reconstruct(c) => run_reconstruct(c, out, &mut m),
        Command::Eval(c) => run_eval(c, out, &mut m),
        Command::Bench(c) => run_bench(c, out, &mut m),
        Command::Pipeline(c) => run_pipeline(c, out, &mut m),
    })?;
    m.write(out.join(format!("{name}-manifest.txt")))
}

/// Process entry point; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
