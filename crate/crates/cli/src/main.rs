//! `gsplat`: batch front end for the feature-field splatting pipeline.
//!
//! Exit codes: 0 success, 1 check failure (a report with `pass=false`),
//! 2 usage or input errors. Every command prints one machine-parsable
//! `key=value` summary line on success or check failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use gsplat_core::demo;
use gsplat_core::field::{default_initial_scale, embed, init_field};
use gsplat_core::fit::{run_direct_experiment, run_proxy_experiment, ExperimentManifest};
use gsplat_core::formats;
use gsplat_core::gradients::{fixture_scenes, grad_check, GradCheckReport};
use gsplat_core::linalg::{Mat3, Vec3};
use gsplat_core::splat::{render_bruteforce, render_tiled, Camera, DEFAULT_TILE_SIZE};
use gsplat_core::surface::{build_uv_mapping, deform, RigidPose, SurfaceModel, UvMapping};
use gsplat_core::views::{
    consistency_sweep, sample_view_specs, DatasetRecord, SampleKind, SampleLabel, SweepConfig,
    ViewSpec, DEFAULT_IMAGE_SIZE, DEFAULT_PITCH_RANGE, DEFAULT_RADIUS, DEFAULT_YAW_RANGE,
};

type AnyError = Box<dyn std::error::Error>;

/// Ok(true) = exit 0, Ok(false) = exit 1 (check failed), Err = exit 2.
type CmdResult = Result<bool, AnyError>;

#[derive(Parser)]
#[command(
    name = "gsplat",
    version,
    about = "Surface-embedded Gaussian feature fields: UV mapping, rendering, gradients, fitting, and multi-view tools"
)]
struct Cli {
    /// Cap internal render parallelism (defaults to all cores).
    #[arg(long, global = true, env = "GSPLAT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute the texel-grid UV mapping for a surface.
    BuildUv {
        /// Surface container (GSRF).
        #[arg(long)]
        surface: PathBuf,
        /// Texels per side of the UV grid.
        #[arg(long)]
        resolution: usize,
        /// Output mapping cache (GSUV).
        #[arg(long)]
        out: PathBuf,
    },

    /// Write the built-in procedural demo head as a surface container.
    DemoAsset {
        #[arg(long)]
        out: PathBuf,
    },

    /// Initialize a Gaussian field checkpoint (GSFD).
    InitField {
        /// UV resolution (texels per side).
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        /// Feature channels.
        #[arg(long, default_value_t = 8)]
        channels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial world-space scale; defaults to 0.7x the surface's median
        /// edge length when --surface is given, else 0.05.
        #[arg(long)]
        scale: Option<f64>,
        /// Surface used to derive the default scale.
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },

    /// Deform, embed, and splat a field into a feature map (GSFM).
    Render(Box<RenderArgs>),

    /// Verify analytic gradients against central finite differences on the
    /// built-in fixture scenes.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// JSON report path.
        #[arg(long, default_value = "gradcheck_report.json")]
        out: PathBuf,
    },

    /// Run a fitting experiment described by a manifest.
    Fit {
        #[arg(long, value_enum)]
        mode: FitMode,
        /// Experiment manifest (JSON).
        #[arg(long)]
        manifest: PathBuf,
        /// Write the desk-scale default manifest to --manifest and exit.
        #[arg(long)]
        init_manifest: bool,
    },

    /// Sample multi-view cameras and write a dataset manifest (JSON lines);
    /// optionally render a feature map per view.
    SynthViews(Box<SynthViewsArgs>),

    /// Multi-view reprojection-consistency sweep.
    Sweep(Box<SweepArgs>),

    /// Time the tiled renderer against the brute-force oracle.
    Bench {
        /// UV grid side; the scene carries res^2 Gaussians.
        #[arg(long, default_value_t = 256)]
        resolution: usize,
        #[arg(long, default_value_t = 8)]
        channels: usize,
        /// Image side in pixels.
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long, default_value = "benchmark_report.json")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    surface: PathBuf,
    /// Field checkpoint (GSFD).
    #[arg(long)]
    field: PathBuf,
    /// Mapping cache (GSUV); built on the fly at the field resolution when
    /// omitted.
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Shape coefficients: inline JSON array or a path to one. Zeros when
    /// omitted.
    #[arg(long)]
    beta: Option<String>,
    /// Expression coefficients: inline JSON array or a path to one.
    #[arg(long)]
    psi: Option<String>,
    /// Rigid pose JSON `{"rotation": [[..];3], "translation": [..]}`
    /// (inline or path); identity when omitted.
    #[arg(long)]
    pose: Option<String>,
    /// Camera JSON (inline or path): either a full camera or a view spec
    /// `{"yaw_deg":..,"pitch_deg":..,"radius":..}`. Front view when omitted.
    #[arg(long)]
    camera: Option<String>,
    /// Output feature map (GSFM).
    #[arg(long)]
    out: PathBuf,
    /// Also export these channels as 8-bit grayscale PNGs next to --out.
    #[arg(long)]
    png_channels: Option<String>,
    /// Use the brute-force reference renderer.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = DEFAULT_TILE_SIZE)]
    tile_size: usize,
}

#[derive(Args)]
struct SynthViewsArgs {
    #[arg(long, default_value_t = 60)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_manifest: PathBuf,
    /// Yaw range in degrees.
    #[arg(long, num_args = 2, default_values_t = DEFAULT_YAW_RANGE)]
    yaw: Vec<f64>,
    /// Pitch range in degrees.
    #[arg(long, num_args = 2, default_values_t = DEFAULT_PITCH_RANGE)]
    pitch: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, value_enum, default_value_t = LabelArg::Synthetic)]
    label: LabelArg,
    #[arg(long, default_value_t = 0)]
    subject: u64,
    /// Render a feature map per view (requires --field; --mapping optional).
    #[arg(long)]
    surface: Option<PathBuf>,
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Directory for rendered maps (defaults to the manifest's directory).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    image_size: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 60)]
    n_views: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, num_args = 2, default_values_t = DEFAULT_YAW_RANGE)]
    yaw: Vec<f64>,
    #[arg(long, num_args = 2, default_values_t = DEFAULT_PITCH_RANGE)]
    pitch: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = 256)]
    image_size: usize,
    /// Reprojection tolerance in pixels.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Fractional focal-length corruption of the source projection
    /// (negative control; 0 = honest sweep).
    #[arg(long, default_value_t = 0.0)]
    fx_error: f64,
    /// Surface container; the built-in demo head when omitted.
    #[arg(long)]
    surface: Option<PathBuf>,
    /// Field checkpoint; a seeded init at --uv-resolution when omitted.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    uv_resolution: usize,
    #[arg(long, default_value_t = 4)]
    channels: usize,
    #[arg(long, default_value = "sweep_report.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMode {
    Direct,
    Proxy,
}

#[derive(Clone, Copy, ValueEnum)]
enum LabelArg {
    Real,
    Synthetic,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: failed to configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::BuildUv { surface, resolution, out } => build_uv(&surface, resolution, &out),
        Command::DemoAsset { out } => {
            let model = demo::demo_head();
            formats::write_surface(&model, &out)?;
            println!(
                "vertices={} faces={} n_shape={} n_expr={} out={}",
                model.num_vertices(),
                model.num_faces(),
                model.n_shape(),
                model.n_expr(),
                out.display()
            );
            Ok(true)
        }
        Command::InitField { resolution, channels, seed, scale, surface, out } => {
            let scale = match (scale, surface) {
                (Some(s), _) => s,
                (None, Some(path)) => {
                    default_initial_scale(&formats::read_surface::<f64>(&path)?)
                }
                (None, None) => 0.05,
            };
            let field = init_field::<f64>(resolution, channels, seed, scale)?;
            formats::write_field(&field, &out)?;
            println!(
                "resolution={resolution} channels={channels} seed={seed} scale={scale} out={}",
                out.display()
            );
            Ok(true)
        }
        Command::Render(args) => render(*args),
        Command::Gradcheck { seed, h, out } => gradcheck(seed, h, &out),
        Command::Fit { mode, manifest, init_manifest } => fit(mode, &manifest, init_manifest),
        Command::SynthViews(args) => synth_views(*args),
        Command::Sweep(args) => sweep(*args),
        Command::Bench { resolution, channels, size, out } => bench(resolution, channels, size, &out),
    }
}

fn build_uv(surface: &Path, resolution: usize, out: &Path) -> CmdResult {
    if resolution == 0 {
        return Err("resolution must be >= 1".into());
    }
    let model: SurfaceModel<f64> = formats::read_surface(surface)?;
    let mapping = build_uv_mapping(&model, resolution);
    formats::write_uv_mapping(&mapping, out)?;
    println!(
        "resolution={resolution} mapped={} texels={} out={}",
        mapping.num_mapped(),
        resolution * resolution,
        out.display()
    );
    Ok(true)
}

/// Parse a flag that is either inline JSON or a path to a JSON file.
fn json_arg<T: serde::de::DeserializeOwned>(flag: &str, value: &str) -> Result<T, AnyError> {
    let trimmed = value.trim_start();
    let text = if trimmed.starts_with('[') || trimmed.starts_with('{') {
        value.to_string()
    } else {
        std::fs::read_to_string(value)
            .map_err(|e| format!("--{flag}: cannot read file `{value}`: {e}"))?
    };
    serde_json::from_str(&text).map_err(|e| format!("--{flag}: invalid JSON: {e}").into())
}

#[derive(Deserialize)]
struct PoseArg {
    #[serde(default)]
    rotation: Option<[[f64; 3]; 3]>,
    #[serde(default)]
    translation: Option<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CameraArg {
    Full(Camera<f64>),
    View(ViewArg),
}

#[derive(Deserialize)]
struct ViewArg {
    yaw_deg: f64,
    pitch_deg: f64,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default)]
    look_at: Option<[f64; 3]>,
    #[serde(default = "default_image_size")]
    width: usize,
    #[serde(default = "default_image_size")]
    height: usize,
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_image_size() -> usize {
    DEFAULT_IMAGE_SIZE
}

fn parse_pose(arg: Option<&str>) -> Result<RigidPose<f64>, AnyError> {
    let Some(arg) = arg else {
        return Ok(RigidPose::identity());
    };
    let parsed: PoseArg = json_arg("pose", arg)?;
    let pose = RigidPose {
        rotation: parsed.rotation.map(Mat3).unwrap_or_else(Mat3::identity),
        translation: parsed.translation.map(Vec3).unwrap_or_else(Vec3::zero),
    };
    pose.validate(1e-9)?;
    Ok(pose)
}

fn parse_camera(arg: Option<&str>) -> Result<Camera<f64>, AnyError> {
    let cam = match arg {
        None => ViewSpec {
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            radius: DEFAULT_RADIUS,
            look_at: Vec3::zero(),
        }
        .camera(DEFAULT_IMAGE_SIZE, DEFAULT_IMAGE_SIZE),
        Some(arg) => match json_arg::<CameraArg>("camera", arg)? {
            CameraArg::Full(cam) => cam,
            CameraArg::View(v) => ViewSpec {
                yaw_deg: v.yaw_deg,
                pitch_deg: v.pitch_deg,
                radius: v.radius,
                look_at: v.look_at.map(Vec3).unwrap_or_else(Vec3::zero),
            }
            .camera(v.width, v.height),
        },
    };
    cam.validate()?;
    Ok(cam)
}

fn parse_coeffs(flag: &str, arg: Option<&str>, expected: usize) -> Result<Vec<f64>, AnyError> {
    match arg {
        None => Ok(vec![0.0; expected]),
        Some(arg) => json_arg(flag, arg),
    }
}

fn render(args: RenderArgs) -> CmdResult {
    let model: SurfaceModel<f64> = formats::read_surface(&args.surface)?;
    let field = formats::read_field::<f64>(&args.field)?;
    let mapping: UvMapping<f64> = match &args.mapping {
        Some(path) => formats::read_uv_mapping(path)?,
        None => build_uv_mapping(&model, field.resolution),
    };
    let beta = parse_coeffs("beta", args.beta.as_deref(), model.n_shape())?;
    let psi = parse_coeffs("psi", args.psi.as_deref(), model.n_expr())?;
    let pose = parse_pose(args.pose.as_deref())?;
    let camera = parse_camera(args.camera.as_deref())?;
    if args.tile_size == 0 {
        return Err("tile-size must be >= 1".into());
    }

    let mesh = deform(&model, &beta, &psi, &pose)?;
    let g = embed(&field, &mesh, &mapping)?;
    let map = if args.oracle {
        render_bruteforce(&g, &camera)
    } else {
        render_tiled(&g, &camera, args.tile_size)
    };
    formats::write_feature_map(&map, &args.out)?;

    let mut pngs = String::new();
    if let Some(spec) = &args.png_channels {
        let stem = args.out.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let dir = args.out.parent().unwrap_or_else(|| Path::new("."));
        for part in spec.split(',') {
            let channel: usize = part
                .trim()
                .parse()
                .map_err(|_| format!("--png-channels: `{part}` is not a channel index"))?;
            let png = dir.join(format!("{stem}_c{channel}.png"));
            formats::export_channel_image(&map, channel, &png)?;
            write!(pngs, " png={}", png.display()).unwrap();
        }
    }
    println!(
        "gaussians={} width={} height={} channels={} oracle={} out={}{pngs}",
        g.len(),
        map.width,
        map.height,
        map.channels,
        args.oracle,
        args.out.display()
    );
    Ok(true)
}

fn gradcheck(seed: u64, h: f64, out: &Path) -> CmdResult {
    #[derive(serde::Serialize)]
    struct FixtureEntry {
        name: &'static str,
        #[serde(flatten)]
        report: GradCheckReport,
    }
    let mut fixtures = Vec::new();
    for fx in fixture_scenes(seed) {
        let report = grad_check(&fx.field, &fx.mesh, &fx.mapping, &fx.camera, seed, h)?;
        fixtures.push(FixtureEntry { name: fx.name, report });
    }
    let worst = fixtures
        .iter()
        .max_by(|a, b| a.report.max_rel_err.total_cmp(&b.report.max_rel_err))
        .expect("at least one fixture");
    let merged = serde_json::json!({
        "max_rel_err": worst.report.max_rel_err,
        "worst_param": worst.report.worst_param,
        "checked": fixtures.iter().map(|f| f.report.checked).sum::<usize>(),
        "pass": fixtures.iter().all(|f| f.report.pass),
        "h": h,
        "seed": seed,
        "fixtures": fixtures,
    });
    std::fs::write(out, serde_json::to_string_pretty(&merged)?)?;
    let pass = merged["pass"].as_bool().unwrap();
    println!(
        "pass={pass} max_rel_err={:.6e} checked={} h={h:e} report={}",
        merged["max_rel_err"].as_f64().unwrap(),
        merged["checked"],
        out.display()
    );
    Ok(pass)
}

fn fit(mode: FitMode, manifest_path: &Path, init_manifest: bool) -> CmdResult {
    if init_manifest {
        let manifest = match mode {
            FitMode::Direct => ExperimentManifest::desk_direct(),
            FitMode::Proxy => ExperimentManifest::desk_proxy(),
        };
        std::fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
        println!("manifest={}", manifest_path.display());
        return Ok(true);
    }
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| format!("cannot read manifest `{}`: {e}", manifest_path.display()))?;
    let manifest: ExperimentManifest =
        serde_json::from_str(&text).map_err(|e| format!("invalid manifest: {e}"))?;
    let (report, _, _) = match mode {
        FitMode::Direct => run_direct_experiment(&manifest)?,
        FitMode::Proxy => run_proxy_experiment(&manifest)?,
    };
    let report_path = manifest_path.with_extension("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let mut extra = String::new();
    if let Some(vr) = report.variance_ratio {
        write!(extra, " variance_ratio={vr:.2}").unwrap();
    }
    println!(
        "mode={} iters={} initial_loss={:.6e} final_loss={:.6e} loss_ratio={:.2}{extra} pass={} trace={} checkpoint={} report={}",
        report.mode,
        report.iters,
        report.initial_loss,
        report.final_loss,
        report.loss_ratio,
        report.pass,
        manifest.loss_trace,
        manifest.checkpoint,
        report_path.display()
    );
    Ok(report.pass)
}

fn synth_views(args: SynthViewsArgs) -> CmdResult {
    let views = sample_view_specs(
        args.n as usize,
        [args.yaw[0], args.yaw[1]],
        [args.pitch[0], args.pitch[1]],
        args.radius,
        args.seed,
    )?;
    let label = SampleLabel::new(match args.label {
        LabelArg::Real => SampleKind::Real,
        LabelArg::Synthetic => SampleKind::Synthetic,
    });

    // Optional rendering of the control maps.
    let renderer = match (&args.surface, &args.field) {
        (Some(surface), Some(field_path)) => {
            let model: SurfaceModel<f64> = formats::read_surface(surface)?;
            let field = formats::read_field::<f64>(field_path)?;
            let mapping: UvMapping<f64> = match &args.mapping {
                Some(path) => formats::read_uv_mapping(path)?,
                None => build_uv_mapping(&model, field.resolution),
            };
            let mesh = deform(&model, &vec![0.0; model.n_shape()], &vec![0.0; model.n_expr()], &RigidPose::identity())?;
            let g = embed(&field, &mesh, &mapping)?;
            Some(g)
        }
        (None, None) => None,
        _ => return Err("rendering needs both --surface and --field".into()),
    };
    let out_dir = match &args.out_dir {
        Some(dir) => dir.clone(),
        None => args
            .out_manifest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."))
            .to_path_buf(),
    };
    if renderer.is_some() {
        std::fs::create_dir_all(&out_dir)?;
    }

    let mut lines = String::new();
    for (k, view) in views.iter().enumerate() {
        let camera = view.camera(args.image_size, args.image_size);
        let feature_map_path = if let Some(g) = &renderer {
            let path = out_dir.join(format!("sample_{k:04}.gsfm"));
            let map = render_tiled(g, &camera, DEFAULT_TILE_SIZE);
            formats::write_feature_map(&map, &path)?;
            Some(path.to_string_lossy().into_owned())
        } else {
            None
        };
        let record = DatasetRecord {
            subject_id: args.subject,
            view: *view,
            camera,
            label: label.kind,
            token_id: label.token_id,
            feature_map_path,
        };
        lines.push_str(&serde_json::to_string(&record)?);
        lines.push('\n');
    }
    std::fs::write(&args.out_manifest, lines)?;
    println!(
        "n={} seed={} label={} token_id={} rendered={} manifest={}",
        views.len(),
        args.seed,
        match label.kind {
            SampleKind::Real => "real",
            SampleKind::Synthetic => "synthetic",
        },
        label.token_id,
        renderer.is_some(),
        args.out_manifest.display()
    );
    Ok(true)
}

fn sweep(args: SweepArgs) -> CmdResult {
    let model: SurfaceModel<f64> = match &args.surface {
        Some(path) => formats::read_surface(path)?,
        None => demo::demo_head(),
    };
    let field = match &args.field {
        Some(path) => formats::read_field::<f64>(path)?,
        None => init_field(args.uv_resolution, args.channels, 11, default_initial_scale(&model))?,
    };
    let mapping = build_uv_mapping(&model, field.resolution);
    let mesh = deform(&model, &vec![0.0; model.n_shape()], &vec![0.0; model.n_expr()], &RigidPose::identity())?;
    let config = SweepConfig {
        n_views: args.n_views,
        seed: args.seed,
        yaw_range: [args.yaw[0], args.yaw[1]],
        pitch_range: [args.pitch[0], args.pitch[1]],
        radius: args.radius,
        width: args.image_size,
        height: args.image_size,
        tolerance: args.tolerance,
        fx_error: args.fx_error,
    };
    let report = consistency_sweep(&field, &mesh, &mapping, &config)?;
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    let mean_coverage =
        report.alpha_coverage.iter().sum::<f64>() / report.alpha_coverage.len().max(1) as f64;
    println!(
        "n_views={} max_reproj_err={:e} tolerance={:e} mean_alpha_coverage={mean_coverage:.4} pass={} report={}",
        report.n_views,
        report.max_reproj_err,
        report.tolerance,
        report.pass,
        args.out.display()
    );
    Ok(report.pass)
}

fn bench(resolution: usize, channels: usize, size: usize, out: &Path) -> CmdResult {
    if resolution == 0 || channels == 0 || size == 0 {
        return Err("resolution, channels, and size must be >= 1".into());
    }
    let (g, cam) = demo::bench_scene(resolution, channels, size);
    let t0 = std::time::Instant::now();
    let tiled = render_tiled(&g, &cam, DEFAULT_TILE_SIZE);
    let tiled_s = t0.elapsed().as_secs_f64();
    let t1 = std::time::Instant::now();
    let brute = render_bruteforce(&g, &cam);
    let brute_s = t1.elapsed().as_secs_f64();
    let diff = brute.max_abs_diff(&tiled);
    let speedup = brute_s / tiled_s;
    let report = serde_json::json!({
        "gaussians": g.len(),
        "image": {"width": size, "height": size, "channels": channels},
        "tile_size": DEFAULT_TILE_SIZE,
        "bruteforce_seconds": brute_s,
        "tiled_seconds": tiled_s,
        "speedup": speedup,
        "max_abs_diff": diff,
        "threads": rayon::current_num_threads(),
    });
    std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
    println!(
        "gaussians={} brute_s={brute_s:.3} tiled_s={tiled_s:.3} speedup={speedup:.1} max_abs_diff={diff:e} report={}",
        g.len(),
        out.display()
    );
    Ok(true)
}
