use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evfield::events::{
    count_events, events_to_delta_l, halve_windows, slice_stream, sync_offset, uniform_edges, EventStream,
    MagnitudeFilter, Thresholds,
};
use evfield::io::image::{write_event_png, write_intensity_png};
use evfield::io::{
    dataset_hash, load_checkpoint, parse_events_csv, read_events, write_events, Checkpoint, Dataset, Precision,
    RunConfig, RunManifest, Split,
};
use evfield::metrics::{evaluate, predict, write_report, PathFrame};
use evfield::radiance::{render_image, Camera, RenderOptions};
use evfield::synth::gen_dataset;
use evfield::training::{finetune, fit, run, Trainer};
use evfield::{Error, Scalar};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "evfield", version = evfield::VERSION, about = "Event-supervised dynamic radiance fields")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `train.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ordered reductions only (recorded in the manifest).
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "evfield-out")]
    out: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a multi-view event dataset from an analytic scene.
    Gen {
        /// Scene preset, overriding `scene.preset`.
        #[arg(long)]
        scene: Option<String>,
    },
    /// Train a fresh model.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Training view indices (default: every training view).
        #[arg(long, value_delimiter = ',')]
        views: Vec<usize>,
    },
    /// Continue training a checkpoint on a dataset with a restarted schedule.
    Finetune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Render predicted event frames and intensity images.
    Render(RenderArgs),
    /// Score predicted event frames against a dataset.
    Eval(EvalArgs),
    /// Slice, halve, filter and synchronize an eventstream.
    Slice(SliceArgs),
}

#[derive(Args, Debug)]
struct WindowArgs {
    /// Time window `t0:t1`; repeatable.
    #[arg(long = "window", value_parser = parse_window)]
    windows: Vec<(f64, f64)>,
    /// Split [0, 1] into this many uniform windows.
    #[arg(long = "windows")]
    n_windows: Option<usize>,
    /// Halve uniform windows this many times.
    #[arg(long, default_value_t = 0)]
    halve: u32,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset supplying view cameras.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset view index; needs `--data`.
    #[arg(long)]
    view: Option<usize>,
    /// Camera at this azimuth on the configured orbit.
    #[arg(long)]
    azimuth: Option<f64>,
    #[command(flatten)]
    windows: WindowArgs,
    /// Moving camera: this many frames orbiting once over [0, 1].
    #[arg(long)]
    orbit: Option<usize>,
    /// Also render intensity at these times.
    #[arg(long, value_delimiter = ',')]
    intensity: Vec<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    All,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "val")]
    split: SplitArg,
    #[command(flatten)]
    windows: WindowArgs,
    /// Also draw an orbiting-camera sequence with this many frames.
    #[arg(long)]
    orbit: Option<usize>,
}

#[derive(Args, Debug)]
struct SliceArgs {
    /// `.evd1` or `.csv` eventstream.
    #[arg(long)]
    events: PathBuf,
    /// Window edges, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    edges: Vec<f64>,
    /// Replace the edges with this many uniform windows over them.
    #[arg(long = "windows")]
    n_windows: Option<usize>,
    #[arg(long, default_value_t = 0)]
    halve: u32,
    /// Zero |dL| below this before counting.
    #[arg(long)]
    filter: Option<f64>,
    /// Report the motion-start time using bins of this width.
    #[arg(long)]
    sync: Option<f64>,
    /// Shift timestamps so the detected motion start is t = 0.
    #[arg(long, requires = "sync")]
    align: bool,
    /// Write one event-frame PNG per window.
    #[arg(long)]
    png: bool,
    /// Write one `.evd1` file per window.
    #[arg(long)]
    write_events: bool,
    /// Resolution for CSV input (default: the configured dataset size).
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected t0:t1, got {s:?}"))?;
    let t0: f64 = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let t1: f64 = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if !(t0 < t1) {
        return Err(format!("window {s:?} is empty"));
    }
    Ok((t0, t1))
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NonFinite(_) => EXIT_NUMERICAL,
                Error::Argument(_) | Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            };
        }
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let name = match &cli.command {
        Command::Gen { .. } => "gen",
        Command::Train { .. } => "train",
        Command::Finetune { .. } => "finetune",
        Command::Render(_) => "render",
        Command::Eval(_) => "eval",
        Command::Slice(_) => "slice",
    };
    let mut manifest = RunManifest::new(name, &config);
    manifest.deterministic = cli.deterministic;
    let out = cli.out.as_path();
    match cli.command {
        Command::Gen { scene } => cmd_gen(&mut config, scene, out, &mut manifest)?,
        Command::Train { data, views } => match config.precision {
            Precision::F32 => cmd_train::<f32>(&config, &data, &views, out, &mut manifest)?,
            Precision::F64 => cmd_train::<f64>(&config, &data, &views, out, &mut manifest)?,
        },
        Command::Finetune { checkpoint, data } => {
            let dataset = load_dataset(&data, &mut manifest)?;
            manifest.parent_checkpoint = Some(checkpoint.clone());
            let fitted = match config.precision {
                Precision::F32 => finetune::<f32>(&checkpoint, &config.train, &config.model, &dataset, out)?,
                Precision::F64 => finetune::<f64>(&checkpoint, &config.train, &config.model, &dataset, out)?,
            };
            manifest.checkpoints = fitted.checkpoints;
            manifest.outputs.push(fitted.loss_log);
        }
        Command::Render(args) => match config.precision {
            Precision::F32 => cmd_render::<f32>(&config, &args, out, &mut manifest)?,
            Precision::F64 => cmd_render::<f64>(&config, &args, out, &mut manifest)?,
        },
        Command::Eval(args) => match config.precision {
            Precision::F32 => cmd_eval::<f32>(&config, &args, out, &mut manifest)?,
            Precision::F64 => cmd_eval::<f64>(&config, &args, out, &mut manifest)?,
        },
        Command::Slice(args) => cmd_slice(&config, &args, out, &mut manifest)?,
    }
    manifest.config = config;
    let path = manifest.write(out)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn load_dataset(root: &Path, manifest: &mut RunManifest) -> Result<Dataset> {
    let dataset = Dataset::load(root)?;
    manifest.dataset = Some(root.to_path_buf());
    manifest.dataset_sha256 = Some(dataset_hash(root)?);
    Ok(dataset)
}

fn cmd_gen(config: &mut RunConfig, preset: Option<String>, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    if let Some(p) = preset {
        config.scene.preset = p;
        config.scene.primitives.clear();
    }
    let scene = config.scene.build()?;
    let meta = gen_dataset(&scene, &config.dataset, out)?;
    let events: usize = meta
        .views
        .iter()
        .map(|v| std::fs::metadata(out.join(&v.events)).map(|m| (m.len() as usize).saturating_sub(36) / 16))
        .sum::<std::io::Result<usize>>()?;
    log::info!("{} views, {} events", meta.views.len(), events);
    manifest.dataset = Some(out.to_path_buf());
    manifest.dataset_sha256 = Some(dataset_hash(out)?);
    manifest.outputs.push(out.join("views.json"));
    manifest.outputs.extend(meta.views.iter().map(|v| out.join(&v.events)));
    manifest.outputs.extend(meta.frames.iter().map(|f| out.join(&f.file_path)));
    Ok(())
}

fn cmd_train<T: Scalar>(
    config: &RunConfig,
    data: &Path,
    views: &[usize],
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let dataset = load_dataset(data, manifest)?;
    let fitted = if views.is_empty() {
        fit::<T>(&config.train, &config.model, &dataset, out)?
    } else {
        let mut trainer = Trainer::<T>::with_views(config.train.clone(), config.model.clone(), &dataset, views)?;
        run(&mut trainer, out)?
    };
    if let Some(last) = fitted.losses.last() {
        log::info!("final loss {:.5}", last.loss);
    }
    manifest.checkpoints = fitted.checkpoints;
    manifest.outputs.push(fitted.loss_log);
    Ok(())
}

/// Evaluation windows from `--window`/`--windows`/`--halve`, or `fallback` uniform windows.
fn windows_from(args: &WindowArgs, fallback: usize) -> Result<Vec<(f64, f64)>> {
    if !args.windows.is_empty() {
        if args.n_windows.is_some() || args.halve > 0 {
            return Err(usage("--window cannot be combined with --windows or --halve"));
        }
        return Ok(args.windows.clone());
    }
    let n = args.n_windows.unwrap_or(fallback);
    if n == 0 {
        return Err(usage("--windows must be at least 1"));
    }
    let mut edges = uniform_edges(0.0, 1.0, n);
    for _ in 0..args.halve {
        edges = halve_windows(&edges);
    }
    Ok(edges.windows(2).map(|w| (w[0], w[1])).collect())
}

fn orbit_path(config: &RunConfig, frames: usize) -> Result<Vec<PathFrame>> {
    if frames == 0 {
        return Err(usage("--orbit needs at least one frame"));
    }
    uniform_edges(0.0, 1.0, frames)
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let azimuth = 360.0 * (i as f64 + 0.5) / frames as f64;
            Ok(PathFrame {
                camera: config.dataset.camera(azimuth, config.scene.bound)?,
                window: (w[0], w[1]),
            })
        })
        .collect()
}

fn load_model<T: Scalar>(path: &Path, manifest: &mut RunManifest) -> Result<Checkpoint<T>> {
    let ck = load_checkpoint::<T>(path).with_context(|| format!("loading {}", path.display()))?;
    manifest.parent_checkpoint = Some(path.to_path_buf());
    Ok(ck)
}

fn cmd_render<T: Scalar>(config: &RunConfig, args: &RenderArgs, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let ck = load_model::<T>(&args.checkpoint, manifest)?;
    let dataset = match &args.data {
        Some(root) => Some(load_dataset(root, manifest)?),
        None => None,
    };
    let thresholds: Thresholds = dataset.as_ref().map_or(config.dataset.thresholds, |d| d.meta.thresholds);
    let floor_b = dataset.as_ref().map_or(config.dataset.floor_b, |d| d.meta.floor_b);
    let mut shots: Vec<(String, Camera<f64>, (f64, f64))> = Vec::new();
    let fixed: Option<(String, Camera<f64>)> = match (args.view, args.azimuth) {
        (Some(_), Some(_)) => return Err(usage("--view and --azimuth are exclusive")),
        (Some(v), None) => {
            let d = dataset.as_ref().ok_or_else(|| usage("--view needs --data"))?;
            Some((format!("view_{v:03}"), d.meta.camera(v)?))
        }
        (None, Some(a)) => Some((format!("az_{a:.1}"), config.dataset.camera(a, config.scene.bound)?)),
        (None, None) => None,
    };
    if let Some((stem, camera)) = &fixed {
        for w in windows_from(&args.windows, 1)? {
            shots.push((format!("{stem}_{:.4}_{:.4}", w.0, w.1), camera.clone(), w));
        }
    }
    if let Some(n) = args.orbit {
        for (i, f) in orbit_path(config, n)?.into_iter().enumerate() {
            shots.push((format!("orbit_{i:04}"), f.camera, f.window));
        }
    }
    if shots.is_empty() && args.intensity.is_empty() {
        return Err(usage("nothing to render: give --view/--azimuth or --orbit"));
    }
    let render = RenderOptions {
        samples_per_ray: config.eval.samples_per_ray,
        floor_b,
        jitter: None,
        chunk: config.eval.chunk_rays,
    };
    for (stem, camera, window) in &shots {
        let frame = predict(&ck.model, camera, *window, &render, config.eval.filter)?;
        let png = out.join(format!("{stem}.png"));
        write_event_png(&png, &count_events(&frame, &thresholds), config.eval.png_cap)?;
        let raw = out.join(format!("{stem}_dl.csv"));
        let mut text = String::new();
        for row in frame.values.chunks(frame.width) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            writeln!(text, "{}", cells.join(","))?;
        }
        std::fs::write(&raw, text).with_context(|| format!("writing {}", raw.display()))?;
        log::info!("{stem}: window [{}, {}), max |dL| {:.4}", window.0, window.1, frame.max_abs());
        manifest.outputs.extend([png, raw]);
    }
    if !args.intensity.is_empty() {
        let (stem, camera) = fixed.ok_or_else(|| usage("--intensity needs --view or --azimuth"))?;
        let cam: Camera<T> = camera.cast();
        for &t in &args.intensity {
            let img = render_image(&ck.model, &cam, T::lit(t), &render)?;
            let values: Vec<f64> = img.iter().map(|v| v.as_f64()).collect();
            let path = out.join(format!("{stem}_intensity_{t:.4}.png"));
            write_intensity_png(&path, &values, camera.width, camera.height)?;
            manifest.outputs.push(path);
        }
    }
    Ok(())
}

fn cmd_eval<T: Scalar>(config: &RunConfig, args: &EvalArgs, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let ck = load_model::<T>(&args.checkpoint, manifest)?;
    let dataset = load_dataset(&args.data, manifest)?;
    let views = match args.split {
        SplitArg::Train => dataset.meta.view_indices(Split::Train),
        SplitArg::Val => dataset.meta.view_indices(Split::Val),
        SplitArg::All => dataset.meta.views.iter().map(|v| v.index).collect(),
    };
    if views.is_empty() {
        bail!(Error::NotFound(format!("no {:?} views in {}", args.split, args.data.display())));
    }
    let windows = windows_from(&args.windows, dataset.meta.n_frames - 1)?;
    let path = match args.orbit {
        Some(n) => orbit_path(config, n)?,
        None => Vec::new(),
    };
    let report = evaluate(&ck.model, &dataset, &windows, &views, &path, &config.eval, Some(out))?;
    for s in &report.skipped {
        log::warn!("skipped {s}");
    }
    println!(
        "psnr {:.3} dB (zero predictor {:.3}) ssim {:.4} mae {:.4} over {} frames",
        report.psnr.mean, report.zero_psnr.mean, report.ssim.mean, report.mae.mean, report.entries.len()
    );
    let (json, csv) = write_report(&report, out)?;
    manifest.outputs.extend([json, csv]);
    manifest.outputs.extend(report.images);
    Ok(())
}

fn read_stream(config: &RunConfig, args: &SliceArgs) -> Result<EventStream> {
    let is_csv = args.events.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if !is_csv {
        return Ok(read_events(&args.events)?);
    }
    let text = std::fs::read_to_string(&args.events).with_context(|| format!("reading {}", args.events.display()))?;
    let w = args.width.unwrap_or(config.dataset.width);
    let h = args.height.unwrap_or(config.dataset.height);
    Ok(parse_events_csv(&text, w, h, config.dataset.thresholds)?)
}

fn cmd_slice(config: &RunConfig, args: &SliceArgs, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let mut stream = read_stream(config, args)?;
    let mut sync = None;
    if let Some(bin) = args.sync {
        let t = sync_offset(&stream, bin)?;
        log::info!("motion starts at t = {t}");
        sync = Some(t);
        if args.align {
            let th = stream.thresholds();
            let (w, h) = stream.resolution();
            let shifted = stream
                .into_events()
                .into_iter()
                .filter(|e| e.t >= t)
                .map(|mut e| {
                    e.t -= t;
                    e
                })
                .collect();
            stream = EventStream::new(shifted, w, h, th)?;
        }
    }
    let mut edges = args.edges.clone();
    if let Some(n) = args.n_windows {
        let (Some(&a), Some(&b)) = (edges.first(), edges.last()) else {
            return Err(usage("--windows needs outer edges"));
        };
        if n == 0 {
            return Err(usage("--windows must be at least 1"));
        }
        edges = uniform_edges(a, b, n);
    }
    for _ in 0..args.halve {
        edges = halve_windows(&edges);
    }
    let slices = slice_stream(&stream, &edges).map_err(|e| anyhow!(e))?;
    let (w, h) = stream.resolution();
    let th = stream.thresholds();
    let mut windows = Vec::new();
    for (i, events) in slices.iter().enumerate() {
        let window = (edges[i], edges[i + 1]);
        let mut frame = events_to_delta_l::<f64>(events, th, (w as usize, h as usize), window)?;
        if let Some(m) = args.filter {
            frame = frame.filter_magnitude(m);
        }
        let counts = count_events(&frame, &th);
        if args.png {
            let p = out.join(format!("slice_{i:04}.png"));
            write_event_png(&p, &counts, config.eval.png_cap)?;
            manifest.outputs.push(p);
        }
        if args.write_events {
            let p = out.join(format!("slice_{i:04}.evd1"));
            write_events(&p, &EventStream::new(events.to_vec(), w, h, th)?)?;
            manifest.outputs.push(p);
        }
        windows.push(serde_json::json!({
            "t0": window.0,
            "t1": window.1,
            "events": events.len(),
            "active_pixels": counts.counts.iter().filter(|c| **c != 0).count(),
        }));
    }
    let meta = serde_json::json!({
        "source": args.events,
        "resolution": [w, h],
        "thresholds": th,
        "sync_offset": sync,
        "aligned": args.align,
        "filter": args.filter,
        "edges": edges,
        "windows": windows,
    });
    let path = out.join("slices.json");
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    manifest.outputs.push(path);
    Ok(())
}
