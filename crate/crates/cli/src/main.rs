use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vehvec::config::detector_config;
use vehvec::detection::Schema;
use vehvec::detector::detect;
use vehvec::eval::{EvalReport, MatchConfig, Scored, DEFAULT_IOU_THRESH};
use vehvec::io::{self, CollectionHeader, DetectionFile, TruthFile};
use vehvec::pipeline::{self, PipelineConfig};
use vehvec::sensor::SensorModel;
use vehvec::synth::{random_scene, render_scene, render_truth_mask, RandomSceneConfig, SceneSpec};
use vehvec::timeseries::{aggregate, volume_anomaly, HistogramSpec, SceneDetections};
use vehvec::vectorize::postprocess;

#[derive(Parser)]
#[command(
    name = "vehvec",
    version,
    about = "Vehicle speed and heading from sequential-band satellite imagery"
)]
struct Cli {
    /// Worker threads for scene-level and tile-level parallelism.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to a raster bundle with its ground truth.
    Synth(SynthArgs),
    /// Run the classical detector on a bundle and write GeoJSON detections.
    Detect(DetectArgs),
    /// Turn an externally supplied class mask into detections.
    Vectorize(VectorizeArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Aggregate detection files into a daily series with plots.
    Timeseries(TimeseriesArgs),
    /// Synthesize, detect and score seeded scenes end to end.
    Pipeline(PipelineArgs),
    /// Print the effective detector configuration.
    Config(ConfigArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Scene description (JSON). Without it a random scene is drawn.
    #[arg(long, conflicts_with_all = ["preset", "n_vehicles", "clouds", "noise"])]
    spec: Option<PathBuf>,
    /// Sensor preset for a random scene.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    n_vehicles: Option<usize>,
    #[arg(long)]
    clouds: Option<usize>,
    /// Noise standard deviation in digital numbers.
    #[arg(long)]
    noise: Option<f64>,
    /// Overrides the scene's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    /// Bundle directory.
    #[arg(long = "in")]
    input: PathBuf,
    /// TOML or JSON overrides for the detector defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the class mask PNG here.
    #[arg(long)]
    mask_out: Option<PathBuf>,
}

#[derive(Args)]
struct VectorizeArgs {
    /// Class mask PNG; labels come from a sibling `.json` sidecar or the
    /// sensor's schema.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESH)]
    iou: f64,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct TimeseriesArgs {
    /// Glob of detection files.
    #[arg(long)]
    dets: String,
    /// Series CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Directory for SVG plots.
    #[arg(long)]
    plots: Option<PathBuf>,
    #[arg(long, default_value_t = pipeline::DEFAULT_ANOMALY_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_ANOMALY_Z)]
    z: f64,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, default_value = "skysat")]
    preset: String,
    #[arg(long, default_value_t = 50)]
    n_vehicles: usize,
    /// Number of scenes, one per day.
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    #[arg(long, default_value_t = 0)]
    clouds: usize,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESH)]
    iou: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "pipeline-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Toml,
    Json,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, default_value = "skysat")]
    preset: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Toml)]
    format: Format,
}

/// Exit status 1: the invocation itself is wrong.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn preset(name: &str) -> anyhow::Result<SensorModel> {
    SensorModel::preset(name).map_err(|e| usage(e.to_string()))
}

fn synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut spec: SceneSpec = match &a.spec {
        Some(p) => io::read_json(p, "scene spec")?,
        None => {
            let sensor = preset(a.preset.as_deref().unwrap_or("skysat"))?;
            let mut cfg = RandomSceneConfig::for_sensor(sensor, a.n_vehicles.unwrap_or(20), a.seed.unwrap_or(0));
            cfg.n_clouds = a.clouds.unwrap_or(0);
            if let Some(n) = a.noise {
                cfg.noise_sigma = n;
            }
            random_scene(&cfg)?
        }
    };
    if let Some(s) = a.seed {
        spec.rng_seed = s;
    }
    let (bundle, truth) = render_scene(&spec)?;
    io::write_bundle(&bundle, &a.out)?;
    let header = CollectionHeader::for_bundle(&bundle);
    TruthFile::from_truth(header.clone(), &truth).write(&a.out.join(io::TRUTH_FILE))?;
    let mask = render_truth_mask(&truth, &bundle.meta.sensor, header.schema())?;
    io::write_mask(&mask, &a.out.join("truth_mask.png"))?;
    io::write_json(&spec, &a.out.join("scene.json"))?;
    println!(
        "{}: {} vehicles written to {}",
        truth.scene_id,
        truth.records.len(),
        a.out.display()
    );
    Ok(())
}

fn detect_cmd(a: DetectArgs) -> anyhow::Result<()> {
    let bundle = io::read_bundle(&a.input)?;
    let cfg = detector_config(&bundle.meta.sensor, a.config.as_deref())?;
    let out = detect(&bundle, &cfg)?;
    for f in &out.diagnostics.postprocess.failures {
        log::warn!("{f}");
    }
    log::info!("diagnostics: {}", serde_json::to_string(&out.diagnostics)?);
    DetectionFile::from_detections(CollectionHeader::for_bundle(&bundle), &out.detections).write(&a.out)?;
    if let Some(m) = &a.mask_out {
        io::write_mask(&out.mask, m)?;
    }
    println!("{} detections written to {}", out.detections.len(), a.out.display());
    Ok(())
}

fn vectorize_cmd(a: VectorizeArgs) -> anyhow::Result<()> {
    let bundle = io::read_bundle(&a.input)?;
    let cfg = detector_config(&bundle.meta.sensor, a.config.as_deref())?;
    let schema = Schema::for_sensor(&bundle.meta.sensor);
    let mask = io::read_mask(&a.mask, &schema.labels())?;
    if (mask.width(), mask.height()) != (bundle.width(), bundle.height()) {
        bail!(
            "mask is {}x{} but the bundle is {}x{}",
            mask.width(),
            mask.height(),
            bundle.width(),
            bundle.height()
        );
    }
    let out = postprocess(&mask, &bundle, &cfg.postprocess)?;
    for f in &out.diagnostics.failures {
        log::warn!("{f}");
    }
    DetectionFile::from_detections(CollectionHeader::for_bundle(&bundle), &out.detections).write(&a.out)?;
    println!("{} detections written to {}", out.detections.len(), a.out.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> anyhow::Result<()> {
    let cfg = MatchConfig::new(a.iou).map_err(|e| usage(e.to_string()))?;
    let truth = TruthFile::read(&a.truth)?;
    let schema = truth.header.schema();
    // A truth file is also accepted as the prediction side.
    let (pred_scene, pred) = match DetectionFile::read(&a.pred) {
        Ok(f) => (
            f.header.scene_id.clone(),
            Scored::from_detections(&f.to_detections()?, schema),
        ),
        Err(e) => match TruthFile::read(&a.pred) {
            Ok(f) => (f.header.scene_id.clone(), Scored::from_truth(&f.to_truth()?, schema)),
            Err(_) => return Err(e.into()),
        },
    };
    if pred_scene != truth.header.scene_id {
        log::warn!(
            "scoring scene `{pred_scene}` against truth for `{}`",
            truth.header.scene_id
        );
    }
    let report = EvalReport::score(&pred, &Scored::from_truth(&truth.to_truth()?, schema), &cfg);
    print!("{}", report.to_table());
    if let Some(p) = &a.json {
        io::write_json(&report.to_json(), p)?;
    }
    Ok(())
}

fn timeseries_cmd(a: TimeseriesArgs) -> anyhow::Result<()> {
    let mut paths: Vec<PathBuf> = glob::glob(&a.dets)
        .map_err(|e| usage(format!("bad --dets pattern: {e}")))?
        .collect::<Result<_, _>>()?;
    paths.sort();
    if paths.is_empty() {
        bail!("no detection files match `{}`", a.dets);
    }
    let mut scenes = Vec::with_capacity(paths.len());
    for p in &paths {
        let f = DetectionFile::read(p)?;
        let detections = f.to_detections().with_context(|| p.display().to_string())?;
        scenes.push(SceneDetections {
            scene_id: f.header.scene_id,
            timestamp: f.header.timestamp,
            detections,
        });
    }
    let mut table = aggregate(&scenes, &HistogramSpec::default())?;
    let flags = volume_anomaly(&table, a.window, a.z).map_err(|e| usage(e.to_string()))?;
    table.apply_anomalies(&flags);
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    io::write_atomic(&a.out, &csv)?;
    if let Some(j) = &a.json {
        io::write_json(&table, j)?;
    }
    if let Some(dir) = &a.plots {
        for (name, svg) in vehvec::plot::series_plots(&table) {
            io::write_atomic(&dir.join(name), svg.as_bytes())?;
        }
    }
    println!(
        "{} files, {} dates, {} flagged",
        paths.len(),
        table.rows.len(),
        flags.iter().filter(|f| **f).count()
    );
    Ok(())
}

fn pipeline_cmd(a: PipelineArgs) -> anyhow::Result<()> {
    let sensor = preset(&a.preset)?;
    let mut cfg = PipelineConfig::new(sensor.clone(), a.n_vehicles, a.seed);
    cfg.n_scenes = a.scenes;
    cfg.n_clouds = a.clouds;
    cfg.noise_sigma = a.noise;
    cfg.matching = MatchConfig::new(a.iou).map_err(|e| usage(e.to_string()))?;
    cfg.detector = detector_config(&sensor, a.config.as_deref())?;
    let summary = pipeline::run(&cfg, &a.out)?;
    print!("{}", summary.report.to_table());
    Ok(())
}

fn config_cmd(a: ConfigArgs) -> anyhow::Result<()> {
    let cfg = detector_config(&preset(&a.preset)?, a.config.as_deref())?;
    match a.format {
        Format::Toml => print!("{}", toml::to_string(&cfg)?),
        Format::Json => println!("{}", serde_json::to_string_pretty(&cfg)?),
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Vectorize(a) => vectorize_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Timeseries(a) => timeseries_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
        Command::Config(a) => config_cmd(a),
    }
}

fn exists_or_usage(p: &Path, flag: &str) -> anyhow::Result<()> {
    if p.exists() {
        Ok(())
    } else {
        Err(usage(format!("{flag} {} does not exist", p.display())))
    }
}

fn check_inputs(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Synth(a) => a.spec.as_deref().map_or(Ok(()), |p| exists_or_usage(p, "--spec")),
        Command::Detect(a) => exists_or_usage(&a.input, "--in"),
        Command::Vectorize(a) => exists_or_usage(&a.input, "--in").and(exists_or_usage(&a.mask, "--mask")),
        Command::Eval(a) => exists_or_usage(&a.pred, "--pred").and(exists_or_usage(&a.truth, "--truth")),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match check_inputs(&cli).and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
