use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{ArgAction, Parser, Subcommand};
use log::{debug, info};
use rayon::prelude::*;

use mtmc_core::geometry::preprocess_indexed;
use mtmc_core::io;
use mtmc_core::pipeline::{associate, check_config, group_by_camera, prepare, track_one_camera};
use mtmc_core::synthgen::{
    generate_world, matched_pipeline_config, render_detections, render_seed_for, NoiseConfig, WorldConfig,
};
use mtmc_core::{id_measures, Detection, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "mtmc", version, about = "Multi-target multi-camera tracking by detection")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug)
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Confidence filter and non-maximum suppression
    Preprocess {
        #[arg(long, value_name = "PATH")]
        detections: PathBuf,
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Feature file paired with the detections; kept rows go to --features-out
        #[arg(long, value_name = "PATH", requires = "features_out")]
        features: Option<PathBuf>,
        #[arg(long, value_name = "PATH", requires = "features")]
        features_out: Option<PathBuf>,
    },
    /// Single-camera tracking followed by cross-camera association
    Track {
        #[arg(long, value_name = "PATH")]
        detections: PathBuf,
        #[arg(long, value_name = "PATH")]
        features: PathBuf,
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Stop after single-camera tracking; every trajectory is its own identity
        #[arg(long)]
        sct_only: bool,
        /// Worker threads for per-camera tracking (0 = one per processor)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Identity measures of a hypothesis against ground truth
    Evaluate {
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        #[arg(long, value_name = "PATH")]
        hyp: PathBuf,
        /// Also write the report as a CSV header and row
        #[arg(long, value_name = "PATH")]
        row: Option<PathBuf>,
    },
    /// Synthetic scene: detections, features, labels and ground truth
    Synth {
        #[arg(long, value_name = "PATH")]
        world: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        noise: Option<PathBuf>,
        /// Overrides the seed of the world config
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => io::parse_config(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn load_detections(path: &Path, features: Option<&Path>) -> Result<Vec<Detection>> {
    let mut dets = io::parse_detections(path).with_context(|| format!("reading detections {}", path.display()))?;
    if let Some(fp) = features {
        let feats = io::parse_features(fp, dets.len()).with_context(|| format!("reading features {}", fp.display()))?;
        for (d, f) in dets.iter_mut().zip(feats) {
            d.feature = Some(f);
        }
    }
    Ok(dets)
}

fn feature_dim(dets: &[Detection], features: &Path) -> Result<usize> {
    if let Some(f) = dets.iter().find_map(|d| d.feature.as_ref()) {
        return Ok(f.dim());
    }
    let text = fs::read_to_string(features).with_context(|| format!("reading {}", features.display()))?;
    let header = text.lines().next().unwrap_or_default();
    header
        .trim()
        .strip_prefix("d=")
        .and_then(|d| d.trim().parse().ok())
        .context("feature file has no `d=<dimension>` header")
}

fn preprocess(
    detections: &Path,
    config: Option<&Path>,
    out: &Path,
    features: Option<&Path>,
    features_out: Option<&Path>,
) -> Result<()> {
    let config = load_config(config)?;
    let dets = load_detections(detections, features)?;
    let kept: Vec<Detection> = preprocess_indexed(
        &dets,
        config.detection_confidence_threshold,
        config.nms_iou_threshold,
    )
    .into_iter()
    .map(|i| dets[i].clone())
    .collect();
    io::write_detections(out, &kept)?;
    if let (Some(fin), Some(fout)) = (features, features_out) {
        let dim = feature_dim(&dets, fin)?;
        let feats: Vec<_> = kept.iter().filter_map(|d| d.feature.clone()).collect();
        io::write_features(fout, dim, &feats)?;
    }
    println!("before = {}", dets.len());
    println!("after = {}", kept.len());
    Ok(())
}

fn track(
    detections: &Path,
    features: &Path,
    config: Option<&Path>,
    out: &Path,
    sct_only: bool,
    jobs: usize,
) -> Result<()> {
    let config = load_config(config)?;
    check_config(&config)?;
    let dets = load_detections(detections, Some(features))?;
    let prepared = prepare(&dets, &config);
    info!("{} of {} detections kept after preprocessing", prepared.len(), dets.len());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker pool")?;
    let groups: Vec<_> = group_by_camera(&prepared).into_iter().collect();
    let tracked: Vec<_> = pool.install(|| {
        groups
            .par_iter()
            .map(|(camera, dets)| track_one_camera(*camera, dets, &config).map(|t| (*camera, t)))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let per_camera: BTreeMap<_, _> = tracked.into_iter().collect();
    for (camera, trajs) in &per_camera {
        info!("camera {camera}: {} trajectories", trajs.len());
    }

    let output = associate(per_camera, &config, sct_only)?;
    for m in &output.merges {
        debug!(
            "merged trajectories {} and {} at distance {:.6}, gap {} frames",
            m.a, m.b, m.distance, m.gap
        );
    }
    io::write_trajectories(out, &output.clusters)?;
    for (camera, trajs) in &output.per_camera {
        println!("camera_{camera}_trajectories = {}", trajs.len());
    }
    println!("identities = {}", output.clusters.len());
    Ok(())
}

fn evaluate(gt: &Path, hyp: &Path, row: Option<&Path>) -> Result<()> {
    let truth = io::parse_trajectories(gt).with_context(|| format!("reading ground truth {}", gt.display()))?;
    let hypothesis = io::parse_trajectories(hyp).with_context(|| format!("reading hypothesis {}", hyp.display()))?;
    let report = id_measures(&truth, &hypothesis)?;
    print!("{}", io::format_report(&report));
    if let Some(path) = row {
        let text = format!("{}\n{}", io::REPORT_HEADER, io::format_report_row(&report));
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn synth(world: Option<&Path>, noise: Option<&Path>, seed: Option<u64>, out_dir: &Path) -> Result<()> {
    let mut wc = match world {
        Some(p) => io::parse_world_config(p).with_context(|| format!("reading world config {}", p.display()))?,
        None => WorldConfig::default(),
    };
    if let Some(s) = seed {
        wc.seed = s;
    }
    let nc = match noise {
        Some(p) => io::parse_noise_config(p).with_context(|| format!("reading noise config {}", p.display()))?,
        None => NoiseConfig::default(),
    };
    let scene = generate_world(&wc)?;
    let rendered = render_detections(&scene, &nc, render_seed_for(wc.seed))?;

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    io::write_detections(&out_dir.join("detections.txt"), &rendered.detections)?;
    let feats: Vec<_> = rendered.detections.iter().filter_map(|d| d.feature.clone()).collect();
    io::write_features(&out_dir.join("features.txt"), nc.feature_dim, &feats)?;
    io::write_trajectories(&out_dir.join("ground_truth.txt"), &scene.ground_truth)?;
    let labels: String = rendered
        .labels
        .iter()
        .map(|l| format!("{}\n", l.unwrap_or(0)))
        .collect();
    fs::write(out_dir.join("labels.txt"), labels)?;
    io::write_config(&out_dir.join("config.txt"), &matched_pipeline_config(&wc))?;
    println!("identities = {}", scene.ground_truth.len());
    println!("detections = {}", rendered.detections.len());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match &cli.command {
        Command::Preprocess {
            detections,
            config,
            out,
            features,
            features_out,
        } => preprocess(
            detections,
            config.as_deref(),
            out,
            features.as_deref(),
            features_out.as_deref(),
        ),
        Command::Track {
            detections,
            features,
            config,
            out,
            sct_only,
            jobs,
        } => track(detections, features, config.as_deref(), out, *sct_only, *jobs),
        Command::Evaluate { gt, hyp, row } => evaluate(gt, hyp, row.as_deref()),
        Command::Synth {
            world,
            noise,
            seed,
            out_dir,
        } => synth(world.as_deref(), noise.as_deref(), *seed, out_dir),
    }
}
