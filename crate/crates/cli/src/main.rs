//! Command-line front end: `track` runs the engine over a detection file,
//! `eval` scores tracker output against ground truth, `bench` measures
//! per-frame solving time on synthetic scenes.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.

use abdmot::config::EngineConfig;
use abdmot::ingest::{
    generate_synthetic_scene, read_kitti_detections, read_mot_detections, read_mot_gt,
    read_mot_tracks, write_mot_tracks, FrameDetections, SceneSpec,
};
use abdmot::metrics::evaluate;
use abdmot::pipeline::{process_sequence, Engine};
use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "abdmot",
    about = "Online multi-object tracking with joint abduction of assignments and scene events",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DetFormat {
    Mot,
    Kitti,
}

#[derive(Subcommand)]
enum Command {
    /// Track a detection file and write tracks, events and timing.
    #[command(after_long_help = EngineConfig::reference_markdown())]
    Track {
        /// Detection file.
        #[arg(long)]
        dets: PathBuf,
        /// Detection file layout.
        #[arg(long, value_enum)]
        format: DetFormat,
        /// Flat key=value config file (see docs/config_reference.md).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override single config keys, e.g. --set iou_threshold=0.25.
        #[arg(long, value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output: tracks in MOT result format.
        #[arg(long)]
        out_tracks: PathBuf,
        /// Output: event log, one JSON record per line.
        #[arg(long)]
        out_events: PathBuf,
        /// Output: per-frame processing time in milliseconds, one line per frame.
        #[arg(long)]
        out_timing: Option<PathBuf>,
        /// Write one ground ASP program per frame into this directory.
        #[arg(long, value_name = "DIR")]
        export_asp: Option<PathBuf>,
    },
    /// Score tracker output against ground truth (CLEAR-MOT).
    Eval {
        /// Ground truth in MOT GT format.
        #[arg(long)]
        gt: PathBuf,
        /// Hypothesis tracks in MOT result format.
        #[arg(long)]
        hyp: PathBuf,
        /// IoU threshold for a valid correspondence.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
    },
    /// Generate a synthetic scene and measure per-frame solving time.
    Bench {
        /// Number of simultaneous tracks.
        #[arg(long)]
        tracks: usize,
        /// Fraction of track pairs steered through crossings.
        #[arg(long)]
        overlap: f64,
        /// Scene length in frames.
        #[arg(long, default_value_t = 150)]
        frames: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Repetitions (timing varies, outputs must not).
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        /// Override single config keys.
        #[arg(long, value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track {
            dets,
            format,
            config,
            set,
            out_tracks,
            out_events,
            out_timing,
            export_asp,
        } => cmd_track(
            &dets, format, config.as_deref(), &set, &out_tracks, &out_events,
            out_timing.as_deref(), export_asp.as_deref(),
        ),
        Command::Eval { gt, hyp, iou } => cmd_eval(&gt, &hyp, iou),
        Command::Bench {
            tracks,
            overlap,
            frames,
            seed,
            repeat,
            set,
        } => cmd_bench(tracks, overlap, frames, seed, repeat, &set),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<EngineConfig, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            EngineConfig::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => EngineConfig::default(),
    };
    let pairs: Vec<(&str, &str)> = overrides
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{kv}`")))
        })
        .collect::<Result<_, _>>()?;
    cfg.apply_overrides(&pairs)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn read_detections(path: &Path, format: DetFormat) -> Result<FrameDetections, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let (frames, warnings) = match format {
        DetFormat::Mot => read_mot_detections(reader),
        DetFormat::Kitti => read_kitti_detections(reader),
    }
    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    for w in &warnings.0 {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(frames)
}

#[allow(clippy::too_many_arguments)]
fn cmd_track(
    dets: &Path,
    format: DetFormat,
    config: Option<&Path>,
    overrides: &[String],
    out_tracks: &Path,
    out_events: &Path,
    out_timing: Option<&Path>,
    export_asp: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = load_config(config, overrides)?;
    let frames = read_detections(dets, format)?;

    let mut engine = if export_asp.is_some() {
        Engine::with_asp_export(cfg)
    } else {
        Engine::new(cfg)
    };
    for (t, frame_dets) in &frames {
        engine
            .step(*t, frame_dets)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    if let Some(dir) = export_asp {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        for (t, program) in &engine.asp_programs {
            let path = dir.join(format!("frame_{t:06}.lp"));
            fs::write(&path, program)
                .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    let explanation = engine.finish();

    let write = |path: &Path, content: String| -> Result<(), CliError> {
        fs::write(path, content)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    };
    write(out_tracks, write_mot_tracks(&explanation.track_frames()))?;
    let mut log = explanation.event_log_lines().join("\n");
    if !log.is_empty() {
        log.push('\n');
    }
    write(out_events, log)?;
    if let Some(path) = out_timing {
        let mut text = String::new();
        for (_, d) in &explanation.timings {
            text.push_str(&format!("{:.3}\n", d.as_secs_f64() * 1e3));
        }
        write(path, text)?;
    }
    let (median, p95) = explanation.timing_summary();
    println!(
        "frames {}  tracks {}  events {}  warnings {}  median {:.3} ms/frame  p95 {:.3} ms",
        explanation.timings.len(),
        explanation.tracks.len(),
        explanation.events.len(),
        explanation.warnings.len(),
        median,
        p95,
    );
    Ok(())
}

fn cmd_eval(gt_path: &Path, hyp_path: &Path, iou: f64) -> Result<(), CliError> {
    let gt_file = fs::File::open(gt_path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", gt_path.display())))?;
    let (mut gt, warnings) = read_mot_gt(BufReader::new(gt_file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", gt_path.display())))?;
    for w in &warnings.0 {
        eprintln!("warning: {}: {w}", gt_path.display());
    }
    let hyp_file = fs::File::open(hyp_path)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", hyp_path.display())))?;
    let mut hyp = read_mot_tracks(BufReader::new(hyp_file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", hyp_path.display())))?;

    // Evaluate on the intersection of the frame ranges when both are
    // non-empty and disagree.
    if let (Some(&g0), Some(&g1), Some(&h0), Some(&h1)) = (
        gt.keys().next(),
        gt.keys().next_back(),
        hyp.keys().next(),
        hyp.keys().next_back(),
    ) {
        if (g0, g1) != (h0, h1) {
            let lo = g0.max(h0);
            let hi = g1.min(h1);
            eprintln!(
                "warning: frame ranges differ (gt {g0}..{g1}, hyp {h0}..{h1}); evaluating {lo}..{hi}"
            );
            gt.retain(|t, _| (lo..=hi).contains(t));
            hyp.retain(|t, _| (lo..=hi).contains(t));
        }
    }
    let report = evaluate(&gt, &hyp, iou).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!(
        "mota={:.4} motp={:.4} mt={:.4} ml={:.4} fp={} fn={} idsw={} frag={} gt={}",
        report.mota,
        report.motp,
        report.mostly_tracked,
        report.mostly_lost,
        report.false_positives,
        report.false_negatives,
        report.id_switches,
        report.fragmentations,
        report.gt_total,
    );
    print!("{}", report.table());
    Ok(())
}

fn cmd_bench(
    tracks: usize,
    overlap: f64,
    frames: u32,
    seed: u64,
    repeat: u32,
    overrides: &[String],
) -> Result<(), CliError> {
    let spec = SceneSpec {
        n_tracks: tracks,
        overlap_fraction: overlap,
        n_frames: frames,
        image_size: (1280.0, 960.0),
        dropout: 0.0,
        jitter_std: 0.0,
        seed,
    };
    let (_, dets) =
        generate_synthetic_scene(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut cfg = load_config(None, overrides)?;
    if cfg.image_size.is_none() {
        cfg.image_size = Some(spec.image_size);
    }
    println!(
        "{:>7} {:>8} {:>7} {:>12} {:>10} {:>8}",
        "tracks", "overlap", "frames", "ms/frame", "fps", "run"
    );
    let mut reference_log: Option<Vec<String>> = None;
    let mut identical = true;
    for run in 1..=repeat.max(1) {
        let explanation = process_sequence(dets.clone(), &cfg)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let (median, _) = explanation.timing_summary();
        let fps = if median > 0.0 { 1000.0 / median } else { f64::INFINITY };
        println!(
            "{:>7} {:>8.2} {:>7} {:>12.3} {:>10.2} {:>8}",
            tracks, overlap, frames, median, fps, run
        );
        let log = explanation.event_log_lines();
        match &reference_log {
            None => reference_log = Some(log),
            Some(reference) => identical &= reference == &log,
        }
    }
    if repeat > 1 {
        println!(
            "outputs identical across repeats: {}",
            if identical { "yes" } else { "NO" }
        );
        if !identical {
            return Err(CliError::Runtime(
                "nondeterministic outputs across bench repeats".into(),
            ));
        }
    }
    Ok(())
}
