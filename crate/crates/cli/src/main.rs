//! `evgaze` command line: simulate, track, calibrate, sweep, evaluate,
//! ablate and bench, all driven by one flat config namespace.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use evgaze_core::io::{
    parse_gaze_map, parse_scenario, read_recording, render_gaze_map, render_scenario,
    sidecar_path, write_recording, Recording, RunConfig,
};
use evgaze_core::pipeline::{
    ablation_differences, build_scenario, run_bench, run_calibrate, run_evaluate, run_sweep,
    run_track, EvaluationReport,
};
use evgaze_core::sim::{Scenario, SegmentKind};

#[derive(Parser)]
#[command(name = "evgaze", about = "Hybrid frame/event eye tracking engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Flat `key = value` config file; unknown keys are errors.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline override, repeatable: --set key=value (applied after --config).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

impl CommonOpts {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        for s in &self.sets {
            let (k, v) = s
                .split_once('=')
                .with_context(|| format!("--set '{}' is not KEY=VALUE", s))?;
            cfg.apply(k.trim(), v.trim())?;
        }
        if self.print_config {
            print!("{}", cfg.dump());
            std::process::exit(0);
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recording (and its ground-truth sidecar).
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        /// Output recording path; the sidecar lands at <out>.truth.
        #[arg(long)]
        out: PathBuf,
        /// RNG seed for the script and event jitter.
        #[arg(long)]
        seed: u64,
    },
    /// Run the tracker over a recording; one CSV row per model emission.
    Track {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        recording: PathBuf,
        /// Calibrated gaze map file; adds gaze columns when given.
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a gaze map from a recording with a ground-truth sidecar.
    Calibrate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        recording: PathBuf,
        /// Sidecar path; defaults to <recording>.truth.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smoothness against events-per-fit.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        recording: PathBuf,
        /// Sidecar path; when present, smoothness is computed over the
        /// scripted saccade windows only.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Comma-separated events-per-fit values.
        #[arg(long, default_value = "1,5,10,20,50,100,500")]
        ns: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy, precision, IOU / center-error histograms and the ablation.
    Evaluate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Directory for summary.txt and the histogram CSVs.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Frame-only ablation differences (d_frame − d_event) per frame.
    Ablate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long)]
        recording: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Segment kind to evaluate: saccade, fixation or pursuit.
        #[arg(long, default_value = "saccade")]
        kind: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single-threaded gated-event update throughput.
    Bench {
        #[command(flatten)]
        common: CommonOpts,
        /// Total synthetic events to push per measured setting.
        #[arg(long, default_value_t = 2_000_000)]
        events: usize,
    },
}

fn load_recording(path: &Path) -> Result<Recording> {
    read_recording(path).with_context(|| format!("reading recording {}", path.display()))
}

fn load_scenario(recording: &Path, truth: &Option<PathBuf>) -> Result<Scenario> {
    let path = truth.clone().unwrap_or_else(|| sidecar_path(recording));
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading ground-truth sidecar {}", path.display()))?;
    Ok(parse_scenario(&text)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { common, out, seed } => {
            let cfg = common.load()?;
            let scenario = build_scenario(&cfg, seed).map_err(anyhow::Error::msg)?;
            let sim = scenario.synthesize()?;
            let rec = Recording {
                sensor_width: scenario.scene.width as u16,
                sensor_height: scenario.scene.height as u16,
                events: sim.events,
                frames: sim.frames,
            };
            write_recording(&out, &rec)?;
            let truth = sidecar_path(&out);
            std::fs::write(&truth, render_scenario(&scenario))?;
            println!(
                "wrote {} ({} frames, {} events) and {}",
                out.display(),
                rec.frames.len(),
                rec.events.len(),
                truth.display()
            );
        }
        Command::Track { common, recording, map, out } => {
            let cfg = common.load()?;
            let rec = load_recording(&recording)?;
            let map = match map {
                Some(path) => Some(parse_gaze_map(
                    &std::fs::read_to_string(&path)
                        .with_context(|| format!("reading gaze map {}", path.display()))?,
                )?),
                None => None,
            };
            let result = run_track(&rec, &cfg, map.as_ref()).map_err(anyhow::Error::msg)?;
            std::fs::write(&out, &result.csv)?;
            println!("wrote {} rows to {}", result.emissions.len(), out.display());
        }
        Command::Calibrate { common, recording, truth, out } => {
            let cfg = common.load()?;
            let rec = load_recording(&recording)?;
            let scenario = load_scenario(&recording, &truth)?;
            let map = run_calibrate(&rec, &scenario, &cfg).map_err(anyhow::Error::msg)?;
            std::fs::write(&out, render_gaze_map(&map))?;
            println!("wrote gaze map (degree {}) to {}", map.degree(), out.display());
        }
        Command::Sweep { common, recording, truth, ns, out } => {
            let cfg = common.load()?;
            let rec = load_recording(&recording)?;
            let ns: Vec<usize> = ns
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .context("parsing --ns")?;
            let windows = match load_scenario(&recording, &truth) {
                Ok(scenario) => Some(
                    scenario
                        .segment_windows()
                        .into_iter()
                        .filter(|(k, _, _)| *k == SegmentKind::Saccade)
                        .map(|(_, a, b)| (a, b))
                        .collect::<Vec<_>>(),
                ),
                Err(_) if truth.is_none() => None,
                Err(e) => return Err(e),
            };
            let (rows, csv) =
                run_sweep(&rec, &cfg, &ns, windows.as_deref()).map_err(anyhow::Error::msg)?;
            std::fs::write(&out, csv)?;
            let best = rows
                .iter()
                .max_by(|a, b| a.smoothness.total_cmp(&b.smoothness))
                .context("empty sweep")?;
            println!(
                "wrote {}; smoothest at events_per_fit = {} ({:.4})",
                out.display(),
                best.events_per_fit,
                best.smoothness
            );
        }
        Command::Evaluate { common, recording, truth, out_dir } => {
            let cfg = common.load()?;
            let rec = load_recording(&recording)?;
            let scenario = load_scenario(&recording, &truth)?;
            let report = run_evaluate(&rec, &scenario, &cfg).map_err(anyhow::Error::msg)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("summary.txt"), report.summary())?;
            std::fs::write(
                out_dir.join("iou.csv"),
                EvaluationReport::histogram_csv(&report.iou, "iou"),
            )?;
            std::fs::write(
                out_dir.join("center_error.csv"),
                EvaluationReport::histogram_csv(&report.center_error_px, "center_error_px"),
            )?;
            std::fs::write(
                out_dir.join("ablation.csv"),
                EvaluationReport::histogram_csv(&report.ablation_diff_px, "d_frame_minus_d_event_px"),
            )?;
            print!("{}", report.summary());
        }
        Command::Ablate { common, recording, truth, kind, out } => {
            let cfg = common.load()?;
            let rec = load_recording(&recording)?;
            let scenario = load_scenario(&recording, &truth)?;
            let kind = match kind.as_str() {
                "saccade" => SegmentKind::Saccade,
                "fixation" => SegmentKind::Fixation,
                "pursuit" => SegmentKind::Pursuit,
                other => bail!("unknown segment kind '{}'", other),
            };
            let diffs =
                ablation_differences(&rec, &scenario, &cfg, kind).map_err(anyhow::Error::msg)?;
            std::fs::write(
                &out,
                EvaluationReport::histogram_csv(&diffs, "d_frame_minus_d_event_px"),
            )?;
            let positive = diffs.iter().filter(|&&d| d > 0.0).count();
            println!(
                "wrote {} ({} frames, {} with positive difference)",
                out.display(),
                diffs.len(),
                positive
            );
        }
        Command::Bench { common, events } => {
            let cfg = common.load()?;
            for n in [1usize, cfg.fit.events_per_fit] {
                let r = run_bench(&cfg, n, events);
                println!(
                    "events_per_fit={:>3}: {} events in {:.3} s -> {:.0} gated updates/s ({} solves)",
                    r.events_per_fit, r.events_processed, r.elapsed_s, r.events_per_s, r.model_updates
                );
            }
        }
    }
    Ok(())
}
