//! The `landpad` command line.
//!
//! Exit codes: 0 success, 1 internal error, 2 bad input or configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Binarize, Config};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::harness::{self, bench, metrics, DetectInput, DetectOptions};
use crate::imgio;
use crate::lander::{self, DroneState, SimScene};
use crate::synth::{self, CorpusRecipe};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_BAD_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "landpad", version, about = "Landing-pad marker detection, evaluation and landing simulation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON configuration document.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub binarize: Option<Binarize>,
    /// Pixel connectivity, 4 or 8.
    #[arg(long, global = true, value_parser = ["4", "8"])]
    pub connectivity: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (directory for `render`). Defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect the marker in one image or a sequence directory.
    Detect {
        input: PathBuf,
        /// Write annotated frames here.
        #[arg(long, value_name = "DIR")]
        annotate: Option<PathBuf>,
        /// Altitude for every frame instead of `altitude.csv`.
        #[arg(long, value_name = "METRES")]
        altitude: Option<f64>,
        /// Threshold each frame with its own grid instead of the previous one.
        #[arg(long)]
        independent: bool,
    },
    /// Score detection against a rendered corpus.
    Eval {
        corpus: PathBuf,
        #[arg(long, value_name = "DIR")]
        annotate: Option<PathBuf>,
        /// Also write the per-frame detection records.
        #[arg(long, value_name = "PATH")]
        records: Option<PathBuf>,
    },
    /// Render a synthetic corpus with ground truth.
    Render {
        #[arg(long, default_value_t = 200)]
        frames: usize,
        /// Textured ground only, no marker.
        #[arg(long)]
        marker_free: bool,
        /// Cut the ring into this many arcs.
        #[arg(long, value_name = "N")]
        sever: Option<usize>,
    },
    /// Closed-loop landing run; writes the trajectory log.
    Simulate {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        y: f64,
        #[arg(long, default_value_t = 1.5)]
        altitude: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw: f64,
        /// Pixel noise sigma of rendered frames.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Remove the marker from the scene at this time.
        #[arg(long, value_name = "SECONDS")]
        remove_marker_at: Option<f64>,
    },
    /// Per-stage latency and throughput on synthesized frames.
    Bench {
        #[arg(long, default_value_t = 1280)]
        width: usize,
        #[arg(long, default_value_t = 720)]
        height: usize,
        #[arg(long, default_value_t = 100)]
        frames: usize,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => EXIT_INTERNAL,
        _ => EXIT_BAD_INPUT,
    }
}

fn load_config(g: &GlobalArgs) -> Result<Config> {
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(b) = g.binarize {
        cfg.pipeline.binarize = b;
    }
    if let Some(c) = &g.connectivity {
        cfg.pipeline.connectivity = c.parse().map_err(|_| Error::Input(format!("bad connectivity {c}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

#[derive(Serialize)]
struct SimulationSummary {
    landed: bool,
    ticks: u64,
    final_state: DroneState,
    final_ground_error_m: f64,
    final_yaw_error_deg: f64,
    cutoff_altitude_m: Option<f64>,
    phases: Vec<lander::LandingPhase>,
    overruns: usize,
}

/// Runs one parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let cfg = load_config(g)?;
    let exec = if g.sequential { Exec::Sequential } else { Exec::Parallel };
    match &cli.command {
        Command::Detect {
            input,
            annotate,
            altitude,
            independent,
        } => {
            let inp = DetectInput::open(input, *altitude)?;
            let opts = DetectOptions {
                streaming: !independent,
                annotate_dir: annotate.clone(),
                exec,
            };
            let records = harness::detect_frames(&inp, &cfg, &opts)?;
            emit(g.out.as_deref(), &harness::to_json_lines(&records)?)
        }
        Command::Eval {
            corpus,
            annotate,
            records: records_out,
        } => {
            let truth_path = corpus.join(synth::TRUTH_FILE);
            if !truth_path.is_file() {
                return Err(Error::Input(format!("missing {}", truth_path.display())));
            }
            let truths = synth::read_truth(&truth_path)?;
            let inp = DetectInput::open(corpus, None)?;
            if inp.frames.len() != truths.len() {
                return Err(Error::Input(format!(
                    "{} frames but {} truth records",
                    inp.frames.len(),
                    truths.len()
                )));
            }
            // corpus frames are independent scenes
            let opts = DetectOptions {
                streaming: false,
                annotate_dir: annotate.clone(),
                exec,
            };
            let records = harness::detect_frames(&inp, &cfg, &opts)?;
            if let Some(p) = records_out {
                emit(Some(p), &harness::to_json_lines(&records)?)?;
            }
            let report = metrics::evaluate(&records, &truths)?;
            emit(g.out.as_deref(), &pretty(&report)?)
        }
        Command::Render {
            frames,
            marker_free,
            sever,
        } => {
            let dir = g
                .out
                .as_deref()
                .ok_or_else(|| Error::Input("render needs --out DIR".into()))?;
            let recipe = if *marker_free {
                CorpusRecipe::marker_free()
            } else {
                CorpusRecipe::default()
            };
            let truths = synth::make_corpus(&recipe, &cfg.marker_spec, &cfg.camera, *frames, g.seed, dir, exec)?;
            if let Some(cuts) = sever {
                for t in &truths {
                    let path = dir.join(imgio::sequence_frame_name(t.frame_index));
                    let frame = imgio::load_pnm(&path)?;
                    let level = t.pose.illumination.base.round().clamp(0.0, 255.0) as u8;
                    imgio::save_pnm(&path, &synth::sever_ring(&frame, t, *cuts, 6.0, level))?;
                }
            }
            Ok(())
        }
        Command::Simulate {
            x,
            y,
            altitude,
            yaw,
            noise,
            remove_marker_at,
        } => {
            let scene = SimScene {
                noise_sigma: *noise,
                marker_removed_at_s: *remove_marker_at,
                ..SimScene::default()
            };
            let result = lander::simulate(DroneState::at(*x, *y, *altitude, *yaw), &cfg, &scene, g.seed)?;
            if let Some(p) = &g.out {
                emit(Some(p), &harness::to_json_lines(&result.log)?)?;
            }
            let summary = SimulationSummary {
                landed: result.landed,
                ticks: result.ticks,
                final_state: result.final_state,
                final_ground_error_m: result.final_ground_error_m(),
                final_yaw_error_deg: result.final_yaw_error_deg(),
                cutoff_altitude_m: result.cutoff_altitude_m,
                phases: result.phases.clone(),
                overruns: result.log.iter().filter(|r| r.overrun).count(),
            };
            emit(None, &pretty(&summary)?)
        }
        Command::Bench { width, height, frames } => {
            let report = bench::run(&cfg, *width, *height, *frames, g.seed, exec)?;
            eprint!("{}", report.table());
            emit(g.out.as_deref(), &pretty(&report)?)
        }
    }
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("landpad: {e}");
            exit_code(&e)
        }
        Err(_) => EXIT_INTERNAL,
    }
}
