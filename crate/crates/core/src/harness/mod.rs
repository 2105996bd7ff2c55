//! Command-line front end, evaluation metrics and the throughput benchmark.

pub mod bench;
pub mod cli;
pub mod metrics;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::imgio::{self, Frame, Overlay};
use crate::marker::MarkerPose;
use crate::pipeline::{Detector, FrameResult, StageTiming};
use crate::shapes::{ShapeClass, ShapeDetection};
use crate::synth::ALTITUDE_FILE;

/// One line of `detect` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame_index: u64,
    pub altitude_m: f64,
    pub detections: Vec<ShapeDetection>,
    pub pose: Option<MarkerPose>,
    pub timings: Vec<StageTiming>,
}

impl DetectionRecord {
    pub fn from_result(result: &FrameResult, altitude_m: f64) -> Self {
        Self {
            frame_index: result.frame_index,
            altitude_m,
            detections: result.detections.clone(),
            pose: result.pose.clone(),
            timings: result.timings.clone(),
        }
    }
}

/// Overlay: circle red, square green, rectangle blue, centre
/// dot red, orientation line orange.
pub fn overlays(detections: &[ShapeDetection], pose: Option<&MarkerPose>) -> Vec<Overlay> {
    let mut out: Vec<Overlay> = detections
        .iter()
        .map(|d| {
            let b = d.bbox();
            let color = match d.shape_class {
                ShapeClass::LargeCircle | ShapeClass::SmallCircle => imgio::RED,
                ShapeClass::Square => imgio::GREEN,
                ShapeClass::Rectangle => imgio::BLUE,
            };
            Overlay::Rect {
                min_x: b.min_x as i64,
                min_y: b.min_y as i64,
                max_x: b.max_x as i64,
                max_y: b.max_y as i64,
                color,
            }
        })
        .collect();
    if let Some(p) = pose {
        if let Some(o) = p.orientation_deg {
            let len = detections
                .iter()
                .find(|d| d.shape_class == ShapeClass::LargeCircle)
                .map_or(40.0, |d| d.bbox().width() as f64 / 2.0);
            let (s, c) = o.to_radians().sin_cos();
            out.push(Overlay::Line {
                from: p.centre_px,
                to: (p.centre_px.0 + c * len, p.centre_px.1 + s * len),
                color: imgio::ORANGE,
            });
        }
        out.push(Overlay::Point {
            x: p.centre_px.0,
            y: p.centre_px.1,
            color: imgio::RED,
        });
    }
    out
}

/// Input to `detect`: one image or a sequence directory.
#[derive(Debug, Clone)]
pub struct DetectInput {
    /// Frame indices and paths, in order.
    pub frames: Vec<(u64, PathBuf)>,
    pub altitudes: HashMap<u64, f64>,
}

impl DetectInput {
    /// Resolves `path`. Altitudes come from `altitude.csv` next to the
    /// frames unless `altitude_override` is given.
    pub fn open(path: &Path, altitude_override: Option<f64>) -> Result<Self> {
        let (dir, frames) = if path.is_dir() {
            let frames = imgio::list_sequence(path)?;
            if frames.is_empty() {
                return Err(Error::Input(format!("{} holds no frame_%06d.ppm files", path.display())));
            }
            (path.to_path_buf(), frames)
        } else if path.is_file() {
            let index = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("frame_"))
                .and_then(|n| n.split('.').next())
                .and_then(|n| n.parse().ok())
                .unwrap_or(0);
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (dir, vec![(index, path.to_path_buf())])
        } else {
            return Err(Error::Input(format!("input {} does not exist", path.display())));
        };
        let altitudes = match altitude_override {
            Some(a) => frames.iter().map(|(i, _)| (*i, a)).collect(),
            None => {
                let log = dir.join(ALTITUDE_FILE);
                if !log.is_file() {
                    return Err(Error::Input(format!(
                        "missing {}: altitude is required for the size gate",
                        log.display()
                    )));
                }
                let entries = imgio::read_altitude_log(&log)?;
                if frames.len() == 1 && entries.len() == 1 {
                    HashMap::from([(frames[0].0, entries[0].1)])
                } else {
                    entries.into_iter().collect()
                }
            }
        };
        if let Some((i, _)) = frames.iter().find(|(i, _)| !altitudes.contains_key(i)) {
            return Err(Error::Input(format!("no altitude logged for frame {i}")));
        }
        Ok(Self { frames, altitudes })
    }
}

/// Options of [`detect_frames`].
#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    /// Threshold each frame with the previous frame's grid.
    pub streaming: bool,
    pub annotate_dir: Option<PathBuf>,
    pub exec: Exec,
}

/// Runs the pipeline over every frame, in order.
pub fn detect_frames(input: &DetectInput, config: &Config, opts: &DetectOptions) -> Result<Vec<DetectionRecord>> {
    let mut detector = Detector::new(config.clone())?
        .with_exec(opts.exec)
        .with_streaming(opts.streaming);
    if let Some(dir) = &opts.annotate_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut records = Vec::with_capacity(input.frames.len());
    for (index, path) in &input.frames {
        let frame: Frame = imgio::load_pnm(path)?.with_index(*index);
        let altitude = input.altitudes[index];
        let result = detector.process(&frame, altitude)?;
        if let Some(dir) = &opts.annotate_dir {
            let img = imgio::annotate(&frame, &overlays(&result.detections, result.pose.as_ref()));
            imgio::save_pnm(dir.join(imgio::sequence_frame_name(*index)), &img)?;
        }
        records.push(DetectionRecord::from_result(&result, altitude));
    }
    Ok(records)
}

/// Serializes records as JSON lines.
pub fn to_json_lines<T: Serialize>(items: &[T]) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}
