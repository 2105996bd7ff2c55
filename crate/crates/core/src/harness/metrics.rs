//! Evaluation metrics over detection records and ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::DetectionRecord;
use crate::shapes::wrap_deg;
use crate::synth::{GroundTruth, PxBox};

/// A fix counts as a detection only within this distance of the true centre.
pub const DETECTION_RADIUS_PX: f64 = 10.0;
/// Slack around the true ring box when judging shape detections.
pub const FALSE_SHAPE_MARGIN_PX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    /// Frames with any marker fix.
    pub fixes: usize,
    /// Fixes within the detection radius of the truth.
    pub detected: usize,
    pub detection_rate: f64,
    /// Mean absolute centre error on detected frames, per axis.
    pub centre_mae_px: (f64, f64),
    /// Over detected frames that carry an orientation.
    pub orientation_mae_deg: f64,
    pub orientation_frames: usize,
    /// Fixes on marker-free frames or far from the truth.
    pub false_fixes: usize,
    /// Shape detections not inside the true marker box.
    pub false_shapes: usize,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Per-axis mean absolute error of `(x, y)` residuals.
pub fn per_axis_mae(errors: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = errors.iter().map(|e| e.0.abs()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.1.abs()).collect();
    (mean(&xs), mean(&ys))
}

fn grown(b: &PxBox, m: f64) -> PxBox {
    PxBox {
        min_x: b.min_x - m,
        min_y: b.min_y - m,
        max_x: b.max_x + m,
        max_y: b.max_y + m,
    }
}

/// Compares records with truth, matched by frame index.
pub fn evaluate(records: &[DetectionRecord], truths: &[GroundTruth]) -> Result<EvalReport> {
    if records.len() != truths.len() {
        return Err(Error::Input(format!(
            "{} detection records but {} truth records",
            records.len(),
            truths.len()
        )));
    }
    let mut fixes = 0;
    let mut false_fixes = 0;
    let mut false_shapes = 0;
    let mut centre_errors = Vec::new();
    let mut orientation_errors = Vec::new();
    for r in records {
        let t = truths
            .iter()
            .find(|t| t.frame_index == r.frame_index)
            .ok_or_else(|| Error::Input(format!("no truth for frame {}", r.frame_index)))?;
        let present = t.pose.marker_present && t.visible.marker;
        let ring = grown(&t.boxes.ring, FALSE_SHAPE_MARGIN_PX);
        false_shapes += r
            .detections
            .iter()
            .filter(|d| {
                let b = d.bbox();
                !present
                    || !(ring.contains_point(b.min_x as f64, b.min_y as f64)
                        && ring.contains_point(b.max_x as f64, b.max_y as f64))
            })
            .count();
        let Some(pose) = &r.pose else { continue };
        fixes += 1;
        let err = (pose.centre_px.0 - t.centre_px.0, pose.centre_px.1 - t.centre_px.1);
        if !present || err.0.hypot(err.1) > DETECTION_RADIUS_PX {
            false_fixes += 1;
            continue;
        }
        centre_errors.push(err);
        if let (Some(o), false) = (pose.orientation_deg, pose.orientation_stale) {
            orientation_errors.push(wrap_deg(o - t.orientation_deg).abs());
        }
    }
    let frames = records.len();
    let detected = centre_errors.len();
    Ok(EvalReport {
        frames,
        fixes,
        detected,
        detection_rate: if frames == 0 { 0.0 } else { detected as f64 / frames as f64 },
        centre_mae_px: per_axis_mae(&centre_errors),
        orientation_mae_deg: mean(&orientation_errors),
        orientation_frames: orientation_errors.len(),
        false_fixes,
        false_shapes,
    })
}
