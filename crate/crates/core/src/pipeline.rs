//! The full per-frame detection pipeline, in fixed stage order:
//! greyscale → Gaussian → threshold → erosion → median → dilation → CCL,
//! followed by shape classification and marker assembly.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ccl::{self, ComponentRecord, Connectivity, Labeling};
use crate::config::{Binarize, Config};
use crate::error::Result;
use crate::exec::Exec;
use crate::imgio::Frame;
use crate::marker::{self, Assembly, MarkerPose};
use crate::preprocess;
use crate::shapes::{self, ShapeClass, ShapeDetection};
use crate::threshold::{self, StreamBinarizer};

pub const STAGES: [&str; 7] = ["greyscale", "gaussian", "threshold", "erode", "median", "dilate", "ccl"];
/// Classification and assembly, timed after the seven image stages.
pub const ANALYSIS_STAGE: &str = "shapes";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

/// Everything the pipeline learned about one frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: u64,
    pub binary: Frame,
    pub components: Vec<ComponentRecord>,
    /// Large circles and the figures inside them, plus a lone small circle
    /// when it carries the fix.
    pub detections: Vec<ShapeDetection>,
    pub assembly: Option<Assembly>,
    pub pose: Option<MarkerPose>,
    pub timings: Vec<StageTiming>,
}

impl FrameResult {
    pub fn total_ms(&self) -> f64 {
        self.timings.iter().map(|t| t.ms).sum()
    }
}

/// Stateful detector: carries the previous frame's threshold grid and the
/// last full-marker orientation across a sequence.
#[derive(Debug, Clone)]
pub struct Detector {
    config: Config,
    connectivity: Connectivity,
    exec: Exec,
    streaming: bool,
    stream: StreamBinarizer,
    last_orientation: Option<f64>,
}

struct Stopwatch {
    timings: Vec<StageTiming>,
    last: Instant,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            timings: Vec::with_capacity(STAGES.len() + 1),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            ms: (now - self.last).as_secs_f64() * 1e3,
        });
        self.last = now;
    }
}

impl Detector {
    pub fn new(config: Config) -> Result<Self> {
        config.validate()?;
        let connectivity = config.pipeline.connectivity()?;
        let stream = StreamBinarizer::new(config.pipeline.window);
        Ok(Self {
            config,
            connectivity,
            exec: Exec::default(),
            streaming: true,
            stream,
            last_orientation: None,
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self.stream = self.stream.with_exec(exec);
        self
    }

    /// With streaming off every frame is thresholded with its own grid.
    pub fn with_streaming(mut self, streaming: bool) -> Self {
        self.streaming = streaming;
        self
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn last_orientation(&self) -> Option<f64> {
        self.last_orientation
    }

    fn binarize(&mut self, grey: &Frame) -> Result<Frame> {
        let p = &self.config.pipeline;
        match p.binarize {
            Binarize::Interp if self.streaming => self.stream.push(grey).map(|(b, _)| b),
            Binarize::Interp => {
                let grid = threshold::compute_grid(grey, p.window)?;
                threshold::apply_interpolated_with(grey, &grid, self.exec)
            }
            Binarize::Window => {
                let grid = threshold::compute_grid(grey, p.window)?;
                threshold::apply_windowed(grey, &grid)
            }
            Binarize::Local => threshold::apply_local(grey, p.local_radius),
            Binarize::Global => {
                let (lo, hi) = grey
                    .data()
                    .iter()
                    .fold((255u8, 0u8), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                let cell = threshold::Cell { min: lo, max: hi };
                threshold::apply_global(grey, cell.th())
            }
        }
    }

    /// Binary image after the seven image stages, with component statistics.
    fn image_stages(&mut self, frame: &Frame, sw: &mut Stopwatch) -> Result<(Frame, Labeling)> {
        let exec = self.exec;
        let grey = if frame.kind() == crate::FrameKind::Rgb {
            preprocess::to_greyscale_with(frame, exec)?
        } else {
            frame.clone()
        };
        sw.lap(STAGES[0]);
        let blurred = preprocess::gaussian_5x5_with(&grey, exec)?;
        sw.lap(STAGES[1]);
        let binary = self.binarize(&blurred)?;
        sw.lap(STAGES[2]);
        let eroded = preprocess::erode_3x3_with(&binary, exec)?;
        sw.lap(STAGES[3]);
        let median = preprocess::median_5x5_with(&eroded, exec)?;
        sw.lap(STAGES[4]);
        let dilated = preprocess::dilate_3x3_with(&median, exec)?;
        sw.lap(STAGES[5]);
        let labels = ccl::label_with_runs(&dilated, self.connectivity)?;
        sw.lap(STAGES[6]);
        Ok((dilated, labels))
    }

    /// Runs the whole pipeline on one frame at the given altitude.
    pub fn process(&mut self, frame: &Frame, altitude_m: f64) -> Result<FrameResult> {
        let mut sw = Stopwatch::new();
        let (binary, labels) = self.image_stages(frame, &mut sw)?;
        let (detections, assembly, pose) = self.analyse(&labels, altitude_m)?;
        sw.lap(ANALYSIS_STAGE);
        Ok(FrameResult {
            frame_index: frame.frame_index,
            binary,
            components: labels.components,
            detections,
            assembly,
            pose,
            timings: sw.timings,
        })
    }

    #[allow(clippy::type_complexity)]
    fn analyse(
        &mut self,
        labels: &Labeling,
        altitude_m: f64,
    ) -> Result<(Vec<ShapeDetection>, Option<Assembly>, Option<MarkerPose>)> {
        let cfg = &self.config;
        let expected =
            shapes::expected_sizes(&cfg.marker_spec, &cfg.camera, altitude_m)?.shrunk(cfg.thresholds.edge_shrink_px);
        let classified: Vec<ShapeDetection> = labels
            .components
            .iter()
            .filter_map(|c| shapes::classify_labeled(labels, c, &cfg.marker_spec, &expected, &cfg.thresholds))
            .collect();
        let assembly = marker::assemble(&classified, altitude_m, cfg.marker_spec.nominal_axis_deg, &cfg.marker);

        let circles: Vec<&ShapeDetection> = classified
            .iter()
            .filter(|d| d.shape_class == ShapeClass::LargeCircle)
            .collect();
        let mut detections: Vec<ShapeDetection> = classified
            .iter()
            .filter(|d| {
                d.shape_class == ShapeClass::LargeCircle || circles.iter().any(|c| c.bbox().contains(d.bbox()))
            })
            .cloned()
            .collect();
        if let Some(Assembly::SmallCircleOnly { small_circle }) = &assembly {
            if !detections.contains(small_circle) {
                detections.push(small_circle.clone());
            }
        }

        let pose = match &assembly {
            Some(a) => {
                let p = marker::estimate_pose(a, altitude_m, &cfg.camera, self.last_orientation)?;
                if let Assembly::Full { orientation_deg, .. } = a {
                    self.last_orientation = Some(*orientation_deg);
                }
                Some(p)
            }
            None => None,
        };
        Ok((detections, assembly, pose))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::MarkerSpec;
    use crate::synth::{render, ScenePose};

    #[test]
    fn centred_marker_gives_full_fix() {
        let cfg = Config::default();
        let (frame, truth) = render(&MarkerSpec::default(), &cfg.camera, &ScenePose::default(), 3).unwrap();
        let mut det = Detector::new(cfg).unwrap();
        let r = det.process(&frame, 1.0).unwrap();
        let pose = r.pose.expect("marker fix");
        assert_eq!(pose.source, marker::PoseSource::FullMarker);
        assert!((pose.centre_px.0 - truth.centre_px.0).abs() < 0.5);
        assert!((pose.centre_px.1 - truth.centre_px.1).abs() < 0.5);
        assert!(pose.orientation_deg.unwrap().abs() < 1.0);
        let names: Vec<&str> = r.timings.iter().map(|t| t.stage.as_str()).collect();
        assert_eq!(&names[..7], &STAGES);
    }

    #[test]
    fn rejects_bad_altitude() {
        let cfg = Config::default();
        let (frame, _) = render(&MarkerSpec::default(), &cfg.camera, &ScenePose::default(), 3).unwrap();
        let mut det = Detector::new(cfg).unwrap();
        assert!(det.process(&frame, 0.0).is_err());
    }
}
