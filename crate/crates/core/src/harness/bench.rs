//! Per-stage latency and end-to-end throughput on synthesized frames.

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::pipeline::{Detector, ANALYSIS_STAGE, STAGES};
use crate::synth::{self, CorpusRecipe};

pub const MIN_FRAMES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    #[serde(flatten)]
    pub latency: Percentiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub parallel: bool,
    pub stages: Vec<StageReport>,
    pub end_to_end: Percentiles,
    pub total_s: f64,
    pub fps: f64,
}

/// Nearest-rank percentile of unsorted samples.
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn summarize(samples: &[f64]) -> Percentiles {
    Percentiles {
        median_ms: percentile(samples, 0.5),
        p95_ms: percentile(samples, 0.95),
    }
}

/// Renders `n` corpus frames at `width`×`height` and times the pipeline on
/// each. Rendering is not timed.
pub fn run(config: &Config, width: usize, height: usize, n: usize, seed: u64, exec: Exec) -> Result<BenchReport> {
    if n < MIN_FRAMES {
        return Err(Error::Input(format!("bench needs at least {MIN_FRAMES} frames, got {n}")));
    }
    let mut config = config.clone();
    let factor = width as f64 / config.camera.width as f64;
    config.camera = config.camera.scaled(factor);
    config.camera.width = width;
    config.camera.height = height;
    let recipe = CorpusRecipe::default();
    let mut detector = Detector::new(config.clone())?.with_exec(exec);

    let names: Vec<&str> = STAGES.iter().copied().chain([ANALYSIS_STAGE]).collect();
    let mut per_stage: Vec<Vec<f64>> = vec![Vec::with_capacity(n); names.len()];
    let mut totals = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let (frame, truth) = synth::corpus_frame(&recipe, &config.marker_spec, &config.camera, seed, i)?;
        let result = detector.process(&frame, truth.pose.altitude)?;
        for (slot, t) in per_stage.iter_mut().zip(&result.timings) {
            slot.push(t.ms);
        }
        totals.push(result.total_ms());
    }
    let total_s = totals.iter().sum::<f64>() / 1e3;
    Ok(BenchReport {
        width,
        height,
        frames: n,
        parallel: exec.is_parallel(),
        stages: names
            .iter()
            .zip(&per_stage)
            .map(|(name, s)| StageReport {
                stage: name.to_string(),
                latency: summarize(s),
            })
            .collect(),
        end_to_end: summarize(&totals),
        total_s,
        fps: n as f64 / total_s,
    })
}

impl BenchReport {
    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{}x{}, {} frames, {}\n{:<10} {:>10} {:>10}\n",
            self.width,
            self.height,
            self.frames,
            if self.parallel { "parallel" } else { "sequential" },
            "stage",
            "median ms",
            "p95 ms"
        );
        for st in &self.stages {
            s.push_str(&format!(
                "{:<10} {:>10.3} {:>10.3}\n",
                st.stage, st.latency.median_ms, st.latency.p95_ms
            ));
        }
        s.push_str(&format!(
            "{:<10} {:>10.3} {:>10.3}\nfps {:.1}\n",
            "total", self.end_to_end.median_ms, self.end_to_end.p95_ms, self.fps
        ));
        s
    }
}
