//! Size, memory and latency report for a model artifact.
//!
//! Two paths are timed separately. Detection time covers scaled features to
//! probabilities, one inference per sample. Overall speed covers raw landmark
//! frames through scaling and inference, measured as frames per second.

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::landmarks::assemble_feature;
use crate::model::{audit_size, ModelArtifact};

pub const MIN_ITERATIONS: usize = 1_000;
pub const MIN_WARMUP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub iterations: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            iterations: MIN_ITERATIONS,
            warmup: MIN_WARMUP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model_size_bytes: usize,
    pub parameter_count: usize,
    pub parameter_memory_bytes: usize,
    pub detection_ms_median: f64,
    pub detection_ms_p95: f64,
    pub fps: f64,
    pub hardware: String,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 7] = [
            ("Model size (bytes)", self.model_size_bytes.to_string()),
            ("Parameters", self.parameter_count.to_string()),
            ("Parameter memory (bytes)", self.parameter_memory_bytes.to_string()),
            ("Detection time median (ms)", format!("{:.4}", self.detection_ms_median)),
            ("Detection time p95 (ms)", format!("{:.4}", self.detection_ms_p95)),
            ("Overall speed (fps)", format!("{:.1}", self.fps)),
            ("Hardware", self.hardware.clone()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<28} {v}");
        }
        s
    }
}

/// Nearest-rank percentile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn hardware_descriptor() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_owned())
        })
        .unwrap_or_else(|| "unknown CPU".to_owned());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cpu}, {threads} hardware threads, {}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

pub fn bench(artifact: &ModelArtifact, probe: &LabeledDataset, cfg: BenchConfig) -> Result<BenchReport> {
    if probe.is_empty() {
        return Err(Error::Dataset("benchmark probe set is empty".into()));
    }
    if cfg.iterations < MIN_ITERATIONS || cfg.warmup < MIN_WARMUP {
        return Err(Error::InvalidParameter(format!(
            "benchmark needs >= {MIN_ITERATIONS} iterations and >= {MIN_WARMUP} warm-up runs, got {} and {}",
            cfg.iterations, cfg.warmup
        )));
    }
    let predictor = Predictor::new(artifact)?;
    let net = predictor.network();
    let mode = predictor.feature_mode();
    let frames = probe.frames();
    let inputs: Vec<_> = frames.iter().map(|f| assemble_feature(f, mode).to_input()).collect();

    for i in 0..cfg.warmup {
        black_box(net.forward(&inputs[i % inputs.len()])?);
    }
    let mut detection = Vec::with_capacity(cfg.iterations);
    for i in 0..cfg.iterations {
        let x = &inputs[i % inputs.len()];
        let start = Instant::now();
        black_box(net.forward(black_box(x))?);
        detection.push(start.elapsed().as_secs_f64() * 1e3);
    }
    detection.sort_by(f64::total_cmp);

    for i in 0..cfg.warmup {
        black_box(predictor.predict(&frames[i % frames.len()])?);
    }
    let start = Instant::now();
    for i in 0..cfg.iterations {
        black_box(predictor.predict(black_box(&frames[i % frames.len()]))?);
    }
    let elapsed = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);

    Ok(BenchReport {
        model_size_bytes: audit_size(artifact),
        parameter_count: artifact.param_count(),
        parameter_memory_bytes: artifact.param_memory_bytes(),
        detection_ms_median: percentile(&detection, 0.5),
        detection_ms_p95: percentile(&detection, 0.95),
        fps: cfg.iterations as f64 / elapsed,
        hardware: hardware_descriptor(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 50.0);
        assert_eq!(percentile(&v, 0.95), 95.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn rejects_short_runs_and_empty_probes() {
        let art = ModelArtifact::initialized(&crate::model::ModelConfig::default(), 1).unwrap();
        assert!(bench(&art, &LabeledDataset::default(), BenchConfig::default()).is_err());
        let ds = crate::dataset::gen_synthetic(&crate::dataset::SynthSpec {
            n_subjects: 1,
            frames_per_subject_per_state: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(bench(&art, &ds, BenchConfig { iterations: 10, warmup: 100 }).is_err());
    }
}
