//! Per-stage latency measurement over a synthetic frame stream.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{Model, PredictionEvent};
use crate::debounce::{DebounceConfig, Debouncer};
use crate::landmark::{normalize, GestureLabel, LandmarkFrame};
use crate::metrics::percentile;
use crate::prototypes::spell_stream;
use crate::landmark::validate_frame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub frames: usize,
    pub normalize_p50_us: f64,
    pub classify_p50_us: f64,
    pub debounce_p50_us: f64,
    /// normalize + classify + debounce for one frame.
    pub step_p50_us: f64,
    pub step_p99_us: f64,
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        format!(
            "frames           {}\nnormalize_p50_us {:.3}\nclassify_p50_us  {:.3}\ndebounce_p50_us  {:.3}\nstep_p50_us      {:.3}\nstep_p99_us      {:.3}\n",
            self.frames,
            self.normalize_p50_us,
            self.classify_p50_us,
            self.debounce_p50_us,
            self.step_p50_us,
            self.step_p99_us
        )
    }
}

fn us(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

/// Times each stage on `frames` spelled frames cycling through the alphabet.
pub fn run<S: Scalar>(model: &Model<S>, frames: usize, seed: u64) -> BenchReport {
    let per_label = 12;
    let mut sequence = Vec::new();
    while sequence.len() * per_label < frames.max(1) {
        sequence.extend(GestureLabel::ALL);
    }
    let stream: Vec<LandmarkFrame<S>> = spell_stream::<S>(&sequence, per_label, 0.02, seed)
        .into_iter()
        .take(frames.max(1))
        .map(|f| validate_frame(f.raw, None).expect("synthetic frames are valid"))
        .collect();

    let mut debouncer = Debouncer::new(DebounceConfig::default()).expect("default config is valid");
    let (mut norm, mut class, mut deb, mut step) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for frame in &stream {
        let t0 = Instant::now();
        let features = normalize(black_box(frame)).expect("synthetic frames normalize");
        let n = us(t0);
        let t1 = Instant::now();
        let c = model.classify(black_box(features.as_slice())).expect("feature length matches");
        let k = us(t1);
        let ev = PredictionEvent::from_classification(frame.seq, frame.ts_ms, &c, n + k);
        let t2 = Instant::now();
        black_box(debouncer.step(&ev).expect("seq increases"));
        let d = us(t2);
        norm.push(n);
        class.push(k);
        deb.push(d);
        step.push(us(t0));
    }
    let p50 = |v: &[f64]| percentile(v, 50.0).unwrap_or(0.0);
    BenchReport {
        frames: stream.len(),
        normalize_p50_us: p50(&norm),
        classify_p50_us: p50(&class),
        debounce_p50_us: p50(&deb),
        step_p50_us: p50(&step),
        step_p99_us: percentile(&step, 99.0).unwrap_or(0.0),
    }
}
