//! Offline replay of recorded landmark streams through the full pipeline,
//! with transcript capture and metric computation against ground truth.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::Model;
use crate::debounce::BoundaryCause;
use crate::executor::Scene;
use crate::landmark::{GestureLabel, RawFrame};
use crate::lexicon::Dictionary;
use crate::metrics::{flip_rate, flips, percentile, wer};
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError, PipelineEvent, StageTimings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruth {
    /// Expected committed characters, concatenated in order.
    pub chars: String,
    /// Expected raw (pre-refinement) words.
    pub words: Vec<String>,
    pub instructions: Vec<String>,
}

/// A recorded frame; `label` is the gesture being shown, when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ScriptFrame<S> {
    #[serde(flatten)]
    pub raw: RawFrame<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<GestureLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ReplayScript<S> {
    pub stream: Vec<ScriptFrame<S>>,
    pub ground_truth: GroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub accepted_frames: usize,
    pub errors: usize,
    pub top1_accuracy: Option<f64>,
    pub wer: Option<f64>,
    pub word_accuracy: Option<f64>,
    pub instruction_exact_match: Option<f64>,
    pub chars: String,
    pub chars_match: bool,
    pub words: Vec<String>,
    pub refined_words: Vec<String>,
    pub instructions: Vec<String>,
    pub exec_success_rate: Option<f64>,
    /// Flip rate of accepted per-frame predictions.
    pub flip_rate: Option<f64>,
    /// Flip rate of the committed label held at each accepted frame, over the same denominator.
    pub debounced_flip_rate: Option<f64>,
    pub latency_p50_us: Option<f64>,
    pub latency_p95_us: Option<f64>,
    pub latency_p99_us: Option<f64>,
    pub classify_p50_us: Option<f64>,
}

impl MetricsReport {
    /// Copy with wall-clock fields cleared.
    pub fn without_timing(&self) -> Self {
        MetricsReport {
            latency_p50_us: None,
            latency_p95_us: None,
            latency_p99_us: None,
            classify_p50_us: None,
            ..self.clone()
        }
    }

    pub fn to_table(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "null".to_string(), |x| format!("{x:.4}"))
        }
        let rows: Vec<(&str, String)> = vec![
            ("frames", self.frames.to_string()),
            ("accepted_frames", self.accepted_frames.to_string()),
            ("errors", self.errors.to_string()),
            ("top1_accuracy", opt(self.top1_accuracy)),
            ("wer", opt(self.wer)),
            ("word_accuracy", opt(self.word_accuracy)),
            ("instruction_exact_match", opt(self.instruction_exact_match)),
            ("exec_success_rate", opt(self.exec_success_rate)),
            ("chars", format!("{:?}", self.chars)),
            ("chars_match", self.chars_match.to_string()),
            ("words", self.words.join(" ")),
            ("refined_words", self.refined_words.join(" ")),
            ("instructions", self.instructions.join(" | ")),
            ("flip_rate", opt(self.flip_rate)),
            ("debounced_flip_rate", opt(self.debounced_flip_rate)),
            ("latency_p50_us", opt(self.latency_p50_us)),
            ("latency_p95_us", opt(self.latency_p95_us)),
            ("latency_p99_us", opt(self.latency_p99_us)),
            ("classify_p50_us", opt(self.classify_p50_us)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<width$}  {v}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ReplayOutcome {
    pub report: MetricsReport,
    /// Every pipeline event in order, timing fields zeroed.
    pub transcript: Vec<PipelineEvent>,
    pub timings: Vec<StageTimings>,
}

/// Drives `script` through a fresh pipeline on the calling thread, then flushes.
pub fn replay<S: Scalar>(
    script: &ReplayScript<S>,
    model: Arc<Model<S>>,
    dictionary: Arc<Dictionary>,
    scene: Scene,
    cfg: PipelineConfig,
) -> Result<ReplayOutcome, PipelineError> {
    let cfg = PipelineConfig { require_confirm: false, ..cfg };
    let mut pipeline = Pipeline::new(model, dictionary, scene, cfg)?;
    let mut transcript = Vec::new();
    let mut timings = Vec::with_capacity(script.stream.len());

    let mut raw_labels = Vec::new();
    let mut held_labels = Vec::new();
    let mut held: Option<GestureLabel> = None;
    let mut labeled = 0usize;
    let mut correct = 0usize;

    for frame in &script.stream {
        let events = pipeline.process_raw(frame.raw.clone());
        timings.push(pipeline.last_timings());
        let mut accepted_label = None;
        for ev in &events {
            match ev {
                PipelineEvent::Prediction(p) => {
                    if let (Some(truth), Some(pred)) = (frame.label, p.label) {
                        labeled += 1;
                        correct += usize::from(truth == pred);
                    }
                    if p.accepted {
                        accepted_label = p.label;
                    }
                }
                PipelineEvent::Char(c) => held = GestureLabel::from_char(c.char),
                PipelineEvent::Word { boundary, .. } if boundary.cause == BoundaryCause::SpaceGesture => {
                    held = Some(GestureLabel::Space)
                }
                _ => {}
            }
        }
        if let Some(l) = accepted_label {
            raw_labels.push(l);
            if let Some(h) = held {
                held_labels.push(h);
            }
        }
        transcript.extend(events.iter().map(PipelineEvent::without_timing));
    }
    transcript.extend(pipeline.flush());

    let mut errors = 0;
    let mut chars = String::new();
    let mut words = Vec::new();
    let mut refined_words = Vec::new();
    let mut instructions = Vec::new();
    let mut execs = Vec::new();
    for ev in &transcript {
        match ev {
            PipelineEvent::Error { .. } => errors += 1,
            PipelineEvent::Char(c) => chars.push(c.char),
            PipelineEvent::Word { boundary, refined } if !boundary.raw.is_empty() => {
                words.push(boundary.raw.clone());
                if let Some(r) = refined {
                    refined_words.push(r.word.clone());
                }
            }
            PipelineEvent::Instruction(i) => instructions.push(i.text.clone()),
            PipelineEvent::Exec(e) => execs.push(e.success),
            _ => {}
        }
    }

    let gt = &script.ground_truth;
    let positional = |expected: &[String], got: &[String]| {
        expected.iter().zip(got).filter(|(a, b)| a == b).count() as f64 / expected.len() as f64
    };
    let latencies: Vec<f64> = timings.iter().map(|t| t.total_us).collect();
    let classify: Vec<f64> = timings.iter().map(|t| t.classify_us).collect();
    let debounced_flip_rate = (raw_labels.len() >= 2).then(|| flips(&held_labels) as f64 / (raw_labels.len() - 1) as f64);

    let report = MetricsReport {
        frames: script.stream.len(),
        accepted_frames: raw_labels.len(),
        errors,
        top1_accuracy: (labeled > 0).then(|| correct as f64 / labeled as f64),
        wer: wer(&gt.words, &words).ok(),
        word_accuracy: (!words.is_empty() && !gt.words.is_empty()).then(|| positional(&gt.words, &words)),
        instruction_exact_match: (!gt.instructions.is_empty()).then(|| positional(&gt.instructions, &instructions)),
        chars_match: chars == gt.chars,
        chars,
        words,
        refined_words,
        instructions,
        exec_success_rate: (!execs.is_empty())
            .then(|| execs.iter().filter(|&&s| s).count() as f64 / execs.len() as f64),
        flip_rate: flip_rate(&raw_labels).ok(),
        debounced_flip_rate,
        latency_p50_us: percentile(&latencies, 50.0),
        latency_p95_us: percentile(&latencies, 95.0),
        latency_p99_us: percentile(&latencies, 99.0),
        classify_p50_us: percentile(&classify, 50.0),
    };
    Ok(ReplayOutcome { report, transcript, timings })
}
