//! Per-session processing chain: normalize, classify, debounce, refine,
//! synthesize and execute, emitting every intermediate event in causal order.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{Model, PredictionEvent};
use crate::debounce::{CharEvent, DebounceConfig, DebounceError, DebounceEvent, Debouncer, WordBoundaryEvent};
use crate::executor::{execute, CommandBuilder, CommandError, ExecResult, Grammar, Instruction, Scene};
use crate::landmark::{normalize, validate_frame, FrameError, LandmarkFrame, RawFrame};
use crate::lexicon::{refine, CutoffPolicy, Dictionary, LexiconError, RefinedWord};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedJson,
    MalformedMessage,
    MalformedFrame,
    DegenerateHand,
    OutOfOrder,
    UnknownType,
    InvalidConfig,
    UnknownVerb,
    UnknownInstruction,
    LineTooLong,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::MalformedJson => "malformed_json",
            ErrorCode::MalformedMessage => "malformed_message",
            ErrorCode::MalformedFrame => "malformed_frame",
            ErrorCode::DegenerateHand => "degenerate_hand",
            ErrorCode::OutOfOrder => "out_of_order",
            ErrorCode::UnknownType => "unknown_type",
            ErrorCode::InvalidConfig => "invalid_config",
            ErrorCode::UnknownVerb => "unknown_verb",
            ErrorCode::UnknownInstruction => "unknown_instruction",
            ErrorCode::LineTooLong => "line_too_long",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PipelineEvent {
    Prediction(PredictionEvent),
    Char(CharEvent),
    Word {
        #[serde(flatten)]
        boundary: WordBoundaryEvent,
        /// `None` when the boundary closed an empty word.
        refined: Option<RefinedWord>,
    },
    Instruction(Instruction),
    Exec(ExecResult),
    Error {
        seq: Option<u64>,
        code: ErrorCode,
        message: String,
    },
}

impl PipelineEvent {
    fn error(seq: Option<u64>, code: ErrorCode, message: impl Into<String>) -> Self {
        PipelineEvent::Error { seq, code, message: message.into() }
    }

    /// Copy with wall-clock fields zeroed, for deterministic comparison.
    pub fn without_timing(&self) -> Self {
        match self {
            PipelineEvent::Prediction(p) => PipelineEvent::Prediction(PredictionEvent { latency_us: 0.0, ..p.clone() }),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub debounce: DebounceConfig,
    pub cutoff: CutoffPolicy,
    pub grammar: Grammar,
    /// Overrides the model's confidence threshold when set.
    pub threshold: Option<f64>,
    /// Hold synthesized instructions until approved instead of executing them.
    pub require_confirm: bool,
}

/// Wall-clock cost of the last processed frame, in microseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub normalize_us: f64,
    pub classify_us: f64,
    pub debounce_us: f64,
    pub total_us: f64,
}

#[derive(Debug, Clone)]
pub struct Pipeline<S> {
    model: Arc<Model<S>>,
    dictionary: Arc<Dictionary>,
    cfg: PipelineConfig,
    threshold: S,
    debouncer: Debouncer,
    commands: CommandBuilder,
    scene: Scene,
    pending: Vec<Instruction>,
    last_seq: Option<u64>,
    last_ts: u64,
    timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Debounce(#[from] DebounceError),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Scene(#[from] crate::executor::SceneError),
}

fn elapsed_us(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

impl<S: Scalar> Pipeline<S> {
    pub fn new(
        model: Arc<Model<S>>,
        dictionary: Arc<Dictionary>,
        scene: Scene,
        cfg: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        scene.validate()?;
        let debouncer = Debouncer::new(cfg.debounce)?;
        let threshold = Self::resolve_threshold(&model, cfg.threshold)?;
        Ok(Pipeline {
            commands: CommandBuilder::new(cfg.grammar.clone()),
            model,
            dictionary,
            cfg,
            threshold,
            debouncer,
            scene,
            pending: Vec::new(),
            last_seq: None,
            last_ts: 0,
            timings: StageTimings::default(),
        })
    }

    fn resolve_threshold(model: &Model<S>, t: Option<f64>) -> Result<S, PipelineError> {
        match t {
            Some(t) if !(0.0..=1.0).contains(&t) => Err(PipelineError::Threshold(t)),
            Some(t) => Ok(S::lit(t)),
            None => Ok(model.threshold()),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn debouncer(&self) -> &Debouncer {
        &self.debouncer
    }

    pub fn commands(&self) -> &CommandBuilder {
        &self.commands
    }

    pub fn pending(&self) -> &[Instruction] {
        &self.pending
    }

    pub fn last_timings(&self) -> StageTimings {
        self.timings
    }

    /// Applies a new configuration without discarding in-flight state.
    /// The grammar is only swapped while the command buffer is empty.
    pub fn reconfigure(&mut self, cfg: PipelineConfig) -> Result<(), PipelineError> {
        let threshold = Self::resolve_threshold(&self.model, cfg.threshold)?;
        self.debouncer.reconfigure(cfg.debounce)?;
        self.threshold = threshold;
        if cfg.grammar != self.cfg.grammar && self.commands.buffer().words.is_empty() {
            self.commands = CommandBuilder::new(cfg.grammar.clone());
        }
        self.cfg = cfg;
        Ok(())
    }

    /// Shape checks followed by `process_frame`.
    pub fn process_raw(&mut self, raw: RawFrame<S>) -> Vec<PipelineEvent> {
        let seq = raw.seq;
        match validate_frame(raw, None) {
            Ok(frame) => self.process_frame(&frame),
            Err(e) => vec![PipelineEvent::error(Some(seq), ErrorCode::MalformedFrame, e.to_string())],
        }
    }

    pub fn process_frame(&mut self, frame: &LandmarkFrame<S>) -> Vec<PipelineEvent> {
        let start = Instant::now();
        if let Some(last) = self.last_seq {
            if frame.seq <= last {
                return vec![PipelineEvent::error(
                    Some(frame.seq),
                    ErrorCode::OutOfOrder,
                    format!("seq {} does not follow {last}", frame.seq),
                )];
            }
        }
        self.last_seq = Some(frame.seq);
        self.last_ts = frame.ts_ms;
        let mut out = Vec::new();

        let features = normalize(frame);
        let normalize_us = elapsed_us(start);
        let classify_start = Instant::now();
        let prediction = match features {
            Ok(f) => match self.model.classify(f.as_slice()) {
                Ok(c) => {
                    let mut p = PredictionEvent::from_classification(frame.seq, frame.ts_ms, &c, 0.0);
                    p.accepted = c.confidence >= self.threshold;
                    p
                }
                Err(e) => {
                    out.push(PipelineEvent::error(Some(frame.seq), ErrorCode::MalformedFrame, e.to_string()));
                    PredictionEvent::rejected(frame.seq, frame.ts_ms, 0.0)
                }
            },
            Err(e) => {
                let code = match e {
                    FrameError::DegenerateHand { .. } => ErrorCode::DegenerateHand,
                    FrameError::Malformed(_) => ErrorCode::MalformedFrame,
                };
                out.push(PipelineEvent::error(Some(frame.seq), code, e.to_string()));
                PredictionEvent::rejected(frame.seq, frame.ts_ms, 0.0)
            }
        };
        let classify_us = elapsed_us(classify_start);
        let prediction = PredictionEvent { latency_us: normalize_us + classify_us, ..prediction };
        // An unusable frame still occupies a window slot; only report predictions that exist.
        if out.is_empty() {
            out.push(PipelineEvent::Prediction(prediction.clone()));
        }

        let debounce_start = Instant::now();
        let debounced = self.debouncer.step(&prediction);
        let debounce_us = elapsed_us(debounce_start);
        match debounced {
            Ok(events) => {
                for ev in events {
                    match ev {
                        DebounceEvent::Char(c) => out.push(PipelineEvent::Char(c)),
                        DebounceEvent::Word(w) => self.handle_word(w, &mut out),
                    }
                }
            }
            Err(e) => out.push(PipelineEvent::error(Some(frame.seq), ErrorCode::OutOfOrder, e.to_string())),
        }
        self.timings = StageTimings { normalize_us, classify_us, debounce_us, total_us: elapsed_us(start) };
        out
    }

    fn handle_word(&mut self, boundary: WordBoundaryEvent, out: &mut Vec<PipelineEvent>) {
        let refined = match refine(&boundary.raw, &self.dictionary, self.cfg.cutoff) {
            Ok(r) => Some(r),
            Err(LexiconError::EmptyInput) => None,
            Err(e) => {
                out.push(PipelineEvent::error(None, ErrorCode::MalformedMessage, e.to_string()));
                None
            }
        };
        let ts = boundary.ts_ms;
        out.push(PipelineEvent::Word { boundary, refined: refined.clone() });
        if let Some(r) = refined.filter(|r| r.accepted) {
            match self.commands.word_accepted(r, ts) {
                Ok(Some(instr)) => self.dispatch(instr, out),
                Ok(None) => {}
                Err(e) => out.push(PipelineEvent::error(None, ErrorCode::UnknownVerb, e.to_string())),
            }
        }
    }

    fn dispatch(&mut self, instr: Instruction, out: &mut Vec<PipelineEvent>) {
        out.push(PipelineEvent::Instruction(instr.clone()));
        if self.cfg.require_confirm {
            self.pending.push(instr);
        } else {
            out.push(PipelineEvent::Exec(self.run(&instr)));
        }
    }

    fn run(&mut self, instr: &Instruction) -> ExecResult {
        let result = execute(&self.scene, instr);
        self.scene = result.final_scene.clone();
        result
    }

    /// Closes the in-progress word and synthesizes whatever the command buffer holds.
    pub fn flush(&mut self) -> Vec<PipelineEvent> {
        let mut out = Vec::new();
        if let Some(w) = self.debouncer.flush() {
            self.handle_word(w, &mut out);
        }
        if !self.commands.buffer().words.is_empty() {
            match self.commands.synthesize(self.last_ts) {
                Ok(instr) => self.dispatch(instr, &mut out),
                Err(e) => {
                    let code = match e {
                        CommandError::UnknownVerb(_) => ErrorCode::UnknownVerb,
                        _ => ErrorCode::MalformedMessage,
                    };
                    out.push(PipelineEvent::error(None, code, e.to_string()));
                    self.commands.clear();
                }
            }
        }
        out
    }

    /// Drops all recognition state: window, word, command buffer and pending instructions.
    pub fn reset(&mut self) {
        self.debouncer.flush();
        self.commands.clear();
        self.pending.clear();
        self.last_seq = None;
    }

    /// Executes a held instruction.
    pub fn approve(&mut self, id: u64) -> Vec<PipelineEvent> {
        match self.pending.iter().position(|i| i.id == id) {
            Some(pos) => {
                let instr = self.pending.remove(pos);
                vec![PipelineEvent::Exec(self.run(&instr))]
            }
            None => vec![PipelineEvent::error(None, ErrorCode::UnknownInstruction, format!("no pending instruction {id}"))],
        }
    }

    pub fn abort(&mut self, id: u64) -> Vec<PipelineEvent> {
        match self.pending.iter().position(|i| i.id == id) {
            Some(pos) => {
                self.pending.remove(pos);
                Vec::new()
            }
            None => vec![PipelineEvent::error(None, ErrorCode::UnknownInstruction, format!("no pending instruction {id}"))],
        }
    }
}
