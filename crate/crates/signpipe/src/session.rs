//! The line protocol: one session per connection, one JSON object per line in
//! each direction. Transport code hands raw lines to [`Session::handle_line`]
//! and writes back whatever it returns.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde_json::{json, Map, Value};
use signpipe_core::pipeline::{ErrorCode, PipelineError};
use signpipe_core::{Dictionary, Model64, Pipeline64, PipelineConfig, PipelineEvent, RawFrame, Scene};

/// Everything a new session is built from; shared read-only by all sessions.
#[derive(Debug)]
pub struct SessionContext {
    pub model: Arc<Model64>,
    pub dictionary: Arc<Dictionary>,
    pub scene: Scene,
    pub pipeline: PipelineConfig,
    pub max_line_bytes: usize,
    next_id: AtomicU64,
}

impl SessionContext {
    pub fn new(
        model: Arc<Model64>,
        dictionary: Arc<Dictionary>,
        scene: Scene,
        pipeline: PipelineConfig,
        max_line_bytes: usize,
    ) -> Result<Self, PipelineError> {
        // Fail at startup rather than on the first connection.
        Pipeline64::new(model.clone(), dictionary.clone(), scene.clone(), pipeline.clone())?;
        Ok(SessionContext { model, dictionary, scene, pipeline, max_line_bytes, next_id: AtomicU64::new(1) })
    }

    pub fn open(&self) -> Session {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let pipeline = Pipeline64::new(self.model.clone(), self.dictionary.clone(), self.scene.clone(), self.pipeline.clone())
            .expect("context was validated at construction");
        Session { id, pipeline, n: 0, max_line_bytes: self.max_line_bytes, stats: SessionStats::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SessionStats {
    pub lines: u64,
    pub frames: u64,
    pub errors: u64,
    pub instructions: u64,
}

#[derive(Debug)]
pub struct Session {
    id: u64,
    pipeline: Pipeline64,
    /// Per-session outbound message counter.
    n: u64,
    max_line_bytes: usize,
    stats: SessionStats,
}

const CONFIG_KEYS: [&str; 5] = ["debounce", "threshold", "cutoff", "grammar", "require_confirm"];

impl Session {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn stats(&self) -> SessionStats {
        self.stats
    }

    pub fn max_line_bytes(&self) -> usize {
        self.max_line_bytes
    }

    pub fn pipeline(&self) -> &Pipeline64 {
        &self.pipeline
    }

    /// Answers one inbound line (without its newline). Always returns at least one message.
    pub fn handle_line(&mut self, line: &[u8]) -> Vec<String> {
        self.stats.lines += 1;
        if line.len() > self.max_line_bytes {
            return self.too_long(line.len());
        }
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        let text = match std::str::from_utf8(line) {
            Ok(t) => t,
            Err(e) => return vec![self.error(None, ErrorCode::MalformedJson, format!("invalid UTF-8: {e}"))],
        };
        let value: Value = match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => return vec![self.error(None, ErrorCode::MalformedJson, e.to_string())],
        };
        let Value::Object(msg) = value else {
            return vec![self.error(None, ErrorCode::MalformedMessage, "expected a JSON object")];
        };
        let kind = match msg.get("type") {
            Some(Value::String(k)) => k.clone(),
            Some(_) => return vec![self.error(None, ErrorCode::MalformedMessage, "\"type\" must be a string")],
            None => return vec![self.error(None, ErrorCode::MalformedMessage, "missing \"type\"")],
        };
        match kind.as_str() {
            "frame" => self.frame(msg),
            "flush" => {
                let events = self.pipeline.flush();
                self.finish(events, "flush")
            }
            "reset" => {
                self.pipeline.reset();
                self.finish(Vec::new(), "reset")
            }
            "config" => self.config(msg),
            other => vec![self.error(None, ErrorCode::UnknownType, format!("unknown message type {other:?}"))],
        }
    }

    /// For transports that drop an oversized line before it is fully buffered.
    pub fn too_long(&mut self, len: usize) -> Vec<String> {
        let message = format!("line of {len} bytes exceeds the {} byte limit", self.max_line_bytes);
        vec![self.error(None, ErrorCode::LineTooLong, message)]
    }

    /// Connection closed: flush whatever is in flight.
    pub fn close(&mut self) -> Vec<String> {
        let events = self.pipeline.flush();
        events.iter().map(|e| self.event(e)).collect()
    }

    fn frame(&mut self, msg: Map<String, Value>) -> Vec<String> {
        let seq = msg.get("seq").and_then(Value::as_u64);
        let raw: RawFrame<f64> = match serde_json::from_value(Value::Object(msg)) {
            Ok(r) => r,
            Err(e) => return vec![self.error(seq, ErrorCode::MalformedFrame, e.to_string())],
        };
        self.stats.frames += 1;
        let events = self.pipeline.process_raw(raw);
        events.iter().map(|e| self.event(e)).collect()
    }

    fn config(&mut self, msg: Map<String, Value>) -> Vec<String> {
        let mut current = serde_json::to_value(self.pipeline.config()).expect("config serializes");
        let mut changed = false;
        let mut approve = None;
        let mut abort = None;
        for (key, value) in msg {
            match key.as_str() {
                "type" => {}
                "approve" | "abort" => match value.as_u64() {
                    Some(id) if key == "approve" => approve = Some(id),
                    Some(id) => abort = Some(id),
                    None => {
                        return vec![self.error(None, ErrorCode::InvalidConfig, format!("{key} takes an instruction id"))]
                    }
                },
                k if CONFIG_KEYS.contains(&k) => {
                    changed = true;
                    let slot = &mut current[k];
                    // Sections merge field by field; everything else is replaced.
                    match (slot, value) {
                        (Value::Object(dst), Value::Object(src)) if k == "debounce" || k == "grammar" => dst.extend(src),
                        (slot, value) => *slot = value,
                    }
                }
                other => {
                    return vec![self.error(None, ErrorCode::InvalidConfig, format!("unknown config field {other:?}"))]
                }
            }
        }
        if changed {
            let applied = serde_json::from_value::<PipelineConfig>(current)
                .map_err(|e| e.to_string())
                .and_then(|cfg| self.pipeline.reconfigure(cfg).map_err(|e| e.to_string()));
            if let Err(message) = applied {
                return vec![self.error(None, ErrorCode::InvalidConfig, message)];
            }
        }
        let mut events = Vec::new();
        if let Some(id) = approve {
            events.extend(self.pipeline.approve(id));
        }
        if let Some(id) = abort {
            events.extend(self.pipeline.abort(id));
        }
        self.finish(events, "config")
    }

    fn finish(&mut self, events: Vec<PipelineEvent>, request: &str) -> Vec<String> {
        let mut out: Vec<String> = events.iter().map(|e| self.event(e)).collect();
        out.push(self.stamp(json!({ "type": "ack", "request": request })));
        out
    }

    fn event(&mut self, ev: &PipelineEvent) -> String {
        match ev {
            PipelineEvent::Error { .. } => self.stats.errors += 1,
            PipelineEvent::Instruction(_) => self.stats.instructions += 1,
            _ => {}
        }
        let mut v = serde_json::to_value(ev).expect("events serialize");
        if matches!(ev, PipelineEvent::Error { .. }) {
            v["recoverable"] = Value::Bool(true);
        }
        self.stamp(v)
    }

    fn error(&mut self, seq: Option<u64>, code: ErrorCode, message: impl Into<String>) -> String {
        self.event(&PipelineEvent::Error { seq, code, message: message.into() })
    }

    fn stamp(&mut self, mut v: Value) -> String {
        self.n += 1;
        v["session"] = json!(self.id);
        v["n"] = json!(self.n);
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use signpipe_core::classifier::DEFAULT_THRESHOLD;
    use signpipe_core::GestureLabel;

    fn ctx() -> SessionContext {
        let model = Model64::zeros(GestureLabel::ALL.to_vec(), DEFAULT_THRESHOLD).unwrap();
        SessionContext::new(
            Arc::new(model),
            Arc::new(crate::defaults::dictionary()),
            crate::defaults::scene(),
            PipelineConfig::default(),
            4096,
        )
        .unwrap()
    }

    fn parse(lines: &[String]) -> Vec<Value> {
        lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect()
    }

    fn frame_line(seq: u64, points: usize) -> String {
        let pts: Vec<[f64; 3]> = (0..points).map(|i| [i as f64 * 0.01, 0.5 - i as f64 * 0.02, 0.0]).collect();
        json!({"type": "frame", "seq": seq, "ts_ms": seq * 33, "hand": "left", "pts": pts}).to_string()
    }

    #[test]
    fn frame_gets_prediction() {
        let ctx = ctx();
        let mut s = ctx.open();
        let out = parse(&s.handle_line(frame_line(1, 21).as_bytes()));
        assert_eq!(out[0]["type"], "prediction");
        assert_eq!(out[0]["session"], json!(s.id()));
        assert_eq!(out[0]["n"], 1);
    }

    #[test]
    fn short_frame_is_recoverable() {
        let ctx = ctx();
        let mut s = ctx.open();
        let out = parse(&s.handle_line(frame_line(1, 20).as_bytes()));
        assert_eq!(out[0]["type"], "error");
        assert_eq!(out[0]["code"], "malformed_frame");
        assert_eq!(out[0]["recoverable"], true);
        let out = parse(&s.handle_line(frame_line(2, 21).as_bytes()));
        assert_eq!(out[0]["type"], "prediction");
    }

    #[test]
    fn error_codes() {
        let ctx = ctx();
        let mut s = ctx.open();
        let code = |s: &mut Session, line: &[u8]| parse(&s.handle_line(line))[0]["code"].as_str().unwrap().to_string();
        assert_eq!(code(&mut s, b"{"), "malformed_json");
        assert_eq!(code(&mut s, b""), "malformed_json");
        assert_eq!(code(&mut s, &[0xff, 0xfe]), "malformed_json");
        assert_eq!(code(&mut s, b"[1,2]"), "malformed_message");
        assert_eq!(code(&mut s, br#"{"type": 3}"#), "malformed_message");
        assert_eq!(code(&mut s, br#"{"type": "hello"}"#), "unknown_type");
        assert_eq!(code(&mut s, br#"{"type": "frame", "seq": -1}"#), "malformed_frame");
        assert_eq!(code(&mut s, br#"{"type": "config", "debounce": {"stable_m": 99}}"#), "invalid_config");
        assert_eq!(code(&mut s, br#"{"type": "config", "colour": 1}"#), "invalid_config");
        assert_eq!(code(&mut s, br#"{"type": "config", "approve": 4}"#), "unknown_instruction");
        assert_eq!(code(&mut s, &[b'x'; 5000]), "line_too_long");
        s.handle_line(frame_line(5, 21).as_bytes());
        assert_eq!(code(&mut s, frame_line(5, 21).as_bytes()), "out_of_order");
    }

    #[test]
    fn config_merges_and_acks() {
        let ctx = ctx();
        let mut s = ctx.open();
        let out = parse(&s.handle_line(br#"{"type": "config", "debounce": {"stable_m": 4}, "threshold": 0.3}"#));
        assert_eq!(out.last().unwrap()["type"], "ack");
        assert_eq!(out.last().unwrap()["request"], "config");
        assert_eq!(s.pipeline().config().debounce.stable_m, 4);
        assert_eq!(s.pipeline().config().debounce.window_k, 15);
        assert_eq!(s.pipeline().config().threshold, Some(0.3));
        // A rejected config leaves the previous one in place.
        s.handle_line(br#"{"type": "config", "threshold": 3}"#);
        assert_eq!(s.pipeline().config().threshold, Some(0.3));
    }

    #[test]
    fn counters_are_per_session() {
        let ctx = ctx();
        let mut a = ctx.open();
        let mut b = ctx.open();
        assert_ne!(a.id(), b.id());
        a.handle_line(b"{}");
        a.handle_line(b"{}");
        let out = parse(&b.handle_line(br#"{"type": "flush"}"#));
        assert_eq!(out[0]["n"], 1);
        assert_eq!(out[0]["type"], "ack");
        assert_eq!(a.stats().errors, 2);
    }
}
