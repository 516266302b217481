//! Sliding-window debouncer turning the per-frame prediction stream into
//! committed characters and word boundaries.
//!
//! Every frame occupies one window slot: accepted frames contribute their
//! label, rejected frames a gap. A label is committed once it has been the
//! strict mode of the window (unique maximum count, gaps competing as their
//! own symbol) for `stable_m` consecutive steps and differs from the last
//! committed label. The last committed label is forgotten as soon as the mode
//! moves away from it, which is what allows doubled letters.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classifier::PredictionEvent;
use crate::landmark::GestureLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebounceConfig {
    pub window_k: usize,
    pub stable_m: usize,
    pub idle_timeout_ms: u64,
}

impl Default for DebounceConfig {
    fn default() -> Self {
        DebounceConfig { window_k: 15, stable_m: 8, idle_timeout_ms: 2000 }
    }
}

impl DebounceConfig {
    pub fn validate(&self) -> Result<(), DebounceError> {
        if self.stable_m == 0 || self.stable_m > self.window_k {
            return Err(DebounceError::InvalidConfig("require 1 <= stable_m <= window_k"));
        }
        if self.idle_timeout_ms == 0 {
            return Err(DebounceError::InvalidConfig("idle_timeout_ms must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DebounceError {
    #[error("out of order: seq {got} after {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("invalid debounce config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCause {
    SpaceGesture,
    IdleTimeout,
    Flush,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharEvent {
    pub char: char,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordBoundaryEvent {
    pub raw: String,
    pub cause: BoundaryCause,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DebounceEvent {
    Char(CharEvent),
    Word(WordBoundaryEvent),
}

/// The strict mode of a window, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    Label(GestureLabel),
    Gap,
}

/// Strict mode over window slots, treating gaps as a competing symbol; ties yield `None`.
pub fn strict_mode(window: impl IntoIterator<Item = Option<GestureLabel>>) -> Option<WindowMode> {
    let mut counts = [0usize; GestureLabel::COUNT + 1];
    for slot in window {
        counts[slot.map_or(GestureLabel::COUNT, GestureLabel::index)] += 1;
    }
    let max = *counts.iter().max()?;
    if max == 0 || counts.iter().filter(|&&c| c == max).count() > 1 {
        return None;
    }
    let winner = counts.iter().position(|&c| c == max)?;
    Some(match GestureLabel::from_index(winner) {
        Some(l) => WindowMode::Label(l),
        None => WindowMode::Gap,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebounceState {
    pub window: VecDeque<Option<GestureLabel>>,
    /// Current strict-mode label and how many consecutive steps it has held (capped at `window_k`).
    pub mode_run: Option<(GestureLabel, usize)>,
    pub last_emitted: Option<GestureLabel>,
    pub char_buffer: String,
    pub last_accept_ts: Option<u64>,
    pub last_seq: Option<u64>,
    pub last_ts: Option<u64>,
}

/// One session's debouncer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Debouncer {
    cfg: DebounceConfig,
    state: DebounceState,
}

impl Debouncer {
    pub fn new(cfg: DebounceConfig) -> Result<Self, DebounceError> {
        cfg.validate()?;
        Ok(Debouncer { cfg, state: DebounceState::default() })
    }

    pub fn config(&self) -> DebounceConfig {
        self.cfg
    }

    /// Replaces the configuration, keeping at most `window_k` newest slots.
    pub fn reconfigure(&mut self, cfg: DebounceConfig) -> Result<(), DebounceError> {
        cfg.validate()?;
        self.cfg = cfg;
        while self.state.window.len() > cfg.window_k {
            self.state.window.pop_front();
        }
        if let Some((_, run)) = self.state.mode_run.as_mut() {
            *run = (*run).min(cfg.window_k);
        }
        Ok(())
    }

    pub fn state(&self) -> &DebounceState {
        &self.state
    }

    pub fn step(&mut self, ev: &PredictionEvent) -> Result<Vec<DebounceEvent>, DebounceError> {
        if let Some(last) = self.state.last_seq {
            if ev.seq <= last {
                return Err(DebounceError::OutOfOrder { last, got: ev.seq });
            }
        }
        let st = &mut self.state;
        st.last_seq = Some(ev.seq);
        st.last_ts = Some(ev.ts_ms);
        let mut out = Vec::new();

        // A long silence ends the word and invalidates the stale window.
        if let Some(t) = st.last_accept_ts {
            if ev.ts_ms.saturating_sub(t) > self.cfg.idle_timeout_ms {
                if !st.char_buffer.is_empty() {
                    out.push(DebounceEvent::Word(WordBoundaryEvent {
                        raw: std::mem::take(&mut st.char_buffer),
                        cause: BoundaryCause::IdleTimeout,
                        ts_ms: ev.ts_ms,
                    }));
                }
                st.window.clear();
                st.mode_run = None;
                st.last_emitted = None;
                st.last_accept_ts = None;
            }
        }

        let slot = if ev.accepted { ev.label } else { None };
        if slot.is_some() {
            st.last_accept_ts = Some(ev.ts_ms);
        }
        st.window.push_back(slot);
        while st.window.len() > self.cfg.window_k {
            st.window.pop_front();
        }

        let mode = match strict_mode(st.window.iter().copied()) {
            Some(WindowMode::Label(l)) => Some(l),
            _ => None,
        };
        st.mode_run = match (mode, st.mode_run) {
            (Some(l), Some((prev, run))) if prev == l => Some((l, (run + 1).min(self.cfg.window_k))),
            (Some(l), _) => Some((l, 1)),
            (None, _) => None,
        };
        if st.last_emitted.is_some() && st.last_emitted != mode {
            st.last_emitted = None;
        }

        if let Some((label, run)) = st.mode_run {
            if run >= self.cfg.stable_m && st.last_emitted != Some(label) {
                st.last_emitted = Some(label);
                match label.as_char() {
                    None => out.push(DebounceEvent::Word(WordBoundaryEvent {
                        raw: std::mem::take(&mut st.char_buffer),
                        cause: BoundaryCause::SpaceGesture,
                        ts_ms: ev.ts_ms,
                    })),
                    Some(c) => {
                        st.char_buffer.push(c);
                        out.push(DebounceEvent::Char(CharEvent { char: c, ts_ms: ev.ts_ms }));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Ends the in-progress word (if any) and clears all state.
    pub fn flush(&mut self) -> Option<WordBoundaryEvent> {
        let st = std::mem::take(&mut self.state);
        (!st.char_buffer.is_empty()).then(|| WordBoundaryEvent {
            raw: st.char_buffer,
            cause: BoundaryCause::Flush,
            ts_ms: st.last_ts.unwrap_or(0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureLabel::*;

    fn cfg(k: usize, m: usize) -> DebounceConfig {
        DebounceConfig { window_k: k, stable_m: m, idle_timeout_ms: 2000 }
    }

    fn ev(seq: u64, label: Option<GestureLabel>) -> PredictionEvent {
        PredictionEvent {
            seq,
            ts_ms: seq * 33,
            label,
            confidence: if label.is_some() { 0.9 } else { 0.1 },
            accepted: label.is_some(),
            latency_us: 0.0,
        }
    }

    fn run(d: &mut Debouncer, labels: &[Option<GestureLabel>]) -> Vec<DebounceEvent> {
        let start = d.state.last_seq.map_or(0, |s| s + 1);
        labels.iter().enumerate().flat_map(|(i, &l)| d.step(&ev(start + i as u64, l)).unwrap()).collect()
    }

    fn chars(events: &[DebounceEvent]) -> String {
        events
            .iter()
            .filter_map(|e| match e {
                DebounceEvent::Char(c) => Some(c.char),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn strict_mode_ties_and_gaps() {
        assert_eq!(strict_mode([Some(A), Some(B)]), None);
        assert_eq!(strict_mode([Some(A), Some(A), Some(B)]), Some(WindowMode::Label(A)));
        assert_eq!(strict_mode([None, None, Some(B)]), Some(WindowMode::Gap));
        assert_eq!(strict_mode(std::iter::empty()), None);
    }

    #[test]
    fn steady_stream_commits_once_at_run_m() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        let mut events = Vec::new();
        for seq in 0..10 {
            let out = d.step(&ev(seq, Some(A))).unwrap();
            if !out.is_empty() {
                assert_eq!(seq, 2);
            }
            events.extend(out);
        }
        assert_eq!(events, vec![DebounceEvent::Char(CharEvent { char: 'A', ts_ms: 66 })]);
        assert_eq!(d.state().char_buffer, "A");
    }

    #[test]
    fn rejected_frames_are_gaps() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        let mut labels = vec![Some(A); 5];
        labels.extend([None; 5]);
        labels.extend([Some(A); 5]);
        let events = run(&mut d, &labels);
        assert_eq!(chars(&events), "AA");
        assert_eq!(d.state().char_buffer, "AA");
    }

    #[test]
    fn rejected_label_is_not_counted() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        let mut e = ev(0, Some(A));
        e.accepted = false;
        d.step(&e).unwrap();
        assert_eq!(d.state().window, VecDeque::from([None]));
    }

    #[test]
    fn alternating_never_commits() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        let labels: Vec<_> = (0..40).map(|i| Some(if i % 2 == 0 { A } else { B })).collect();
        assert!(run(&mut d, &labels).is_empty());
    }

    #[test]
    fn spells_grab() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        let labels: Vec<_> = [G, R, A, B, Space].iter().flat_map(|&l| [Some(l); 5]).collect();
        let events = run(&mut d, &labels);
        assert_eq!(chars(&events), "GRAB");
        assert_eq!(events.len(), 5);
        match events.last().unwrap() {
            DebounceEvent::Word(w) => {
                assert_eq!(w.raw, "GRAB");
                assert_eq!(w.cause, BoundaryCause::SpaceGesture);
            }
            other => panic!("expected word boundary, got {other:?}"),
        }
        assert!(d.state().char_buffer.is_empty());
    }

    #[test]
    fn out_of_order_rejected() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        d.step(&ev(3, Some(A))).unwrap();
        assert_eq!(d.step(&ev(3, Some(A))), Err(DebounceError::OutOfOrder { last: 3, got: 3 }));
    }

    #[test]
    fn idle_timeout_ends_word() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        run(&mut d, &[Some(G); 4]);
        let mut late = ev(10, Some(G));
        late.ts_ms = 3 * 33 + 2001;
        let out = d.step(&late).unwrap();
        assert_eq!(
            out,
            vec![DebounceEvent::Word(WordBoundaryEvent { raw: "G".into(), cause: BoundaryCause::IdleTimeout, ts_ms: late.ts_ms })]
        );
        // The stale window is gone, so the same letter can start the next word.
        assert_eq!(d.state().window.len(), 1);
        let more: Vec<_> = (11..14).flat_map(|s| d.step(&ev(s, Some(G))).unwrap()).collect();
        assert_eq!(chars(&more), "G");
    }

    #[test]
    fn flush_semantics() {
        let mut d = Debouncer::new(cfg(5, 3)).unwrap();
        assert_eq!(d.flush(), None);
        let labels: Vec<_> = [G, R].iter().flat_map(|&l| [Some(l); 5]).collect();
        run(&mut d, &labels);
        let w = d.flush().unwrap();
        assert_eq!(w.raw, "GR");
        assert_eq!(w.cause, BoundaryCause::Flush);
        assert!(d.state().window.is_empty());
        assert_eq!(d.state().mode_run, None);
        assert_eq!(d.flush(), None);
    }

    #[test]
    fn config_validation() {
        assert!(Debouncer::new(cfg(5, 6)).is_err());
        assert!(Debouncer::new(cfg(5, 0)).is_err());
        assert!(Debouncer::new(DebounceConfig { idle_timeout_ms: 0, ..DebounceConfig::default() }).is_err());
    }

    #[test]
    fn only_rejected_never_emits() {
        let mut d = Debouncer::new(DebounceConfig::default()).unwrap();
        assert!(run(&mut d, &[None; 200]).is_empty());
    }
}
