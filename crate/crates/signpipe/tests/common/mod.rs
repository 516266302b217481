#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use serde_json::Value;
use signpipe::cli::{spell, synth_dataset};
use signpipe::SessionContext;
use signpipe_core::classifier::train;
use signpipe_core::executor::{Gripper, SceneObject};
use signpipe_core::prototypes::spell_stream;
use signpipe_core::{Dictionary, Model64, PipelineConfig, Scene, TrainConfig};

/// Default-config model trained on prototypes plus 20 jittered copies each.
pub fn model() -> Arc<Model64> {
    static MODEL: OnceLock<Arc<Model64>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let data = synth_dataset(20, 0.02, 7).unwrap();
            Arc::new(train(&data, &TrainConfig::default()).unwrap().model)
        })
        .clone()
}

pub fn task_dictionary() -> Dictionary {
    let words = ["GRAB", "DROP", "MOVE", "APPLE", "BOTTLE"].iter().map(|w| w.to_string()).collect();
    Dictionary::new("task", words).unwrap()
}

pub fn task_scene() -> Scene {
    Scene {
        bounds: [8, 8],
        gripper: Gripper { pos: [0, 0], holding: None },
        objects: vec![
            SceneObject { name: "APPLE".into(), pos: [3, 0], held: false },
            SceneObject { name: "BOTTLE".into(), pos: [5, 5], held: false },
        ],
    }
}

pub fn context(max_line_bytes: usize) -> SessionContext {
    SessionContext::new(
        model(),
        Arc::new(task_dictionary()),
        task_scene(),
        PipelineConfig::default(),
        max_line_bytes,
    )
    .unwrap()
}

/// Wire `frame` lines spelling `text`.
pub fn frame_lines(text: &str, frames_per_letter: usize, jitter: f64, seed: u64) -> Vec<String> {
    spell_stream::<f64>(&spell(text).unwrap(), frames_per_letter, jitter, seed)
        .into_iter()
        .map(|f| {
            let mut v = serde_json::to_value(&f.raw).unwrap();
            v["type"] = "frame".into();
            v.to_string()
        })
        .collect()
}

pub fn of_type<'a>(msgs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    msgs.iter().filter(|m| m["type"] == kind).collect()
}

/// Checks per-session causality: n counts up from 1 in one session, a char or
/// word never precedes the prediction of its frame, every instruction follows
/// a word, and every exec answers the instruction just before it.
pub fn assert_causal(msgs: &[Value]) {
    let session = &msgs[0]["session"];
    let mut open = None;
    let mut words = 0;
    let mut predictions = 0;
    for (i, m) in msgs.iter().enumerate() {
        assert_eq!(&m["session"], session, "mixed sessions");
        assert_eq!(m["n"].as_u64(), Some(i as u64 + 1), "gap in n at {i}");
        match m["type"].as_str().unwrap() {
            "prediction" => predictions += 1,
            "char" => assert!(predictions > 0),
            "word" => words += 1,
            "instruction" => {
                assert!(words > 0, "instruction before any word");
                assert!(open.is_none(), "two instructions without exec");
                open = Some(m["id"].clone());
            }
            "exec" => assert_eq!(Some(m["instruction_id"].clone()), open.take(), "exec without instruction"),
            _ => {}
        }
    }
}
