mod common;

use std::fs;

use signpipe::cli::synth_dataset;
use signpipe::config::Config;
use signpipe::{defaults, persist, PersistError};
use signpipe_core::classifier::train;
use signpipe_core::prototypes::spell_stream;
use signpipe_core::replay::GroundTruth;
use signpipe_core::{Frame32, Frame64, GestureLabel, LabeledFrame, LabeledFrame64, Model32, Model64, ReplayScript, TrainConfig};

fn bits64(m: &Model64) -> Vec<u64> {
    m.weights_flat().iter().chain(m.bias()).chain([&m.threshold()]).map(|v| v.to_bits()).collect()
}

#[test]
fn trained_model_round_trips_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let model = common::model();
    persist::save_model(&model, &path).unwrap();
    let back: Model64 = persist::load_model(&path).unwrap();
    assert_eq!(bits64(&model), bits64(&back));
    assert_eq!(back.labels(), GestureLabel::ALL);
    assert_eq!(*model, back);
}

fn to_f32(f: &Frame64) -> Frame32 {
    Frame32 { seq: f.seq, ts_ms: f.ts_ms, hand: f.hand, pts: f.pts.map(|p| p.map(|v| v as f32)) }
}

#[test]
fn f32_model_round_trips_bitwise() {
    let data: Vec<LabeledFrame<f32>> = synth_dataset(2, 0.02, 1)
        .unwrap()
        .iter()
        .map(|s| LabeledFrame { frame: to_f32(&s.frame), label: s.label })
        .collect();
    let cfg = TrainConfig { epochs: 5, copies_per_sample: 1, ..TrainConfig::default() };
    let model: Model32 = train(&data, &cfg).unwrap().model;
    let back: Model32 = persist::model_from_str(&persist::model_to_string(&model), "m.json").unwrap();
    let bits = |m: &Model32| m.weights_flat().iter().chain(m.bias()).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&model), bits(&back));
}

#[test]
fn truncated_model_is_a_parse_error_with_position() {
    let text = persist::model_to_string(&*common::model());
    match persist::model_from_str::<f64>(&text[..text.len() / 2], "m.json") {
        Err(PersistError::Parse { line: 1, column, .. }) => assert!(column > 0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn dataset_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let data = synth_dataset(3, 0.02, 9).unwrap();
    persist::save_dataset(&data, &path).unwrap();
    let back: Vec<LabeledFrame64> = persist::load_dataset(&path).unwrap();
    assert_eq!(data, back);
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 27 * 4);
}

#[test]
fn script_round_trips() {
    let labels = [GestureLabel::G, GestureLabel::O, GestureLabel::Space];
    let script = ReplayScript {
        stream: spell_stream::<f64>(&labels, 5, 0.01, 2),
        ground_truth: GroundTruth { chars: "GO".into(), words: vec!["GO".into()], instructions: vec![] },
    };
    let text = persist::script_to_string(&script);
    assert!(text.lines().skip(1).all(|l| l.starts_with("{\"type\":\"frame\"")));
    assert_eq!(persist::script_from_str::<f64>(&text, "s").unwrap(), script);
}

#[test]
fn dictionary_and_scene_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let dict = defaults::dictionary();
    let p = dir.path().join("builtin.txt");
    persist::save_dictionary(&dict, &p).unwrap();
    assert_eq!(persist::load_dictionary(&p).unwrap(), dict);

    let scene = defaults::scene();
    let p = dir.path().join("scene.json");
    persist::save_scene(&scene, &p).unwrap();
    assert_eq!(persist::load_scene(&p).unwrap(), scene);
}

#[test]
fn invalid_scene_is_rejected() {
    let text = r#"{"bounds": [4, 4], "gripper": {"pos": [9, 9]}, "objects": []}"#;
    assert!(matches!(persist::scene_from_str(text, "s.json"), Err(PersistError::Invalid { .. })));
}

#[test]
fn config_round_trips_and_defaults_missing_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    let mut cfg = Config::default();
    cfg.debounce.stable_m = 6;
    cfg.threshold = Some(0.75);
    cfg.grammar.templates.insert("GRAB".into(), "pick up the {object}".into());
    persist::save_config(&cfg, &p).unwrap();
    assert_eq!(persist::load_config(Some(&p)).unwrap(), cfg);

    fs::write(&p, r#"{"debounce": {"window_k": 20}}"#).unwrap();
    let c = persist::load_config(Some(&p)).unwrap();
    assert_eq!(c.debounce.window_k, 20);
    assert_eq!(c.debounce.stable_m, 8);
    assert_eq!(c.threshold, None);
    assert_eq!(c.train, TrainConfig::default());
    assert_eq!(persist::load_config(None).unwrap(), Config::default());
}

#[test]
fn missing_file_is_an_io_error() {
    assert!(matches!(persist::load_model::<f64>("/nonexistent/m.json".as_ref()), Err(PersistError::Io { .. })));
}
