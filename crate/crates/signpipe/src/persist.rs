//! On-disk formats: model and scene JSON, dictionary text, dataset and replay
//! script JSON lines, and the config document.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use signpipe_core::landmark::{validate_frame, FEATURE_SPEC_VERSION};
use signpipe_core::lexicon::LexiconError;
use signpipe_core::replay::{GroundTruth, ScriptFrame};
use signpipe_core::{Dictionary, GestureLabel, LabeledFrame, Model, RawFrame, ReplayScript, Scalar, Scene};

use crate::config::Config;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const SCRIPT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("{path}: unsupported {what} version {found} (this build reads version {expected})")]
    VersionMismatch { path: String, what: &'static str, expected: u32, found: u32 },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl PersistError {
    fn io(path: &Path, source: io::Error) -> Self {
        PersistError::Io { path: path.display().to_string(), source }
    }

    fn json(path: &str, line_offset: usize, e: serde_json::Error) -> Self {
        PersistError::Parse { path: path.into(), line: line_offset + e.line(), column: e.column(), message: e.to_string() }
    }

    fn invalid(path: &str, message: impl ToString) -> Self {
        PersistError::Invalid { path: path.into(), message: message.to_string() }
    }
}

fn read(path: &Path) -> Result<String, PersistError> {
    fs::read_to_string(path).map_err(|e| PersistError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), PersistError> {
    fs::write(path, text).map_err(|e| PersistError::io(path, e))
}

fn name(path: &Path) -> String {
    path.display().to_string()
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty())
}

// ---- model ----

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct ModelFile<S> {
    version: u32,
    feature_spec_version: u32,
    labels: Vec<GestureLabel>,
    weights: Vec<Vec<S>>,
    bias: Vec<S>,
    threshold: S,
}

#[derive(Deserialize)]
struct Versions {
    version: Option<u32>,
    feature_spec_version: Option<u32>,
}

pub fn model_to_string<S: Scalar>(model: &Model<S>) -> String {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        feature_spec_version: model.feature_spec_version(),
        labels: model.labels().to_vec(),
        weights: model.weight_rows(),
        bias: model.bias().to_vec(),
        threshold: model.threshold(),
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_str<S: Scalar>(text: &str, path: &str) -> Result<Model<S>, PersistError> {
    // Versions first, so an old or future file gets a clear message rather than a field error.
    let v: Versions = serde_json::from_str(text).map_err(|e| PersistError::json(path, 0, e))?;
    let check = |what, found: Option<u32>, expected| match found {
        Some(found) if found != expected => {
            Err(PersistError::VersionMismatch { path: path.into(), what, expected, found })
        }
        _ => Ok(()),
    };
    check("model format", v.version, MODEL_FORMAT_VERSION)?;
    check("feature spec", v.feature_spec_version, FEATURE_SPEC_VERSION)?;
    let file: ModelFile<S> = serde_json::from_str(text).map_err(|e| PersistError::json(path, 0, e))?;
    Model::new(file.labels, file.weights, file.bias, file.threshold, file.feature_spec_version)
        .map_err(|e| PersistError::invalid(path, e))
}

pub fn save_model<S: Scalar>(model: &Model<S>, path: &Path) -> Result<(), PersistError> {
    write(path, &model_to_string(model))
}

pub fn load_model<S: Scalar>(path: &Path) -> Result<Model<S>, PersistError> {
    model_from_str(&read(path)?, &name(path))
}

// ---- dictionary ----

pub fn dictionary_from_str(text: &str, dict_name: &str, path: &str) -> Result<Dictionary, PersistError> {
    Dictionary::parse(dict_name, text).map_err(|e| match e {
        LexiconError::Parse { line, message } => PersistError::Parse { path: path.into(), line, column: 1, message },
        other => PersistError::invalid(path, other),
    })
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary, PersistError> {
    let stem = path.file_stem().map_or_else(|| "dictionary".into(), |s| s.to_string_lossy().into_owned());
    dictionary_from_str(&read(path)?, &stem, &name(path))
}

pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<(), PersistError> {
    write(path, &dict.to_text())
}

// ---- scene ----

pub fn scene_from_str(text: &str, path: &str) -> Result<Scene, PersistError> {
    let scene: Scene = serde_json::from_str(text).map_err(|e| PersistError::json(path, 0, e))?;
    scene.validate().map_err(|e| PersistError::invalid(path, e))?;
    Ok(scene)
}

pub fn load_scene(path: &Path) -> Result<Scene, PersistError> {
    scene_from_str(&read(path)?, &name(path))
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), PersistError> {
    write(path, &serde_json::to_string_pretty(scene).expect("scene serializes"))
}

// ---- config ----

pub fn config_from_str(text: &str, path: &str) -> Result<Config, PersistError> {
    let cfg: Config = serde_json::from_str(text).map_err(|e| PersistError::json(path, 0, e))?;
    cfg.validate().map_err(|e| PersistError::invalid(path, e))?;
    Ok(cfg)
}

/// Reads `path`, or returns the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<Config, PersistError> {
    match path {
        Some(p) => config_from_str(&read(p)?, &name(p)),
        None => Ok(Config::default()),
    }
}

pub fn save_config(cfg: &Config, path: &Path) -> Result<(), PersistError> {
    write(path, &serde_json::to_string_pretty(cfg).expect("config serializes"))
}

// ---- dataset ----

/// One dataset line: the frame fields plus its label.
#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct DatasetRecord<S> {
    #[serde(flatten)]
    raw: RawFrame<S>,
    label: GestureLabel,
}

fn parse_line<T: DeserializeOwned>(line: &str, lineno: usize, path: &str) -> Result<T, PersistError> {
    serde_json::from_str(line).map_err(|e| PersistError::Parse {
        path: path.into(),
        line: lineno,
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn dataset_from_str<S: Scalar>(text: &str, path: &str) -> Result<Vec<LabeledFrame<S>>, PersistError> {
    let mut out = Vec::new();
    for (lineno, line) in lines(text) {
        let rec: DatasetRecord<S> = parse_line(line, lineno, path)?;
        let frame = validate_frame(rec.raw, None).map_err(|e| PersistError::Parse {
            path: path.into(),
            line: lineno,
            column: 1,
            message: e.to_string(),
        })?;
        out.push(LabeledFrame { frame, label: rec.label });
    }
    Ok(out)
}

pub fn write_dataset<S: Scalar, W: Write>(data: &[LabeledFrame<S>], mut w: W) -> io::Result<()> {
    for s in data {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn load_dataset<S: Scalar>(path: &Path) -> Result<Vec<LabeledFrame<S>>, PersistError> {
    dataset_from_str(&read(path)?, &name(path))
}

pub fn save_dataset<S: Scalar>(data: &[LabeledFrame<S>], path: &Path) -> Result<(), PersistError> {
    let file = fs::File::create(path).map_err(|e| PersistError::io(path, e))?;
    write_dataset(data, BufWriter::new(file)).map_err(|e| PersistError::io(path, e))
}

// ---- replay script ----

/// Script lines: one `meta` header, then wire-format `frame` messages.
#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", bound = "S: Scalar")]
enum ScriptLine<S> {
    Meta {
        version: u32,
        #[serde(default)]
        ground_truth: GroundTruth,
    },
    Frame(ScriptFrame<S>),
}

pub fn script_from_str<S: Scalar>(text: &str, path: &str) -> Result<ReplayScript<S>, PersistError> {
    let mut ground_truth = None;
    let mut stream = Vec::new();
    for (lineno, line) in lines(text) {
        match parse_line::<ScriptLine<S>>(line, lineno, path)? {
            ScriptLine::Meta { version, ground_truth: gt } => {
                if version != SCRIPT_FORMAT_VERSION {
                    return Err(PersistError::VersionMismatch {
                        path: path.into(),
                        what: "script format",
                        expected: SCRIPT_FORMAT_VERSION,
                        found: version,
                    });
                }
                if ground_truth.is_some() || !stream.is_empty() {
                    return Err(PersistError::Parse {
                        path: path.into(),
                        line: lineno,
                        column: 1,
                        message: "meta record must be the first line".into(),
                    });
                }
                ground_truth = Some(gt);
            }
            ScriptLine::Frame(f) => {
                if ground_truth.is_none() {
                    return Err(PersistError::Parse {
                        path: path.into(),
                        line: lineno,
                        column: 1,
                        message: "missing meta header line".into(),
                    });
                }
                stream.push(f);
            }
        }
    }
    let ground_truth = ground_truth.ok_or_else(|| PersistError::invalid(path, "empty script"))?;
    Ok(ReplayScript { stream, ground_truth })
}

pub fn script_to_string<S: Scalar>(script: &ReplayScript<S>) -> String {
    let mut s = String::new();
    let meta: ScriptLine<S> =
        ScriptLine::Meta { version: SCRIPT_FORMAT_VERSION, ground_truth: script.ground_truth.clone() };
    s.push_str(&serde_json::to_string(&meta).expect("meta serializes"));
    s.push('\n');
    for f in &script.stream {
        s.push_str(&serde_json::to_string(&ScriptLine::Frame(f.clone())).expect("frame serializes"));
        s.push('\n');
    }
    s
}

pub fn load_script<S: Scalar>(path: &Path) -> Result<ReplayScript<S>, PersistError> {
    script_from_str(&read(path)?, &name(path))
}

pub fn save_script<S: Scalar>(script: &ReplayScript<S>, path: &Path) -> Result<(), PersistError> {
    write(path, &script_to_string(script))
}
