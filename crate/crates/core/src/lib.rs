//! Fingerspelling recognition engine: hand-landmark frames in, stabilized
//! characters, dictionary-refined words and robot instructions out.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for the common cases.

pub mod augment;
pub mod bench;
pub mod classifier;
pub mod debounce;
pub mod executor;
pub mod landmark;
pub mod lexicon;
pub mod metrics;
pub mod pipeline;
pub mod prototypes;
pub mod replay;
pub mod scalar;

pub use augment::{AugmentConfig, LabeledFrame};
pub use classifier::{Model, PredictionEvent, TrainConfig};
pub use debounce::{DebounceConfig, Debouncer};
pub use executor::{Grammar, Instruction, Scene};
pub use landmark::{FeatureVector, GestureLabel, Hand, LandmarkFrame, RawFrame};
pub use lexicon::{CutoffPolicy, Dictionary, RefinedWord};
pub use pipeline::{Pipeline, PipelineConfig, PipelineEvent};
pub use replay::{MetricsReport, ReplayScript};
pub use scalar::Scalar;

pub type Frame64 = LandmarkFrame<f64>;
pub type Frame32 = LandmarkFrame<f32>;
pub type Features64 = FeatureVector<f64>;
pub type Features32 = FeatureVector<f32>;
pub type Model64 = Model<f64>;
pub type Model32 = Model<f32>;
pub type Pipeline64 = Pipeline<f64>;
pub type Pipeline32 = Pipeline<f32>;
pub type LabeledFrame64 = LabeledFrame<f64>;
pub type Script64 = ReplayScript<f64>;
