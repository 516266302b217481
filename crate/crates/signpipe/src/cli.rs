//! Command-line front end. Exit codes: 0 success, 1 operational error, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use signpipe_core::augment::{expand_dataset, AugmentConfig};
use signpipe_core::classifier::{evaluate, train};
use signpipe_core::prototypes::{spell_stream, synth_prototypes};
use signpipe_core::replay::{replay, GroundTruth};
use signpipe_core::{bench, Dictionary, GestureLabel, LabeledFrame64, Model64, ReplayScript, Scene};

use crate::config::Config;
use crate::session::SessionContext;
use crate::{defaults, persist, server};

#[derive(Debug, Parser)]
#[command(name = "signpipe", version, about = "Fingerspelled hand-landmark streams to robot instructions")]
pub struct Cli {
    /// JSON config document; missing fields take their defaults. Flags override it.
    #[arg(long, global = true, env = "SIGNPIPE_CONFIG", value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier from a labeled dataset.
    Train(TrainArgs),
    /// Top-1 accuracy of a model on a labeled dataset.
    Eval(EvalArgs),
    /// Run a recorded script through the full pipeline and report metrics.
    Replay(ReplayArgs),
    /// Serve the line protocol over TCP (and optionally WebSocket).
    Serve(ServeArgs),
    /// Generate a labeled synthetic dataset: prototypes plus jittered copies.
    SynthData(SynthDataArgs),
    /// Generate a replay script that spells the given text.
    SynthScript(SynthScriptArgs),
    /// Per-stage latency microbenchmark.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "JSONL")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Augmented copies per training sample.
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Confidence threshold stored in the model.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub data: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct Resources {
    /// Dictionary text file, one word per line (default: built-in task words).
    #[arg(long, value_name = "FILE")]
    pub dictionary: Option<PathBuf>,
    /// Scene JSON (default: built-in tabletop).
    #[arg(long, value_name = "FILE")]
    pub scene: Option<PathBuf>,
    /// Runtime confidence threshold (default: the model's).
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long, value_name = "JSONL")]
    pub script: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[command(flatten)]
    pub resources: Resources,
    /// Write every pipeline event as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "ADDR")]
    pub bind: Option<String>,
    #[arg(long, value_name = "ADDR")]
    pub ws_bind: Option<String>,
    #[arg(long)]
    pub require_confirm: bool,
    #[arg(long)]
    pub max_line_bytes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthDataArgs {
    #[arg(long, value_name = "JSONL")]
    pub out: PathBuf,
    #[arg(long)]
    pub copies: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jitter: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthScriptArgs {
    #[arg(long, value_name = "JSONL")]
    pub out: PathBuf,
    /// Letters A-Z; a space is the word-terminating gesture.
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 12)]
    pub frames_per_letter: usize,
    #[arg(long, default_value_t = 0.01)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Expected instruction text; repeatable.
    #[arg(long = "instruction")]
    pub instructions: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model to time (default: one trained on the spot from prototypes).
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    let cfg = persist::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => cmd_train(cfg, a),
        Command::Eval(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(cfg, a),
        Command::Serve(a) => cmd_serve(cfg, a),
        Command::SynthData(a) => cmd_synth_data(cfg, a),
        Command::SynthScript(a) => cmd_synth_script(a),
        Command::Bench(a) => cmd_bench(cfg, a),
    }
}

fn check_threshold(t: Option<f64>) -> anyhow::Result<()> {
    if let Some(t) = t {
        if !(0.0..=1.0).contains(&t) {
            bail!("threshold {t} outside [0, 1]");
        }
    }
    Ok(())
}

fn load_resources(r: &Resources, cfg: &mut Config) -> anyhow::Result<(Dictionary, Scene)> {
    check_threshold(r.threshold)?;
    if r.threshold.is_some() {
        cfg.threshold = r.threshold;
    }
    let dict = match &r.dictionary {
        Some(p) => persist::load_dictionary(p)?,
        None => defaults::dictionary(),
    };
    let scene = match &r.scene {
        Some(p) => persist::load_scene(p)?,
        None => defaults::scene(),
    };
    Ok((dict, scene))
}

fn cmd_train(mut cfg: Config, a: TrainArgs) -> anyhow::Result<()> {
    let t = &mut cfg.train;
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.learning_rate = a.learning_rate.unwrap_or(t.learning_rate);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.copies_per_sample = a.copies.unwrap_or(t.copies_per_sample);
    t.threshold = a.threshold.unwrap_or(t.threshold);
    if let Some(seed) = a.seed {
        t.seed = seed;
        t.augment.seed = seed;
    }
    let data: Vec<LabeledFrame64> = persist::load_dataset(&a.data)?;
    let start = Instant::now();
    let outcome = train(&data, &cfg.train).context("training failed")?;
    let elapsed = start.elapsed();
    persist::save_model(&outcome.model, &a.out)?;
    let fit = evaluate(&outcome.model, &data);
    println!("samples          {}", data.len());
    println!("examples         {}", outcome.examples);
    println!("skipped_frames   {}", outcome.skipped_frames);
    println!("final_loss       {:.6}", outcome.loss_history.last().copied().unwrap_or(f64::NAN));
    println!("train_accuracy   {:.4}", fit.accuracy);
    println!("train_seconds    {:.2}", elapsed.as_secs_f64());
    println!("model            {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let model: Model64 = persist::load_model(&a.model)?;
    let data: Vec<LabeledFrame64> = persist::load_dataset(&a.data)?;
    let ev = evaluate(&model, &data);
    if a.json {
        println!("{}", serde_json::to_string(&ev)?);
        return Ok(());
    }
    println!("accuracy  {:.4}", ev.accuracy);
    println!("total     {}", ev.total);
    println!("skipped   {}", ev.skipped);
    for (label, acc) in GestureLabel::ALL.iter().zip(&ev.per_class_accuracy) {
        if let Some(acc) = acc {
            println!("  {:<6} {acc:.4}", label.as_str());
        }
    }
    Ok(())
}

fn cmd_replay(mut cfg: Config, a: ReplayArgs) -> anyhow::Result<()> {
    let (dict, scene) = load_resources(&a.resources, &mut cfg)?;
    let script: ReplayScript<f64> = persist::load_script(&a.script)?;
    let model: Model64 = persist::load_model(&a.model)?;
    let out = replay(&script, Arc::new(model), Arc::new(dict), scene, cfg.pipeline())?;
    if let Some(path) = &a.transcript {
        let mut text = String::new();
        for ev in &out.transcript {
            text.push_str(&serde_json::to_string(ev)?);
            text.push('\n');
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.json {
        println!("{}", serde_json::to_string(&out.report)?);
    } else {
        print!("{}", out.report.to_table());
    }
    Ok(())
}

fn cmd_serve(mut cfg: Config, a: ServeArgs) -> anyhow::Result<()> {
    let (dict, scene) = load_resources(&a.resources, &mut cfg)?;
    cfg.require_confirm |= a.require_confirm;
    let bind = a.bind.unwrap_or_else(|| cfg.serve.bind.clone());
    let ws_bind = a.ws_bind.or_else(|| cfg.serve.ws_bind.clone());
    let max_line = a.max_line_bytes.unwrap_or(cfg.serve.max_line_bytes);
    if max_line == 0 {
        bail!("max line length must be positive");
    }
    let model: Model64 = persist::load_model(&a.model)?;
    let ctx = SessionContext::new(Arc::new(model), Arc::new(dict), scene, cfg.pipeline(), max_line)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let srv = server::Server::bind(ctx, &bind, ws_bind.as_deref()).await?;
        println!("listening tcp {}", srv.local_addr()?);
        if let Some(addr) = srv.ws_addr() {
            println!("listening ws ws://{addr}/ws");
        }
        std::io::stdout().flush()?;
        tokio::select! {
            r = srv.run() => r?,
            _ = tokio::signal::ctrl_c() => {}
        }
        anyhow::Ok(())
    })
}

fn cmd_synth_data(cfg: Config, a: SynthDataArgs) -> anyhow::Result<()> {
    let copies = a.copies.unwrap_or(cfg.synth.copies);
    let seed = a.seed.unwrap_or(cfg.synth.seed);
    let jitter_sigma = a.jitter.unwrap_or(cfg.synth.jitter_sigma);
    let data = synth_dataset(copies, jitter_sigma, seed)?;
    persist::save_dataset(&data, &a.out)?;
    println!("wrote {} records to {}", data.len(), a.out.display());
    Ok(())
}

/// Prototypes for all 27 labels, each followed by `copies` jittered variants.
pub fn synth_dataset(copies: usize, jitter_sigma: f64, seed: u64) -> anyhow::Result<Vec<LabeledFrame64>> {
    let jitter = AugmentConfig { jitter_sigma, seed, ..AugmentConfig::identity() };
    let mut data = expand_dataset(&synth_prototypes::<f64>(seed), copies, &jitter)?;
    for (i, s) in data.iter_mut().enumerate() {
        s.frame.seq = i as u64;
        s.frame.ts_ms = i as u64 * 33;
    }
    Ok(data)
}

/// Letters of `text` as gesture labels; ' ' maps to the Space gesture.
pub fn spell(text: &str) -> anyhow::Result<Vec<GestureLabel>> {
    text.chars()
        .map(|c| match c {
            ' ' => Ok(GestureLabel::Space),
            c => GestureLabel::from_char(c.to_ascii_uppercase()).with_context(|| format!("cannot spell {c:?}")),
        })
        .collect()
}

/// Spelled words as the debouncer will commit them: a letter held twice in a
/// row without an intervening different mode is committed once.
pub fn expected_raw_words(text: &str) -> Vec<String> {
    text.split(' ')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut out = String::new();
            for c in w.chars().map(|c| c.to_ascii_uppercase()) {
                if !out.ends_with(c) {
                    out.push(c);
                }
            }
            out
        })
        .collect()
}

fn cmd_synth_script(a: SynthScriptArgs) -> anyhow::Result<()> {
    if a.frames_per_letter == 0 {
        bail!("frames per letter must be positive");
    }
    let labels = spell(&a.text)?;
    let words = expected_raw_words(&a.text);
    let script = ReplayScript {
        stream: spell_stream::<f64>(&labels, a.frames_per_letter, a.jitter, a.seed),
        ground_truth: GroundTruth { chars: words.concat(), words, instructions: a.instructions },
    };
    persist::save_script(&script, &a.out)?;
    println!("wrote {} frames to {}", script.stream.len(), a.out.display());
    Ok(())
}

fn cmd_bench(cfg: Config, a: BenchArgs) -> anyhow::Result<()> {
    let model: Model64 = match &a.model {
        Some(p) => persist::load_model(p)?,
        None => quick_model(&cfg)?,
    };
    let report = bench::run(&model, a.frames, a.seed);
    if a.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn quick_model(cfg: &Config) -> anyhow::Result<Model64> {
    let data = synth_dataset(10, cfg.synth.jitter_sigma, cfg.synth.seed)?;
    Ok(train(&data, &cfg.train)?.model)
}
