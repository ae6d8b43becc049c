//! File-based stages behind the `muver` binary.
//!
//! Every stage reads its inputs from disk, writes new files, and never
//! touches its inputs, so a pipeline can be resumed from any stage. Settings
//! resolve in three layers: built-in defaults, then a `key = value` file
//! passed with `--config`, then command-line flags.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_views, generate_synthetic_with, load_entities, load_mentions, single_view, write_jsonl,
    EntityCorpus, MentionRecord, SyntheticConfig, ViewPolicy, Vocabulary,
};
use crate::encoder::{DualEncoder, InitMode};
use crate::evaluator::{
    compare_configs, length_binned_errors, recall_at_k, render_bins, EvalReport, DEFAULT_KS,
};
use crate::matcher::{build_index, EntityIndex, RetrievalResult, ViewSet};
use crate::merger::{heuristic_search_traced, MergeConfig, MergeStrategy};
use crate::trainer::{grad_check, make_batch, train, GradCheckReport, Optimizer, TrainConfig};
use crate::{Error, Result};

/// Every key a config file may set. A file can be shared between stages,
/// so keys another stage uses are accepted and ignored.
pub const CONFIG_KEYS: &[&str] = &[
    "aspects",
    "batch_size",
    "bin_size",
    "dim",
    "epochs",
    "epsilon",
    "holdout",
    "init",
    "k",
    "ks",
    "learning_rate",
    "max_ctx_tokens",
    "max_iters",
    "max_view_tokens",
    "max_views",
    "min_aspects",
    "n_entities",
    "n_hard_negatives",
    "n_mentions",
    "optimizer",
    "seed",
    "single_view",
    "strategy",
    "tolerance",
    "top_k_pairs",
    "view_policy",
    "vocab_size",
    "warmup_ratio",
    "weight_decay",
];

/// Parsed `key = value` lines. `#` starts a comment; blank lines are skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{key}`",
                    i + 1
                )));
            }
            if map.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: `{key}` set twice", i + 1)));
            }
        }
        Ok(Self(map))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// Layered settings for one stage. Records every value it hands out so the
/// resolved configuration can be logged.
struct Settings {
    file: ConfigFile,
    flags: BTreeMap<&'static str, String>,
    resolved: RefCell<BTreeMap<&'static str, String>>,
}

impl Settings {
    fn new(config: Option<&Path>) -> Result<Self> {
        Ok(Self {
            file: config
                .map(ConfigFile::load)
                .transpose()?
                .unwrap_or_default(),
            flags: BTreeMap::new(),
            resolved: RefCell::default(),
        })
    }

    fn flag<T: Display>(mut self, key: &'static str, value: Option<T>) -> Self {
        debug_assert!(CONFIG_KEYS.contains(&key));
        if let Some(v) = value {
            self.flags.insert(key, v.to_string());
        }
        self
    }

    fn raw(&self, key: &'static str) -> Option<String> {
        self.flags
            .get(key)
            .cloned()
            .or_else(|| self.file.get(key).map(str::to_string))
    }

    fn opt<T>(&self, key: &'static str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.raw(key) else {
            self.resolved.borrow_mut().insert(key, "-".into());
            return Ok(None);
        };
        let value = raw
            .parse()
            .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{raw}`: {e}")))?;
        self.resolved.borrow_mut().insert(key, raw);
        Ok(Some(value))
    }

    fn get<T>(&self, key: &'static str, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.resolved.borrow_mut().insert(key, default.to_string());
                Ok(default)
            }
        }
    }

    fn log(&self, stage: &str) {
        let mut line = String::new();
        for (k, v) in self.resolved.borrow().iter() {
            let _ = write!(line, " {k}={v}");
        }
        log::info!("{stage}:{line}");
    }
}

/// Comma-separated list of cutoffs, e.g. `1,4,16`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KList(pub Vec<usize>);

impl FromStr for KList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let ks = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if ks.is_empty() || ks.contains(&0) {
            return Err("cutoffs must be positive".into());
        }
        Ok(Self(ks))
    }
}

impl Display for KList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

// ---------------------------------------------------------------------------
// views files

/// First line of a views file. Token ids in the view sets below it refer to
/// `vocab`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewsHeader {
    pub max_view_tokens: usize,
    pub policy: String,
    pub vocab: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewsFile {
    pub header: ViewsHeader,
    pub viewsets: Vec<ViewSet>,
}

impl ViewsFile {
    pub fn vocabulary(&self) -> Result<Vocabulary> {
        Vocabulary::from_words(self.header.vocab.iter().cloned())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let mut put = |line: String| writeln!(out, "{line}").map_err(|e| Error::io(path, e));
        put(serde_json::to_string(&self.header).expect("header serializes"))?;
        for vs in &self.viewsets {
            put(serde_json::to_string(vs).expect("view sets serialize"))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let malformed = |line: usize, message: String| Error::Malformed {
            path: path.into(),
            line,
            message,
        };
        let mut header = None;
        let mut viewsets = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(
                    serde_json::from_str::<ViewsHeader>(&line)
                        .map_err(|e| malformed(i + 1, e.to_string()))?,
                );
                continue;
            }
            let vs: ViewSet =
                serde_json::from_str(&line).map_err(|e| malformed(i + 1, e.to_string()))?;
            vs.validate().map_err(|e| malformed(i + 1, e.to_string()))?;
            viewsets.push(vs);
        }
        let header = header.ok_or_else(|| malformed(0, "missing header line".into()))?;
        Ok(Self { header, viewsets })
    }

    /// View sets in corpus order; errors when an entity is missing.
    pub fn aligned(&self, corpus: &EntityCorpus) -> Result<Vec<ViewSet>> {
        let by_id: BTreeMap<&str, &ViewSet> = self
            .viewsets
            .iter()
            .map(|v| (v.entity_id.as_str(), v))
            .collect();
        corpus
            .iter()
            .map(|e| {
                by_id
                    .get(e.entity_id.as_str())
                    .map(|v| (*v).clone())
                    .ok_or_else(|| Error::MissingViewSet(e.entity_id.clone()))
            })
            .collect()
    }

    fn check_encoder(&self, encoder: &DualEncoder) -> Result<()> {
        if encoder.vocab.words() != self.header.vocab.as_slice() {
            return Err(Error::Config(
                "checkpoint vocabulary differs from the views file; rebuild one from the other"
                    .into(),
            ));
        }
        Ok(())
    }
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<RetrievalResult>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(name = "muver", version, about = "Multi-view entity retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic entity corpus and mention set.
    Synth(SynthArgs),
    /// Segment entity descriptions into sentence views.
    BuildViews(BuildViewsArgs),
    /// Train the dual encoder with the NCE objective.
    Train(TrainArgs),
    /// Unite complementary views with the iterative merge search.
    Merge(MergeArgs),
    /// Encode every view into a searchable index.
    Index(IndexArgs),
    /// Rank entities for each mention.
    Retrieve(RetrieveArgs),
    /// Recall@k and length-binned error rates for retrieval files.
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output entities file.
    #[arg(long)]
    pub entities: PathBuf,
    /// Output mentions file (all mentions, or the training part with --holdout).
    #[arg(long)]
    pub mentions: PathBuf,
    /// Output file for the last `holdout` mentions.
    #[arg(long)]
    pub test_mentions: Option<PathBuf>,
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_entities: Option<usize>,
    #[arg(long)]
    pub aspects: Option<usize>,
    #[arg(long)]
    pub min_aspects: Option<usize>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub n_mentions: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildViewsArgs {
    #[arg(long)]
    pub entities: PathBuf,
    /// Mentions whose words should also enter the vocabulary.
    #[arg(long)]
    pub mentions: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub max_view_tokens: Option<usize>,
    /// `per-sentence` or `first-<k>-paragraphs`.
    #[arg(long)]
    pub view_policy: Option<String>,
    /// One view over the whole description instead.
    #[arg(long)]
    pub single_view: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub mentions: PathBuf,
    #[arg(long)]
    pub views: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Continue from this checkpoint instead of a fresh initialization.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Per-step loss log (JSON lines).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub n_hard_negatives: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub views: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `distant` or `close`.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub top_k_pairs: Option<usize>,
    #[arg(long)]
    pub max_views: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub views: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Output index.
    #[arg(long)]
    pub index: PathBuf,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub mentions: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub entities: PathBuf,
    #[arg(long)]
    pub mentions: PathBuf,
    /// Retrieval files to compare; the first is the baseline.
    #[arg(long, required = true)]
    pub results: Vec<PathBuf>,
    /// One label per results file (defaults to the file stem).
    #[arg(long)]
    pub label: Vec<String>,
    /// Views file whose sentence counts define the length bins.
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Text report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Machine-readable report (JSON lines).
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
    #[arg(long)]
    pub ks: Option<KList>,
    #[arg(long)]
    pub bin_size: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Fail when the largest relative error exceeds this.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Check a batch from these files instead of a small synthetic one.
    #[arg(long, requires_all = ["mentions", "views"])]
    pub entities: Option<PathBuf>,
    #[arg(long)]
    pub mentions: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Parameters to check at (fresh ones otherwise).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the chosen stage.
pub fn run_from<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli.command)
}

/// Runs one stage and returns its human-readable summary.
pub fn run(command: Command) -> Result<String> {
    log::info!("{command:?}");
    match command {
        Command::Synth(a) => synth(&a),
        Command::BuildViews(a) => build_views_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Merge(a) => merge_cmd(&a),
        Command::Index(a) => index_cmd(&a),
        Command::Retrieve(a) => retrieve_cmd(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::GradCheck(a) => grad_check_cmd(&a),
    }
}

// ---------------------------------------------------------------------------
// stages

fn synth(a: &SynthArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("seed", a.seed)
        .flag("n_entities", a.n_entities)
        .flag("aspects", a.aspects)
        .flag("min_aspects", a.min_aspects)
        .flag("vocab_size", a.vocab_size)
        .flag("n_mentions", a.n_mentions)
        .flag("holdout", a.holdout);
    let mut cfg = SyntheticConfig::new(
        s.get("seed", 1)?,
        s.get("n_entities", 200)?,
        s.get("aspects", 4)?,
        s.get("vocab_size", 2000)?,
    );
    cfg.min_aspects = s.get("min_aspects", cfg.min_aspects)?;
    cfg.n_mentions = s.get("n_mentions", cfg.n_mentions)?;
    let holdout: usize = s.get("holdout", 0)?;
    s.log("synth");

    let (corpus, mentions) = generate_synthetic_with(&cfg)?;
    if holdout > mentions.len() {
        return Err(Error::Config(format!(
            "holdout {holdout} exceeds {} mentions",
            mentions.len()
        )));
    }
    let (train_part, test_part) = mentions.split_at(mentions.len() - holdout);
    write_jsonl(&a.entities, corpus.entities())?;
    match (&a.test_mentions, holdout) {
        (Some(path), _) => {
            write_jsonl(&a.mentions, train_part)?;
            write_jsonl(path, test_part)?;
        }
        (None, 0) => write_jsonl(&a.mentions, &mentions)?,
        (None, _) => return Err(Error::Config("holdout needs --test-mentions".into())),
    }
    Ok(format!(
        "{} entities, {} mentions ({} held out)\n",
        corpus.len(),
        mentions.len(),
        test_part.len()
    ))
}

fn build_views_cmd(a: &BuildViewsArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("max_view_tokens", a.max_view_tokens)
        .flag("view_policy", a.view_policy.as_ref())
        .flag("single_view", a.single_view.then_some(true));
    let max_view_tokens = s.get("max_view_tokens", 40)?;
    let policy: ViewPolicy = s.get("view_policy", ViewPolicy::PerSentence)?;
    let single: bool = s.get("single_view", false)?;
    s.log("build-views");

    let corpus = load_entities(&a.entities)?;
    let mut vocab = Vocabulary::new();
    let mut viewsets = corpus
        .iter()
        .map(|e| build_views(e, &mut vocab, max_view_tokens, policy))
        .collect::<Result<Vec<_>>>()?;
    for path in &a.mentions {
        for m in load_mentions(path, &corpus)? {
            vocab.tokenize(&m.context_left);
            vocab.tokenize(&m.mention);
            vocab.tokenize(&m.context_right);
        }
    }
    if single {
        viewsets = corpus
            .iter()
            .map(|e| single_view(e, &vocab, max_view_tokens))
            .collect::<Result<_>>()?;
    }
    let file = ViewsFile {
        header: ViewsHeader {
            max_view_tokens,
            policy: if single {
                "single".into()
            } else {
                policy.to_string()
            },
            vocab: vocab.words().to_vec(),
        },
        viewsets,
    };
    for vs in &file.viewsets {
        log::info!("{}: {} views", vs.entity_id, vs.len());
    }
    file.save(&a.out)?;
    let views: usize = file.viewsets.iter().map(ViewSet::len).sum();
    Ok(format!(
        "{} entities, {views} views, vocabulary {}\n",
        file.viewsets.len(),
        vocab.len()
    ))
}

fn train_config(s: &Settings) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let config = TrainConfig {
        dim: s.get("dim", d.dim)?,
        batch_size: s.get("batch_size", d.batch_size)?,
        epochs: s.get("epochs", d.epochs)?,
        learning_rate: s.get("learning_rate", d.learning_rate)?,
        weight_decay: s.get("weight_decay", d.weight_decay)?,
        warmup_ratio: s.get("warmup_ratio", d.warmup_ratio)?,
        seed: s.get("seed", d.seed)?,
        n_hard_negatives: s.get("n_hard_negatives", d.n_hard_negatives)?,
        max_view_tokens: s.get("max_view_tokens", d.max_view_tokens)?,
        max_ctx_tokens: s.get("max_ctx_tokens", d.max_ctx_tokens)?,
        optimizer: s.get::<Optimizer>("optimizer", d.optimizer)?,
        init: s.get::<InitMode>("init", d.init)?,
    };
    config.validate()?;
    Ok(config)
}

fn train_cmd(a: &TrainArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("seed", a.seed)
        .flag("dim", a.dim)
        .flag("epochs", a.epochs)
        .flag("batch_size", a.batch_size)
        .flag("learning_rate", a.learning_rate)
        .flag("optimizer", a.optimizer.as_ref())
        .flag("n_hard_negatives", a.n_hard_negatives);
    let config = train_config(&s)?;
    s.log("train");

    let corpus = load_entities(&a.entities)?;
    let mentions = load_mentions(&a.mentions, &corpus)?;
    let views = ViewsFile::load(&a.views)?;
    let viewsets = views.aligned(&corpus)?;
    let encoder = match &a.resume {
        Some(path) => {
            let enc = DualEncoder::load(path)?;
            views.check_encoder(&enc)?;
            if enc.dim() != config.dim {
                return Err(Error::DimensionMismatch {
                    expected: config.dim,
                    actual: enc.dim(),
                });
            }
            enc
        }
        None => DualEncoder::init_with(views.vocabulary()?, config.dim, config.seed, config.init)?,
    };
    let outcome = train(&config, encoder, &corpus, &viewsets, &mentions)?;
    outcome.encoder.save(&a.checkpoint)?;
    if let Some(path) = &a.log {
        write_jsonl(path, &outcome.log)?;
    }
    let last = outcome.log.last().map_or(f64::NAN, |r| r.loss);
    Ok(format!(
        "{} steps, final loss {last:.6}, checkpoint {}\n",
        outcome.log.len(),
        outcome.encoder.fingerprint()
    ))
}

fn merge_cmd(a: &MergeArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("strategy", a.strategy.as_ref())
        .flag("top_k_pairs", a.top_k_pairs)
        .flag("max_views", a.max_views)
        .flag("max_iters", a.max_iters);
    let d = MergeConfig::default();
    let config = MergeConfig {
        top_k_pairs: s.get("top_k_pairs", d.top_k_pairs)?,
        max_views: s.opt("max_views")?,
        max_iters: s.get("max_iters", d.max_iters)?,
        strategy: s.get::<MergeStrategy>("strategy", d.strategy)?,
    };
    config.validate()?;
    s.log("merge");

    let encoder = DualEncoder::load(&a.checkpoint)?;
    let views = ViewsFile::load(&a.views)?;
    views.check_encoder(&encoder)?;
    let mut rounds: Vec<(usize, usize)> = Vec::new();
    let merged: Vec<ViewSet> = views
        .viewsets
        .iter()
        .map(|vs| {
            let (out, trace) = heuristic_search_traced(vs, &encoder, &config);
            for (r, &count) in trace.counts.iter().enumerate() {
                if rounds.len() <= r {
                    rounds.push((0, 0));
                }
                rounds[r].0 += count;
                rounds[r].1 += 1;
            }
            out
        })
        .collect();
    let file = ViewsFile {
        header: views.header.clone(),
        viewsets: merged,
    };
    file.save(&a.out)?;
    let mut summary = String::new();
    for (r, (total, n)) in rounds.iter().enumerate() {
        let _ = writeln!(
            summary,
            "round {r}: {} entities, {:.3} views/entity",
            n,
            *total as f64 / *n as f64
        );
    }
    Ok(summary)
}

fn index_cmd(a: &IndexArgs) -> Result<String> {
    let corpus = load_entities(&a.entities)?;
    let encoder = DualEncoder::load(&a.checkpoint)?;
    let views = ViewsFile::load(&a.views)?;
    views.check_encoder(&encoder)?;
    let index = build_index(&corpus, &views.aligned(&corpus)?, &encoder)?;
    index.save(&a.index)?;
    Ok(format!(
        "{} entities, {} vectors, fingerprint {}\n",
        index.len(),
        index.vector_count(),
        index.fingerprint
    ))
}

fn retrieve_cmd(a: &RetrieveArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?.flag("k", a.k);
    let k = s.get("k", 64)?;
    let max_ctx = s.get("max_ctx_tokens", TrainConfig::default().max_ctx_tokens)?;
    s.log("retrieve");

    let corpus = load_entities(&a.entities)?;
    let mentions = load_mentions(&a.mentions, &corpus)?;
    let encoder = DualEncoder::load(&a.checkpoint)?;
    let index = EntityIndex::load(&a.index)?;
    let results = index.retrieve_mentions(&encoder, &mentions, max_ctx, k)?;
    write_jsonl(&a.out, &results)?;
    Ok(format!("{} mentions, top {k}\n", results.len()))
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ReportLine<'a> {
    Recall(&'a EvalReport),
    LengthBin {
        label: &'a str,
        #[serde(flatten)]
        row: &'a crate::evaluator::LengthBinRow,
    },
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("ks", a.ks.as_ref())
        .flag("bin_size", a.bin_size);
    let ks = s.get("ks", KList(DEFAULT_KS.to_vec()))?.0;
    let bin_size = s.get("bin_size", 5)?;
    s.log("evaluate");
    if !a.label.is_empty() && a.label.len() != a.results.len() {
        return Err(Error::Config(format!(
            "{} labels for {} results files",
            a.label.len(),
            a.results.len()
        )));
    }

    let corpus = load_entities(&a.entities)?;
    let mentions = load_mentions(&a.mentions, &corpus)?;
    let viewsets = a
        .views
        .as_ref()
        .map(|p| ViewsFile::load(p).and_then(|v| v.aligned(&corpus)))
        .transpose()?;
    let mut reports = Vec::new();
    let mut bins = Vec::new();
    for (i, path) in a.results.iter().enumerate() {
        let label = a.label.get(i).cloned().unwrap_or_else(|| {
            path.file_stem()
                .map_or_else(|| format!("run{i}"), |s| s.to_string_lossy().into_owned())
        });
        let results = load_results(path)?;
        if let Some(vs) = &viewsets {
            bins.push((
                label.clone(),
                length_binned_errors(&results, &mentions, vs, &ks, bin_size)?,
            ));
        }
        reports.push(recall_at_k(&results, &mentions, &ks, label)?);
    }

    let mut text = compare_configs(&reports)?;
    for (label, rows) in &bins {
        let _ = write!(
            text,
            "\nerror rate by sentence count ({label})\n{}",
            render_bins(rows)
        );
    }
    if let Some(path) = &a.out {
        write_text(path, &text)?;
    }
    if let Some(path) = &a.jsonl {
        let mut lines: Vec<ReportLine> = reports.iter().map(ReportLine::Recall).collect();
        for (label, rows) in &bins {
            lines.extend(rows.iter().map(|row| ReportLine::LengthBin { label, row }));
        }
        write_jsonl(path, &lines)?;
    }
    Ok(text)
}

/// Largest relative gradient error on one batch; the batch comes from files
/// or from a small seeded synthetic corpus.
fn grad_check_cmd(a: &GradCheckArgs) -> Result<String> {
    let s = Settings::new(a.config.as_deref())?
        .flag("seed", a.seed)
        .flag("dim", a.dim)
        .flag("epsilon", a.epsilon)
        .flag("tolerance", a.tolerance)
        .flag("batch_size", a.batch_size);
    let seed = s.get("seed", 0)?;
    let dim = s.get("dim", 8)?;
    let epsilon = s.get("epsilon", 1e-3)?;
    let tolerance = s.get("tolerance", 1e-4)?;
    let batch_size: usize = s.get("batch_size", 4)?;
    let n_hard: usize = s.get("n_hard_negatives", 2)?;
    let max_ctx = s.get("max_ctx_tokens", TrainConfig::default().max_ctx_tokens)?;
    s.log("grad-check");

    let (encoder, viewsets, mentions) = match (&a.entities, &a.mentions, &a.views) {
        (Some(e), Some(m), Some(v)) => {
            let corpus = load_entities(e)?;
            let mentions = load_mentions(m, &corpus)?;
            let views = ViewsFile::load(v)?;
            let encoder = match &a.checkpoint {
                Some(p) => {
                    let enc = DualEncoder::load(p)?;
                    views.check_encoder(&enc)?;
                    enc
                }
                None => DualEncoder::init(views.vocabulary()?, dim, seed)?,
            };
            (encoder, views.aligned(&corpus)?, mentions)
        }
        _ => {
            let (corpus, mentions) =
                generate_synthetic_with(&SyntheticConfig::new(seed, 12, 3, 60))?;
            let mut vocab = Vocabulary::new();
            let viewsets = corpus
                .iter()
                .map(|e| build_views(e, &mut vocab, 40, ViewPolicy::PerSentence))
                .collect::<Result<Vec<_>>>()?;
            for m in &mentions {
                vocab.tokenize(&m.context_left);
                vocab.tokenize(&m.context_right);
            }
            (DualEncoder::init(vocab, dim, seed)?, viewsets, mentions)
        }
    };
    let report = grad_check_batch(
        &encoder, &viewsets, &mentions, batch_size, n_hard, max_ctx, epsilon, seed,
    )?;
    let summary = format!(
        "max relative error {:.3e} over {} entries ({} non-zero), tolerance {tolerance:e}\n",
        report.max_relative_error, report.checked, report.nonzero
    );
    if report.max_relative_error > tolerance {
        return Err(Error::InvalidArgument(format!(
            "gradient check failed: {}",
            summary.trim_end()
        )));
    }
    Ok(summary)
}

/// Gradient check on the first `batch_size` mentions, each with `n_hard`
/// extra negatives taken from the entities that follow its gold one.
#[allow(clippy::too_many_arguments)]
pub fn grad_check_batch(
    encoder: &DualEncoder,
    viewsets: &[ViewSet],
    mentions: &[MentionRecord],
    batch_size: usize,
    n_hard: usize,
    max_ctx_tokens: usize,
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if batch_size == 0 || batch_size > mentions.len() {
        return Err(Error::Config(format!(
            "batch_size {batch_size} must lie in 1..={}",
            mentions.len()
        )));
    }
    let mentions = &mentions[..batch_size];
    let position: BTreeMap<&str, usize> = viewsets
        .iter()
        .enumerate()
        .map(|(i, v)| (v.entity_id.as_str(), i))
        .collect();
    let extra: Vec<Vec<usize>> = mentions
        .iter()
        .map(|m| {
            let gold = *position
                .get(m.gold_entity_id.as_str())
                .ok_or_else(|| Error::MissingViewSet(m.gold_entity_id.clone()))?;
            Ok((1..=n_hard.min(viewsets.len().saturating_sub(1)))
                .map(|d| (gold + d) % viewsets.len())
                .collect())
        })
        .collect::<Result<_>>()?;
    let batch = make_batch(encoder, viewsets, mentions, &extra, max_ctx_tokens)?;
    grad_check(encoder, &batch, epsilon, seed)
}
