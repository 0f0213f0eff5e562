//! Command-line surface. Every subcommand is also callable as a library
//! function so the binary stays a thin shim.
//!
//! Exit codes: 0 on success, 2 for input or validation errors, 3 when an
//! internal invariant is violated.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::cooccurrence::{
    build_cooccurrence, corrected_joint, independent_joint, map_decode, normalize_conditionals,
    CooccurrenceMatrix, MarginalDistributions,
};
use crate::error::Error;
use crate::grpo::GrpoConfig;
use crate::metrics::{
    ego4d_eval, make_freq_rare_split, map_eval, EdReport, FreqRareSplit, HorizonData, MapReport,
    DEFAULT_HORIZONS,
};
use crate::policy::{FillerTemplate, ToyPolicy};
use crate::rewards::{RewardBreakdown, RewardConfig, RewardPipeline};
use crate::rng::{stream, Stream};
use crate::structured::PromptTemplate;
use crate::synth::{generate_synthetic_task, SyntheticTaskConfig};
use crate::trainer::{train_with, TrainingSetup};
use crate::vocab::{load_vocabulary, parse_annotations, resolve_slots, AnnotationRecord, WireSlot};

/// Failure of a CLI command.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "lta", version, about = "Long-term action anticipation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Ego4d,
    Map,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a verb-noun co-occurrence CSV from annotations.
    CoocBuild {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Count future segments as well as observed ones.
        #[arg(long)]
        include_future: bool,
    },
    /// Apply semantic correction to per-segment verb/noun marginals.
    Correct {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        marginals: PathBuf,
        #[arg(long)]
        cooc: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generations against ground-truth futures.
    Reward {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        generations: PathBuf,
        /// Annotation JSONL whose clip ids match the generation ids.
        #[arg(long)]
        truth: PathBuf,
        /// Reward configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy policy with GRPO.
    Train {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// GRPO configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reward_config: Option<PathBuf>,
        /// Plain-text prompt template.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        context_order: u8,
        /// Standard deviation scale of the initial logits; 0 starts uniform.
        #[arg(long, default_value_t = 0.0)]
        init_scale: f64,
        /// Also write a checkpoint every N steps (0 = final only).
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Evaluate predictions with the edit-distance or mAP protocol.
    Eval {
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Required in ego4d mode.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated observation horizons for map mode.
        #[arg(long, default_value = "25,50,75")]
        horizons: String,
        /// JSON `{"freq": [...], "rare": [...]}` overriding the median split.
        #[arg(long)]
        freq_split: Option<PathBuf>,
        /// JSON array of per-class training counts for the median split.
        #[arg(long)]
        class_counts: Option<PathBuf>,
    },
    /// Generate a synthetic anticipation task.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::CoocBuild {
            vocab,
            annotations,
            out,
            include_future,
        } => cmd_cooc_build(&vocab, &annotations, &out, include_future).map(|_| ()),
        Command::Correct {
            vocab,
            marginals,
            cooc,
            out,
        } => cmd_correct(&vocab, &marginals, &cooc, &out).map(|_| ()),
        Command::Reward {
            vocab,
            generations,
            truth,
            config,
            out,
        } => {
            let summary = cmd_reward(&vocab, &generations, &truth, config.as_deref(), &out)?;
            println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
            Ok(())
        }
        Command::Train {
            vocab,
            annotations,
            config,
            reward_config,
            template,
            out,
            seed,
            steps,
            context_order,
            init_scale,
            checkpoint_every,
        } => {
            let run = RunConfig {
                vocab,
                annotations,
                grpo_config: config,
                reward_config,
                template,
                out_dir: out,
                seed,
                steps,
                context_order,
                init_scale,
                checkpoint_every,
            };
            cmd_train(&run).map(|_| ())
        }
        Command::Eval {
            mode,
            predictions,
            truth,
            vocab,
            out,
            horizons,
            freq_split,
            class_counts,
        } => {
            let horizons = parse_horizons(&horizons)?;
            let opts = EvalOptions {
                vocab,
                horizons,
                freq_split,
                class_counts,
            };
            let table = cmd_eval(mode, &predictions, &truth, &out, &opts)?;
            print!("{table}");
            Ok(())
        }
        Command::Synth { config, out, seed } => cmd_synth(config.as_deref(), &out, seed).map(|_| ()),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads non-blank JSONL lines as `T`, reporting 1-based line numbers.
fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// `cooc-build`: returns the matrix it wrote.
pub fn cmd_cooc_build(
    vocab_path: &Path,
    annotations: &Path,
    out: &Path,
    include_future: bool,
) -> CliResult<CooccurrenceMatrix> {
    let vocab = load_vocabulary(vocab_path)?;
    let records = parse_annotations(annotations, &vocab)?;
    let matrix = build_cooccurrence(&records, &vocab, include_future)?;
    let w = create(out)?;
    let mut w = w;
    matrix.write_csv(&vocab, &mut w)?;
    finish(w, out)?;
    Ok(matrix)
}

#[derive(Debug, Deserialize)]
struct MarginalRow {
    id: String,
    p_verb: Vec<f64>,
    p_noun: Vec<f64>,
}

/// One corrected decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRow {
    pub id: String,
    pub verb: String,
    pub noun: String,
    pub score: f64,
    /// Argmax of the uncorrected product of marginals.
    pub raw_verb: String,
    pub raw_noun: String,
}

/// `correct`: decodes every marginal row with and without correction.
pub fn cmd_correct(vocab_path: &Path, marginals: &Path, cooc: &Path, out: &Path) -> CliResult<Vec<CorrectedRow>> {
    let vocab = load_vocabulary(vocab_path)?;
    let cooc_file = File::open(cooc).map_err(|e| Error::io(cooc, e))?;
    let matrix = CooccurrenceMatrix::read_csv(&vocab, cooc_file)?;
    let tables = normalize_conditionals(&matrix);
    let mut rows = Vec::new();
    for (line, row) in read_jsonl::<MarginalRow>(marginals)? {
        let at_line = |e: Error| Error::MalformedLine {
            line,
            message: e.to_string(),
        };
        if row.p_verb.len() != vocab.verb_count() || row.p_noun.len() != vocab.noun_count() {
            return Err(Error::DimensionMismatch(format!(
                "line {line}: marginals ({}, {}) vs vocabulary ({}, {})",
                row.p_verb.len(),
                row.p_noun.len(),
                vocab.verb_count(),
                vocab.noun_count()
            ))
            .into());
        }
        let m = MarginalDistributions::new(row.p_verb, row.p_noun).map_err(at_line)?;
        let scores = corrected_joint(&m.p_verb, &m.p_noun, &tables)?;
        let best = map_decode(&scores)?;
        let raw = map_decode(&independent_joint(&m.p_verb, &m.p_noun))?;
        rows.push(CorrectedRow {
            id: row.id,
            verb: vocab.verb_label(best.verb).to_string(),
            noun: vocab.noun_label(best.noun).to_string(),
            score: scores[[best.verb, best.noun]],
            raw_verb: vocab.verb_label(raw.verb).to_string(),
            raw_noun: vocab.noun_label(raw.noun).to_string(),
        });
    }
    let mut w = create(out)?;
    for row in &rows {
        serde_json::to_writer(&mut w, row).map_err(Error::from)?;
        w.write_all(b"\n").map_err(|e| Error::io(out, e))?;
    }
    finish(w, out)?;
    Ok(rows)
}

#[derive(Debug, Deserialize)]
struct GenerationRow {
    id: String,
    text: String,
}

/// Per-sample output of `reward`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub id: String,
    #[serde(flatten)]
    pub breakdown: RewardBreakdown,
    pub tags_valid: bool,
    pub parsed_pairs: usize,
    pub unparsed_answer_items: usize,
    pub token_count: usize,
}

/// Means over all scored generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSummary {
    pub count: usize,
    pub mean: Option<RewardBreakdown>,
}

/// `reward`: writes one breakdown per generation and returns the summary.
pub fn cmd_reward(
    vocab_path: &Path,
    generations: &Path,
    truth: &Path,
    config: Option<&Path>,
    out: &Path,
) -> CliResult<RewardSummary> {
    let vocab = load_vocabulary(vocab_path)?;
    let config = match config {
        Some(p) => RewardConfig::load(p)?,
        None => RewardConfig::default(),
    };
    let records = parse_annotations(truth, &vocab)?;
    let by_id: HashMap<&str, &AnnotationRecord> =
        records.iter().map(|r| (r.clip_id.as_str(), r)).collect();
    let pipeline = RewardPipeline::with_reference_embedder(config, vocab);
    let mut rows = Vec::new();
    for (line, generation) in read_jsonl::<GenerationRow>(generations)? {
        let record = by_id.get(generation.id.as_str()).ok_or_else(|| Error::MalformedLine {
            line,
            message: format!("no ground truth for id `{}`", generation.id),
        })?;
        let (parsed, breakdown) =
            pipeline.score(&generation.text, &record.future, record.intention_gt.as_deref())?;
        if !(breakdown.r_total.is_finite()) {
            return Err(CliError::Internal(format!("non-finite reward for `{}`", generation.id)));
        }
        rows.push(RewardRow {
            id: generation.id,
            breakdown,
            tags_valid: parsed.tags_valid,
            parsed_pairs: parsed.parsed_pairs.len(),
            unparsed_answer_items: parsed.unparsed_answer_items,
            token_count: parsed.token_count,
        });
    }
    let mut w = create(out)?;
    for row in &rows {
        serde_json::to_writer(&mut w, row).map_err(Error::from)?;
        w.write_all(b"\n").map_err(|e| Error::io(out, e))?;
    }
    finish(w, out)?;

    let mean = (!rows.is_empty()).then(|| {
        let n = rows.len() as f64;
        let avg = |f: fn(&RewardBreakdown) -> f64| rows.iter().map(|r| f(&r.breakdown)).sum::<f64>() / n;
        RewardBreakdown {
            s_len: avg(|b| b.s_len),
            s_fmt: avg(|b| b.s_fmt),
            s_lang: avg(|b| b.s_lang),
            s_acc: avg(|b| b.s_acc),
            s_int: avg(|b| b.s_int),
            r_soft: avg(|b| b.r_soft),
            r_task: avg(|b| b.r_task),
            r_total: avg(|b| b.r_total),
        }
    });
    Ok(RewardSummary {
        count: rows.len(),
        mean,
    })
}

/// Inputs of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub vocab: PathBuf,
    pub annotations: PathBuf,
    pub grpo_config: Option<PathBuf>,
    pub reward_config: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub context_order: u8,
    pub init_scale: f64,
    pub checkpoint_every: usize,
}

impl RunConfig {
    pub fn new(vocab: impl Into<PathBuf>, annotations: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            vocab: vocab.into(),
            annotations: annotations.into(),
            grpo_config: None,
            reward_config: None,
            template: None,
            out_dir: out_dir.into(),
            seed: None,
            steps: None,
            context_order: 1,
            init_scale: 0.0,
            checkpoint_every: 0,
        }
    }
}

pub const TRAINING_LOG: &str = "training_log.csv";
pub const FINAL_CHECKPOINT: &str = "policy.json";

/// `train`: writes `training_log.csv`, `policy.json` and optional periodic
/// checkpoints into the output directory. Returns the written paths.
pub fn cmd_train(run: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let vocab = load_vocabulary(&run.vocab)?;
    let records = parse_annotations(&run.annotations, &vocab)?;
    let mut cfg = match &run.grpo_config {
        Some(p) => GrpoConfig::load(p)?,
        None => GrpoConfig::default(),
    };
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = run.steps {
        cfg.steps = steps;
    }
    cfg.validate()?;
    let reward_config = match &run.reward_config {
        Some(p) => RewardConfig::load(p)?,
        None => RewardConfig::default(),
    };
    let prompt = match &run.template {
        Some(p) => PromptTemplate::load(p)?,
        None => PromptTemplate::default(),
    };
    if records.is_empty() && cfg.steps > 0 {
        return Err(Error::InvalidConfig("annotation file has no records".into()).into());
    }
    if !(run.init_scale >= 0.0 && run.init_scale.is_finite()) {
        return Err(Error::InvalidConfig("init_scale must be non-negative".into()).into());
    }
    let mut init_rng = stream(cfg.seed, Stream::Init);
    let mut policy = ToyPolicy::for_vocab(&vocab, run.context_order)?.randomized(run.init_scale, &mut init_rng);
    let pipeline = RewardPipeline::with_reference_embedder(reward_config, vocab);
    let filler = FillerTemplate::default();
    let setup = TrainingSetup {
        dataset: &records,
        pipeline: &pipeline,
        prompt: &prompt,
        filler: &filler,
    };

    fs::create_dir_all(&run.out_dir).map_err(|e| Error::io(&run.out_dir, e))?;
    let mut written = Vec::new();
    let every = run.checkpoint_every;
    let log = train_with(&mut policy, &setup, &cfg, |step, p| {
        if every > 0 && (step + 1) % every == 0 && step + 1 < cfg.steps {
            let path = run.out_dir.join(format!("checkpoint_step_{:05}.json", step + 1));
            fs::write(&path, p.to_json()?).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(())
    })?;
    if log.rows.iter().any(|r| !(r.mean_reward.is_finite() && r.objective.is_finite() && r.kl.is_finite())) {
        return Err(CliError::Internal("training produced non-finite statistics".into()));
    }

    let ckpt = run.out_dir.join(FINAL_CHECKPOINT);
    fs::write(&ckpt, policy.to_json()?).map_err(|e| Error::io(&ckpt, e))?;
    written.push(ckpt);
    let log_path = run.out_dir.join(TRAINING_LOG);
    let mut w = create(&log_path)?;
    log.write_csv(&mut w)?;
    finish(w, &log_path)?;
    written.push(log_path);
    Ok(written)
}

pub fn parse_horizons(text: &str) -> CliResult<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let h: u32 = part
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("horizon `{part}` is not an integer")))?;
        if h == 0 || h >= 100 || out.contains(&h) {
            return Err(Error::InvalidConfig(format!("horizon {h} must be distinct and in 1..=99")).into());
        }
        out.push(h);
    }
    if out.is_empty() {
        out.extend(DEFAULT_HORIZONS);
    }
    Ok(out)
}

/// Options for `eval`.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub vocab: Option<PathBuf>,
    pub horizons: Vec<u32>,
    pub freq_split: Option<PathBuf>,
    pub class_counts: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct Ego4dPrediction {
    clip_id: String,
    candidates: Vec<Vec<WireSlot>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEd {
    pub clip_id: String,
    #[serde(flatten)]
    pub report: EdReport,
}

/// Edit-distance report: means over clips plus per-clip values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ego4dReport {
    pub clips: usize,
    pub mean: Option<EdReport>,
    pub per_clip: Vec<ClipEd>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum LabelValue {
    Bool(bool),
    Num(f64),
}

impl LabelValue {
    fn positive(self) -> bool {
        match self {
            LabelValue::Bool(b) => b,
            LabelValue::Num(x) => x > 0.5,
        }
    }
}

#[derive(Debug, Deserialize)]
struct MapPrediction {
    clip_id: String,
    scores: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct MapTruth {
    clip_id: String,
    labels: BTreeMap<String, Vec<LabelValue>>,
}

/// `eval`: writes the JSON report to `out` and returns an aligned table.
pub fn cmd_eval(mode: EvalMode, predictions: &Path, truth: &Path, out: &Path, opts: &EvalOptions) -> CliResult<String> {
    let (json, table) = match mode {
        EvalMode::Ego4d => {
            let report = eval_ego4d(predictions, truth, opts)?;
            let table = ego4d_table(&report);
            (serde_json::to_string_pretty(&report).map_err(Error::from)?, table)
        }
        EvalMode::Map => {
            let report = eval_map(predictions, truth, opts)?;
            let table = map_table(&report);
            (serde_json::to_string_pretty(&report).map_err(Error::from)?, table)
        }
    };
    let mut w = create(out)?;
    w.write_all(json.as_bytes()).map_err(|e| Error::io(out, e))?;
    w.write_all(b"\n").map_err(|e| Error::io(out, e))?;
    finish(w, out)?;
    Ok(table)
}

pub fn eval_ego4d(predictions: &Path, truth: &Path, opts: &EvalOptions) -> CliResult<Ego4dReport> {
    let vocab_path = opts
        .vocab
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("ego4d mode needs --vocab".into()))?;
    let vocab = load_vocabulary(vocab_path)?;
    let records = parse_annotations(truth, &vocab)?;
    let by_id: HashMap<&str, &AnnotationRecord> =
        records.iter().map(|r| (r.clip_id.as_str(), r)).collect();
    let mut per_clip = Vec::new();
    for (line, pred) in read_jsonl::<Ego4dPrediction>(predictions)? {
        let record = by_id.get(pred.clip_id.as_str()).ok_or_else(|| Error::MalformedLine {
            line,
            message: format!("no ground truth for clip `{}`", pred.clip_id),
        })?;
        let candidates = pred
            .candidates
            .iter()
            .map(|c| resolve_slots(c, &vocab, line))
            .collect::<Result<Vec<_>, _>>()?;
        let report = ego4d_eval(&candidates, &record.future).map_err(|e| Error::MalformedLine {
            line,
            message: e.to_string(),
        })?;
        per_clip.push(ClipEd {
            clip_id: pred.clip_id,
            report,
        });
    }
    let reports: Vec<EdReport> = per_clip.iter().map(|c| c.report).collect();
    Ok(Ego4dReport {
        clips: per_clip.len(),
        mean: EdReport::mean(&reports),
        per_clip,
    })
}

fn load_split(opts: &EvalOptions, classes: usize, fallback_counts: &[u64]) -> CliResult<FreqRareSplit> {
    if let Some(path) = &opts.freq_split {
        let raw: FreqRareSplit = serde_json::from_str(&read_text(path)?).map_err(Error::from)?;
        return Ok(FreqRareSplit::new(raw.freq, raw.rare, classes)?);
    }
    let counts: Vec<u64> = match &opts.class_counts {
        Some(path) => serde_json::from_str(&read_text(path)?).map_err(Error::from)?,
        None => fallback_counts.to_vec(),
    };
    if counts.len() != classes {
        return Err(Error::DimensionMismatch(format!(
            "{} class counts for {classes} classes",
            counts.len()
        ))
        .into());
    }
    Ok(make_freq_rare_split(&counts, None)?)
}

pub fn eval_map(predictions: &Path, truth: &Path, opts: &EvalOptions) -> CliResult<MapReport> {
    let horizons = if opts.horizons.is_empty() {
        DEFAULT_HORIZONS.to_vec()
    } else {
        opts.horizons.clone()
    };
    let preds = read_jsonl::<MapPrediction>(predictions)?;
    let truths = read_jsonl::<MapTruth>(truth)?;
    let by_id: HashMap<&str, &MapTruth> = truths.iter().map(|(_, t)| (t.clip_id.as_str(), t)).collect();

    let mut data: Vec<HorizonData> = horizons
        .iter()
        .map(|&h| HorizonData {
            horizon: h,
            scores: Vec::new(),
            labels: Vec::new(),
        })
        .collect();
    for (line, pred) in &preds {
        let t = by_id.get(pred.clip_id.as_str()).ok_or_else(|| Error::MalformedLine {
            line: *line,
            message: format!("no labels for clip `{}`", pred.clip_id),
        })?;
        for d in &mut data {
            let key = d.horizon.to_string();
            let missing = |what: &str| Error::MalformedLine {
                line: *line,
                message: format!("clip `{}` has no {what} for horizon {key}", pred.clip_id),
            };
            let scores = pred.scores.get(&key).ok_or_else(|| missing("scores"))?;
            let labels = t.labels.get(&key).ok_or_else(|| missing("labels"))?;
            d.scores.push(scores.clone());
            d.labels.push(labels.iter().map(|l| l.positive()).collect());
        }
    }
    let classes = data
        .iter()
        .flat_map(|d| d.scores.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let mut fallback = vec![0u64; classes];
    for d in &data {
        for row in &d.labels {
            for (c, &l) in row.iter().enumerate().take(classes) {
                fallback[c] += u64::from(l);
            }
        }
    }
    let split = if classes == 0 {
        FreqRareSplit {
            freq: Vec::new(),
            rare: Vec::new(),
        }
    } else {
        load_split(opts, classes, &fallback)?
    };
    let report = map_eval(&data, &split)?;
    let check = |x: Option<f64>| x.is_none_or(|v| (0.0..=1.0).contains(&v));
    if !report
        .horizons
        .iter()
        .all(|h| check(h.map.all) && check(h.map.freq) && check(h.map.rare))
    {
        return Err(CliError::Internal("mAP outside [0, 1]".into()));
    }
    Ok(report)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn ego4d_table(report: &Ego4dReport) -> String {
    let mut s = format!("{:<10}{:>10}{:>10}{:>10}\n", "clips", "verb", "noun", "action");
    let (v, n, a) = match report.mean {
        Some(m) => (Some(m.verb_ed), Some(m.noun_ed), Some(m.action_ed)),
        None => (None, None, None),
    };
    s.push_str(&format!(
        "{:<10}{:>10}{:>10}{:>10}\n",
        report.clips,
        fmt_opt(v),
        fmt_opt(n),
        fmt_opt(a)
    ));
    s
}

pub fn map_table(report: &MapReport) -> String {
    let mut s = format!("{:<10}{:>10}{:>10}{:>10}\n", "horizon", "ALL", "FREQ", "RARE");
    for h in &report.horizons {
        s.push_str(&format!(
            "{:<10}{:>10}{:>10}{:>10}\n",
            h.horizon,
            fmt_opt(h.map.all),
            fmt_opt(h.map.freq),
            fmt_opt(h.map.rare)
        ));
    }
    s.push_str(&format!(
        "{:<10}{:>10}{:>10}{:>10}\n",
        "average",
        fmt_opt(report.average.all),
        fmt_opt(report.average.freq),
        fmt_opt(report.average.rare)
    ));
    s
}

pub const SYNTH_VOCAB: &str = "vocab.csv";
pub const SYNTH_ANNOTATIONS: &str = "annotations.jsonl";
pub const SYNTH_TRANSITIONS: &str = "transitions.json";

/// `synth`: writes vocabulary, annotations and transition table.
pub fn cmd_synth(config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult<Vec<PathBuf>> {
    let mut cfg: SyntheticTaskConfig = match config {
        Some(p) => serde_json::from_str(&read_text(p)?).map_err(Error::from)?,
        None => SyntheticTaskConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let task = generate_synthetic_task(&cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let vocab_path = out.join(SYNTH_VOCAB);
    let mut w = create(&vocab_path)?;
    task.vocab.write_csv(&mut w)?;
    finish(w, &vocab_path)?;

    let ann_path = out.join(SYNTH_ANNOTATIONS);
    let mut w = create(&ann_path)?;
    crate::vocab::write_annotations(&task.records, &task.vocab, &mut w)?;
    finish(w, &ann_path)?;

    let tr_path = out.join(SYNTH_TRANSITIONS);
    let mut text = task.transitions.to_json(&task.vocab)?;
    text.push('\n');
    fs::write(&tr_path, text).map_err(|e| Error::io(&tr_path, e))?;

    // The files must load back into the same records.
    let vocab = load_vocabulary(&vocab_path)?;
    let back = parse_annotations(&ann_path, &vocab)?;
    if back != task.records {
        return Err(CliError::Internal("synthetic annotations do not re-parse identically".into()));
    }
    Ok(vec![vocab_path, ann_path, tr_path])
}
