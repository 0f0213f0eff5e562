//! Reward components and their aggregation.
//!
//! The total reward is
//!
//! ```text
//! R      = w1 * S_len * R_task + w2 * R_soft
//! R_task = w3 * S_acc + w4 * S_int + w5 * S_lang + w6 * S_fmt
//! ```
//!
//! so a generation that is too short earns nothing but the length penalty.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{average_precision, edit_distance};
use crate::rng::fnv1a;
use crate::structured::{check_language, parse_with_vocab, StructuredOutput};
use crate::vocab::{Action, ActionPair, ActionSequence, Vocabulary};

/// Aggregation weights `w1..w6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
    pub w6: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w1: 0.90,
            w2: 0.10,
            w3: 0.85,
            w4: 0.05,
            w5: 0.05,
            w6: 0.05,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w1, self.w2, self.w3, self.w4, self.w5, self.w6];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("reward weights must be non-negative".into()));
        }
        Ok(())
    }
}

/// Center `beta` and sharpness `gamma` of the intention sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionParams {
    pub beta: f64,
    pub gamma: f64,
}

impl Default for IntentionParams {
    fn default() -> Self {
        Self {
            beta: 0.8,
            gamma: 40.0,
        }
    }
}

/// Soft overlong window: the penalty ramps over `(l_max - l_cache, l_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlongParams {
    pub l_max: usize,
    pub l_cache: usize,
}

impl Default for OverlongParams {
    fn default() -> Self {
        Self {
            l_max: 450,
            l_cache: 256,
        }
    }
}

/// All reward hyperparameters, as loaded from one JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub intention: IntentionParams,
    pub overlong: OverlongParams,
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let IntentionParams { beta, gamma } = self.intention;
        if !(beta > 0.0 && beta < 1.0) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig("need 0 < beta < 1 and gamma > 0".into()));
        }
        let OverlongParams { l_max, l_cache } = self.overlong;
        if l_cache == 0 || l_max == 0 || l_cache > l_max {
            return Err(Error::InvalidConfig("need 0 < l_cache <= l_max".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Individual scores before weighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub s_len: f64,
    pub s_fmt: f64,
    pub s_lang: f64,
    pub s_acc: f64,
    pub s_int: f64,
    pub r_soft: f64,
}

/// Components together with the weighted task and total reward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub s_len: f64,
    pub s_fmt: f64,
    pub s_lang: f64,
    pub s_acc: f64,
    pub s_int: f64,
    pub r_soft: f64,
    pub r_task: f64,
    pub r_total: f64,
}

/// 1 when at least `z` pairs were produced.
pub fn length_reward(parsed_pairs: &ActionSequence, z: usize) -> f64 {
    if parsed_pairs.len() >= z {
        1.0
    } else {
        0.0
    }
}

pub fn format_reward(parse: &StructuredOutput) -> f64 {
    if parse.tags_valid {
        1.0
    } else {
        0.0
    }
}

pub fn language_reward(raw: &str) -> f64 {
    if check_language(raw) {
        1.0
    } else {
        0.0
    }
}

/// Linear length penalty: 0 up to `l_max - l_cache`, falling to -1 at
/// `l_max`, and -1 beyond.
pub fn soft_overlong(len: usize, p: OverlongParams) -> f64 {
    let start = p.l_max.saturating_sub(p.l_cache);
    if len <= start {
        0.0
    } else if len <= p.l_max {
        -((len - start) as f64) / p.l_cache as f64
    } else {
        -1.0
    }
}

#[derive(PartialEq, Eq, Hash)]
enum EdSymbol {
    Pair(ActionPair),
    PredPad,
    TruthPad,
}

/// `1 - ED(pred normalized to Z, truth) / |truth|`, clamped to [0, 1].
/// Prediction pads never match anything.
pub fn accuracy_reward_ed(pred: &ActionSequence, truth: &ActionSequence, z: usize) -> Result<f64> {
    if truth.is_empty() || z == 0 {
        return Err(Error::EmptyTruth);
    }
    if truth.len() != z {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: z,
        });
    }
    let pred: Vec<EdSymbol> = pred
        .normalized(z)
        .actions()
        .iter()
        .map(|a| match a {
            Action::Pair(p) => EdSymbol::Pair(*p),
            Action::Pad => EdSymbol::PredPad,
        })
        .collect();
    let truth_syms: Vec<EdSymbol> = truth
        .actions()
        .iter()
        .map(|a| match a {
            Action::Pair(p) => EdSymbol::Pair(*p),
            Action::Pad => EdSymbol::TruthPad,
        })
        .collect();
    let d = edit_distance(&pred, &truth_syms) as f64;
    Ok((1.0 - d / truth.len() as f64).clamp(0.0, 1.0))
}

/// Per-example average precision used as an accuracy reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapAccuracy {
    pub value: f64,
    /// Set when the example has no positive label; `value` is then 0.
    pub skipped_no_positives: bool,
}

pub fn accuracy_reward_map(pred_scores: &[f64], truth_labels: &[bool]) -> Result<MapAccuracy> {
    Ok(match average_precision(pred_scores, truth_labels)? {
        Some(value) => MapAccuracy {
            value,
            skipped_no_positives: false,
        },
        None => MapAccuracy {
            value: 0.0,
            skipped_no_positives: true,
        },
    })
}

/// Sentence embedding backend for the intention reward.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Bag-of-words hashing embedder: lowercased alphanumeric tokens are hashed
/// into buckets with unit increments, then L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        for tok in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            v[self.bucket(tok)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

/// The default 256-dimension hashing embedder.
pub fn reference_embedder() -> HashEmbedder {
    HashEmbedder::new(256)
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid of the similarity rescaled so that `sim = 1` maps to 1.
pub fn intention_from_similarity(sim: f64, p: IntentionParams) -> f64 {
    let num = sigmoid(p.gamma * (sim - p.beta));
    let den = sigmoid(p.gamma * (1.0 - p.beta));
    (num / den).min(1.0)
}

pub fn intention_reward(
    int_gen: &str,
    int_gt: &str,
    emb: &dyn EmbeddingProvider,
    p: IntentionParams,
) -> f64 {
    let sim = cosine(&emb.embed(int_gen), &emb.embed(int_gt));
    intention_from_similarity(sim, p)
}

/// Fills `r_task` and `r_total` from the components.
pub fn total_reward(c: RewardComponents, w: RewardWeights) -> RewardBreakdown {
    let r_task = w.w3 * c.s_acc + w.w4 * c.s_int + w.w5 * c.s_lang + w.w6 * c.s_fmt;
    let r_total = w.w1 * c.s_len * r_task + w.w2 * c.r_soft;
    RewardBreakdown {
        s_len: c.s_len,
        s_fmt: c.s_fmt,
        s_lang: c.s_lang,
        s_acc: c.s_acc,
        s_int: c.s_int,
        r_soft: c.r_soft,
        r_task,
        r_total,
    }
}

/// Scores raw generations end to end against a ground-truth future.
pub struct RewardPipeline {
    pub config: RewardConfig,
    pub vocab: Vocabulary,
    embedder: Box<dyn EmbeddingProvider>,
}

impl std::fmt::Debug for RewardPipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RewardPipeline")
            .field("config", &self.config)
            .field("embedding_dim", &self.embedder.dim())
            .finish()
    }
}

impl RewardPipeline {
    pub fn new(config: RewardConfig, vocab: Vocabulary, embedder: Box<dyn EmbeddingProvider>) -> Self {
        Self {
            config,
            vocab,
            embedder,
        }
    }

    /// Pipeline with the reference embedder.
    pub fn with_reference_embedder(config: RewardConfig, vocab: Vocabulary) -> Self {
        Self::new(config, vocab, Box::new(reference_embedder()))
    }

    pub fn embedder(&self) -> &dyn EmbeddingProvider {
        self.embedder.as_ref()
    }

    /// Parses `raw` and computes every component. `Z` is the truth length;
    /// a missing reference intention scores `S_int = 0`.
    pub fn score(
        &self,
        raw: &str,
        truth: &ActionSequence,
        intention_gt: Option<&str>,
    ) -> Result<(StructuredOutput, RewardBreakdown)> {
        let parsed = parse_with_vocab(raw, &self.vocab);
        let z = truth.len();
        let components = RewardComponents {
            s_len: length_reward(&parsed.parsed_pairs, z),
            s_fmt: format_reward(&parsed),
            s_lang: language_reward(raw),
            s_acc: accuracy_reward_ed(&parsed.parsed_pairs, truth, z)?,
            s_int: intention_gt.map_or(0.0, |gt| {
                intention_reward(&parsed.intention_text, gt, self.embedder(), self.config.intention)
            }),
            r_soft: soft_overlong(parsed.token_count, self.config.overlong),
        };
        Ok((parsed, total_reward(components, self.config.weights)))
    }
}
