//! Tabular autoregressive softmax policy over verb-noun emissions.
//!
//! The alphabet holds every pair of the vocabulary (flat index
//! `verb * |nouns| + noun`) plus a stop symbol. With context order 1 the
//! first emission is conditioned on a hash bucket of the last observed pair
//! and later emissions on the previous emission; with order 0 a single row
//! of logits is shared by every step. Log-probabilities and their
//! gradients are exact.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::fnv1a;
use crate::structured::canonical;
use crate::vocab::{ActionPair, ActionSequence, Vocabulary};

/// Hash buckets for the last observed pair.
pub const PROMPT_BUCKETS: usize = 16;

/// What the policy sees of a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyContext {
    pub prompt_bucket: usize,
}

impl PolicyContext {
    pub fn from_last_pair(last: Option<ActionPair>) -> Self {
        let prompt_bucket = last.map_or(0, |p| {
            let mut key = [0u8; 16];
            key[..8].copy_from_slice(&(p.verb as u64).to_le_bytes());
            key[8..].copy_from_slice(&(p.noun as u64).to_le_bytes());
            (fnv1a(&key) % PROMPT_BUCKETS as u64) as usize
        });
        Self { prompt_bucket }
    }

    pub fn from_observed(observed: &ActionSequence) -> Self {
        Self::from_last_pair(observed.last_pair())
    }
}

/// Templated think and intention text wrapped around sampled answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillerTemplate {
    pub think: String,
    /// `{noun}` is replaced by the most frequent noun among the emissions.
    pub intention: String,
}

impl Default for FillerTemplate {
    fn default() -> Self {
        Self {
            think: "I observe the recent actions.".into(),
            intention: "prepare {noun}".into(),
        }
    }
}

impl FillerTemplate {
    fn intention_for(&self, pairs: &[ActionPair], vocab: &Vocabulary) -> String {
        let mut counts = vec![0usize; vocab.noun_count()];
        for p in pairs {
            counts[p.noun] += 1;
        }
        let noun = match counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))) {
            Some((n, &c)) if c > 0 => vocab.noun_label(n),
            _ => "",
        };
        self.intention.replace("{noun}", noun).trim().to_string()
    }
}

/// One sampled generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub raw: String,
    /// Emitted symbols in order, including a trailing stop if one was drawn.
    pub emissions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    verbs: usize,
    nouns: usize,
    context_order: u8,
    #[serde(with = "grid")]
    logits: Array2<f64>,
}

mod grid {
    use ndarray::Array2;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(a: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(D::Error::custom("ragged logits table"));
        }
        let n = rows.len();
        Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
            .map_err(D::Error::custom)
    }
}

/// Softmax of `logits / temperature`, computed stably.
pub fn softmax(logits: impl IntoIterator<Item = f64>, temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = logits.into_iter().map(|l| l / temperature).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl ToyPolicy {
    /// All-zero logits, i.e. uniform emissions.
    pub fn uniform(verbs: usize, nouns: usize, context_order: u8) -> Result<Self> {
        if verbs == 0 || nouns == 0 {
            return Err(Error::InvalidConfig("policy needs a non-empty vocabulary".into()));
        }
        if context_order > 1 {
            return Err(Error::InvalidConfig("context_order must be 0 or 1".into()));
        }
        let alphabet = verbs * nouns + 1;
        let rows = if context_order == 0 {
            1
        } else {
            PROMPT_BUCKETS + alphabet - 1
        };
        Ok(Self {
            verbs,
            nouns,
            context_order,
            logits: Array2::zeros((rows, alphabet)),
        })
    }

    pub fn for_vocab(vocab: &Vocabulary, context_order: u8) -> Result<Self> {
        Self::uniform(vocab.verb_count(), vocab.noun_count(), context_order)
    }

    /// Uniform logits plus `N(0, scale^2)`-ish noise (uniform in ±scale·√3).
    pub fn randomized<R: Rng>(mut self, scale: f64, rng: &mut R) -> Self {
        if scale > 0.0 {
            let half = scale * 3f64.sqrt();
            self.logits.mapv_inplace(|_| rng.random_range(-half..=half));
        }
        self
    }

    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut Array2<f64> {
        &mut self.logits
    }

    pub fn context_order(&self) -> u8 {
        self.context_order
    }

    pub fn alphabet_size(&self) -> usize {
        self.verbs * self.nouns + 1
    }

    pub fn stop_symbol(&self) -> usize {
        self.verbs * self.nouns
    }

    pub fn symbol_pair(&self, symbol: usize) -> Option<ActionPair> {
        (symbol < self.stop_symbol()).then(|| ActionPair::new(symbol / self.nouns, symbol % self.nouns))
    }

    /// Row of the logits table used after `prev` (None at the first step).
    pub fn row_for(&self, ctx: PolicyContext, prev: Option<usize>) -> usize {
        match (self.context_order, prev) {
            (0, _) => 0,
            (_, None) => ctx.prompt_bucket % PROMPT_BUCKETS,
            (_, Some(s)) => PROMPT_BUCKETS + s,
        }
    }

    pub fn probabilities(&self, row: usize, temperature: f64) -> Vec<f64> {
        softmax(self.logits.row(row).iter().copied(), temperature)
    }

    fn check_emissions(&self, emissions: &[usize]) -> Result<()> {
        let stop = self.stop_symbol();
        for (i, &e) in emissions.iter().enumerate() {
            if e > stop {
                return Err(Error::UnknownEmission(e));
            }
            if e == stop && i + 1 != emissions.len() {
                return Err(Error::InvalidEmissions(format!("stop symbol at step {i} is not last")));
            }
        }
        Ok(())
    }

    /// Draws up to `z` pairs, stopping early on the stop symbol, and wraps
    /// them in the canonical tagged layout.
    pub fn sample_output<R: Rng>(
        &self,
        ctx: PolicyContext,
        z: usize,
        temperature: f64,
        vocab: &Vocabulary,
        filler: &FillerTemplate,
        rng: &mut R,
    ) -> Rollout {
        assert!(temperature > 0.0, "temperature must be positive");
        let mut emissions = Vec::with_capacity(z + 1);
        let mut pairs = Vec::with_capacity(z);
        let mut prev = None;
        while pairs.len() < z {
            let probs = self.probabilities(self.row_for(ctx, prev), temperature);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut symbol = probs.iter().rposition(|p| *p > 0.0).unwrap_or(0);
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    symbol = i;
                    break;
                }
            }
            emissions.push(symbol);
            match self.symbol_pair(symbol) {
                Some(p) => pairs.push(p),
                None => break,
            }
            prev = Some(symbol);
        }
        let answer = pairs
            .iter()
            .map(|p| vocab.pair_text(*p))
            .collect::<Vec<_>>()
            .join(", ");
        let raw = canonical(&filler.think, &filler.intention_for(&pairs, vocab), &answer);
        Rollout { raw, emissions }
    }

    /// Sum of per-step log-softmax probabilities of the emissions.
    pub fn sequence_logprob(&self, ctx: PolicyContext, emissions: &[usize], temperature: f64) -> Result<f64> {
        self.check_emissions(emissions)?;
        let mut total = 0.0;
        let mut prev = None;
        for &e in emissions {
            let row = self.logits.row(self.row_for(ctx, prev));
            let scaled: Vec<f64> = row.iter().map(|l| l / temperature).collect();
            let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scaled.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            total += scaled[e] - lse;
            prev = Some(e);
        }
        Ok(total)
    }

    /// Gradient of [`sequence_logprob`](Self::sequence_logprob) with respect
    /// to the logits table.
    pub fn logprob_gradient(
        &self,
        ctx: PolicyContext,
        emissions: &[usize],
        temperature: f64,
    ) -> Result<Array2<f64>> {
        let mut grad = Array2::zeros(self.logits.dim());
        self.accumulate_gradient(ctx, emissions, temperature, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `weight * ∇ log π(emissions)` into `grad`.
    pub fn accumulate_gradient(
        &self,
        ctx: PolicyContext,
        emissions: &[usize],
        temperature: f64,
        weight: f64,
        grad: &mut Array2<f64>,
    ) -> Result<()> {
        self.check_emissions(emissions)?;
        if grad.dim() != self.logits.dim() {
            return Err(Error::DimensionMismatch("gradient shape differs from logits".into()));
        }
        let mut prev = None;
        for &e in emissions {
            let r = self.row_for(ctx, prev);
            let probs = self.probabilities(r, temperature);
            let mut row = grad.row_mut(r);
            for (a, p) in probs.iter().enumerate() {
                let indicator = if a == e { 1.0 } else { 0.0 };
                row[a] += weight * (indicator - p) / temperature;
            }
            prev = Some(e);
        }
        Ok(())
    }

    /// Gradient ascent step: `logits += learning_rate * gradient`.
    pub fn apply_update(&mut self, gradient: &Array2<f64>, learning_rate: f64) -> Result<()> {
        if gradient.dim() != self.logits.dim() {
            return Err(Error::DimensionMismatch(format!(
                "gradient {:?} vs logits {:?}",
                gradient.dim(),
                self.logits.dim()
            )));
        }
        self.logits.scaled_add(learning_rate, gradient);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        let expected = Self::uniform(p.verbs, p.nouns, p.context_order)?;
        if p.logits.dim() != expected.logits.dim() || p.logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::DimensionMismatch("checkpoint logits do not match metadata".into()));
        }
        Ok(p)
    }
}
