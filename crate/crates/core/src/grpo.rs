//! Group-relative policy optimization: standardized group advantages, a
//! clipped likelihood-ratio surrogate and a reverse-KL penalty, with the
//! analytic gradient of the objective.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{PolicyContext, ToyPolicy};
use crate::rewards::RewardBreakdown;
use crate::structured::StructuredOutput;

/// Exponent bound applied before exponentiating log-ratios.
pub const LOG_RATIO_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_coeff: f64,
    pub std_floor: f64,
    pub temperature: f64,
    pub steps: usize,
    /// Step size on the batch-mean gradient. The tabular policy needs a far
    /// larger value than a language model would.
    pub learning_rate: f64,
    /// Contexts sampled per step; their group gradients are averaged.
    pub batch_size: usize,
    /// Refresh the reference snapshot every this many steps; 0 keeps the
    /// step-0 policy for the whole run.
    pub ref_refresh_interval: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 5,
            clip_epsilon: 0.2,
            kl_coeff: 0.08,
            std_floor: 1e-8,
            temperature: 0.9,
            steps: 500,
            learning_rate: 2.0,
            batch_size: 64,
            ref_refresh_interval: 0,
            seed: 0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.clip_epsilon.is_nan() || self.clip_epsilon <= 0.0 {
            return bad("clip_epsilon must be positive");
        }
        if !(self.kl_coeff >= 0.0 && self.kl_coeff.is_finite()) {
            return bad("kl_coeff must be non-negative");
        }
        if self.std_floor.is_nan() || self.std_floor <= 0.0 {
            return bad("std_floor must be positive");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
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

/// `(r - mean) / std` with the unbiased standard deviation. Groups whose
/// std falls below `std_floor` get all-zero advantages.
pub fn compute_advantages(rewards: &[f64], std_floor: f64) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (g - 1) as f64;
    let std = var.sqrt();
    if std.is_nan() || std < std_floor {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// `exp(logp_new - logp_old)`, exponent clamped to ±30.
pub fn likelihood_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old)
        .clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP)
        .exp()
}

fn surrogate_term(ratio: f64, advantage: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if clipped < unclipped {
        (clipped, true)
    } else {
        (unclipped, false)
    }
}

/// Mean over the group of `min(ρ A, clip(ρ, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate(ratios: &[f64], advantages: &[f64], eps: f64) -> Result<f64> {
    if ratios.len() != advantages.len() {
        return Err(Error::LengthMismatch {
            left: ratios.len(),
            right: advantages.len(),
        });
    }
    if ratios.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = ratios
        .iter()
        .zip(advantages)
        .map(|(&r, &a)| surrogate_term(r, a, eps).0)
        .sum();
    Ok(total / ratios.len() as f64)
}

fn kl_term(logp_ref: f64, logp_new: f64) -> f64 {
    let x = (logp_ref - logp_new).clamp(-LOG_RATIO_CLAMP, LOG_RATIO_CLAMP);
    // expm1 keeps precision when the ratio is close to 1.
    (x.exp_m1() - x).max(0.0)
}

/// Mean of `r - ln r - 1` with `r = π_ref / π_θ`; never negative.
pub fn kl_estimate(logp_ref: &[f64], logp_new: &[f64]) -> Result<f64> {
    if logp_ref.len() != logp_new.len() {
        return Err(Error::LengthMismatch {
            left: logp_ref.len(),
            right: logp_new.len(),
        });
    }
    if logp_ref.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logp_ref.iter().zip(logp_new).map(|(&r, &n)| kl_term(r, n)).sum();
    Ok(total / logp_ref.len() as f64)
}

/// A policy whose sequence log-probabilities are differentiable in a
/// table of parameters.
pub trait DifferentiablePolicy {
    type Context: Copy;

    fn parameter_shape(&self) -> (usize, usize);

    fn logprob(&self, ctx: Self::Context, emissions: &[usize], temperature: f64) -> Result<f64>;

    /// Adds `weight * ∇ logprob` into `grad`.
    fn accumulate_logprob_gradient(
        &self,
        ctx: Self::Context,
        emissions: &[usize],
        temperature: f64,
        weight: f64,
        grad: &mut Array2<f64>,
    ) -> Result<()>;
}

impl DifferentiablePolicy for ToyPolicy {
    type Context = PolicyContext;

    fn parameter_shape(&self) -> (usize, usize) {
        self.logits().dim()
    }

    fn logprob(&self, ctx: PolicyContext, emissions: &[usize], temperature: f64) -> Result<f64> {
        self.sequence_logprob(ctx, emissions, temperature)
    }

    fn accumulate_logprob_gradient(
        &self,
        ctx: PolicyContext,
        emissions: &[usize],
        temperature: f64,
        weight: f64,
        grad: &mut Array2<f64>,
    ) -> Result<()> {
        self.accumulate_gradient(ctx, emissions, temperature, weight, grad)
    }
}

/// One sampled output of a group.
#[derive(Debug, Clone)]
pub struct GroupSample {
    pub raw: String,
    pub parsed: StructuredOutput,
    pub emissions: Vec<usize>,
    pub breakdown: RewardBreakdown,
}

/// `G` outputs sampled for one prompt, with their rewards, advantages and
/// log-probabilities under the sampling and reference policies.
#[derive(Debug, Clone)]
pub struct RolloutGroup<C> {
    pub prompt: String,
    pub context: C,
    pub samples: Vec<GroupSample>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl<C> RolloutGroup<C> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.samples.len();
        if g < 2 {
            return Err(Error::GroupTooSmall(g));
        }
        for len in [
            self.rewards.len(),
            self.advantages.len(),
            self.logp_old.len(),
            self.logp_ref.len(),
        ] {
            if len != g {
                return Err(Error::LengthMismatch { left: len, right: g });
            }
        }
        Ok(())
    }
}

/// Objective value and its parts for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub objective: f64,
    pub surrogate: f64,
    pub kl: f64,
    pub gradient: Array2<f64>,
}

/// `surrogate - β_kl * KL` and its gradient in the policy parameters.
///
/// Samples on the clipped branch contribute no surrogate gradient; the KL
/// term contributes `-β_kl (1 - π_ref/π_θ) ∇ log π_θ` per sample. All terms
/// are averaged over the group.
pub fn grpo_objective<P: DifferentiablePolicy>(
    policy: &P,
    group: &RolloutGroup<P::Context>,
    cfg: &GrpoConfig,
) -> Result<ObjectiveValue> {
    group.validate()?;
    let g = group.len() as f64;
    let mut gradient = Array2::zeros(policy.parameter_shape());
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    for (i, sample) in group.samples.iter().enumerate() {
        let logp_new = policy.logprob(group.context, &sample.emissions, cfg.temperature)?;
        let ratio = likelihood_ratio(logp_new, group.logp_old[i]);
        let (term, clipped) = surrogate_term(ratio, group.advantages[i], cfg.clip_epsilon);
        surrogate += term;
        kl += kl_term(group.logp_ref[i], logp_new);

        let mut weight = 0.0;
        if !clipped {
            weight += ratio * group.advantages[i];
        }
        if cfg.kl_coeff > 0.0 {
            let ref_ratio = likelihood_ratio(group.logp_ref[i], logp_new);
            weight -= cfg.kl_coeff * (1.0 - ref_ratio);
        }
        if weight != 0.0 {
            policy.accumulate_logprob_gradient(
                group.context,
                &sample.emissions,
                cfg.temperature,
                weight / g,
                &mut gradient,
            )?;
        }
    }
    surrogate /= g;
    kl /= g;
    Ok(ObjectiveValue {
        objective: surrogate - cfg.kl_coeff * kl,
        surrogate,
        kl,
        gradient,
    })
}
