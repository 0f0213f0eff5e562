//! GRPO training loop for the toy policy.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grpo::{compute_advantages, grpo_objective, GroupSample, GrpoConfig, RolloutGroup};
use crate::policy::{FillerTemplate, PolicyContext, ToyPolicy};
use crate::rewards::RewardPipeline;
use crate::rng::{stream, Stream};
use crate::structured::{render_prompt, PromptTemplate};
use crate::vocab::AnnotationRecord;

/// Per-step training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_intention_reward: f64,
    pub objective: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<TrainingRow>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        if self.rows.is_empty() {
            w.write_record(["step", "mean_reward", "mean_intention_reward", "objective", "kl"])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_reward).collect()
    }

    pub fn mean_intention_rewards(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_intention_reward).collect()
    }
}

/// Everything the loop needs besides the policy and its config.
pub struct TrainingSetup<'a> {
    pub dataset: &'a [AnnotationRecord],
    pub pipeline: &'a RewardPipeline,
    pub prompt: &'a PromptTemplate,
    pub filler: &'a FillerTemplate,
}

/// Samples one group for `record` from `policy`.
pub fn sample_group<R: Rng>(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    record: &AnnotationRecord,
    setup: &TrainingSetup<'_>,
    cfg: &GrpoConfig,
    rng: &mut R,
) -> Result<RolloutGroup<PolicyContext>> {
    let vocab = &setup.pipeline.vocab;
    let z = record.future.len();
    let context = PolicyContext::from_observed(&record.observed);
    let prompt = render_prompt(&record.observed, z, vocab, setup.prompt);
    let mut samples = Vec::with_capacity(cfg.group_size);
    let mut rewards = Vec::with_capacity(cfg.group_size);
    let mut logp_old = Vec::with_capacity(cfg.group_size);
    let mut logp_ref = Vec::with_capacity(cfg.group_size);
    for _ in 0..cfg.group_size {
        let rollout = policy.sample_output(context, z, cfg.temperature, vocab, setup.filler, rng);
        let (parsed, breakdown) =
            setup
                .pipeline
                .score(&rollout.raw, &record.future, record.intention_gt.as_deref())?;
        logp_old.push(policy.sequence_logprob(context, &rollout.emissions, cfg.temperature)?);
        logp_ref.push(reference.sequence_logprob(context, &rollout.emissions, cfg.temperature)?);
        rewards.push(breakdown.r_total);
        samples.push(GroupSample {
            raw: rollout.raw,
            parsed,
            emissions: rollout.emissions,
            breakdown,
        });
    }
    let advantages = compute_advantages(&rewards, cfg.std_floor)?;
    Ok(RolloutGroup {
        prompt,
        context,
        samples,
        rewards,
        advantages,
        logp_old,
        logp_ref,
    })
}

/// Runs `cfg.steps` GRPO steps, updating `policy` in place.
pub fn train(policy: &mut ToyPolicy, setup: &TrainingSetup<'_>, cfg: &GrpoConfig) -> Result<TrainingLog> {
    train_with(policy, setup, cfg, |_, _| Ok(()))
}

/// As [`train`], calling `after_step(step, policy)` after every update.
pub fn train_with<F>(
    policy: &mut ToyPolicy,
    setup: &TrainingSetup<'_>,
    cfg: &GrpoConfig,
    mut after_step: F,
) -> Result<TrainingLog>
where
    F: FnMut(usize, &ToyPolicy) -> Result<()>,
{
    cfg.validate()?;
    if cfg.steps == 0 {
        return Ok(TrainingLog::default());
    }
    if setup.dataset.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    let mut batch_rng = stream(cfg.seed, Stream::Batching);
    let mut sample_rng = stream(cfg.seed, Stream::Sampling);
    let mut reference = policy.clone();
    let mut log = TrainingLog::default();

    for step in 0..cfg.steps {
        let mut gradient = Array2::zeros(policy.logits().dim());
        let (mut objective, mut kl) = (0.0, 0.0);
        let (mut reward_sum, mut intention_sum, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..cfg.batch_size {
            let record = &setup.dataset[batch_rng.random_range(0..setup.dataset.len())];
            let group = sample_group(policy, &reference, record, setup, cfg, &mut sample_rng)?;
            for s in &group.samples {
                reward_sum += s.breakdown.r_total;
                intention_sum += s.breakdown.s_int;
                count += 1;
            }
            let value = grpo_objective(policy, &group, cfg)?;
            gradient += &value.gradient;
            objective += value.objective;
            kl += value.kl;
        }
        let b = cfg.batch_size as f64;
        gradient /= b;
        policy.apply_update(&gradient, cfg.learning_rate)?;
        log.rows.push(TrainingRow {
            step,
            mean_reward: reward_sum / count as f64,
            mean_intention_reward: intention_sum / count as f64,
            objective: objective / b,
            kl: kl / b,
        });
        if cfg.ref_refresh_interval > 0 && (step + 1) % cfg.ref_refresh_interval == 0 {
            reference = policy.clone();
        }
        after_step(step, policy)?;
    }
    Ok(log)
}
