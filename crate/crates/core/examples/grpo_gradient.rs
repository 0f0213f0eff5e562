//! Builds one rollout group by hand, evaluates the GRPO objective and checks
//! its analytic gradient against central finite differences.
//!
//! ```bash
//! cargo run -p lta --example grpo_gradient
//! ```

use lta::grpo::{compute_advantages, grpo_objective, GroupSample, GrpoConfig, RolloutGroup};
use lta::policy::{FillerTemplate, PolicyContext, ToyPolicy};
use lta::rng::{stream, Stream};
use lta::structured::parse_structured;
use lta::Vocabulary;

fn main() -> lta::Result<()> {
    let vocab = Vocabulary::new(["take", "put"], ["cup", "pan"])?;
    let cfg = GrpoConfig::default();
    let mut rng = stream(7, Stream::Init);
    let old = ToyPolicy::for_vocab(&vocab, 1)?.randomized(0.5, &mut rng);
    let reference = ToyPolicy::for_vocab(&vocab, 1)?;
    let ctx = PolicyContext::from_last_pair(vocab.pair("take", "cup"));
    let filler = FillerTemplate::default();

    let mut samples = Vec::new();
    let rewards = vec![1.0, 0.2, 0.0, 0.5, 0.1];
    for _ in &rewards {
        let r = old.sample_output(ctx, 3, cfg.temperature, &vocab, &filler, &mut rng);
        samples.push(GroupSample {
            parsed: parse_structured(&r.raw),
            raw: r.raw,
            emissions: r.emissions,
            breakdown: Default::default(),
        });
    }
    let logp = |p: &ToyPolicy| -> lta::Result<Vec<f64>> {
        samples
            .iter()
            .map(|s| p.sequence_logprob(ctx, &s.emissions, cfg.temperature))
            .collect()
    };
    let group = RolloutGroup {
        prompt: String::new(),
        context: ctx,
        advantages: compute_advantages(&rewards, cfg.std_floor)?,
        logp_old: logp(&old)?,
        logp_ref: logp(&reference)?,
        rewards,
        samples,
    };

    // Move the policy a little away from the sampler so ratios differ from 1.
    let mut policy = old.clone();
    policy.logits_mut().mapv_inplace(|l| l * 1.05);
    let value = grpo_objective(&policy, &group, &cfg)?;
    println!("advantages {:?}", group.advantages);
    println!("objective {:.6}  surrogate {:.6}  kl {:.6}", value.objective, value.surrogate, value.kl);

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (idx, &g) in value.gradient.indexed_iter() {
        let mut plus = policy.clone();
        plus.logits_mut()[idx] += h;
        let mut minus = policy.clone();
        minus.logits_mut()[idx] -= h;
        let fd = (grpo_objective(&plus, &group, &cfg)?.objective - grpo_objective(&minus, &group, &cfg)?.objective)
            / (2.0 * h);
        worst = worst.max((g - fd).abs());
    }
    println!("max |analytic - finite difference| = {worst:.2e}");
    Ok(())
}
