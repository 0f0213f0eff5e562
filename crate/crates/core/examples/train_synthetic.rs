//! Trains the toy policy with GRPO on a 5×5 synthetic task and prints the
//! reward curves.
//!
//! ```bash
//! cargo run -p lta --release --example train_synthetic -- [steps] [seed] [log.csv]
//! ```

use lta::grpo::GrpoConfig;
use lta::policy::{FillerTemplate, ToyPolicy};
use lta::rewards::{RewardConfig, RewardPipeline};
use lta::structured::PromptTemplate;
use lta::synth::{generate_synthetic_task, SyntheticTaskConfig};
use lta::trainer::{train, TrainingSetup};

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn main() -> lta::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let log_path = args.next();

    let task = generate_synthetic_task(&SyntheticTaskConfig {
        z: 5,
        seed,
        ..Default::default()
    })?;
    let cfg = GrpoConfig {
        steps,
        seed,
        ..Default::default()
    };
    let pipeline = RewardPipeline::with_reference_embedder(RewardConfig::default(), task.vocab.clone());
    let prompt = PromptTemplate::default();
    let filler = FillerTemplate::default();
    let setup = TrainingSetup {
        dataset: &task.records,
        pipeline: &pipeline,
        prompt: &prompt,
        filler: &filler,
    };
    let mut policy = ToyPolicy::for_vocab(&task.vocab, 1)?;

    let start = std::time::Instant::now();
    let log = train(&mut policy, &setup, &cfg)?;
    if let Some(path) = log_path {
        let file = std::fs::File::create(&path).map_err(|e| lta::Error::io(&path, e))?;
        log.write_csv(file)?;
    }

    println!("{:>6} {:>10} {:>10} {:>10}", "step", "reward", "intention", "kl");
    for row in log.rows.iter().step_by((steps / 20).max(1)) {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>10.4}",
            row.step, row.mean_reward, row.mean_intention_reward, row.kl
        );
    }
    let rewards = log.mean_rewards();
    let intention = log.mean_intention_rewards();
    let w = 50.min(rewards.len());
    if w > 0 {
        let tail = rewards.len() - w;
        println!(
            "reward    first {w}: {:.4}  last {w}: {:.4}",
            mean(&rewards[..w]),
            mean(&rewards[tail..])
        );
        println!(
            "intention first {w}: {:.4}  last {w}: {:.4}",
            mean(&intention[..w]),
            mean(&intention[tail..])
        );
    }
    println!(
        "target intention: {}  ({:.2?})",
        task.records[0].intention_gt.as_deref().unwrap_or("-"),
        start.elapsed()
    );
    Ok(())
}
