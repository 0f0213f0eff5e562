//! Scores a handful of generations against one ground-truth future and
//! prints every reward component.
//!
//! ```bash
//! cargo run -p lta --example reward_breakdown
//! ```

use lta::rewards::{soft_overlong, RewardConfig, RewardPipeline};
use lta::structured::canonical;
use lta::Vocabulary;

fn main() -> lta::Result<()> {
    let vocab = Vocabulary::new(["take", "open", "pour"], ["cup", "fridge", "milk"])?;
    let truth = ["open fridge", "take milk", "pour milk", "take cup"];
    let truth_seq = truth
        .iter()
        .map(|t| {
            let (v, n) = t.split_once(' ').unwrap();
            vocab.pair(v, n).unwrap()
        })
        .collect();
    let pipeline = RewardPipeline::with_reference_embedder(RewardConfig::default(), vocab);
    let think = "The person walks to the fridge.";
    let long_think = "word ".repeat(400);

    let cases = [
        ("exact", canonical(think, "make coffee with milk", &truth.join(", "))),
        ("one swap", canonical(think, "make coffee", "open fridge, pour milk, take milk, take cup")),
        ("too short", canonical(think, "make coffee with milk", "open fridge, take milk")),
        ("bad tags", format!("<answer>{}</answer>", truth.join(", "))),
        ("verbose", canonical(&long_think, "make coffee with milk", &truth.join(", "))),
    ];
    println!(
        "{:<10} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7}",
        "case", "len", "fmt", "lang", "acc", "int", "soft", "total"
    );
    for (name, raw) in &cases {
        let (_, b) = pipeline.score(raw, &truth_seq, Some("make coffee with milk"))?;
        println!(
            "{name:<10} {:>6.2} {:>6.2} {:>6.2} {:>6.3} {:>6.3} {:>7.3} {:>7.4}",
            b.s_len, b.s_fmt, b.s_lang, b.s_acc, b.s_int, b.r_soft, b.r_total
        );
    }

    let p = pipeline.config.overlong;
    println!("\nsoft overlong penalty by length:");
    for len in [100, 194, 250, 322, 450, 451] {
        println!("  {len:>4} tokens -> {:+.4}", soft_overlong(len, p));
    }
    Ok(())
}
