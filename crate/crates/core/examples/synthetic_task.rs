//! Generates a synthetic anticipation task and shows one record, the
//! dominant noun and the sparsest transition rows.
//!
//! ```bash
//! cargo run -p lta --example synthetic_task -- [seed]
//! ```

use lta::synth::{generate_synthetic_task, stationary_distribution, SyntheticTaskConfig};

fn main() -> lta::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = SyntheticTaskConfig {
        seed,
        ..Default::default()
    };
    let task = generate_synthetic_task(&cfg)?;
    let vocab = &task.vocab;
    println!("verbs: {}", vocab.verbs().join(", "));
    println!("nouns: {}", vocab.nouns().join(", "));
    println!("{} records, K={}, Z={}", task.records.len(), cfg.k, cfg.z);

    let r = &task.records[0];
    println!("\n{}", r.clip_id);
    println!("  observed: {}", r.observed.render(vocab));
    println!("  future:   {}", r.future.render(vocab));
    println!("  intention: {}", r.intention_gt.as_deref().unwrap_or("-"));

    let pi = stationary_distribution(&task.transitions.probabilities);
    let mut noun_mass = vec![0.0; vocab.noun_count()];
    for (i, p) in pi.iter().enumerate() {
        noun_mass[vocab.pair_from_flat(i).noun] += p;
    }
    println!("\nstationary noun mass:");
    for (n, m) in noun_mass.iter().enumerate() {
        let mark = if n == task.transitions.dominant_noun { " <- dominant" } else { "" };
        println!("  {:<8} {m:.3}{mark}", vocab.noun_label(n));
    }

    let mut peaks: Vec<(usize, f64)> = task
        .transitions
        .probabilities
        .rows()
        .into_iter()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .enumerate()
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("\nmost peaked transition rows:");
    for &(i, p) in peaks.iter().take(3) {
        println!("  {:<14} max p = {p:.3}", vocab.pair_text(vocab.pair_from_flat(i)));
    }
    Ok(())
}
