//! Ego4D-style evaluation: minimum normalized edit distance over five
//! candidate futures, for verbs, nouns and actions.
//!
//! ```bash
//! cargo run -p lta --example ego4d_eval
//! ```

use lta::metrics::{edit_distance, ego4d_eval};
use lta::vocab::ActionSequence;
use lta::Vocabulary;

fn main() -> lta::Result<()> {
    let vocab = Vocabulary::new(["take", "put", "wash"], ["cup", "plate", "knife"])?;
    let seq = |items: &[(&str, &str)]| -> ActionSequence {
        items.iter().map(|(v, n)| vocab.pair(v, n).unwrap()).collect()
    };
    let truth = seq(&[("take", "cup"), ("wash", "cup"), ("put", "cup"), ("take", "plate")]);
    let mut candidates = vec![
        seq(&[("take", "cup"), ("put", "cup"), ("wash", "cup"), ("take", "plate")]),
        seq(&[("take", "knife"), ("wash", "knife"), ("put", "knife"), ("take", "plate")]),
        seq(&[("wash", "plate"), ("take", "cup")]),
        seq(&[("take", "cup"); 4]),
        seq(&[("put", "plate"), ("put", "plate"), ("put", "plate"), ("put", "plate")]),
    ];
    // Short candidates are padded to Z before scoring.
    candidates[2] = candidates[2].normalized(truth.len());

    let report = ego4d_eval(&candidates, &truth)?;
    println!("truth: {}", truth.render(&vocab));
    for (i, c) in candidates.iter().enumerate() {
        let d = edit_distance(c.actions(), truth.actions());
        println!("  cand {i}: {:<60} action ED {d}", c.render(&vocab));
    }
    println!(
        "min normalized ED  verb {:.3}  noun {:.3}  action {:.3}",
        report.verb_ed, report.noun_ed, report.action_ed
    );
    Ok(())
}
