//! Co-occurrence correction of independent verb/noun marginals: the raw
//! argmax picks a pair never seen in training, the corrected decode does not.
//!
//! ```bash
//! cargo run -p lta --example semantic_correction
//! ```

use lta::cooccurrence::{
    build_cooccurrence, corrected_joint, independent_joint, map_decode, normalize_conditionals,
};
use lta::vocab::{read_annotations, AnnotationOptions};
use lta::Vocabulary;

const ANNOTATIONS: &str = r#"
{"clip_id":"a","observed":[["cut","onion"],["wash","cup"]],"future":[["cut","onion"]]}
{"clip_id":"b","observed":[["wash","cup"],["wash","pan"]],"future":[["pour","cup"]]}
{"clip_id":"c","observed":[["pour","cup"],["cut","onion"]],"future":[["wash","cup"]]}
"#;

fn main() -> lta::Result<()> {
    let vocab = Vocabulary::new(["cut", "wash", "pour"], ["onion", "cup", "pan"])?;
    let records = read_annotations(ANNOTATIONS.as_bytes(), &vocab, &AnnotationOptions::default())?;
    let cooc = build_cooccurrence(&records, &vocab, true)?;
    println!("co-occurrence counts (rows = verbs):\n{}", cooc.counts());

    // The recogniser is fairly sure about "cut" and slightly prefers "cup".
    let p_verb = [0.6, 0.3, 0.1];
    let p_noun = [0.35, 0.45, 0.2];
    let raw = map_decode(&independent_joint(&p_verb, &p_noun))?;
    let tables = normalize_conditionals(&cooc);
    let fixed = map_decode(&corrected_joint(&p_verb, &p_noun, &tables)?)?;

    let show = |name: &str, p: lta::ActionPair| {
        println!(
            "{name:<10} {:<12} training count {}",
            vocab.pair_text(p),
            cooc.get(p.verb, p.noun)
        )
    };
    show("raw", raw);
    show("corrected", fixed);
    Ok(())
}
