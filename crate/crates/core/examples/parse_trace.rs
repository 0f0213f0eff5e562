//! Parses tagged reasoning traces and reports what the reward functions see.
//!
//! ```bash
//! cargo run -p lta --example parse_trace
//! ```

use lta::structured::{check_language, parse_with_vocab};
use lta::Vocabulary;

fn main() -> lta::Result<()> {
    let vocab = Vocabulary::new(["take", "put", "turn on"], ["cup", "kettle", "water tap"])?;
    let traces = [
        "<think>The kettle is on the counter.</think>\n<intention>make tea</intention>\n<answer>take cup, turn on kettle, put cup</answer>",
        "<think>Hands reach for the tap.</think><intention>wash hands</intention><answer>turn on water tap\nfly cup</answer>",
        "<answer>take cup</answer><think>out of order</think><intention>x</intention>",
        "<think>日本語</think><intention>tea</intention><answer>take cup</answer>",
    ];
    for raw in traces {
        let p = parse_with_vocab(raw, &vocab);
        println!("{}", raw.replace('\n', "\\n"));
        println!(
            "  tags_valid={} language_ok={} tokens={} intention={:?}",
            p.tags_valid,
            check_language(raw),
            p.token_count,
            p.intention_text
        );
        println!(
            "  pairs=[{}] unparsed={}\n",
            p.parsed_pairs.render(&vocab),
            p.unparsed_answer_items
        );
    }
    Ok(())
}
