//! The `<think>` → `<intention>` → `<answer>` output grammar, answer
//! extraction and prompt rendering.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{ActionSequence, Vocabulary};

pub const THINK: &str = "think";
pub const INTENTION: &str = "intention";
pub const ANSWER: &str = "answer";
const SECTIONS: [&str; 3] = [THINK, INTENTION, ANSWER];

/// A parsed generation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StructuredOutput {
    pub think_text: String,
    pub intention_text: String,
    pub answer_text: String,
    /// All three sections present exactly once, in order, closed, and
    /// nothing but whitespace outside them.
    pub tags_valid: bool,
    /// Whitespace-token count of the raw text.
    pub token_count: usize,
    pub parsed_pairs: ActionSequence,
    pub unparsed_answer_items: usize,
}

impl StructuredOutput {
    /// Canonical layout of the three sections.
    pub fn to_canonical(&self) -> String {
        canonical(&self.think_text, &self.intention_text, &self.answer_text)
    }
}

/// Joins three section bodies into the canonical tagged layout.
pub fn canonical(think: &str, intention: &str, answer: &str) -> String {
    format!("<think>{think}</think>\n<intention>{intention}</intention>\n<answer>{answer}</answer>")
}

fn open_tag(name: &str) -> String {
    format!("<{name}>")
}

fn close_tag(name: &str) -> String {
    format!("</{name}>")
}

/// First `<name>…</name>` body, trimmed. An unclosed section runs to the end
/// of the input.
fn extract_section(raw: &str, name: &str) -> String {
    let open = open_tag(name);
    let Some(start) = raw.find(&open).map(|i| i + open.len()) else {
        return String::new();
    };
    let rest = &raw[start..];
    let end = rest.find(&close_tag(name)).unwrap_or(rest.len());
    rest[..end].trim().to_string()
}

fn strictly_valid(raw: &str) -> bool {
    // Each of the six markers must occur exactly once.
    let mut positions = Vec::with_capacity(6);
    for name in SECTIONS {
        for tag in [open_tag(name), close_tag(name)] {
            let mut hits = raw.match_indices(&tag);
            let Some((pos, _)) = hits.next() else {
                return false;
            };
            if hits.next().is_some() {
                return false;
            }
            positions.push((pos, tag.len()));
        }
    }
    if positions.windows(2).any(|w| w[0].0 + w[0].1 > w[1].0) {
        return false;
    }
    // Gaps: before the first open, between each close and the next open,
    // and after the last close.
    let gap_ok = |s: &str| s.chars().all(char::is_whitespace);
    let (first, _) = positions[0];
    let (last, last_len) = positions[5];
    gap_ok(&raw[..first])
        && gap_ok(&raw[last + last_len..])
        && [(1, 2), (3, 4)].iter().all(|&(close, open)| {
            let (c, clen) = positions[close];
            gap_ok(&raw[c + clen..positions[open].0])
        })
}

/// Parses any string. Malformed input yields `tags_valid = false` with
/// best-effort section extraction. `parsed_pairs` is left empty; see
/// [`parse_with_vocab`].
pub fn parse_structured(raw: &str) -> StructuredOutput {
    StructuredOutput {
        think_text: extract_section(raw, THINK),
        intention_text: extract_section(raw, INTENTION),
        answer_text: extract_section(raw, ANSWER),
        tags_valid: strictly_valid(raw),
        token_count: count_tokens(raw),
        parsed_pairs: ActionSequence::new(),
        unparsed_answer_items: 0,
    }
}

/// [`parse_structured`] followed by answer extraction against `vocab`.
pub fn parse_with_vocab(raw: &str, vocab: &Vocabulary) -> StructuredOutput {
    let mut out = parse_structured(raw);
    let (pairs, unparsed) = extract_action_pairs(&out.answer_text, vocab);
    out.parsed_pairs = pairs;
    out.unparsed_answer_items = unparsed;
    out
}

/// Splits on commas and newlines; each non-empty item must read
/// `verb noun`. Multi-word labels are matched by trying every split point.
pub fn extract_action_pairs(answer_text: &str, vocab: &Vocabulary) -> (ActionSequence, usize) {
    let mut seq = ActionSequence::new();
    let mut unparsed = 0;
    for item in answer_text.split([',', '\n']) {
        let tokens: Vec<&str> = item.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let found = (1..tokens.len()).find_map(|cut| {
            vocab.pair(&tokens[..cut].join(" "), &tokens[cut..].join(" "))
        });
        match found {
            Some(p) => seq.push(p),
            None => unparsed += 1,
        }
    }
    (seq, unparsed)
}

/// True iff the text is pure ASCII and every whitespace token consists of
/// printable characters (letters, digits, punctuation or tag markup).
pub fn check_language(raw: &str) -> bool {
    raw.is_ascii()
        && raw
            .split_ascii_whitespace()
            .all(|tok| tok.bytes().all(|b| b.is_ascii_graphic()))
}

/// Number of maximal whitespace-separated runs.
pub fn count_tokens(raw: &str) -> usize {
    raw.split_whitespace().count()
}

/// Prompt template with `{observed_actions}` and `{Z}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    template: String,
}

pub const OBSERVED_PLACEHOLDER: &str = "{observed_actions}";
pub const Z_PLACEHOLDER: &str = "{Z}";

impl PromptTemplate {
    pub fn new(template: impl Into<String>) -> Result<Self> {
        let template = template.into();
        for ph in [OBSERVED_PLACEHOLDER, Z_PLACEHOLDER] {
            let n = template.matches(ph).count();
            if n != 1 {
                return Err(Error::InvalidTemplate(format!(
                    "placeholder {ph} must appear exactly once, found {n}"
                )));
            }
        }
        Ok(Self { template })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(text)
    }

    pub fn as_str(&self) -> &str {
        &self.template
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::new(
            "You are given the actions observed so far in an egocentric video: {observed_actions}.\n\
             First describe what you see inside <think></think>, then state the person's goal \
             inside <intention></intention>, and finally list the next {Z} actions as comma-separated \
             \"verb noun\" pairs inside <answer></answer>.",
        )
        .expect("default template is valid")
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> Self {
        t.template
    }
}

/// Fills the template with the observed actions and the horizon.
pub fn render_prompt(
    observed: &ActionSequence,
    z: usize,
    vocab: &Vocabulary,
    tpl: &PromptTemplate,
) -> String {
    let actions = observed
        .pairs()
        .map(|p| vocab.pair_text(p))
        .collect::<Vec<_>>()
        .join(", ");
    // Placeholders cannot overlap, so the order of replacement is irrelevant
    // unless the observed labels themselves contain `{Z}`.
    let (head, tail) = tpl
        .template
        .split_once(OBSERVED_PLACEHOLDER)
        .expect("validated template");
    format!(
        "{}{actions}{}",
        head.replace(Z_PLACEHOLDER, &z.to_string()),
        tail.replace(Z_PLACEHOLDER, &z.to_string())
    )
}
