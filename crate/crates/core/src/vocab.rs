//! Action vocabulary, action sequences and annotation I/O.
//!
//! Vocabularies are read from a two-column CSV (`kind,label`) and
//! annotations from JSONL, one clip per line:
//!
//! ```text
//! {"clip_id":"c0","observed":[["take","cup"]],"future":[["put","cup"]],"intention_gt":"make tea"}
//! ```
//!
//! A pad slot is written as `["<pad>","<pad>"]` (a bare `"<pad>"` string is
//! also accepted on input).

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// File-level label of the pad marker.
pub const PAD_LABEL: &str = "<pad>";

/// Indexed verb and noun label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    verbs: Vec<String>,
    nouns: Vec<String>,
    verb_index: HashMap<String, usize>,
    noun_index: HashMap<String, usize>,
}

fn index_labels(kind: &'static str, labels: &[String]) -> Result<HashMap<String, usize>> {
    if labels.is_empty() {
        return Err(Error::EmptyVocabulary(kind));
    }
    let mut index = HashMap::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        let key = label.to_lowercase();
        if key == PAD_LABEL || key.trim().is_empty() {
            return Err(Error::InvalidConfig(format!("reserved {kind} label `{label}`")));
        }
        if index.insert(key, i).is_some() {
            return Err(Error::DuplicateLabel {
                kind,
                label: label.clone(),
            });
        }
    }
    Ok(index)
}

impl Vocabulary {
    /// Builds a vocabulary; labels must be unique (case-insensitively) and
    /// both lists non-empty.
    pub fn new<V, N>(verbs: V, nouns: N) -> Result<Self>
    where
        V: IntoIterator,
        V::Item: Into<String>,
        N: IntoIterator,
        N::Item: Into<String>,
    {
        let verbs: Vec<String> = verbs.into_iter().map(Into::into).collect();
        let nouns: Vec<String> = nouns.into_iter().map(Into::into).collect();
        let verb_index = index_labels("verb", &verbs)?;
        let noun_index = index_labels("noun", &nouns)?;
        Ok(Self {
            verbs,
            nouns,
            verb_index,
            noun_index,
        })
    }

    pub fn verbs(&self) -> &[String] {
        &self.verbs
    }

    pub fn nouns(&self) -> &[String] {
        &self.nouns
    }

    pub fn verb_count(&self) -> usize {
        self.verbs.len()
    }

    pub fn noun_count(&self) -> usize {
        self.nouns.len()
    }

    /// Number of distinct verb-noun pairs.
    pub fn pair_count(&self) -> usize {
        self.verbs.len() * self.nouns.len()
    }

    /// Case-insensitive verb lookup.
    pub fn verb_id(&self, label: &str) -> Option<usize> {
        self.verb_index.get(&label.to_lowercase()).copied()
    }

    /// Case-insensitive noun lookup.
    pub fn noun_id(&self, label: &str) -> Option<usize> {
        self.noun_index.get(&label.to_lowercase()).copied()
    }

    pub fn verb_label(&self, id: usize) -> &str {
        &self.verbs[id]
    }

    pub fn noun_label(&self, id: usize) -> &str {
        &self.nouns[id]
    }

    /// Resolves a pair of labels.
    pub fn pair(&self, verb: &str, noun: &str) -> Option<ActionPair> {
        Some(ActionPair::new(self.verb_id(verb)?, self.noun_id(noun)?))
    }

    pub fn contains(&self, pair: ActionPair) -> bool {
        pair.verb < self.verbs.len() && pair.noun < self.nouns.len()
    }

    /// `"verb noun"` rendering of a pair.
    pub fn pair_text(&self, pair: ActionPair) -> String {
        format!("{} {}", self.verbs[pair.verb], self.nouns[pair.noun])
    }

    /// Row-major flat index of a pair, `verb * |nouns| + noun`.
    pub fn flat_index(&self, pair: ActionPair) -> usize {
        pair.verb * self.nouns.len() + pair.noun
    }

    pub fn pair_from_flat(&self, index: usize) -> ActionPair {
        ActionPair::new(index / self.nouns.len(), index % self.nouns.len())
    }

    /// Writes the vocabulary as `kind,label` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "label"])?;
        for v in &self.verbs {
            w.write_record(["verb", v.as_str()])?;
        }
        for n in &self.nouns {
            w.write_record(["noun", n.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            kind: String,
            label: String,
        }
        let mut verbs = Vec::new();
        let mut nouns = Vec::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row?;
            match row.kind.trim() {
                "verb" => verbs.push(row.label.trim().to_string()),
                "noun" => nouns.push(row.label.trim().to_string()),
                other => {
                    return Err(Error::MalformedLine {
                        line: i + 2,
                        message: format!("kind must be `verb` or `noun`, got `{other}`"),
                    })
                }
            }
        }
        Self::new(verbs, nouns)
    }
}

/// Loads a vocabulary CSV with columns `kind,label`; labels keep file order.
pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Vocabulary::read_csv(file)
}

/// A verb-noun pair given by vocabulary indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionPair {
    pub verb: usize,
    pub noun: usize,
}

impl ActionPair {
    pub const fn new(verb: usize, noun: usize) -> Self {
        Self { verb, noun }
    }
}

impl fmt::Display for ActionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.verb, self.noun)
    }
}

/// One slot of an action sequence. `Pad` never equals a real pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Pair(ActionPair),
    Pad,
}

impl Action {
    pub fn pair(self) -> Option<ActionPair> {
        match self {
            Action::Pair(p) => Some(p),
            Action::Pad => None,
        }
    }

    pub fn is_pad(self) -> bool {
        matches!(self, Action::Pad)
    }
}

impl From<ActionPair> for Action {
    fn from(p: ActionPair) -> Self {
        Action::Pair(p)
    }
}

/// Ordered sequence of action slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ActionSequence(Vec<Action>);

impl ActionSequence {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn from_pairs<I: IntoIterator<Item = ActionPair>>(pairs: I) -> Self {
        Self(pairs.into_iter().map(Action::Pair).collect())
    }

    pub fn from_actions(actions: Vec<Action>) -> Self {
        Self(actions)
    }

    pub fn push(&mut self, pair: ActionPair) {
        self.0.push(Action::Pair(pair));
    }

    pub fn push_pad(&mut self) {
        self.0.push(Action::Pad);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn actions(&self) -> &[Action] {
        &self.0
    }

    /// Real pairs, pads skipped.
    pub fn pairs(&self) -> impl Iterator<Item = ActionPair> + '_ {
        self.0.iter().filter_map(|a| a.pair())
    }

    pub fn last_pair(&self) -> Option<ActionPair> {
        self.0.iter().rev().find_map(|a| a.pair())
    }

    /// True when pads only occur as a suffix.
    pub fn is_normalized(&self) -> bool {
        let first_pad = self.0.iter().position(|a| a.is_pad()).unwrap_or(self.0.len());
        self.0[first_pad..].iter().all(|a| a.is_pad())
    }

    /// Truncates to `len` slots, or pads up to `len`.
    pub fn normalized(&self, len: usize) -> Self {
        let mut out: Vec<Action> = self.0.iter().copied().take(len).collect();
        out.resize(len, Action::Pad);
        Self(out)
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self(self.0.iter().copied().take(len).collect())
    }

    pub fn verbs(&self) -> Vec<Option<usize>> {
        self.0.iter().map(|a| a.pair().map(|p| p.verb)).collect()
    }

    pub fn nouns(&self) -> Vec<Option<usize>> {
        self.0.iter().map(|a| a.pair().map(|p| p.noun)).collect()
    }

    /// Comma-joined `"verb noun"` labels.
    pub fn render(&self, vocab: &Vocabulary) -> String {
        self.0
            .iter()
            .map(|a| match a {
                Action::Pair(p) => vocab.pair_text(*p),
                Action::Pad => PAD_LABEL.to_string(),
            })
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl FromIterator<ActionPair> for ActionSequence {
    fn from_iter<T: IntoIterator<Item = ActionPair>>(iter: T) -> Self {
        Self::from_pairs(iter)
    }
}

/// One annotated clip: `observed` context segments and `future` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub clip_id: String,
    pub observed: ActionSequence,
    pub future: ActionSequence,
    pub intention_gt: Option<String>,
}

/// Optional length checks applied while parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnnotationOptions {
    pub observed_len: Option<usize>,
    pub future_len: Option<usize>,
}

impl AnnotationOptions {
    pub fn strict(observed_len: usize, future_len: usize) -> Self {
        Self {
            observed_len: Some(observed_len),
            future_len: Some(future_len),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum WireSlot {
    Pair(String, String),
    Marker(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct WireRecord {
    clip_id: String,
    observed: Vec<WireSlot>,
    future: Vec<WireSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intention_gt: Option<String>,
}

pub(crate) fn resolve_slots(
    slots: &[WireSlot],
    vocab: &Vocabulary,
    line: usize,
) -> Result<ActionSequence> {
    let mut actions = Vec::with_capacity(slots.len());
    for slot in slots {
        let action = match slot {
            WireSlot::Marker(m) if m == PAD_LABEL => Action::Pad,
            WireSlot::Pair(v, n) if v == PAD_LABEL && n == PAD_LABEL => Action::Pad,
            WireSlot::Marker(m) => {
                return Err(Error::MalformedLine {
                    line,
                    message: format!("expected a [verb, noun] pair, got `{m}`"),
                })
            }
            WireSlot::Pair(v, n) => {
                let verb = vocab.verb_id(v).ok_or_else(|| Error::UnknownLabel {
                    line,
                    label: v.clone(),
                })?;
                let noun = vocab.noun_id(n).ok_or_else(|| Error::UnknownLabel {
                    line,
                    label: n.clone(),
                })?;
                Action::Pair(ActionPair::new(verb, noun))
            }
        };
        actions.push(action);
    }
    Ok(ActionSequence(actions))
}

pub(crate) fn wire_slots(seq: &ActionSequence, vocab: &Vocabulary) -> Vec<WireSlot> {
    seq.actions()
        .iter()
        .map(|a| match a {
            Action::Pair(p) => WireSlot::Pair(
                vocab.verb_label(p.verb).to_string(),
                vocab.noun_label(p.noun).to_string(),
            ),
            Action::Pad => WireSlot::Pair(PAD_LABEL.into(), PAD_LABEL.into()),
        })
        .collect()
}

/// Parses JSONL annotations from a reader. Blank lines are ignored; line
/// numbers in errors are 1-based.
pub fn read_annotations<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
    opts: &AnnotationOptions,
) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: WireRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let observed = resolve_slots(&wire.observed, vocab, line_no)?;
        let future = resolve_slots(&wire.future, vocab, line_no)?;
        for (name, seq, want) in [
            ("observed", &observed, opts.observed_len),
            ("future", &future, opts.future_len),
        ] {
            if let Some(want) = want {
                if seq.len() != want {
                    return Err(Error::MalformedLine {
                        line: line_no,
                        message: format!("{name} has length {}, expected {want}", seq.len()),
                    });
                }
            }
        }
        records.push(AnnotationRecord {
            clip_id: wire.clip_id,
            observed,
            future,
            intention_gt: wire.intention_gt,
        });
    }
    Ok(records)
}

/// Parses an annotation JSONL file.
pub fn parse_annotations(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
) -> Result<Vec<AnnotationRecord>> {
    parse_annotations_with(path, vocab, &AnnotationOptions::default())
}

pub fn parse_annotations_with(
    path: impl AsRef<Path>,
    vocab: &Vocabulary,
    opts: &AnnotationOptions,
) -> Result<Vec<AnnotationRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_annotations(BufReader::new(file), vocab, opts)
}

/// Writes records as JSONL (one compact object per line, LF endings).
pub fn write_annotations<W: Write>(
    records: &[AnnotationRecord],
    vocab: &Vocabulary,
    mut writer: W,
) -> Result<()> {
    for r in records {
        let wire = WireRecord {
            clip_id: r.clip_id.clone(),
            observed: wire_slots(&r.observed, vocab),
            future: wire_slots(&r.future, vocab),
            intention_gt: r.intention_gt.clone(),
        };
        serde_json::to_writer(&mut writer, &wire)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
