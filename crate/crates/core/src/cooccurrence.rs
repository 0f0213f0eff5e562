//! Verb-noun co-occurrence counts and semantic correction of independently
//! predicted verb and noun distributions.
//!
//! Counts are normalized row-wise into `P(noun | verb)` and column-wise into
//! `P(verb | noun)`. A corrected pair score multiplies the two marginals by
//! the average of both conditionals, so pairs never seen together in
//! training score zero.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::vocab::{ActionPair, AnnotationRecord, Vocabulary};

/// `|verbs| x |nouns|` count grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    counts: Array2<u64>,
}

impl CooccurrenceMatrix {
    pub fn zeros(verbs: usize, nouns: usize) -> Self {
        Self {
            counts: Array2::zeros((verbs, nouns)),
        }
    }

    pub fn from_counts(counts: Array2<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn get(&self, verb: usize, noun: usize) -> u64 {
        self.counts[[verb, noun]]
    }

    pub fn shape(&self) -> (usize, usize) {
        self.counts.dim()
    }

    /// CSV grid: header `verb,<noun labels...>`, one row per verb.
    pub fn write_csv<W: Write>(&self, vocab: &Vocabulary, writer: W) -> Result<()> {
        if self.shape() != (vocab.verb_count(), vocab.noun_count()) {
            return Err(Error::DimensionMismatch(
                "co-occurrence matrix does not match vocabulary".into(),
            ));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["verb".to_string()];
        header.extend(vocab.nouns().iter().cloned());
        w.write_record(&header)?;
        for (v, row) in self.counts.rows().into_iter().enumerate() {
            let mut rec = vec![vocab.verb_label(v).to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV grid written by [`write_csv`](Self::write_csv). Row and
    /// column labels must match the vocabulary order exactly.
    pub fn read_csv<R: Read>(vocab: &Vocabulary, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut rows = rdr.records();
        let header = rows
            .next()
            .ok_or_else(|| Error::DimensionMismatch("empty co-occurrence CSV".into()))??;
        let nouns: Vec<&str> = header.iter().skip(1).collect();
        if nouns.len() != vocab.noun_count()
            || nouns.iter().enumerate().any(|(i, n)| vocab.noun_id(n) != Some(i))
        {
            return Err(Error::DimensionMismatch(
                "co-occurrence columns do not match vocabulary nouns".into(),
            ));
        }
        let mut counts = Array2::zeros((vocab.verb_count(), vocab.noun_count()));
        let mut seen = 0;
        for (i, rec) in rows.enumerate() {
            let rec = rec?;
            let line = i + 2;
            let label = rec.get(0).unwrap_or_default();
            if vocab.verb_id(label) != Some(i) {
                return Err(Error::DimensionMismatch(format!(
                    "line {line}: row label `{label}` does not match vocabulary verb {i}"
                )));
            }
            if rec.len() != vocab.noun_count() + 1 {
                return Err(Error::DimensionMismatch(format!("line {line}: wrong column count")));
            }
            for (n, cell) in rec.iter().skip(1).enumerate() {
                counts[[i, n]] = cell.trim().parse().map_err(|_| Error::MalformedLine {
                    line,
                    message: format!("count `{cell}` is not a non-negative integer"),
                })?;
            }
            seen += 1;
        }
        if seen != vocab.verb_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} verb rows, got {seen}",
                vocab.verb_count()
            )));
        }
        Ok(Self { counts })
    }
}

/// Tallies `(verb, noun)` occurrences over every record's observed segments,
/// and over future segments too when `include_future` is set.
pub fn build_cooccurrence(
    annotations: &[AnnotationRecord],
    vocab: &Vocabulary,
    include_future: bool,
) -> Result<CooccurrenceMatrix> {
    let mut m = CooccurrenceMatrix::zeros(vocab.verb_count(), vocab.noun_count());
    for rec in annotations {
        let future = include_future.then_some(&rec.future);
        for seq in std::iter::once(&rec.observed).chain(future) {
            for p in seq.pairs() {
                if !vocab.contains(p) {
                    return Err(Error::DimensionMismatch(format!(
                        "clip {}: pair {p} outside a {}x{} vocabulary",
                        rec.clip_id,
                        vocab.verb_count(),
                        vocab.noun_count()
                    )));
                }
                m.counts[[p.verb, p.noun]] += 1;
            }
        }
    }
    Ok(m)
}

/// Row- and column-normalized conditionals.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTables {
    /// `P(noun | verb)`; each nonzero row sums to one.
    pub p_n_given_v: Array2<f64>,
    /// `P(verb | noun)`; each nonzero column sums to one.
    pub p_v_given_n: Array2<f64>,
}

impl ConditionalTables {
    pub fn shape(&self) -> (usize, usize) {
        self.p_n_given_v.dim()
    }
}

/// Normalizes counts. Rows or columns with zero total stay all-zero.
pub fn normalize_conditionals(c: &CooccurrenceMatrix) -> ConditionalTables {
    let counts = c.counts.mapv(|x| x as f64);
    let mut p_n_given_v = counts.clone();
    for mut row in p_n_given_v.rows_mut() {
        let total = row.sum();
        if total > 0.0 {
            row.mapv_inplace(|x| x / total);
        }
    }
    let mut p_v_given_n = counts;
    for mut col in p_v_given_n.columns_mut() {
        let total = col.sum();
        if total > 0.0 {
            col.mapv_inplace(|x| x / total);
        }
    }
    ConditionalTables {
        p_n_given_v,
        p_v_given_n,
    }
}

/// Verb and noun probability vectors for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDistributions {
    pub p_verb: Vec<f64>,
    pub p_noun: Vec<f64>,
}

impl MarginalDistributions {
    /// Validates non-negativity and unit mass (±1e-9).
    pub fn new(p_verb: Vec<f64>, p_noun: Vec<f64>) -> Result<Self> {
        for (name, v) in [("p_verb", &p_verb), ("p_noun", &p_noun)] {
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidConfig(format!("{name} has negative or non-finite entries")));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("{name} sums to {total}, not 1")));
            }
        }
        Ok(Self { p_verb, p_noun })
    }
}

/// `score[v][n] = p(v) * p(n) * (P(n|v) + P(v|n)) / 2`, unnormalized.
pub fn corrected_joint(
    p_verb: &[f64],
    p_noun: &[f64],
    tables: &ConditionalTables,
) -> Result<Array2<f64>> {
    let (nv, nn) = tables.shape();
    if p_verb.len() != nv || p_noun.len() != nn || tables.p_v_given_n.dim() != (nv, nn) {
        return Err(Error::DimensionMismatch(format!(
            "marginals ({}, {}) vs tables ({nv}, {nn})",
            p_verb.len(),
            p_noun.len()
        )));
    }
    Ok(Array2::from_shape_fn((nv, nn), |(v, n)| {
        p_verb[v] * p_noun[n] * 0.5 * (tables.p_n_given_v[[v, n]] + tables.p_v_given_n[[v, n]])
    }))
}

/// Uncorrected product `p(v) * p(n)`, the baseline joint without priors.
pub fn independent_joint(p_verb: &[f64], p_noun: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn((p_verb.len(), p_noun.len()), |(v, n)| p_verb[v] * p_noun[n])
}

/// Argmax cell; ties go to the lowest verb index, then the lowest noun index.
pub fn map_decode(scores: &Array2<f64>) -> Result<ActionPair> {
    if scores.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = ActionPair::new(0, 0);
    let mut best_score = scores[[0, 0]];
    for ((v, n), &s) in scores.indexed_iter() {
        if s > best_score {
            best_score = s;
            best = ActionPair::new(v, n);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::ActionSequence;
    use ndarray::array;

    fn record(observed: &[(usize, usize)], future: &[(usize, usize)]) -> AnnotationRecord {
        AnnotationRecord {
            clip_id: "c".into(),
            observed: observed.iter().map(|&(v, n)| ActionPair::new(v, n)).collect(),
            future: future.iter().map(|&(v, n)| ActionPair::new(v, n)).collect(),
            intention_gt: None,
        }
    }

    fn vocab(v: usize, n: usize) -> Vocabulary {
        Vocabulary::new(
            (0..v).map(|i| format!("v{i}")),
            (0..n).map(|i| format!("n{i}")),
        )
        .unwrap()
    }

    #[test]
    fn single_observation() {
        let m = build_cooccurrence(&[record(&[(0, 0)], &[])], &vocab(2, 2), false).unwrap();
        assert_eq!(m.counts(), &array![[1, 0], [0, 0]]);
    }

    #[test]
    fn counts_across_records() {
        let recs = [record(&[(1, 0)], &[]), record(&[(1, 0)], &[])];
        let m = build_cooccurrence(&recs, &vocab(2, 2), false).unwrap();
        assert_eq!(m.get(1, 0), 2);
    }

    #[test]
    fn future_is_opt_in_and_pads_skipped() {
        let mut r = record(&[(0, 1)], &[(1, 1)]);
        r.observed.push_pad();
        let v = vocab(2, 2);
        assert_eq!(build_cooccurrence(&[r.clone()], &v, false).unwrap().get(1, 1), 0);
        assert_eq!(build_cooccurrence(&[r], &v, true).unwrap().get(1, 1), 1);
    }

    #[test]
    fn out_of_range_pair_is_dimension_mismatch() {
        let r = record(&[(3, 0)], &[]);
        assert!(matches!(
            build_cooccurrence(&[r], &vocab(2, 2), false),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn normalization_examples() {
        let t = normalize_conditionals(&CooccurrenceMatrix::from_counts(array![[5, 0], [0, 0]]));
        assert_eq!(t.p_n_given_v[[0, 0]], 1.0);
        assert_eq!(t.p_v_given_n[[0, 0]], 1.0);
        assert!(t.p_n_given_v.row(1).iter().all(|x| *x == 0.0));
        assert!(t.p_v_given_n.column(1).iter().all(|x| *x == 0.0));

        let t = normalize_conditionals(&CooccurrenceMatrix::from_counts(array![[3, 1]]));
        assert_eq!(t.p_n_given_v.row(0).to_vec(), vec![0.75, 0.25]);
    }

    #[test]
    fn identity_pattern_correction() {
        let tables = ConditionalTables {
            p_n_given_v: array![[1.0, 0.0], [0.0, 1.0]],
            p_v_given_n: array![[1.0, 0.0], [0.0, 1.0]],
        };
        let s = corrected_joint(&[0.5, 0.5], &[0.5, 0.5], &tables).unwrap();
        assert_eq!(s, array![[0.25, 0.0], [0.0, 0.25]]);
    }

    #[test]
    fn zero_tables_give_zero_scores() {
        let tables = normalize_conditionals(&CooccurrenceMatrix::zeros(2, 3));
        let s = corrected_joint(&[0.2, 0.8], &[0.3, 0.3, 0.4], &tables).unwrap();
        assert!(s.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn one_hot_marginals_gate() {
        let tables = normalize_conditionals(&CooccurrenceMatrix::from_counts(array![[1, 2], [3, 4]]));
        let s = corrected_joint(&[1.0, 0.0], &[1.0, 0.0], &tables).unwrap();
        for ((v, n), x) in s.indexed_iter() {
            if (v, n) != (0, 0) {
                assert_eq!(*x, 0.0);
            }
        }
        assert!(s[[0, 0]] > 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let tables = normalize_conditionals(&CooccurrenceMatrix::zeros(2, 2));
        assert!(corrected_joint(&[1.0], &[0.5, 0.5], &tables).is_err());
    }

    #[test]
    fn decode_examples() {
        let mut g = Array2::zeros((3, 4));
        g[[1, 2]] = 0.7;
        g[[2, 3]] = 0.5;
        assert_eq!(map_decode(&g).unwrap(), ActionPair::new(1, 2));
        assert_eq!(map_decode(&Array2::zeros((3, 3))).unwrap(), ActionPair::new(0, 0));
        assert!(map_decode(&Array2::zeros((0, 0))).is_err());
        let tie = array![[0.0, 0.3], [0.3, 0.0]];
        assert_eq!(map_decode(&tie).unwrap(), ActionPair::new(0, 1));
    }

    #[test]
    fn csv_round_trip_and_label_check() {
        let v = vocab(2, 3);
        let m = CooccurrenceMatrix::from_counts(array![[1, 0, 7], [0, 2, 0]]);
        let mut buf = Vec::new();
        m.write_csv(&v, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().next(), Some("verb,n0,n1,n2"));
        assert_eq!(CooccurrenceMatrix::read_csv(&v, buf.as_slice()).unwrap(), m);
        assert!(CooccurrenceMatrix::read_csv(&vocab(2, 2), buf.as_slice()).is_err());
    }

    #[test]
    fn empty_sequences_ok() {
        let r = AnnotationRecord {
            clip_id: "e".into(),
            observed: ActionSequence::new(),
            future: ActionSequence::new(),
            intention_gt: None,
        };
        let m = build_cooccurrence(&[r], &vocab(2, 2), true).unwrap();
        assert!(m.counts().iter().all(|c| *c == 0));
    }
}
