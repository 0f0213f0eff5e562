//! Evaluation protocols: minimum normalized edit distance over five
//! candidate sequences, and class-wise mean average precision over
//! observation horizons with ALL/FREQ/RARE breakdowns.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{Action, ActionSequence};

/// Number of candidate sequences the edit-distance protocol requires.
pub const EGO4D_CANDIDATES: usize = 5;

/// Default observation horizons, in percent.
pub const DEFAULT_HORIZONS: [u32; 3] = [25, 50, 75];

/// Unrestricted Damerau-Levenshtein distance (unit-cost insertion,
/// deletion, substitution and transposition of adjacent symbols).
///
/// Uses the Lowrance-Wagner recurrence, which allows edits between the two
/// transposed symbols and therefore matches the true shortest edit path.
pub fn edit_distance<T: Eq + Hash>(a: &[T], b: &[T]) -> usize {
    let (la, lb) = (a.len(), b.len());
    if la == 0 {
        return lb;
    }
    if lb == 0 {
        return la;
    }
    let inf = la + lb;
    let width = lb + 2;
    let mut d = vec![0usize; (la + 2) * width];
    let at = |i: usize, j: usize| i * width + j;
    d[at(0, 0)] = inf;
    for i in 0..=la {
        d[at(i + 1, 0)] = inf;
        d[at(i + 1, 1)] = i;
    }
    for j in 0..=lb {
        d[at(0, j + 1)] = inf;
        d[at(1, j + 1)] = j;
    }
    // Last row of `a` in which each symbol was seen.
    let mut last_row: HashMap<&T, usize> = HashMap::new();
    for i in 1..=la {
        let mut last_col = 0;
        for j in 1..=lb {
            let i1 = last_row.get(&b[j - 1]).copied().unwrap_or(0);
            let j1 = last_col;
            let cost = if a[i - 1] == b[j - 1] {
                last_col = j;
                0
            } else {
                1
            };
            let best = (d[at(i, j)] + cost)
                .min(d[at(i + 1, j)] + 1)
                .min(d[at(i, j + 1)] + 1)
                .min(d[at(i1, j1)] + (i - i1 - 1) + 1 + (j - j1 - 1));
            d[at(i + 1, j + 1)] = best;
        }
        last_row.insert(&a[i - 1], i);
    }
    d[at(la + 1, lb + 1)]
}

/// Minimum normalized edit distances for the verb, noun and action views.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdReport {
    pub verb_ed: f64,
    pub noun_ed: f64,
    pub action_ed: f64,
}

impl EdReport {
    /// Component-wise mean of several reports.
    pub fn mean(reports: &[EdReport]) -> Option<EdReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let sum = |f: fn(&EdReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(EdReport {
            verb_ed: sum(|r| r.verb_ed),
            noun_ed: sum(|r| r.noun_ed),
            action_ed: sum(|r| r.action_ed),
        })
    }
}

fn min_normalized<T: Eq + Hash>(candidates: &[Vec<T>], truth: &[T]) -> f64 {
    let z = truth.len() as f64;
    candidates
        .iter()
        .map(|c| edit_distance(c, truth) as f64 / z)
        .fold(f64::INFINITY, f64::min)
}

/// Scores exactly five candidates of length `Z = |truth|` against the truth.
pub fn ego4d_eval(candidates: &[ActionSequence], truth: &ActionSequence) -> Result<EdReport> {
    if candidates.len() != EGO4D_CANDIDATES {
        return Err(Error::CandidateCount {
            expected: EGO4D_CANDIDATES,
            got: candidates.len(),
        });
    }
    ed_report_any(candidates, truth)
}

/// Same protocol with any non-zero number of candidates.
pub fn ed_report_any(candidates: &[ActionSequence], truth: &ActionSequence) -> Result<EdReport> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    if candidates.is_empty() {
        return Err(Error::CandidateCount {
            expected: EGO4D_CANDIDATES,
            got: 0,
        });
    }
    for (index, c) in candidates.iter().enumerate() {
        if c.len() != truth.len() {
            return Err(Error::CandidateLength {
                index,
                expected: truth.len(),
                got: c.len(),
            });
        }
    }
    let verbs: Vec<_> = candidates.iter().map(ActionSequence::verbs).collect();
    let nouns: Vec<_> = candidates.iter().map(ActionSequence::nouns).collect();
    let actions: Vec<Vec<Action>> = candidates.iter().map(|c| c.actions().to_vec()).collect();
    Ok(EdReport {
        verb_ed: min_normalized(&verbs, &truth.verbs()),
        noun_ed: min_normalized(&nouns, &truth.nouns()),
        action_ed: min_normalized(&actions, truth.actions()),
    })
}

/// Average precision of one ranking. Items are sorted by descending score,
/// ties by ascending index. Returns `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(total / positives as f64))
}

/// Disjoint frequent and rare class sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreqRareSplit {
    pub freq: Vec<usize>,
    pub rare: Vec<usize>,
}

impl FreqRareSplit {
    /// Validates disjointness and class range.
    pub fn new(mut freq: Vec<usize>, mut rare: Vec<usize>, classes: usize) -> Result<Self> {
        freq.sort_unstable();
        rare.sort_unstable();
        freq.dedup();
        rare.dedup();
        if let Some(c) = freq.iter().chain(&rare).find(|c| **c >= classes) {
            return Err(Error::InvalidConfig(format!("class {c} out of range 0..{classes}")));
        }
        if let Some(c) = freq.iter().find(|c| rare.binary_search(c).is_ok()) {
            return Err(Error::InvalidConfig(format!("class {c} is both FREQ and RARE")));
        }
        Ok(Self { freq, rare })
    }
}

/// Frequent classes have a training count at or above the threshold; the
/// default threshold is the median count over classes with at least one
/// training example. Classes never seen in training count as rare.
pub fn make_freq_rare_split(counts: &[u64], threshold: Option<f64>) -> Result<FreqRareSplit> {
    let mut positive: Vec<u64> = counts.iter().copied().filter(|c| *c > 0).collect();
    if positive.is_empty() {
        return Err(Error::AllZeroCounts);
    }
    positive.sort_unstable();
    let threshold = threshold.unwrap_or_else(|| {
        let m = positive.len();
        if m % 2 == 1 {
            positive[m / 2] as f64
        } else {
            (positive[m / 2 - 1] as f64 + positive[m / 2] as f64) / 2.0
        }
    });
    let (freq, rare) = (0..counts.len())
        .partition(|&c| counts[c] > 0 && counts[c] as f64 >= threshold);
    Ok(FreqRareSplit { freq, rare })
}

/// Scores and binary labels for one observation horizon.
/// `scores[example][class]`, `labels[example][class]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonData {
    pub horizon: u32,
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<Vec<bool>>,
}

/// mAP per category; `None` when a category has no evaluable class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryMap {
    pub all: Option<f64>,
    pub freq: Option<f64>,
    pub rare: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: u32,
    #[serde(flatten)]
    pub map: CategoryMap,
    /// Per-class AP; `None` for classes without positives at this horizon.
    pub class_ap: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub horizons: Vec<HorizonReport>,
    /// Per-category mean over horizons.
    pub average: CategoryMap,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn category_mean(class_ap: &[Option<f64>], classes: &[usize]) -> Option<f64> {
    mean_of(classes.iter().filter_map(|&c| class_ap[c]))
}

/// Class-wise AP with examples as ranking units, averaged per category and
/// then across horizons. Classes without positives at a horizon are skipped.
pub fn map_eval(horizons: &[HorizonData], split: &FreqRareSplit) -> Result<MapReport> {
    let classes = horizons
        .iter()
        .flat_map(|h| h.scores.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    let all: Vec<usize> = (0..classes).collect();
    if let Some(c) = split.freq.iter().chain(&split.rare).find(|c| **c >= classes) {
        return Err(Error::DimensionMismatch(format!(
            "split references class {c} but predictions have {classes} classes"
        )));
    }
    let mut reports = Vec::with_capacity(horizons.len());
    for h in horizons {
        if h.scores.len() != h.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "horizon {}: {} score rows vs {} label rows",
                h.horizon,
                h.scores.len(),
                h.labels.len()
            )));
        }
        if h.scores.iter().any(|r| r.len() != classes)
            || h.labels.iter().any(|r| r.len() != classes)
        {
            return Err(Error::DimensionMismatch(format!(
                "horizon {}: every row must have {classes} classes",
                h.horizon
            )));
        }
        let mut class_ap = Vec::with_capacity(classes);
        for c in 0..classes {
            let scores: Vec<f64> = h.scores.iter().map(|r| r[c]).collect();
            let labels: Vec<bool> = h.labels.iter().map(|r| r[c]).collect();
            class_ap.push(average_precision(&scores, &labels)?);
        }
        reports.push(HorizonReport {
            horizon: h.horizon,
            map: CategoryMap {
                all: category_mean(&class_ap, &all),
                freq: category_mean(&class_ap, &split.freq),
                rare: category_mean(&class_ap, &split.rare),
            },
            class_ap,
        });
    }
    let average = CategoryMap {
        all: mean_of(reports.iter().filter_map(|r| r.map.all)),
        freq: mean_of(reports.iter().filter_map(|r| r.map.freq)),
        rare: mean_of(reports.iter().filter_map(|r| r.map.rare)),
    };
    Ok(MapReport {
        horizons: reports,
        average,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::ActionPair;

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance(b"abc", b"abc"), 0);
        assert_eq!(edit_distance(b"ab", b"ba"), 1);
        assert_eq!(edit_distance(b"kitten", b"sitting"), 3);
        assert_eq!(edit_distance(b"", b"abc"), 3);
        // Unrestricted variant: CA -> AC -> ABC.
        assert_eq!(edit_distance(b"ca", b"abc"), 2);
    }

    fn seq(pairs: &[(usize, usize)]) -> ActionSequence {
        pairs.iter().map(|&(v, n)| ActionPair::new(v, n)).collect()
    }

    #[test]
    fn ego4d_exact_candidate() {
        let truth = seq(&[(0, 0), (1, 1), (2, 2)]);
        let other = seq(&[(3, 3), (3, 3), (3, 3)]);
        let mut cands = vec![other; 4];
        cands.push(truth.clone());
        let r = ego4d_eval(&cands, &truth).unwrap();
        assert_eq!((r.verb_ed, r.noun_ed, r.action_ed), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ego4d_disjoint_candidates() {
        let truth = seq(&[(0, 0), (1, 1)]);
        let cands = vec![seq(&[(5, 5), (6, 6)]); 5];
        let r = ego4d_eval(&cands, &truth).unwrap();
        assert_eq!((r.verb_ed, r.noun_ed, r.action_ed), (1.0, 1.0, 1.0));
    }

    #[test]
    fn ego4d_input_errors() {
        let truth = seq(&[(0, 0)]);
        assert!(matches!(
            ego4d_eval(&vec![truth.clone(); 4], &truth),
            Err(Error::CandidateCount { got: 4, .. })
        ));
        let mut cands = vec![truth.clone(); 4];
        cands.push(seq(&[(0, 0), (0, 0)]));
        assert!(matches!(ego4d_eval(&cands, &truth), Err(Error::CandidateLength { index: 4, .. })));
        assert!(matches!(
            ego4d_eval(&vec![ActionSequence::new(); 5], &ActionSequence::new()),
            Err(Error::EmptyTruth)
        ));
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap(), Some(1.0));
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap().unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(average_precision(&[0.9, 0.8], &[false, true]).unwrap(), Some(0.5));
        assert_eq!(average_precision(&[0.9, 0.8], &[false, false]).unwrap(), None);
        assert!(average_precision(&[0.9], &[true, false]).is_err());
    }

    #[test]
    fn ap_ties_rank_lower_index_first() {
        // Both tied; positive at index 1 ranks second.
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).unwrap(), Some(0.5));
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]).unwrap(), Some(1.0));
    }

    #[test]
    fn split_examples() {
        let s = make_freq_rare_split(&[10, 10, 1, 1], None).unwrap();
        assert_eq!((s.freq, s.rare), (vec![0, 1], vec![2, 3]));
        let s = make_freq_rare_split(&[4, 4, 4], None).unwrap();
        assert_eq!((s.freq.len(), s.rare.len()), (3, 0));
        let s = make_freq_rare_split(&[7], None).unwrap();
        assert_eq!(s.freq, vec![0]);
        assert!(matches!(make_freq_rare_split(&[0, 0], None), Err(Error::AllZeroCounts)));
        let s = make_freq_rare_split(&[5, 0, 1], Some(2.0)).unwrap();
        assert_eq!((s.freq, s.rare), (vec![0], vec![1, 2]));
    }

    #[test]
    fn split_validation() {
        assert!(FreqRareSplit::new(vec![0, 1], vec![1], 3).is_err());
        assert!(FreqRareSplit::new(vec![0], vec![5], 3).is_err());
        assert!(FreqRareSplit::new(vec![2, 0], vec![1], 3).is_ok());
    }

    #[test]
    fn perfect_map() {
        let labels = vec![vec![true, false], vec![false, true], vec![true, true]];
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .map(|r| r.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect())
            .collect();
        let horizons: Vec<HorizonData> = DEFAULT_HORIZONS
            .iter()
            .map(|&h| HorizonData { horizon: h, scores: scores.clone(), labels: labels.clone() })
            .collect();
        let split = FreqRareSplit::new(vec![0], vec![1], 2).unwrap();
        let r = map_eval(&horizons, &split).unwrap();
        for h in &r.horizons {
            assert_eq!(h.map, CategoryMap { all: Some(1.0), freq: Some(1.0), rare: Some(1.0) });
        }
        assert_eq!(r.average.all, Some(1.0));
    }

    #[test]
    fn classes_without_positives_are_skipped() {
        let h = HorizonData {
            horizon: 50,
            scores: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            labels: vec![vec![true, false], vec![false, false]],
        };
        let split = FreqRareSplit::new(vec![0], vec![1], 2).unwrap();
        let r = map_eval(&[h], &split).unwrap();
        assert_eq!(r.horizons[0].class_ap, vec![Some(1.0), None]);
        assert_eq!(r.horizons[0].map.all, Some(1.0));
        assert_eq!(r.horizons[0].map.rare, None);
    }

    #[test]
    fn map_dimension_mismatch() {
        let h = HorizonData {
            horizon: 25,
            scores: vec![vec![0.9, 0.1]],
            labels: vec![vec![true]],
        };
        let split = FreqRareSplit::new(vec![0], vec![], 2).unwrap();
        assert!(map_eval(&[h], &split).is_err());
    }
}
