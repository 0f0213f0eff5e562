//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lta::grpo::{compute_advantages, GroupSample, GrpoConfig, RolloutGroup};
use lta::policy::{FillerTemplate, PolicyContext, ToyPolicy};
use lta::structured::parse_structured;
use lta::{ActionPair, Vocabulary};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shortest edit script between `a` and `b` found by breadth-first search
/// over single insertions, deletions, substitutions and adjacent swaps.
/// Intermediate strings use only symbols of `a ∪ b` and are at most one
/// symbol longer than the longer input.
pub fn bfs_edit_distance(a: &[u8], b: &[u8]) -> usize {
    bfs_all(a, b, a.len().max(b.len()) + 1)
        .get(b)
        .copied()
        .expect("target reachable")
}

/// Distances from `a` to every string reachable within the length bound,
/// over the alphabet of `a ∪ b`.
pub fn bfs_all(a: &[u8], b: &[u8], max_len: usize) -> HashMap<Vec<u8>, usize> {
    let mut alphabet: Vec<u8> = a.iter().chain(b).copied().collect::<HashSet<_>>().into_iter().collect();
    alphabet.sort_unstable();
    let mut dist = HashMap::new();
    dist.insert(a.to_vec(), 0);
    let mut queue = VecDeque::from([a.to_vec()]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        let mut next = Vec::new();
        for i in 0..s.len() {
            let mut t = s.clone();
            t.remove(i);
            next.push(t);
            for &c in &alphabet {
                if c != s[i] {
                    let mut t = s.clone();
                    t[i] = c;
                    next.push(t);
                }
            }
            if i + 1 < s.len() && s[i] != s[i + 1] {
                let mut t = s.clone();
                t.swap(i, i + 1);
                next.push(t);
            }
        }
        if s.len() < max_len {
            for i in 0..=s.len() {
                for &c in &alphabet {
                    let mut t = s.clone();
                    t.insert(i, c);
                    next.push(t);
                }
            }
        }
        for t in next {
            if !dist.contains_key(&t) {
                dist.insert(t.clone(), d + 1);
                queue.push_back(t);
            }
        }
    }
    dist
}

/// Every sequence over `0..alphabet` of length `0..=max_len`.
pub fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut grown = Vec::new();
        for s in &frontier {
            for c in 0..alphabet {
                let mut t: Vec<u8> = s.clone();
                t.push(c);
                grown.push(t);
            }
        }
        out.extend(grown.iter().cloned());
        frontier = grown;
    }
    out
}

/// AP straight from the definition: for every positive, precision at its
/// rank, where an item ranks ahead of another when its score is higher or
/// the scores tie and its index is lower.
pub fn ap_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return None;
    }
    let ahead_or_equal = |j: usize, i: usize| scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
    let mut total = 0.0;
    for i in (0..scores.len()).filter(|&i| labels[i]) {
        let rank = (0..scores.len()).filter(|&j| ahead_or_equal(j, i)).count();
        let hits = (0..scores.len()).filter(|&j| labels[j] && ahead_or_equal(j, i)).count();
        total += hits as f64 / rank as f64;
    }
    Some(total / positives as f64)
}

/// Corrected joint computed directly from raw counts.
pub fn corrected_oracle(counts: &Array2<u64>, p_verb: &[f64], p_noun: &[f64]) -> Array2<f64> {
    let (nv, nn) = counts.dim();
    let row: Vec<u64> = (0..nv).map(|v| (0..nn).map(|n| counts[[v, n]]).sum()).collect();
    let col: Vec<u64> = (0..nn).map(|n| (0..nv).map(|v| counts[[v, n]]).sum()).collect();
    Array2::from_shape_fn((nv, nn), |(v, n)| {
        let c = counts[[v, n]] as f64;
        let a = if row[v] > 0 { c / row[v] as f64 } else { 0.0 };
        let b = if col[n] > 0 { c / col[n] as f64 } else { 0.0 };
        p_verb[v] * p_noun[n] * (a + b) / 2.0
    })
}

/// Row-major scan keeping the first strict maximum.
pub fn argmax_scan(grid: &Array2<f64>) -> (usize, usize) {
    let (nv, nn) = grid.dim();
    let mut best = (0, 0);
    for v in 0..nv {
        for n in 0..nn {
            if grid[[v, n]] > grid[[best.0, best.1]] {
                best = (v, n);
            }
        }
    }
    best
}

/// A small vocabulary with `verbs × nouns` single-letter labels.
pub fn letter_vocab(verbs: usize, nouns: usize) -> Vocabulary {
    let v: Vec<String> = (0..verbs).map(|i| format!("v{i}")).collect();
    let n: Vec<String> = (0..nouns).map(|i| format!("n{i}")).collect();
    Vocabulary::new(v, n).unwrap()
}

/// A random rollout group whose current policy differs slightly from the
/// sampling policy, with every ratio at least `margin` away from the clip
/// edges.
pub struct RandomGroup {
    pub policy: ToyPolicy,
    pub group: RolloutGroup<PolicyContext>,
    pub cfg: GrpoConfig,
}

pub fn random_group(seed: u64, margin: f64) -> RandomGroup {
    let mut r = rng(seed);
    let vocab = letter_vocab(r.random_range(2..=3), r.random_range(2..=3));
    let order = r.random_range(0..=1u8);
    let cfg = GrpoConfig {
        temperature: r.random_range(0.5..1.5),
        kl_coeff: r.random_range(0.0..0.3),
        ..Default::default()
    };
    let old = ToyPolicy::for_vocab(&vocab, order).unwrap().randomized(0.8, &mut r);
    let reference = ToyPolicy::for_vocab(&vocab, order).unwrap().randomized(0.8, &mut r);
    let ctx = PolicyContext::from_last_pair(Some(ActionPair::new(
        r.random_range(0..vocab.verb_count()),
        r.random_range(0..vocab.noun_count()),
    )));
    let z = r.random_range(1..=3);
    let filler = FillerTemplate::default();
    let mut samples = Vec::new();
    for _ in 0..cfg.group_size {
        let out = old.sample_output(ctx, z, cfg.temperature, &vocab, &filler, &mut r);
        samples.push(GroupSample {
            parsed: parse_structured(&out.raw),
            raw: out.raw,
            emissions: out.emissions,
            breakdown: Default::default(),
        });
    }
    let rewards: Vec<f64> = (0..cfg.group_size).map(|_| r.random::<f64>()).collect();
    let emissions: Vec<Vec<usize>> = samples.iter().map(|s| s.emissions.clone()).collect();
    let logp = |p: &ToyPolicy| -> Vec<f64> {
        emissions
            .iter()
            .map(|e| p.sequence_logprob(ctx, e, cfg.temperature).unwrap())
            .collect()
    };
    let logp_old = logp(&old);
    let group = RolloutGroup {
        prompt: String::new(),
        context: ctx,
        advantages: compute_advantages(&rewards, cfg.std_floor).unwrap(),
        logp_ref: logp(&reference),
        logp_old: logp_old.clone(),
        rewards,
        samples,
    };
    loop {
        let mut policy = old.clone();
        policy.logits_mut().mapv_inplace(|l| l + 0.08 * (r.random::<f64>() - 0.5));
        let ok = logp(&policy).iter().zip(&logp_old).all(|(n, o)| {
            let rho = (n - o).exp();
            (rho - (1.0 - cfg.clip_epsilon)).abs() > margin && (rho - (1.0 + cfg.clip_epsilon)).abs() > margin
        });
        if ok {
            return RandomGroup { policy, group, cfg };
        }
    }
}

/// Central finite-difference gradient of `f` over the policy logits.
pub fn finite_difference<F: Fn(&ToyPolicy) -> f64>(policy: &ToyPolicy, h: f64, f: F) -> Array2<f64> {
    let mut grad = Array2::zeros(policy.logits().dim());
    for (idx, g) in grad.indexed_iter_mut() {
        let mut plus = policy.clone();
        plus.logits_mut()[idx] += h;
        let mut minus = policy.clone();
        minus.logits_mut()[idx] -= h;
        *g = (f(&plus) - f(&minus)) / (2.0 * h);
    }
    grad
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both vanish.
pub fn relative_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = (a - b).mapv(|x| x * x).sum().sqrt();
    let scale = a.mapv(|x| x * x).sum().sqrt().max(b.mapv(|x| x * x).sum().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
