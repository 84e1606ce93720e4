//! ROUGE-1/2/L and word novelty.
//!
//! Tokens are compared as exact strings; use [`tokenize`] for the standard
//! whitespace-split, lowercased form. No stemming.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(overlap: usize, hyp_total: usize, ref_total: usize) -> Self {
        if hyp_total == 0 && ref_total == 0 {
            return Self {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
            };
        }
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(overlap, hyp_total);
        let recall = ratio(overlap, ref_total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. `n` must be at least 1.
pub fn rouge_n<S: AsRef<str>>(hyp: &[S], reference: &[S], n: usize) -> Prf {
    assert!(n >= 1, "n-gram order must be at least 1");
    let hyp_counts = ngram_counts(hyp, n);
    let ref_counts = ngram_counts(reference, n);
    let overlap = hyp_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    Prf::from_counts(
        overlap,
        hyp.len().saturating_sub(n - 1),
        reference.len().saturating_sub(n - 1),
    )
}

/// Longest common subsequence length, two-row DP.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Prf {
    Prf::from_counts(lcs_len(hyp, reference), hyp.len(), reference.len())
}

/// Fraction of hypothesis positions whose token does not occur in `source`.
pub fn word_novelty<S: AsRef<str>>(hyp: &[S], source: &[S]) -> Result<f64, MetricsError> {
    if hyp.is_empty() {
        return Err(MetricsError::EmptyHypothesis);
    }
    let known: HashSet<&str> = source.iter().map(AsRef::as_ref).collect();
    let novel = hyp.iter().filter(|t| !known.contains(t.as_ref())).count();
    Ok(novel as f64 / hyp.len() as f64)
}

/// ROUGE-1, ROUGE-2 and ROUGE-L for one hypothesis/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RougeScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
}

impl RougeScores {
    pub fn compute<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        Self {
            rouge1: rouge_n(hyp, reference, 1),
            rouge2: rouge_n(hyp, reference, 2),
            rouge_l: rouge_l(hyp, reference),
        }
    }

    /// Sum of the three F1 scores, scaled by 100.
    pub fn r_sum(&self) -> f64 {
        100.0 * (self.rouge1.f1 + self.rouge2.f1 + self.rouge_l.f1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Prf, b: (f64, f64, f64)) -> bool {
        (a.precision - b.0).abs() < 1e-9
            && (a.recall - b.1).abs() < 1e-9
            && (a.f1 - b.2).abs() < 1e-9
    }

    #[test]
    fn rouge_n_examples() {
        let x = ["a", "b", "c"];
        assert!(close(rouge_n(&x, &x, 1), (1.0, 1.0, 1.0)));
        assert!(close(rouge_n(&x, &x, 2), (1.0, 1.0, 1.0)));
        let two_thirds = 2.0 / 3.0;
        assert!(close(
            rouge_n(&["a", "b", "c"], &["a", "c", "d"], 1),
            (two_thirds, two_thirds, two_thirds)
        ));
        assert!(close(rouge_n(&["a"], &["a", "b"], 2), (0.0, 0.0, 0.0)));
    }

    #[test]
    fn rouge_n_clips_repeats() {
        // hyp has three "a", ref has one: overlap 1.
        let p = rouge_n(&["a", "a", "a"], &["a", "b"], 1);
        assert!(close(p, (1.0 / 3.0, 0.5, 0.4)));
    }

    #[test]
    fn empty_conventions() {
        let empty: [&str; 0] = [];
        assert!(close(rouge_n(&empty, &empty, 1), (1.0, 1.0, 1.0)));
        assert!(close(rouge_l(&empty, &empty), (1.0, 1.0, 1.0)));
        assert!(close(rouge_l(&empty, &["a"]), (0.0, 0.0, 0.0)));
        assert!(close(rouge_n(&["a"], &empty, 1), (0.0, 0.0, 0.0)));
    }

    #[test]
    fn rouge_l_examples() {
        let x = ["a", "b", "c"];
        assert!(close(rouge_l(&x, &x), (1.0, 1.0, 1.0)));
        let t = 2.0 / 3.0;
        assert!(close(rouge_l(&["a", "c", "b"], &x), (t, t, t)));
    }

    #[test]
    fn novelty_examples() {
        assert_eq!(word_novelty(&["a", "b"], &["a", "b", "c"]).unwrap(), 0.0);
        assert_eq!(word_novelty(&["x", "y"], &["a", "b"]).unwrap(), 1.0);
        assert_eq!(
            word_novelty(&["a", "x", "a", "z"], &["a", "b", "c"]).unwrap(),
            0.5
        );
        let empty: [&str; 0] = [];
        assert_eq!(
            word_novelty(&empty, &["a"]),
            Err(MetricsError::EmptyHypothesis)
        );
    }

    #[test]
    fn tokenize_lowercases() {
        assert_eq!(tokenize("  The Cat\tsat "), vec!["the", "cat", "sat"]);
    }

    #[test]
    fn r_sum_scales_f1() {
        let x = ["a", "b"];
        assert!((RougeScores::compute(&x, &x).r_sum() - 300.0).abs() < 1e-9);
    }

    fn lcs_memo(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() || b.is_empty() {
            return 0;
        }
        if let Some(&v) = memo.get(&(a.len(), b.len())) {
            return v;
        }
        let v = if a[0] == b[0] {
            1 + lcs_memo(&a[1..], &b[1..], memo)
        } else {
            lcs_memo(&a[1..], b, memo).max(lcs_memo(a, &b[1..], memo))
        };
        memo.insert((a.len(), b.len()), v);
        v
    }

    fn words(v: &[u8]) -> Vec<String> {
        v.iter().map(|c| ((b'a' + c) as char).to_string()).collect()
    }

    proptest! {
        #[test]
        fn lcs_matches_memoized_recursion(
            a in prop::collection::vec(0u8..4, 0..10),
            b in prop::collection::vec(0u8..4, 0..10),
        ) {
            let expected = lcs_memo(&a, &b, &mut HashMap::new());
            prop_assert_eq!(lcs_len(&words(&a), &words(&b)), expected);
        }

        #[test]
        fn metrics_are_bounded(
            a in prop::collection::vec(0u8..5, 0..12),
            b in prop::collection::vec(0u8..5, 0..12),
        ) {
            let (h, r) = (words(&a), words(&b));
            for p in [rouge_n(&h, &r, 1), rouge_n(&h, &r, 2), rouge_l(&h, &r)] {
                for v in [p.precision, p.recall, p.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            if !h.is_empty() {
                let nov = word_novelty(&h, &r).unwrap();
                prop_assert!((0.0..=1.0).contains(&nov));
            }
        }

        #[test]
        fn self_overlap_is_perfect(a in prop::collection::vec(0u8..5, 2..12)) {
            let h = words(&a);
            for n in [1, 2] {
                let p = rouge_n(&h, &h, n);
                prop_assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
            }
        }

        #[test]
        fn rouge_l_recall_monotone_when_extending_with_later_ref_token(
            a in prop::collection::vec(0u8..4, 0..8),
            b in prop::collection::vec(0u8..4, 1..8),
            pick in 0usize..8,
        ) {
            let (h, r) = (words(&a), words(&b));
            let before = rouge_l(&h, &r).recall;
            let mut extended = h.clone();
            extended.push(r[pick % r.len()].clone());
            prop_assert!(rouge_l(&extended, &r).recall >= before);
        }
    }
}
