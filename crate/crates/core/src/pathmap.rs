//! PathMAP: the single most probable length-`T` path.
//!
//! Word choices factor out of the maximization, so each step contributes its
//! best content word and the remaining search is a Viterbi pass over linked
//! steps:
//!
//! ```text
//! f(0, s) = start(s)
//! f(t, s) = ln w*(s) + max_{s' < s} [ ln l(s', s) + f(t-1, s') ]
//! best    = max_s [ f(T, s) + close(s) ]
//! ```
//!
//! `close(s)` is `ln l(s, S) + ln w(S, eos)` in eos mode and 0 in free mode.
//! Ties go to the smaller final content step, then to the lexicographically
//! smaller linked-step vector.

use std::cmp::Ordering;

use crate::error::DecodeError;
use crate::lattice::{DatLattice, TokenId};
use crate::prob::{sequence_log_marginal, Conventions, Path, ScoredSequence, TerminationMode};

/// Best content word per step, ties to the smaller id. `None` when every
/// content word has zero probability at that step.
pub fn best_words(lattice: &DatLattice) -> Vec<Option<(TokenId, f64)>> {
    let vocab = lattice.vocab();
    let mut out = vec![None; lattice.steps() + 1];
    for (s, slot) in out.iter_mut().enumerate().skip(1) {
        let row = lattice.word_row(s);
        let mut best: Option<(TokenId, f64)> = None;
        for id in vocab.content_ids() {
            let w = row[id];
            if w > f64::NEG_INFINITY && best.is_none_or(|(_, b)| w > b) {
                best = Some((id, w));
            }
        }
        *slot = best;
    }
    out
}

struct Table {
    score: Vec<Vec<f64>>,
    back: Vec<Vec<usize>>,
}

impl Table {
    /// Linked steps `a_0..=a_t` of the stored best prefix ending at `(t, s)`.
    fn trace(&self, t: usize, s: usize) -> Vec<usize> {
        let mut steps = vec![0; t + 1];
        let mut cur = s;
        for k in (0..=t).rev() {
            steps[k] = cur;
            if k > 0 {
                cur = self.back[k][cur];
            }
        }
        steps
    }
}

/// Most probable single path with exactly `length` content tokens, using
/// the best word at each step. The returned path includes the bos step (and
/// the final step in eos mode); the sequence carries both the path score and
/// the exact marginal of its tokens.
// DP tables are indexed by step on purpose.
#[allow(clippy::needless_range_loop)]
pub fn pathmap_decode(
    lattice: &DatLattice,
    length: usize,
    conventions: Conventions,
) -> Result<(Path, ScoredSequence), DecodeError> {
    let steps = lattice.steps();
    conventions.check_length(steps, length)?;
    let last = conventions.last_content_step(steps);
    let words = best_words(lattice);

    let mut table = Table {
        score: vec![vec![f64::NEG_INFINITY; steps + 1]; length + 1],
        back: vec![vec![0; steps + 1]; length + 1],
    };
    table.score[0] = conventions.start_scores(lattice);

    for t in 1..=length {
        // Position t sits at a step in t+1..=last; position t-1 at a step >= t
        // (or >= 1 for the bos slot).
        let prev_lo = if t == 1 { 1 } else { t };
        for s in (t + 1)..=last {
            let Some((_, w)) = words[s] else { continue };
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for p in prev_lo..s {
                let prev = table.score[t - 1][p];
                if prev == f64::NEG_INFINITY {
                    continue;
                }
                let cand = prev + lattice.link_logprob(p, s);
                if cand == f64::NEG_INFINITY {
                    continue;
                }
                let better = match cand.partial_cmp(&best) {
                    Some(Ordering::Greater) => true,
                    Some(Ordering::Equal) => table.trace(t - 1, p) < table.trace(t - 1, arg),
                    _ => false,
                };
                if better {
                    best = cand;
                    arg = p;
                }
            }
            if best > f64::NEG_INFINITY {
                table.score[t][s] = w + best;
                table.back[t][s] = arg;
            }
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut end = 0;
    for s in (length + 1)..=last {
        let f = table.score[length][s];
        if f == f64::NEG_INFINITY {
            continue;
        }
        let total = f + conventions.closing_logprob(lattice, s);
        if total > best {
            best = total;
            end = s;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(DecodeError::NoValidPath(length));
    }

    let mut linked = table.trace(length, end);
    let tokens: Vec<TokenId> = linked[1..]
        .iter()
        .map(|&s| words[s].expect("traced steps have a best word").0)
        .collect();
    let vocab = lattice.vocab();
    let mut path_words = Vec::with_capacity(linked.len() + 1);
    path_words.push(vocab.bos_id());
    path_words.extend_from_slice(&tokens);
    if conventions.termination == TerminationMode::Eos {
        linked.push(steps);
        path_words.push(vocab.eos_id());
    }
    let path = Path::new(linked, path_words)?;
    let log_marginal = sequence_log_marginal(lattice, &tokens, conventions)?;
    Ok((
        path,
        ScoredSequence {
            tokens,
            log_marginal,
            log_best_path: Some(best),
            beam_total: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::fixtures::{l_det, l_fork};
    use crate::prob::{path_logprob, BosPolicy};

    #[test]
    fn deterministic_chain() {
        let (path, seq) = pathmap_decode(&l_det(), 2, Conventions::default()).unwrap();
        assert_eq!(path.linked_steps(), &[1, 2, 3, 4]);
        assert_eq!(path.words(), &[0, 2, 3, 1]);
        assert_eq!(seq.tokens, vec![2, 3]);
        assert_eq!(seq.log_best_path, Some(0.0));
        assert_eq!(seq.log_marginal, 0.0);
    }

    #[test]
    fn infeasible_length() {
        assert!(matches!(
            pathmap_decode(&l_det(), 3, Conventions::default()),
            Err(DecodeError::InfeasibleLength {
                length: 3,
                steps: 4,
                ..
            })
        ));
        assert_eq!(
            pathmap_decode(&l_det(), 0, Conventions::default()).unwrap_err(),
            DecodeError::EmptySequence
        );
    }

    #[test]
    fn fork_best_path_by_hand() {
        // Best words: step2 a (.7), step3 b (.6), step4 b or c (.5, tie -> b).
        // Length-2 candidates with eos closing:
        //   (2,3): .6*.7*.5*.6*.3 = .0378
        //   (2,4): .6*.7*.4*.5*1  = .084
        //   (3,4): .3*.6*.7*.5*1  = .063
        let (path, seq) = pathmap_decode(&l_fork(), 2, Conventions::default()).unwrap();
        assert_eq!(path.linked_steps(), &[1, 2, 4, 5]);
        assert_eq!(seq.tokens, vec![2, 3]);
        assert!((seq.log_best_path.unwrap() - 0.084f64.ln()).abs() < 1e-12);
        assert!(seq.log_best_path.unwrap() <= seq.log_marginal);
    }

    #[test]
    fn best_score_equals_path_logprob_under_strict_bos() {
        let fork = l_fork();
        for termination in [TerminationMode::Eos, TerminationMode::Free] {
            let conv = Conventions::new(termination, BosPolicy::Strict);
            // Step 5 only emits eos, so at most three content tokens fit.
            for t in 1..=3 {
                let (path, seq) = pathmap_decode(&fork, t, conv).unwrap();
                let direct = path_logprob(&fork, &path).unwrap();
                assert!((direct - seq.log_best_path.unwrap()).abs() < 1e-12);
                assert_eq!(seq.tokens.len(), t);
            }
        }
    }

    #[test]
    fn verbatim_bos_may_start_late() {
        // Single token in free mode: step s scores max_{s'<s} l(s', s) * w*(s).
        // step2: .6*.7=.42, step3: .5*.6=.30, step4: .7*.5=.35, so step 2.
        let conv = Conventions::new(TerminationMode::Free, BosPolicy::Verbatim);
        let (path, seq) = pathmap_decode(&l_fork(), 1, conv).unwrap();
        assert_eq!(path.linked_steps(), &[1, 2]);
        assert!((seq.log_best_path.unwrap() - 0.42f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_lattice_reports_no_path() {
        let mut parts = l_det().to_parts();
        // Step 3 can only emit eos, so no content word is available there.
        parts.word_logprobs[2] = vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        let lattice = DatLattice::new(parts).unwrap();
        assert_eq!(
            pathmap_decode(&lattice, 2, Conventions::default()).unwrap_err(),
            DecodeError::NoValidPath(2)
        );
    }

    #[test]
    fn exact_ties_resolve_to_earlier_steps() {
        // Single tokens at steps 2 and 3 both score .5 * .5 * 1.
        let mut parts = l_fork().to_parts();
        parts.word_logprobs[1] = vec![
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
            0.5f64.ln(),
            0.5f64.ln(),
            f64::NEG_INFINITY,
        ];
        parts.word_logprobs[2] = parts.word_logprobs[1].clone();
        parts.link_logprobs[0] = vec![
            0.5f64.ln(),
            0.5f64.ln(),
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ];
        parts.link_logprobs[1] = vec![f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0];
        parts.link_logprobs[2] = vec![f64::NEG_INFINITY, 0.0];
        let lattice = DatLattice::new(parts).unwrap();
        let (path, seq) = pathmap_decode(&lattice, 1, Conventions::default()).unwrap();
        assert_eq!(path.linked_steps(), &[1, 2, 5]);
        assert_eq!(seq.tokens, vec![2]);
    }
}
