//! Corpus BLEU compatible with sacreBLEU's default signature
//! (`nrefs:N|case:mixed|eff:no|tok:13a|smooth:exp`).

use std::collections::HashMap;
use std::ops::AddAssign;

use super::{check_refs, CorpusMetric, MetricsError};
use crate::corpus::{is_split_space, tokenize_13a_str};

pub const MAX_ORDER: usize = 4;

/// Sufficient statistics of one segment; they add up over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub hyp_len: u64,
    pub ref_len: u64,
    pub correct: [u64; MAX_ORDER],
    pub total: [u64; MAX_ORDER],
}

impl AddAssign for BleuStats {
    fn add_assign(&mut self, rhs: Self) {
        self.hyp_len += rhs.hyp_len;
        self.ref_len += rhs.ref_len;
        for n in 0..MAX_ORDER {
            self.correct[n] += rhs.correct[n];
            self.total[n] += rhs.total[n];
        }
    }
}

fn preprocess(s: &str) -> Vec<String> {
    tokenize_13a_str(s.trim_end_matches(is_split_space))
}

fn ngram_counts(tokens: &[String]) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    for n in 1..=MAX_ORDER {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Closest reference length; ties go to the shorter reference.
fn closest_ref_len(hyp_len: usize, ref_lens: &[usize]) -> usize {
    let mut best: Option<(usize, usize)> = None;
    for &len in ref_lens {
        let diff = hyp_len.abs_diff(len);
        best = match best {
            Some((d, l)) if diff > d || (diff == d && len >= l) => Some((d, l)),
            _ => Some((diff, len)),
        };
    }
    best.map_or(0, |(_, l)| l)
}

pub fn segment_stats<S: AsRef<str>>(hyp: &str, refs: &[S]) -> BleuStats {
    let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| preprocess(r.as_ref())).collect();
    let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
    for toks in &ref_tokens {
        for (ng, c) in ngram_counts(toks) {
            let e = ref_counts.entry(ng).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let ref_lens: Vec<usize> = ref_tokens.iter().map(Vec::len).collect();
    let hyp_tokens = preprocess(hyp);
    let mut stats = BleuStats {
        hyp_len: hyp_tokens.len() as u64,
        ref_len: closest_ref_len(hyp_tokens.len(), &ref_lens) as u64,
        ..Default::default()
    };
    for (ng, c) in ngram_counts(&hyp_tokens) {
        let n = ng.len() - 1;
        stats.total[n] += c;
        if let Some(r) = ref_counts.get(ng) {
            stats.correct[n] += c.min(*r);
        }
    }
    stats
}

/// Floored logarithm used by the reference scorer for zero precisions.
fn floored_ln(x: f64) -> f64 {
    if x == 0.0 {
        -9_999_999_999.0
    } else {
        x.ln()
    }
}

pub fn score_from_stats(stats: &BleuStats) -> f64 {
    let (sys, reference) = (stats.hyp_len, stats.ref_len);
    let bp = if sys < reference {
        if sys > 0 {
            (1.0 - reference as f64 / sys as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    if stats.correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let mut precisions = [0.0; MAX_ORDER];
    let mut smooth = 1.0;
    for (p, (&correct, &total)) in precisions.iter_mut().zip(stats.correct.iter().zip(&stats.total)) {
        if total == 0 {
            break;
        }
        *p = if correct == 0 {
            smooth *= 2.0;
            100.0 / (smooth * total as f64)
        } else {
            100.0 * correct as f64 / total as f64
        };
    }
    let log_sum: f64 = precisions.iter().map(|&p| floored_ln(p)).sum();
    bp * (log_sum / MAX_ORDER as f64).exp()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Bleu;

impl CorpusMetric for Bleu {
    type Stats = BleuStats;

    fn name(&self) -> &'static str {
        "BLEU"
    }

    fn segment<S: AsRef<str>>(&self, hyp: &str, refs: &[S]) -> BleuStats {
        segment_stats(hyp, refs)
    }

    fn score(&self, stats: &BleuStats) -> f64 {
        score_from_stats(stats)
    }
}

/// Corpus BLEU. `refs` holds one or more reference sets, each parallel to `hyps`.
pub fn bleu<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[Vec<R>]) -> Result<f64, MetricsError> {
    check_refs(hyps.len(), refs)?;
    Ok(Bleu.corpus_score(hyps, refs))
}
