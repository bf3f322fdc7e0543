//! chrF2 compatible with sacreBLEU's `nc:6|nw:0|space:no|eff:yes` signature.

use std::collections::HashMap;
use std::ops::AddAssign;

use super::{check_refs, CorpusMetric, MetricsError};
use crate::corpus::split_words;

pub const CHAR_ORDER: usize = 6;
const BETA: f64 = 2.0;

/// Per order: hypothesis n-grams, reference n-grams, matched n-grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChrfStats(pub [[u64; 3]; CHAR_ORDER]);

impl AddAssign for ChrfStats {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
    }
}

fn counts_of(chars: &[char]) -> Vec<HashMap<&[char], u64>> {
    (1..=CHAR_ORDER)
        .map(|n| {
            let mut m = HashMap::new();
            for w in chars.windows(n) {
                *m.entry(w).or_insert(0) += 1;
            }
            m
        })
        .collect()
}

fn squeeze(s: &str) -> Vec<char> {
    split_words(s).flat_map(str::chars).collect()
}

/// F-beta over averaged precision and recall of the orders that have both
/// hypothesis and reference n-grams.
pub fn score_from_stats(stats: &ChrfStats) -> f64 {
    let factor = BETA * BETA;
    let mut avg_prec = 0.0;
    let mut avg_rec = 0.0;
    let mut effective = 0;
    for &[n_hyp, n_ref, n_match] in &stats.0 {
        if n_hyp > 0 && n_ref > 0 {
            avg_prec += n_match as f64 / n_hyp as f64;
            avg_rec += n_match as f64 / n_ref as f64;
            effective += 1;
        }
    }
    if effective == 0 {
        return 0.0;
    }
    avg_prec /= effective as f64;
    avg_rec /= effective as f64;
    if avg_prec + avg_rec == 0.0 {
        return 0.0;
    }
    100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec)
}

/// Statistics against the reference with the highest sentence-level score
/// (first one wins ties).
pub fn segment_stats<S: AsRef<str>>(hyp: &str, refs: &[S]) -> ChrfStats {
    let hyp_chars = squeeze(hyp);
    let hyp_counts = counts_of(&hyp_chars);
    let mut best: Option<(f64, ChrfStats)> = None;
    for r in refs {
        let ref_chars = squeeze(r.as_ref());
        let ref_counts = counts_of(&ref_chars);
        let mut stats = ChrfStats::default();
        for (k, (h, rc)) in hyp_counts.iter().zip(&ref_counts).enumerate() {
            let mut matched = 0;
            let mut n_hyp = 0;
            for (ng, c) in h {
                n_hyp += c;
                if let Some(rcount) = rc.get(ng) {
                    matched += (*c).min(*rcount);
                }
            }
            let n_ref: u64 = rc.values().sum();
            stats.0[k] = [if rc.is_empty() { 0 } else { n_hyp }, n_ref, matched];
        }
        let f = score_from_stats(&stats);
        if best.as_ref().is_none_or(|(bf, _)| f > *bf) {
            best = Some((f, stats));
        }
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Chrf2;

impl CorpusMetric for Chrf2 {
    type Stats = ChrfStats;

    fn name(&self) -> &'static str {
        "chrF2"
    }

    fn segment<S: AsRef<str>>(&self, hyp: &str, refs: &[S]) -> ChrfStats {
        segment_stats(hyp, refs)
    }

    fn score(&self, stats: &ChrfStats) -> f64 {
        score_from_stats(stats)
    }
}

pub fn chrf2<S: AsRef<str>, R: AsRef<str>>(hyps: &[S], refs: &[Vec<R>]) -> Result<f64, MetricsError> {
    check_refs(hyps.len(), refs)?;
    Ok(Chrf2.corpus_score(hyps, refs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let hyps = ["Das ist gut.", "ein zwei drei"];
        assert!((chrf2(&hyps, &[hyps.to_vec()]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(chrf2(&["aaa bbb"], &[vec!["xyz"]]).unwrap(), 0.0);
    }

    #[test]
    fn five_sentence_fixture() {
        // Reference values from sacrebleu 2.6.0 corpus_chrf on the same input.
        let hyps = [
            "The cat is on the mat.",
            "There is a cat on the mat, isn't there?",
            "He said: \"I'll be back in 5 minutes.\"",
            "Prices rose 3.5% in 2019-2020.",
            "completely unrelated words here",
        ];
        let refs = [
            "The cat sat on the mat.",
            "There's a cat on the mat, right?",
            "He said: \"I will be back in five minutes.\"",
            "Prices rose by 3.5% in 2019-2020.",
            "the weather is nice today",
        ];
        let refs2 = [
            "A cat is on the mat.",
            "A cat is on the mat, isn't it?",
            "He told us: \"I'll return in 5 minutes.\"",
            "In 2019-2020, prices increased 3.5%.",
            "nice weather today",
        ];
        let single = chrf2(&hyps, &[refs.to_vec()]).unwrap();
        assert!((single - 59.707_750_245_549_704).abs() < 1e-4, "{single}");
        let multi = chrf2(&hyps, &[refs.to_vec(), refs2.to_vec()]).unwrap();
        assert!((multi - 64.121_335_190_600_25).abs() < 1e-4, "{multi}");
    }

    #[test]
    fn short_segments_use_effective_order() {
        // Only orders 1 and 2 exist for a two-character hypothesis.
        let s = chrf2(&["ab"], &[vec!["ab"]]).unwrap();
        assert!((s - 100.0).abs() < 1e-9);
    }
}
