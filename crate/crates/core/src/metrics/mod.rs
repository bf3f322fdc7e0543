//! Scoring: edit alignment and WER, BLEU, chrF2, latency and erasure,
//! paired bootstrap resampling and the 2x2 chi-squared test.

use std::ops::AddAssign;

use thiserror::Error;

pub mod bleu;
pub mod bootstrap;
pub mod chisq;
pub mod chrf;
pub mod edit;
pub mod latency;

pub use bleu::{bleu, Bleu, BleuStats};
pub use bootstrap::{paired_bootstrap, BootstrapResult, MetricKind};
pub use chisq::{chi_square_2x2, ChiSquareResult, Contingency2x2};
pub use chrf::{chrf2, Chrf2, ChrfStats};
pub use edit::{
    align_edit, corpus_breakdown, corpus_wer, edit_distance, token_correctness, wer, EditOp, EditScript,
    WerBreakdown,
};
pub use latency::{average_lagging, normalized_erasure, ErasureReport, LatencyReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("corpus has no gold words")]
    EmptyGold,
    #[error("degenerate contingency table {cells:?}: a row or column sums to zero")]
    DegenerateTable { cells: [[u64; 2]; 2] },
    #[error("{what}: expected {expected} segments, got {got}")]
    LengthMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("at least one reference set is required")]
    NoReferences,
    #[error("event log contains no writes")]
    NoWrites,
    #[error("event log contains no reads of language `{language}`")]
    ZeroSourceLength { language: String },
    #[error("final output is empty")]
    EmptyOutput,
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    TooFewResamples(usize),
}

/// A corpus-level metric computed from additive per-segment statistics.
pub trait CorpusMetric {
    type Stats: AddAssign + Default + Clone;

    fn name(&self) -> &'static str;

    fn segment<S: AsRef<str>>(&self, hyp: &str, refs: &[S]) -> Self::Stats;

    fn score(&self, stats: &Self::Stats) -> f64;

    /// Per-segment statistics; `refs` must already be validated.
    fn segment_stats<S: AsRef<str>, R: AsRef<str>>(&self, hyps: &[S], refs: &[Vec<R>]) -> Vec<Self::Stats> {
        hyps.iter()
            .enumerate()
            .map(|(i, h)| {
                let seg_refs: Vec<&str> = refs.iter().map(|set| set[i].as_ref()).collect();
                self.segment(h.as_ref(), &seg_refs)
            })
            .collect()
    }

    fn corpus_score<S: AsRef<str>, R: AsRef<str>>(&self, hyps: &[S], refs: &[Vec<R>]) -> f64 {
        let mut total = Self::Stats::default();
        for s in self.segment_stats(hyps, refs) {
            total += s;
        }
        self.score(&total)
    }
}

pub(crate) fn check_refs<R>(n_hyps: usize, refs: &[Vec<R>]) -> Result<(), MetricsError> {
    if refs.is_empty() {
        return Err(MetricsError::NoReferences);
    }
    for (k, set) in refs.iter().enumerate() {
        if set.len() != n_hyps {
            return Err(MetricsError::LengthMismatch {
                what: format!("reference set {}", k + 1),
                expected: n_hyps,
                got: set.len(),
            });
        }
    }
    Ok(())
}
