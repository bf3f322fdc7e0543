//! Paired bootstrap resampling over segment-level sufficient statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_refs, Bleu, Chrf2, CorpusMetric, MetricsError};

pub const DEFAULT_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Bleu,
    Chrf2,
}

impl MetricKind {
    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Bleu => "BLEU",
            MetricKind::Chrf2 => "chrF2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub metric: MetricKind,
    pub score_a: f64,
    pub score_b: f64,
    /// Resamples where system B scored strictly higher / lower / equal.
    pub b_wins: usize,
    pub a_wins: usize,
    pub ties: usize,
    pub resamples: usize,
    pub seed: u64,
    /// One-sided p-value for "B is not worse than A": (B wins + ties / 2) / resamples.
    pub p_value: f64,
}

fn run<M: CorpusMetric>(
    metric: &M,
    kind: MetricKind,
    sys_a: &[String],
    sys_b: &[String],
    refs: &[Vec<String>],
    resamples: usize,
    seed: u64,
) -> BootstrapResult {
    let stats_a = metric.segment_stats(sys_a, refs);
    let stats_b = metric.segment_stats(sys_b, refs);
    let total = |stats: &[M::Stats], idx: &mut dyn Iterator<Item = usize>| {
        let mut t = M::Stats::default();
        for i in idx {
            t += stats[i].clone();
        }
        metric.score(&t)
    };
    let n = sys_a.len();
    let score_a = total(&stats_a, &mut (0..n));
    let score_b = total(&stats_b, &mut (0..n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut a_wins, mut b_wins, mut ties) = (0, 0, 0);
    let mut sample = vec![0usize; n];
    for _ in 0..resamples {
        for s in sample.iter_mut() {
            *s = rng.random_range(0..n);
        }
        let a = total(&stats_a, &mut sample.iter().copied());
        let b = total(&stats_b, &mut sample.iter().copied());
        if b > a {
            b_wins += 1;
        } else if b < a {
            a_wins += 1;
        } else {
            ties += 1;
        }
    }
    BootstrapResult {
        metric: kind,
        score_a,
        score_b,
        b_wins,
        a_wins,
        ties,
        resamples,
        seed,
        p_value: (b_wins as f64 + 0.5 * ties as f64) / resamples as f64,
    }
}

/// Resamples segment indices with replacement and compares the two systems on
/// every resample. Deterministic for a given seed.
pub fn paired_bootstrap(
    sys_a: &[String],
    sys_b: &[String],
    refs: &[Vec<String>],
    metric: MetricKind,
    resamples: usize,
    seed: u64,
) -> Result<BootstrapResult, MetricsError> {
    if sys_b.len() != sys_a.len() {
        return Err(MetricsError::LengthMismatch {
            what: "system B".into(),
            expected: sys_a.len(),
            got: sys_b.len(),
        });
    }
    check_refs(sys_a.len(), refs)?;
    if resamples < 100 {
        return Err(MetricsError::TooFewResamples(resamples));
    }
    if sys_a.is_empty() {
        return Err(MetricsError::LengthMismatch {
            what: "system A".into(),
            expected: 1,
            got: 0,
        });
    }
    Ok(match metric {
        MetricKind::Bleu => run(&Bleu, metric, sys_a, sys_b, refs, resamples, seed),
        MetricKind::Chrf2 => run(&Chrf2, metric, sys_a, sys_b, refs, resamples, seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> (Vec<String>, Vec<String>, Vec<String>) {
        let refs: Vec<String> = (0..30)
            .map(|i| format!("the {i} cats sat on mat number {} today", i * 7 % 11))
            .collect();
        let good = refs.clone();
        let bad: Vec<String> = (0..30).map(|i| format!("a dog {i} stood near")).collect();
        (refs, good, bad)
    }

    #[test]
    fn identical_systems_have_no_signal() {
        let (refs, good, _) = corpus();
        let r = paired_bootstrap(&good, &good, &[refs], MetricKind::Bleu, 1000, 7).unwrap();
        assert!((0.3..=0.7).contains(&r.p_value), "{}", r.p_value);
    }

    #[test]
    fn dominated_system_gets_tiny_p() {
        let (refs, good, bad) = corpus();
        for metric in [MetricKind::Bleu, MetricKind::Chrf2] {
            let r = paired_bootstrap(&good, &bad, std::slice::from_ref(&refs), metric, 1000, 3).unwrap();
            assert!(r.p_value <= 1.0 / 1000.0, "{metric:?} {}", r.p_value);
            assert!(r.score_a > r.score_b);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (refs, good, _) = corpus();
        let noisy: Vec<String> = good
            .iter()
            .enumerate()
            .map(|(i, s)| if i % 3 == 0 { s.replace("cats", "dogs") } else { s.clone() })
            .collect();
        let a = paired_bootstrap(&good, &noisy, std::slice::from_ref(&refs), MetricKind::Chrf2, 500, 11).unwrap();
        let b = paired_bootstrap(&good, &noisy, &[refs], MetricKind::Chrf2, 500, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn contract_errors() {
        let (refs, good, _) = corpus();
        assert!(paired_bootstrap(&good, &good[1..], std::slice::from_ref(&refs), MetricKind::Bleu, 1000, 0).is_err());
        assert_eq!(
            paired_bootstrap(&good, &good, &[refs], MetricKind::Bleu, 10, 0),
            Err(MetricsError::TooFewResamples(10))
        );
    }
}
