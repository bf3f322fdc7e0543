//! Average Lagging and Normalized Erasure over streaming event logs.

use super::MetricsError;
use crate::simul::log::{SimulEvent, SimulEventLog};

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyReport {
    pub al: f64,
    /// Source tokens read before each final output token was written.
    pub g: Vec<usize>,
    pub src_len: usize,
    pub tgt_len: usize,
    /// One-based index of the first output token written after the whole
    /// source was read.
    pub tau: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureReport {
    pub erased_tokens: usize,
    pub final_length: usize,
    pub ne: f64,
}

/// Token-level Average Lagging with the tau cutoff. Only reads of
/// `primary_language` count; `g(t)` refers to the event that put the final
/// `t`-th output token in place.
pub fn average_lagging(log: &SimulEventLog, primary_language: &str) -> Result<LatencyReport, MetricsError> {
    let mut reads = 0;
    let mut g: Vec<usize> = Vec::new();
    let mut wrote = false;
    for e in log.events() {
        match e {
            SimulEvent::Read { language, .. } if language == primary_language => reads += 1,
            SimulEvent::Read { .. } | SimulEvent::Flush => {}
            SimulEvent::Write(_) => {
                g.push(reads);
                wrote = true;
            }
            SimulEvent::Revise {
                erased,
                replacement,
            } => {
                let keep = g.len().saturating_sub(*erased);
                g.truncate(keep);
                g.extend(std::iter::repeat_n(reads, replacement.len()));
                wrote |= !replacement.is_empty();
            }
        }
    }
    if !wrote || g.is_empty() {
        return Err(MetricsError::NoWrites);
    }
    let src_len = reads;
    if src_len == 0 {
        return Err(MetricsError::ZeroSourceLength {
            language: primary_language.to_string(),
        });
    }
    let tgt_len = g.len();
    let tau = g
        .iter()
        .position(|&x| x >= src_len)
        .map_or(tgt_len, |p| p + 1);
    let rate = tgt_len as f64 / src_len as f64;
    let sum: f64 = g[..tau]
        .iter()
        .enumerate()
        .map(|(t, &gt)| gt as f64 - t as f64 / rate)
        .sum();
    Ok(LatencyReport {
        al: sum / tau as f64,
        g,
        src_len,
        tgt_len,
        tau,
    })
}

/// Tokens erased by revisions divided by the final output length.
pub fn normalized_erasure(log: &SimulEventLog) -> Result<ErasureReport, MetricsError> {
    let final_length = log.final_output().len();
    if final_length == 0 {
        return Err(MetricsError::EmptyOutput);
    }
    let erased_tokens = log
        .events()
        .iter()
        .map(|e| match e {
            SimulEvent::Revise { erased, .. } => *erased,
            _ => 0,
        })
        .sum();
    Ok(ErasureReport {
        erased_tokens,
        final_length,
        ne: erased_tokens as f64 / final_length as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_from(spec: &str) -> SimulEventLog {
        // r = primary read, s = secondary read, w = write
        let mut log = SimulEventLog::new();
        for c in spec.chars() {
            match c {
                'r' => log.read("en", "x"),
                's' => log.read("de", "y"),
                'w' => log.write("t"),
                _ => {}
            }
        }
        log
    }

    #[test]
    fn read_all_then_write() {
        let r = average_lagging(&log_from("rrrrrwwwww"), "en").unwrap();
        assert_eq!(r.al, 5.0);
        assert_eq!(r.tau, 1);
        assert_eq!(r.g, vec![5; 5]);
    }

    #[test]
    fn interleaved_lags_by_one() {
        let r = average_lagging(&log_from("rwrwrwrw"), "en").unwrap();
        assert_eq!(r.al, 1.0);
        assert_eq!(r.tau, 4);
    }

    #[test]
    fn unequal_lengths() {
        // src 4, tgt 2: g = [2, 4], r = 0.5, tau = 2; AL = ((2 - 0) + (4 - 2)) / 2
        let r = average_lagging(&log_from("rrwrrw"), "en").unwrap();
        assert_eq!(r.al, 2.0);
    }

    #[test]
    fn secondary_reads_do_not_count() {
        let mixed = log_from("srsrwssrwrsw");
        let a = average_lagging(&mixed, "en").unwrap();
        let b = average_lagging(&mixed.without_language("de"), "en").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert_eq!(average_lagging(&log_from("rrr"), "en"), Err(MetricsError::NoWrites));
        assert!(matches!(
            average_lagging(&log_from("ssww"), "en"),
            Err(MetricsError::ZeroSourceLength { .. })
        ));
        assert_eq!(normalized_erasure(&log_from("rr")), Err(MetricsError::EmptyOutput));
    }

    #[test]
    fn erasure_counts() {
        assert_eq!(normalized_erasure(&log_from("rwrwrw")).unwrap().ne, 0.0);

        let mut log = SimulEventLog::new();
        for _ in 0..10 {
            log.write("t");
        }
        log.push(SimulEvent::Revise {
            erased: 2,
            replacement: vec!["u".into(), "v".into()],
        });
        let r = normalized_erasure(&log).unwrap();
        assert_eq!((r.erased_tokens, r.final_length), (2, 10));
        assert!((r.ne - 0.2).abs() < 1e-15);

        let mut log = SimulEventLog::new();
        for _ in 0..8 {
            log.write("t");
        }
        log.push(SimulEvent::Revise {
            erased: 1,
            replacement: vec!["u".into()],
        });
        log.push(SimulEvent::Revise {
            erased: 3,
            replacement: vec!["u".into(), "v".into(), "w".into()],
        });
        assert_eq!(normalized_erasure(&log).unwrap().ne, 0.5);
    }
}
