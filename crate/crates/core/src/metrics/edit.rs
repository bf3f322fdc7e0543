//! Levenshtein alignment of a gold token sequence against a hypothesis.

use std::ops::AddAssign;

use super::MetricsError;
use crate::corpus::TranscriptPair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditOp {
    Copy(String),
    Substitute { gold: String, hyp: String },
    Delete(String),
    Insert(String),
}

impl EditOp {
    pub fn gold_token(&self) -> Option<&str> {
        match self {
            EditOp::Copy(t) | EditOp::Delete(t) => Some(t),
            EditOp::Substitute { gold, .. } => Some(gold),
            EditOp::Insert(_) => None,
        }
    }

    pub fn hyp_token(&self) -> Option<&str> {
        match self {
            EditOp::Copy(t) | EditOp::Insert(t) => Some(t),
            EditOp::Substitute { hyp, .. } => Some(hyp),
            EditOp::Delete(_) => None,
        }
    }

    pub fn is_error(&self) -> bool {
        !matches!(self, EditOp::Copy(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn gold(&self) -> Vec<&str> {
        self.ops.iter().filter_map(EditOp::gold_token).collect()
    }

    pub fn hyp(&self) -> Vec<&str> {
        self.ops.iter().filter_map(EditOp::hyp_token).collect()
    }

    pub fn cost(&self) -> usize {
        self.ops.iter().filter(|op| op.is_error()).count()
    }

    pub fn breakdown(&self) -> WerBreakdown {
        let mut b = WerBreakdown::default();
        for op in &self.ops {
            match op {
                EditOp::Copy(_) => b.gold_words += 1,
                EditOp::Substitute { .. } => {
                    b.substitutions += 1;
                    b.gold_words += 1;
                }
                EditOp::Delete(_) => {
                    b.deletions += 1;
                    b.gold_words += 1;
                }
                EditOp::Insert(_) => b.insertions += 1,
            }
        }
        b
    }
}

/// Suffix distance table: entry `(i, j)` is the distance between `gold[i..]`
/// and `hyp[j..]`.
fn suffix_table<T: PartialEq>(gold: &[T], hyp: &[T]) -> (Vec<u32>, usize) {
    let (n, m) = (gold.len(), hyp.len());
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        d[n * w + j] = (m - j) as u32;
    }
    for i in (0..n).rev() {
        d[i * w + m] = (n - i) as u32;
        for j in (0..m).rev() {
            let diag = d[(i + 1) * w + j + 1] + u32::from(gold[i] != hyp[j]);
            let del = d[(i + 1) * w + j] + 1;
            let ins = d[i * w + j + 1] + 1;
            d[i * w + j] = diag.min(del).min(ins);
        }
    }
    (d, w)
}

/// Unit-cost Levenshtein distance.
pub fn edit_distance<T: PartialEq>(gold: &[T], hyp: &[T]) -> usize {
    let (d, _) = suffix_table(gold, hyp);
    d[0] as usize
}

/// Minimal-cost edit script. Among optimal scripts the one chosen prefers, at
/// every position scanned left to right, Copy, then Substitute, then Delete,
/// then Insert.
pub fn align_edit<S: AsRef<str>>(gold: &[S], hyp: &[S]) -> EditScript {
    let g: Vec<&str> = gold.iter().map(AsRef::as_ref).collect();
    let h: Vec<&str> = hyp.iter().map(AsRef::as_ref).collect();
    let (n, m) = (g.len(), h.len());
    let (d, w) = suffix_table(&g, &h);
    let at = |i: usize, j: usize| d[i * w + j];
    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let here = at(i, j);
        if i < n && j < m {
            if g[i] == h[j] && at(i + 1, j + 1) == here {
                ops.push(EditOp::Copy(g[i].to_string()));
                i += 1;
                j += 1;
                continue;
            }
            if g[i] != h[j] && at(i + 1, j + 1) + 1 == here {
                ops.push(EditOp::Substitute {
                    gold: g[i].to_string(),
                    hyp: h[j].to_string(),
                });
                i += 1;
                j += 1;
                continue;
            }
        }
        if i < n && at(i + 1, j) + 1 == here {
            ops.push(EditOp::Delete(g[i].to_string()));
            i += 1;
        } else {
            ops.push(EditOp::Insert(h[j].to_string()));
            j += 1;
        }
    }
    EditScript { ops }
}

/// Error counts of one alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub gold_words: usize,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `None` when the gold side is empty but the hypothesis is not; an empty
    /// pair scores 0.
    pub fn wer(&self) -> Option<f64> {
        match (self.gold_words, self.errors()) {
            (0, 0) => Some(0.0),
            (0, _) => None,
            (g, e) => Some(e as f64 / g as f64),
        }
    }
}

impl AddAssign for WerBreakdown {
    fn add_assign(&mut self, rhs: Self) {
        self.substitutions += rhs.substitutions;
        self.deletions += rhs.deletions;
        self.insertions += rhs.insertions;
        self.gold_words += rhs.gold_words;
    }
}

pub fn wer<S: AsRef<str>>(gold: &[S], hyp: &[S]) -> WerBreakdown {
    align_edit(gold, hyp).breakdown()
}

/// Summed counts over a corpus.
pub fn corpus_breakdown(pairs: &[TranscriptPair]) -> WerBreakdown {
    let mut total = WerBreakdown::default();
    for p in pairs {
        total += wer(p.gold.tokens(), p.hyp.tokens());
    }
    total
}

/// Corpus WER, i.e. total errors over total gold words.
pub fn corpus_wer(pairs: &[TranscriptPair]) -> Result<f64, MetricsError> {
    let total = corpus_breakdown(pairs);
    if total.gold_words == 0 {
        return Err(MetricsError::EmptyGold);
    }
    Ok(total.errors() as f64 / total.gold_words as f64)
}

/// One flag per gold token: true iff it was aligned by a Copy.
pub fn token_correctness(script: &EditScript) -> Vec<bool> {
    script
        .ops
        .iter()
        .filter(|op| op.gold_token().is_some())
        .map(|op| matches!(op, EditOp::Copy(_)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSequence;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn sub(g: &str, h: &str) -> EditOp {
        EditOp::Substitute {
            gold: g.into(),
            hyp: h.into(),
        }
    }

    #[test]
    fn identity_is_all_copies() {
        let s = align_edit(&toks("a b"), &toks("a b"));
        assert_eq!(s.ops, vec![EditOp::Copy("a".into()), EditOp::Copy("b".into())]);
    }

    #[test]
    fn mixed_script() {
        let s = align_edit(&toks("a b c d"), &toks("a x c"));
        assert_eq!(
            s.ops,
            vec![
                EditOp::Copy("a".into()),
                sub("b", "x"),
                EditOp::Copy("c".into()),
                EditOp::Delete("d".into())
            ]
        );
        let b = s.breakdown();
        assert_eq!((b.substitutions, b.deletions, b.insertions), (1, 1, 0));
        assert_eq!(b.wer(), Some(0.5));
    }

    #[test]
    fn empty_gold() {
        let s = align_edit(&toks(""), &toks("a"));
        assert_eq!(s.ops, vec![EditOp::Insert("a".into())]);
        let b = s.breakdown();
        assert_eq!(b.gold_words, 0);
        assert_eq!(b.wer(), None);
        assert_eq!(wer::<String>(&[], &[]).wer(), Some(0.0));
    }

    #[test]
    fn tie_break_prefers_substitution_then_deletion() {
        // "a b" -> "b": Delete(a) Copy(b) is the only cost-1 script.
        let s = align_edit(&toks("a b"), &toks("b"));
        assert_eq!(s.ops, vec![EditOp::Delete("a".into()), EditOp::Copy("b".into())]);
        // "a" -> "x y": Substitute then Insert beats Insert then Substitute.
        let s = align_edit(&toks("a"), &toks("x y"));
        assert_eq!(s.ops, vec![sub("a", "x"), EditOp::Insert("y".into())]);
        // "a b" -> "x": Sub(a,x) Del(b) beats Del(a) Sub(b,x).
        let s = align_edit(&toks("a b"), &toks("x"));
        assert_eq!(s.ops, vec![sub("a", "x"), EditOp::Delete("b".into())]);
    }

    #[test]
    fn correctness_flags() {
        let s = align_edit(&toks("a b c"), &toks("a b c"));
        assert_eq!(token_correctness(&s), vec![true; 3]);
        let s = EditScript {
            ops: vec![
                EditOp::Copy("a".into()),
                sub("b", "x"),
                EditOp::Copy("c".into()),
                EditOp::Delete("d".into()),
            ],
        };
        assert_eq!(token_correctness(&s), vec![true, false, true, false]);
        let s = EditScript {
            ops: vec![EditOp::Insert("z".into()), EditOp::Copy("a".into())],
        };
        assert_eq!(token_correctness(&s), vec![true]);
    }

    #[test]
    fn corpus_weighting() {
        let pair = |g: &str, h: &str| {
            TranscriptPair::new(
                TokenSequence::from_words(&toks(g)),
                TokenSequence::from_words(&toks(h)),
            )
        };
        let pairs = vec![pair("a b c d", "a x c"), pair("a b c d e f", "a b c d e f")];
        assert!((corpus_wer(&pairs).unwrap() - 0.2).abs() < 1e-15);
        assert!(matches!(
            corpus_wer(&[pair("", "a")]),
            Err(MetricsError::EmptyGold)
        ));
    }

    /// Exhaustive minimum over every edit script, by recursion without memo.
    fn brute_force(g: &[u8], h: &[u8]) -> usize {
        match (g.split_first(), h.split_first()) {
            (None, _) => h.len(),
            (_, None) => g.len(),
            (Some((a, gr)), Some((b, hr))) => {
                let diag = brute_force(gr, hr) + usize::from(a != b);
                let del = brute_force(gr, h) + 1;
                let ins = brute_force(g, hr) + 1;
                diag.min(del).min(ins)
            }
        }
    }

    proptest! {
        #[test]
        fn script_projects_and_is_minimal(
            g in proptest::collection::vec(0u8..4, 0..7),
            h in proptest::collection::vec(0u8..4, 0..7),
        ) {
            let gs: Vec<String> = g.iter().map(|x| x.to_string()).collect();
            let hs: Vec<String> = h.iter().map(|x| x.to_string()).collect();
            let s = align_edit(&gs, &hs);
            prop_assert_eq!(s.gold(), gs.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert_eq!(s.hyp(), hs.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert_eq!(s.cost(), brute_force(&g, &h));
            prop_assert_eq!(token_correctness(&s).len(), gs.len());
        }

        #[test]
        fn self_alignment_has_zero_wer(g in proptest::collection::vec("[a-c]", 0..15)) {
            prop_assert_eq!(wer(&g, &g).wer(), Some(0.0));
        }
    }
}
