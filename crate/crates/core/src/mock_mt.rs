//! Deterministic word-for-word translators implementing
//! [`IncrementalTranslator`].

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::simul::{IncrementalTranslator, SimulError, Vocabulary};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `source<TAB>target`")]
    Malformed { path: String, line: usize },
}

pub type Lexicon = BTreeMap<String, String>;

/// Reads a `source<TAB>target` lexicon; blank lines are skipped and later
/// entries override earlier ones.
pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lex = Lexicon::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((s, t)) if !s.is_empty() && !t.is_empty() && !t.contains('\t') => {
                lex.insert(s.to_string(), t.to_string());
            }
            _ => {
                return Err(LexiconError::Malformed {
                    path: path.display().to_string(),
                    line: i + 1,
                })
            }
        }
    }
    Ok(lex)
}

pub fn lexicon_to_tsv(lex: &Lexicon) -> String {
    lex.iter().map(|(s, t)| format!("{s}\t{t}\n")).collect()
}

/// Target vocabulary holding every lexicon translation plus `extra` words.
pub fn build_vocabulary<'a, I, S>(lexicons: I, extra: &[S]) -> Arc<Vocabulary>
where
    I: IntoIterator<Item = &'a Lexicon>,
    S: AsRef<str>,
{
    let mut words: Vec<String> = Vec::new();
    for lex in lexicons {
        words.extend(lex.values().cloned());
    }
    words.extend(extra.iter().map(|w| w.as_ref().to_string()));
    words.sort();
    words.dedup();
    Arc::new(Vocabulary::new(words))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    /// Pass the source word through (as `<unk>` if it is not in the vocabulary).
    #[default]
    Copy,
    /// Emit `<unk>`.
    Tag,
}

pub const KNOWN_MARGIN: f64 = 1.0;
pub const DEFAULT_UNKNOWN_MARGIN: f64 = 0.5;

/// Continuation scores for a translator whose full hypothesis for the
/// current source is `hyp` (token id and confidence per position).
///
/// The forced prefix is matched against the hypothesis prefix closest to it
/// in edit distance (longest on ties) and the following token is scored
/// one-hot; past the end, end-of-sentence is scored. With `strict`, a forced
/// prefix that is not a prefix of `hyp` is a contract error.
fn continuation_scores(
    hyp: &[(usize, f64)],
    prefix: &[usize],
    vocab: &Vocabulary,
    strict: bool,
) -> Result<Vec<f64>, SimulError> {
    let ids: Vec<usize> = hyp.iter().map(|(id, _)| *id).collect();
    let k = if ids.starts_with(prefix) {
        prefix.len()
    } else {
        if strict {
            return Err(SimulError::Contract(
                "forced prefix is not a prefix of the translator's own hypothesis".into(),
            ));
        }
        aligned_position(&ids, prefix)
    };
    let mut scores = vec![0.0; vocab.len()];
    match hyp.get(k) {
        Some(&(id, margin)) => scores[id] = margin,
        None => scores[vocab.eos()] = KNOWN_MARGIN,
    }
    Ok(scores)
}

/// argmin over k of edit_distance(hyp[..k], prefix), preferring larger k.
fn aligned_position(hyp: &[usize], prefix: &[usize]) -> usize {
    // Row r holds distances between prefix[..r] and every hyp[..k].
    let mut row: Vec<usize> = (0..=hyp.len()).collect();
    for (r, p) in prefix.iter().enumerate() {
        let mut next = vec![r + 1; hyp.len() + 1];
        for k in 1..=hyp.len() {
            let sub = row[k - 1] + usize::from(hyp[k - 1] != *p);
            next[k] = sub.min(row[k] + 1).min(next[k - 1] + 1);
        }
        row = next;
    }
    let best = *row.iter().min().expect("non-empty row");
    row.iter().rposition(|&d| d == best).expect("minimum exists")
}

#[derive(Debug, Clone)]
pub struct LexiconTranslator {
    name: String,
    vocab: Arc<Vocabulary>,
    lexicon: Lexicon,
    pub unknown_policy: UnknownPolicy,
    /// Confidence given to tokens produced for out-of-lexicon words.
    pub unknown_margin: f64,
    /// Reject forced prefixes that disagree with this translator's output.
    pub strict: bool,
}

impl LexiconTranslator {
    pub fn new(name: impl Into<String>, lexicon: Lexicon, vocab: Arc<Vocabulary>) -> Self {
        Self {
            name: name.into(),
            vocab,
            lexicon,
            unknown_policy: UnknownPolicy::Copy,
            unknown_margin: DEFAULT_UNKNOWN_MARGIN,
            strict: false,
        }
    }

    pub fn with_policy(mut self, policy: UnknownPolicy) -> Self {
        self.unknown_policy = policy;
        self
    }

    pub fn with_unknown_margin(mut self, margin: f64) -> Self {
        self.unknown_margin = margin;
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    fn word(&self, w: &str) -> (usize, f64) {
        match self.lexicon.get(w) {
            Some(t) => (self.vocab.id(t), KNOWN_MARGIN),
            None => match self.unknown_policy {
                UnknownPolicy::Copy => (self.vocab.id(w), self.unknown_margin),
                UnknownPolicy::Tag => (self.vocab.unk(), self.unknown_margin),
            },
        }
    }

    /// One target token per source token, with its confidence.
    pub fn hypothesis(&self, source: &[String]) -> Vec<(usize, f64)> {
        source.iter().map(|w| self.word(w)).collect()
    }

    pub fn translate(&self, source: &[String]) -> Vec<String> {
        self.hypothesis(source)
            .into_iter()
            .map(|(id, _)| self.vocab.word(id).to_string())
            .collect()
    }
}

impl IncrementalTranslator for LexiconTranslator {
    fn name(&self) -> &str {
        &self.name
    }

    fn vocabulary(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    fn step_scores(&self, source: &[String], _: bool, prefix: &[usize]) -> Result<Vec<f64>, SimulError> {
        continuation_scores(&self.hypothesis(source), prefix, &self.vocab, self.strict)
    }
}

/// A lexicon translator that, once the source is complete, moves the
/// translations of a deferred word class to the end of the sentence. Its
/// partial hypotheses are therefore not prefixes of the final one.
#[derive(Debug, Clone)]
pub struct ReorderingTranslator {
    inner: LexiconTranslator,
    deferred: HashSet<String>,
}

impl ReorderingTranslator {
    pub fn new<I, S>(inner: LexiconTranslator, deferred: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            inner,
            deferred: deferred.into_iter().map(Into::into).collect(),
        }
    }

    pub fn hypothesis(&self, source: &[String], complete: bool) -> Vec<(usize, f64)> {
        let hyp = self.inner.hypothesis(source);
        if !complete {
            return hyp;
        }
        let (mut kept, moved): (Vec<_>, Vec<_>) = source
            .iter()
            .zip(hyp)
            .partition(|(w, _)| !self.deferred.contains(*w));
        kept.extend(moved);
        kept.into_iter().map(|(_, t)| t).collect()
    }

    pub fn translate(&self, source: &[String], complete: bool) -> Vec<String> {
        self.hypothesis(source, complete)
            .into_iter()
            .map(|(id, _)| self.inner.vocab.word(id).to_string())
            .collect()
    }
}

impl IncrementalTranslator for ReorderingTranslator {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn vocabulary(&self) -> &Arc<Vocabulary> {
        self.inner.vocabulary()
    }

    fn step_scores(&self, source: &[String], complete: bool, prefix: &[usize]) -> Result<Vec<f64>, SimulError> {
        continuation_scores(
            &self.hypothesis(source, complete),
            prefix,
            &self.inner.vocab,
            self.inner.strict,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenSequence;
    use crate::metrics::{edit_distance, normalized_erasure};
    use crate::simul::{
        ensemble_decode, offline_decode, run_simul, Combiner, OutputMode, SimulConfig, SimulMember,
    };
    use proptest::prelude::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn lex(pairs: &[(&str, &str)]) -> Lexicon {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    fn ab() -> LexiconTranslator {
        let l = lex(&[("a", "A"), ("b", "B")]);
        let v = build_vocabulary([&l], &["q"]);
        LexiconTranslator::new("ab", l, v)
    }

    #[test]
    fn word_for_word() {
        let t = ab();
        let d = t.decode(&words("a b"), true, &[]).unwrap();
        assert_eq!(t.vocabulary().decode_ids(&d.tokens), words("A B"));
        assert!(d.finished);
        assert_eq!(t.translate(&words("a q b")), words("A q B"));
        assert_eq!(t.clone().with_policy(UnknownPolicy::Tag).translate(&words("q")), ["<unk>"]);
        assert_eq!(t.translate(&words("zzz")), ["<unk>"]);
    }

    #[test]
    fn disagreeing_members_tie_to_lowest_index() {
        let l1 = lex(&[("x", "B")]);
        let l2 = lex(&[("x", "A")]);
        let v = build_vocabulary([&l1, &l2], &[] as &[&str]);
        let t1 = LexiconTranslator::new("one", l1, v.clone());
        let t2 = LexiconTranslator::new("two", l2, v.clone());
        let src = words("x");
        let out = ensemble_decode(&[(&t1, &src[..]), (&t2, &src[..])], true, &[], Combiner::MeanRaw, true).unwrap();
        assert_eq!(v.decode_ids(&out), ["A"]);
    }

    #[test]
    fn known_words_beat_unknown_copies() {
        let l1 = lex(&[("x", "B")]);
        let l2 = lex(&[("y", "A")]);
        let v = build_vocabulary([&l1, &l2], &["zz"]);
        let t1 = LexiconTranslator::new("one", l1, v.clone());
        let t2 = LexiconTranslator::new("two", l2, v.clone());
        let (s1, s2) = (words("x"), words("zz"));
        let out = ensemble_decode(&[(&t1, &s1[..]), (&t2, &s2[..])], true, &[], Combiner::MeanRaw, true).unwrap();
        assert_eq!(v.decode_ids(&out), ["B"]);
    }

    #[test]
    fn foreign_prefix_resynchronizes() {
        let l = lex(&[("a", "A"), ("b", "B"), ("c", "C"), ("d", "D")]);
        let v = build_vocabulary([&l], &["X"]);
        let t = LexiconTranslator::new("t", l, v.clone());
        let src = words("a b c d");
        let ids = |s: &str| words(s).iter().map(|w| v.id(w)).collect::<Vec<_>>();
        // substituted token
        let d = t.decode(&src, true, &ids("A X")).unwrap();
        assert_eq!(v.decode_ids(&d.tokens), words("A X C D"));
        // skipped token
        let d = t.decode(&src, true, &ids("A C")).unwrap();
        assert_eq!(v.decode_ids(&d.tokens), words("A C D"));
        // extra token
        let d = t.decode(&src, true, &ids("A X B")).unwrap();
        assert_eq!(v.decode_ids(&d.tokens), words("A X B C D"));
        assert!(matches!(
            t.clone().strict(true).decode(&src, true, &ids("A X")),
            Err(SimulError::Contract(_))
        ));
    }

    #[test]
    fn reordering_is_unstable() {
        let l = lex(&[("ich", "I"), ("habe", "have"), ("gesehen", "seen"), ("es", "it")]);
        let v = build_vocabulary([&l], &[] as &[&str]);
        let base = LexiconTranslator::new("re", l, v);
        let t = ReorderingTranslator::new(base, ["gesehen"]);
        let src = words("ich habe gesehen es");
        assert_eq!(t.translate(&src, false), words("I have seen it"));
        assert_eq!(t.translate(&src, true), words("I have it seen"));
        let seq = TokenSequence::from_words(&src);
        let m = [SimulMember { language: "de", source: &seq, translator: &t }];
        let cfg = SimulConfig {
            mode: OutputMode::Retranslation,
            ..Default::default()
        };
        let out = run_simul(&m, &cfg).unwrap();
        assert_eq!(out.output, words("I have it seen"));
        assert!(normalized_erasure(&out.log).unwrap().ne > 0.0);
        let committed = run_simul(&m, &SimulConfig::default()).unwrap();
        assert_eq!(normalized_erasure(&committed.log).unwrap().ne, 0.0);
    }

    #[test]
    fn lexicon_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.tsv");
        let l = lex(&[("a", "A"), ("b", "B B")]);
        fs::write(&p, lexicon_to_tsv(&l)).unwrap();
        assert_eq!(load_lexicon(&p).unwrap(), l);
        fs::write(&p, "a\tA\nbroken\n").unwrap();
        assert!(matches!(load_lexicon(&p), Err(LexiconError::Malformed { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn streaming_matches_offline(src in proptest::collection::vec("[a-f]", 1..12), n in 1usize..6) {
            let l = lex(&[("a", "A"), ("b", "B"), ("c", "C"), ("d", "D")]);
            let v = build_vocabulary([&l], &["e", "f"]);
            let t = LexiconTranslator::new("t", l, v).strict(true);
            let seq = TokenSequence::from_words(&src);
            let m = [SimulMember { language: "x", source: &seq, translator: &t }];
            let cfg = SimulConfig { la_n: n, ..Default::default() };
            let out = run_simul(&m, &cfg).unwrap();
            prop_assert_eq!(&out.output, &offline_decode(&m, Combiner::MeanRaw).unwrap());
            prop_assert_eq!(out.output, t.translate(&src));
            prop_assert_eq!(normalized_erasure(&out.log).unwrap().ne, 0.0);
        }

        #[test]
        fn aligned_position_prefers_exact_prefix(h in proptest::collection::vec(0usize..4, 0..8), k in 0usize..8) {
            let k = k.min(h.len());
            prop_assert_eq!(aligned_position(&h, &h[..k]), k);
            prop_assert_eq!(edit_distance(&h[..aligned_position(&h, &[9])], &[9usize][..]), 1);
        }
    }
}
