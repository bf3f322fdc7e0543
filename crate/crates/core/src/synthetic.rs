//! Seeded toy data: pseudo-word vocabularies, word-parallel corpora with
//! lexicons, and a simple ASR error channel for training noise models.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TokenSequence, TranscriptPair};
use crate::mock_mt::Lexicon;

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "kl", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "k"];

/// `n` distinct pseudo-words of one to three syllables, none of them in
/// `avoid`.
pub fn make_words(n: usize, seed: u64, avoid: &BTreeSet<String>) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(1..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(&mut rng).unwrap());
            w.push_str(VOWELS.choose(&mut rng).unwrap());
            w.push_str(CODAS.choose(&mut rng).unwrap());
        }
        if !avoid.contains(&w) && seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Word-parallel toy corpus: every source language expresses target word `i`
/// with its own word `i`, in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelToyCorpus {
    pub languages: Vec<String>,
    /// Per language, one sentence per target sentence.
    pub sources: Vec<Vec<TokenSequence>>,
    pub target: Vec<TokenSequence>,
    /// Per language, source word to target word.
    pub lexicons: Vec<Lexicon>,
    pub source_vocab: Vec<Vec<String>>,
    pub target_vocab: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpusSpec {
    pub languages: Vec<String>,
    pub vocab_size: usize,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl ToyCorpusSpec {
    pub fn new(languages: &[&str], vocab_size: usize, sentences: usize, seed: u64) -> Self {
        Self {
            languages: languages.iter().map(|l| l.to_string()).collect(),
            vocab_size,
            sentences,
            min_len: 5,
            max_len: 15,
            seed,
        }
    }
}

/// Draws word indices uniformly; the same index sequence is rendered in every
/// language.
pub fn parallel_toy_corpus(spec: &ToyCorpusSpec) -> ParallelToyCorpus {
    let mut used = BTreeSet::new();
    let target_vocab = make_words(spec.vocab_size, spec.seed, &used);
    used.extend(target_vocab.iter().cloned());
    let mut source_vocab = Vec::new();
    for k in 0..spec.languages.len() {
        let v = make_words(spec.vocab_size, spec.seed.wrapping_add(1 + k as u64), &used);
        used.extend(v.iter().cloned());
        source_vocab.push(v);
    }
    let lexicons = source_vocab
        .iter()
        .map(|v| v.iter().cloned().zip(target_vocab.iter().cloned()).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_c0de);
    let mut sources = vec![Vec::with_capacity(spec.sentences); spec.languages.len()];
    let mut target = Vec::with_capacity(spec.sentences);
    for _ in 0..spec.sentences {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let idx: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.vocab_size)).collect();
        let render = |v: &[String]| TokenSequence::from_words(&idx.iter().map(|&i| v[i].as_str()).collect::<Vec<_>>());
        target.push(render(&target_vocab));
        for (k, v) in source_vocab.iter().enumerate() {
            sources[k].push(render(v));
        }
    }
    ParallelToyCorpus {
        languages: spec.languages.clone(),
        sources,
        target,
        lexicons,
        source_vocab,
        target_vocab,
    }
}

/// Rates of a toy recognizer. Substitutions are either a garbled spelling of
/// the word (`p_garble` of them) or another vocabulary word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyAsrChannel {
    pub p_substitute: f64,
    pub p_delete: f64,
    pub p_insert: f64,
    pub p_garble: f64,
}

impl Default for ToyAsrChannel {
    fn default() -> Self {
        Self {
            p_substitute: 0.12,
            p_delete: 0.03,
            p_insert: 0.01,
            p_garble: 0.9,
        }
    }
}

fn garble(word: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.random_range(0..chars.len());
    let letters = ['h', 'j', 'w', 'x', 'y', 'q', 'c'];
    chars[i] = *letters.choose(rng).unwrap();
    chars.into_iter().collect()
}

impl ToyAsrChannel {
    pub fn transcribe(&self, gold: &TokenSequence, vocab: &[String], rng: &mut ChaCha8Rng) -> TokenSequence {
        let mut out: Vec<String> = Vec::with_capacity(gold.len() + 2);
        for w in gold.tokens() {
            let u: f64 = rng.random();
            if u < self.p_delete {
                // dropped
            } else if u < self.p_delete + self.p_substitute {
                if rng.random::<f64>() < self.p_garble {
                    out.push(garble(w, rng));
                } else {
                    out.push(vocab.choose(rng).unwrap().clone());
                }
            } else {
                out.push(w.clone());
            }
            if rng.random::<f64>() < self.p_insert {
                out.push(vocab.choose(rng).unwrap().clone());
            }
        }
        TokenSequence::from_words(&out)
    }

    /// Gold/ASR pairs for noise-model training.
    pub fn training_pairs(&self, gold: &[TokenSequence], vocab: &[String], seed: u64) -> Vec<TranscriptPair> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        gold.iter()
            .map(|g| TranscriptPair::new(g.clone(), self.transcribe(g, vocab, &mut rng)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_word_parallel_and_seeded() {
        let spec = ToyCorpusSpec::new(&["en", "de"], 50, 20, 3);
        let c = parallel_toy_corpus(&spec);
        assert_eq!(c, parallel_toy_corpus(&spec));
        for (k, lex) in c.lexicons.iter().enumerate() {
            for (s, t) in c.sources[k].iter().zip(&c.target) {
                let mapped: Vec<&str> = s.tokens().iter().map(|w| lex[w].as_str()).collect();
                assert_eq!(mapped, t.tokens());
            }
        }
        let all: BTreeSet<&String> = c.target_vocab.iter().chain(c.source_vocab.iter().flatten()).collect();
        assert_eq!(all.len(), 150);
    }

    #[test]
    fn channel_produces_errors() {
        let spec = ToyCorpusSpec::new(&["en"], 50, 200, 1);
        let c = parallel_toy_corpus(&spec);
        let pairs = ToyAsrChannel::default().training_pairs(&c.sources[0], &c.source_vocab[0], 2);
        let w = crate::metrics::corpus_wer(&pairs).unwrap();
        assert!(w > 0.1 && w < 0.25, "{w}");
    }
}
