//! Streaming decoding: the incremental translator contract, Local Agreement,
//! multi-source read scheduling, late averaging and prefix-pair sampling.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{char_fraction, TokenSequence};

pub mod log;

pub use log::{SimulEvent, SimulEventLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("translator `{member}` is not deterministic: two identical queries returned different scores")]
    Nondeterministic { member: String },
    #[error("score vector has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("nothing to combine")]
    EmptyCombination,
    #[error("no source languages given")]
    NoLanguages,
    #[error("{0} is empty")]
    EmptyInput(&'static str),
}

pub const UNK: &str = "<unk>";
pub const EOS: &str = "</s>";

/// Target vocabulary shared by all members of a run. Ordinary words come
/// first, then `<unk>` and `</s>`, so end-of-sentence loses every tie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            words: Vec::new(),
            index: HashMap::new(),
        };
        for w in words {
            let w = w.as_ref();
            if w != UNK && w != EOS && !v.index.contains_key(w) {
                v.index.insert(w.to_string(), v.words.len());
                v.words.push(w.to_string());
            }
        }
        for special in [UNK, EOS] {
            v.index.insert(special.to_string(), v.words.len());
            v.words.push(special.to_string());
        }
        v
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn unk(&self) -> usize {
        self.words.len() - 2
    }

    pub fn eos(&self) -> usize {
        self.words.len() - 1
    }

    /// Index of `word`, or of `<unk>` when it is not in the vocabulary.
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(self.unk())
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn decode_ids(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.words[i].clone()).collect()
    }
}

/// Greedy decoding result. `tokens` starts with the forced prefix and never
/// contains `</s>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tokens: Vec<usize>,
    pub step_scores: Vec<Vec<f64>>,
    pub finished: bool,
}

/// Upper bound on hypothesis length for a source of `source_len` tokens.
pub fn max_target_len(source_len: usize) -> usize {
    2 * source_len + 5
}

/// Lowest index among the maxima.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// A translator that scores the next target token given a (possibly
/// incomplete) source and a target prefix.
pub trait IncrementalTranslator: Send + Sync {
    fn name(&self) -> &str;

    fn vocabulary(&self) -> &Arc<Vocabulary>;

    /// Scores over the whole vocabulary for the token after `target_prefix`.
    /// Must be a pure function of its arguments.
    fn step_scores(
        &self,
        source: &[String],
        source_complete: bool,
        target_prefix: &[usize],
    ) -> Result<Vec<f64>, SimulError>;

    /// Greedy continuation of `forced`.
    fn decode(&self, source: &[String], source_complete: bool, forced: &[usize]) -> Result<Decoded, SimulError> {
        let vocab = self.vocabulary().clone();
        let limit = max_target_len(source.len());
        let mut tokens = forced.to_vec();
        let mut step_scores = Vec::new();
        let mut finished = false;
        while tokens.len() < limit {
            let scores = self.step_scores(source, source_complete, &tokens)?;
            if scores.len() != vocab.len() {
                return Err(SimulError::DimensionMismatch {
                    expected: vocab.len(),
                    got: scores.len(),
                });
            }
            let best = argmax(&scores);
            step_scores.push(scores);
            if best == vocab.eos() {
                finished = true;
                break;
            }
            tokens.push(best);
        }
        Ok(Decoded {
            tokens,
            step_scores,
            finished,
        })
    }
}

/// How member score vectors are combined at each decoding step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combiner {
    /// Arithmetic mean of the raw scores.
    #[default]
    MeanRaw,
    /// Arithmetic mean of log-softmax normalized scores.
    MeanLogSoftmax,
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

/// Element-wise mean of the member score vectors.
pub fn late_average(members: &[Vec<f64>], combiner: Combiner) -> Result<Vec<f64>, SimulError> {
    let first = members.first().ok_or(SimulError::EmptyCombination)?;
    let dim = first.len();
    let mut acc = vec![0.0; dim];
    for m in members {
        if m.len() != dim {
            return Err(SimulError::DimensionMismatch {
                expected: dim,
                got: m.len(),
            });
        }
        let normalized;
        let v = match combiner {
            Combiner::MeanRaw => m,
            Combiner::MeanLogSoftmax => {
                normalized = log_softmax(m);
                &normalized
            }
        };
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let k = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    Ok(acc)
}

/// Local Agreement: commit the longest prefix shared by the last `n`
/// hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAgreementState<T = usize> {
    n: usize,
    committed: Vec<T>,
    recent: VecDeque<Vec<T>>,
}

impl<T: Clone + PartialEq> LocalAgreementState<T> {
    pub fn new(n: usize) -> Result<Self, SimulError> {
        if n == 0 {
            return Err(SimulError::Contract("agreement size must be at least 1".into()));
        }
        Ok(Self {
            n,
            committed: Vec::new(),
            recent: VecDeque::with_capacity(n.min(64)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn committed(&self) -> &[T] {
        &self.committed
    }

    pub fn recent(&self) -> impl Iterator<Item = &[T]> {
        self.recent.iter().map(Vec::as_slice)
    }

    /// Feeds one hypothesis and returns the newly committed tokens.
    pub fn step(&mut self, hypothesis: Vec<T>) -> Result<Vec<T>, SimulError> {
        if !hypothesis.starts_with(&self.committed) {
            return Err(SimulError::Contract(
                "hypothesis does not extend the committed prefix".into(),
            ));
        }
        self.recent.push_back(hypothesis);
        if self.recent.len() > self.n {
            self.recent.pop_front();
        }
        if self.recent.len() < self.n {
            return Ok(Vec::new());
        }
        let first = &self.recent[0];
        let mut lcp = first.len();
        for h in self.recent.iter().skip(1) {
            lcp = lcp.min(first.iter().zip(h).take_while(|(a, b)| a == b).count());
        }
        let start = self.committed.len();
        let delta = if lcp > start {
            first[start..lcp].to_vec()
        } else {
            Vec::new()
        };
        self.committed.extend(delta.iter().cloned());
        Ok(delta)
    }

    /// Commits whatever `hypothesis` has beyond the committed prefix.
    pub fn flush(&mut self, hypothesis: &[T]) -> Result<Vec<T>, SimulError> {
        if !hypothesis.starts_with(&self.committed) {
            return Err(SimulError::Contract(
                "final hypothesis does not extend the committed prefix".into(),
            ));
        }
        let delta = hypothesis[self.committed.len()..].to_vec();
        self.committed.extend(delta.iter().cloned());
        Ok(delta)
    }
}

/// Free-function form of [`LocalAgreementState::step`].
pub fn la_step<T: Clone + PartialEq>(
    state: &mut LocalAgreementState<T>,
    hypothesis: Vec<T>,
) -> Result<Vec<T>, SimulError> {
    state.step(hypothesis)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadEvent {
    /// Index into the `sources` slice given to [`schedule_reads`].
    pub language: usize,
    pub token_index: usize,
    /// Character fraction of that language after this read.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiSourceSchedule {
    pub events: Vec<ReadEvent>,
}

/// Interleaves the tokens of all sources by the character fraction reached
/// after each token. Ties go to the language listed first in `tie_order`
/// (unlisted languages follow in input order), then to the lower token index.
pub fn schedule_reads(
    sources: &[TokenSequence],
    languages: &[String],
    tie_order: &[String],
) -> Result<MultiSourceSchedule, SimulError> {
    if sources.is_empty() {
        return Err(SimulError::NoLanguages);
    }
    if languages.len() != sources.len() {
        return Err(SimulError::Contract(format!(
            "{} sources but {} language names",
            sources.len(),
            languages.len()
        )));
    }
    if sources.iter().all(TokenSequence::is_empty) {
        return Err(SimulError::EmptyInput("every source"));
    }
    let rank: Vec<usize> = languages
        .iter()
        .enumerate()
        .map(|(i, l)| {
            tie_order
                .iter()
                .position(|t| t == l)
                .unwrap_or(tie_order.len() + i)
        })
        .collect();
    let mut events = Vec::new();
    for (lang, s) in sources.iter().enumerate() {
        for k in 0..s.len() {
            let fraction = char_fraction(s, k + 1).expect("prefix within range");
            events.push(ReadEvent {
                language: lang,
                token_index: k,
                fraction,
            });
        }
    }
    events.sort_by(|a, b| {
        a.fraction
            .total_cmp(&b.fraction)
            .then(rank[a.language].cmp(&rank[b.language]))
            .then(a.token_index.cmp(&b.token_index))
    });
    Ok(MultiSourceSchedule { events })
}

/// One source stream and the translator that reads it.
#[derive(Clone, Copy)]
pub struct SimulMember<'a> {
    pub language: &'a str,
    pub source: &'a TokenSequence,
    pub translator: &'a dyn IncrementalTranslator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputMode {
    /// Local Agreement; output is append-only.
    #[default]
    Committed,
    /// Display every new hypothesis, revising the previous one.
    Retranslation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulConfig {
    pub la_n: usize,
    pub combiner: Combiner,
    /// When false, only reads of the first member count as agreement updates.
    pub count_all_reads: bool,
    pub mode: OutputMode,
    pub tie_order: Vec<String>,
    pub check_determinism: bool,
}

impl Default for SimulConfig {
    fn default() -> Self {
        Self {
            la_n: 2,
            combiner: Combiner::MeanRaw,
            count_all_reads: true,
            mode: OutputMode::Committed,
            tie_order: Vec::new(),
            check_determinism: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulOutcome {
    pub output: Vec<String>,
    pub log: SimulEventLog,
    pub updates: usize,
}

/// Greedy decoding of the late-averaged members, continuing `forced`.
pub fn ensemble_decode(
    members: &[(&dyn IncrementalTranslator, &[String])],
    source_complete: bool,
    forced: &[usize],
    combiner: Combiner,
    check_determinism: bool,
) -> Result<Vec<usize>, SimulError> {
    let (first, _) = members.first().ok_or(SimulError::EmptyCombination)?;
    if let [(only, src)] = members {
        if combiner == Combiner::MeanRaw && !check_determinism {
            return Ok(only.decode(src, source_complete, forced)?.tokens);
        }
    }
    let vocab = first.vocabulary().clone();
    let longest = members.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
    let limit = max_target_len(longest);
    let mut tokens = forced.to_vec();
    let mut step = Vec::with_capacity(members.len());
    while tokens.len() < limit {
        step.clear();
        for (t, src) in members {
            let scores = t.step_scores(src, source_complete, &tokens)?;
            if check_determinism && t.step_scores(src, source_complete, &tokens)? != scores {
                return Err(SimulError::Nondeterministic {
                    member: t.name().to_string(),
                });
            }
            if scores.len() != vocab.len() {
                return Err(SimulError::DimensionMismatch {
                    expected: vocab.len(),
                    got: scores.len(),
                });
            }
            step.push(scores);
        }
        let best = argmax(&late_average(&step, combiner)?);
        if best == vocab.eos() {
            break;
        }
        tokens.push(best);
    }
    Ok(tokens)
}

fn common_prefix_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Streams the sources through the members and records every read, write
/// and revision. With one member this is single-source decoding.
pub fn run_simul(members: &[SimulMember<'_>], config: &SimulConfig) -> Result<SimulOutcome, SimulError> {
    let first = members.first().ok_or(SimulError::NoLanguages)?;
    let vocab = first.translator.vocabulary().clone();
    for m in members {
        let v = m.translator.vocabulary();
        if !Arc::ptr_eq(v, &vocab) && **v != *vocab {
            return Err(SimulError::Contract(format!(
                "translator `{}` uses a different target vocabulary",
                m.translator.name()
            )));
        }
    }
    let sources: Vec<TokenSequence> = members.iter().map(|m| m.source.clone()).collect();
    let languages: Vec<String> = members.iter().map(|m| m.language.to_string()).collect();
    let schedule = schedule_reads(&sources, &languages, &config.tie_order)?;
    let mut la = LocalAgreementState::new(config.la_n)?;
    let mut shown: Vec<usize> = Vec::new();
    let mut progress = vec![0usize; members.len()];
    let mut log = SimulEventLog::new();
    let mut updates = 0;
    let total: usize = sources.iter().map(TokenSequence::len).sum();

    let decode = |progress: &[usize], complete: bool, forced: &[usize]| {
        let prefixes: Vec<(&dyn IncrementalTranslator, &[String])> = members
            .iter()
            .zip(progress)
            .map(|(m, &k)| (m.translator, &m.source.tokens()[..k]))
            .collect();
        ensemble_decode(&prefixes, complete, forced, config.combiner, config.check_determinism)
    };
    let emit = |log: &mut SimulEventLog, shown: &mut Vec<usize>, hyp: Vec<usize>| {
        let keep = common_prefix_len(shown, &hyp);
        let erased = shown.len() - keep;
        if erased > 0 {
            log.push(SimulEvent::Revise {
                erased,
                replacement: vocab.decode_ids(&hyp[keep..]),
            });
        } else {
            for &t in &hyp[keep..] {
                log.write(vocab.word(t));
            }
        }
        *shown = hyp;
    };

    for (n, ev) in schedule.events.iter().enumerate() {
        let m = &members[ev.language];
        progress[ev.language] += 1;
        log.read(m.language, &m.source.tokens()[ev.token_index]);
        if !(config.count_all_reads || ev.language == 0) {
            continue;
        }
        updates += 1;
        let complete = n + 1 == total;
        match config.mode {
            OutputMode::Committed => {
                let hyp = decode(&progress, complete, la.committed())?;
                for t in la.step(hyp)? {
                    log.write(vocab.word(t));
                }
            }
            OutputMode::Retranslation => {
                let hyp = decode(&progress, complete, &[])?;
                emit(&mut log, &mut shown, hyp);
            }
        }
    }
    log.push(SimulEvent::Flush);
    match config.mode {
        OutputMode::Committed => {
            let hyp = decode(&progress, true, la.committed())?;
            for t in la.flush(&hyp)? {
                log.write(vocab.word(t));
            }
        }
        OutputMode::Retranslation => {
            let hyp = decode(&progress, true, &[])?;
            emit(&mut log, &mut shown, hyp);
        }
    }
    Ok(SimulOutcome {
        output: log.final_output(),
        log,
        updates,
    })
}

/// Offline (full-source) greedy output of the late-averaged members.
pub fn offline_decode(members: &[SimulMember<'_>], combiner: Combiner) -> Result<Vec<String>, SimulError> {
    let first = members.first().ok_or(SimulError::NoLanguages)?;
    let prefixes: Vec<(&dyn IncrementalTranslator, &[String])> =
        members.iter().map(|m| (m.translator, m.source.tokens())).collect();
    let ids = ensemble_decode(&prefixes, true, &[], combiner, false)?;
    Ok(first.translator.vocabulary().decode_ids(&ids))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixPair {
    pub source: TokenSequence,
    pub target: TokenSequence,
    /// Sampled percentage, or `None` for a full-sentence pair.
    pub percent: Option<u32>,
}

/// Shortest prefix whose characters reach `percent` of the sentence.
pub fn prefix_at_percent(sentence: &TokenSequence, percent: u32) -> TokenSequence {
    let total = sentence.end_of_prefix(sentence.len());
    let need = percent as usize * total;
    let k = (1..=sentence.len())
        .find(|&k| sentence.end_of_prefix(k) * 100 >= need)
        .unwrap_or(sentence.len());
    sentence.prefix(k)
}

/// Samples `samples` percentages from 1..=90, cuts source and target at the
/// same percentage (rounded up to whole words) and adds one full pair per
/// prefix pair.
pub fn generate_prefix_pairs(
    src: &TokenSequence,
    tgt: &TokenSequence,
    samples: usize,
    seed: u64,
) -> Result<Vec<PrefixPair>, SimulError> {
    if src.is_empty() {
        return Err(SimulError::EmptyInput("source sentence"));
    }
    if tgt.is_empty() {
        return Err(SimulError::EmptyInput("target sentence"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * samples);
    for _ in 0..samples {
        let p: u32 = rng.random_range(1..=90);
        out.push(PrefixPair {
            source: prefix_at_percent(src, p),
            target: prefix_at_percent(tgt, p),
            percent: Some(p),
        });
    }
    for _ in 0..samples {
        out.push(PrefixPair {
            source: src.clone(),
            target: tgt.clone(),
            percent: None,
        });
    }
    Ok(out)
}
