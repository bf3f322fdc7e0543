//! Lexical ASR noise model: per-word insertion, deletion and substitution
//! learned from gold/ASR transcript pairs, rescaled to hit a desired WER.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{TokenSequence, TranscriptPair};
use crate::metrics::{align_edit, EditOp};

pub const MODEL_MAGIC: &str = "lexical-noise-model";
pub const MODEL_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("training corpus has no gold tokens")]
    NoGoldTokens,
    #[error("insertion probability {0} makes the expected insertion rate infinite")]
    InfiniteInsertionRate(f64),
    #[error("model has no error probability mass to rescale")]
    DegenerateModel,
    #[error("target WER {target} is unattainable; the maximum attainable target is {max:.6}")]
    Unattainable { target: f64, max: f64 },
    #[error("invalid WER target {0}")]
    InvalidTarget(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported model version `{found}`, expected `{MODEL_VERSION}`")]
    Version { found: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Categorical distribution over words, kept sorted by word.
pub type WordDistribution = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalNoiseModel {
    pub p_insert: f64,
    pub p_delete: f64,
    pub p_substitute: f64,
    pub substitution_table: BTreeMap<String, WordDistribution>,
    pub insertion_table: WordDistribution,
    /// Multiplier applied to all three probabilities; 1 when unscaled.
    pub scale_c: f64,
}

impl LexicalNoiseModel {
    /// A model that never changes its input.
    pub fn identity() -> Self {
        Self {
            p_insert: 0.0,
            p_delete: 0.0,
            p_substitute: 0.0,
            substitution_table: BTreeMap::new(),
            insertion_table: Vec::new(),
            scale_c: 1.0,
        }
    }

    pub fn scaled_insert(&self) -> f64 {
        self.scale_c * self.p_insert
    }

    pub fn scaled_delete(&self) -> f64 {
        self.scale_c * self.p_delete
    }

    pub fn scaled_substitute(&self) -> f64 {
        self.scale_c * self.p_substitute
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let bad = |m: String| Err(NoiseError::InvalidModel(m));
        if !(0.0..1.0).contains(&self.p_insert) {
            return bad(format!("p_insert = {} is outside [0, 1)", self.p_insert));
        }
        for (name, p) in [("p_delete", self.p_delete), ("p_substitute", self.p_substitute)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if !(self.scale_c.is_finite() && self.scale_c >= 0.0) {
            return bad(format!("scale_c = {}", self.scale_c));
        }
        if self.scaled_insert() >= 1.0 || self.scaled_delete() > 1.0 || self.scaled_substitute() > 1.0 {
            return bad(format!("scaled probabilities exceed 1 at c = {}", self.scale_c));
        }
        if self.p_insert > 0.0 && self.insertion_table.is_empty() {
            return bad("p_insert > 0 but the insertion table is empty".into());
        }
        let check = |what: &str, dist: &WordDistribution| -> Result<(), NoiseError> {
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            if dist.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(NoiseError::InvalidModel(format!(
                    "distribution for {what} sums to {sum}"
                )));
            }
            Ok(())
        };
        for (gold, dist) in &self.substitution_table {
            check(&format!("`{gold}`"), dist)?;
        }
        if !self.insertion_table.is_empty() {
            check("insertions", &self.insertion_table)?;
        }
        Ok(())
    }
}

fn normalize(counts: BTreeMap<String, u64>) -> WordDistribution {
    let total: u64 = counts.values().sum();
    counts
        .into_iter()
        .map(|(w, c)| (w, c as f64 / total as f64))
        .collect()
}

/// Estimates the model from aligned gold/ASR pairs.
///
/// With N gold tokens and S, D, I substitutions, deletions and insertions:
/// p_D = D / N, p_S = S / (N - D) and p_I = I / (N + I), the last one chosen so
/// that the expected insertions per gold word, p_I / (1 - p_I), equal I / N.
pub fn train_noise_model(pairs: &[TranscriptPair]) -> Result<LexicalNoiseModel, NoiseError> {
    let mut subs: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    let mut ins: BTreeMap<String, u64> = BTreeMap::new();
    let (mut n_gold, mut n_sub, mut n_del, mut n_ins) = (0u64, 0u64, 0u64, 0u64);
    for pair in pairs {
        for op in align_edit(pair.gold.tokens(), pair.hyp.tokens()).ops {
            match op {
                EditOp::Copy(_) => n_gold += 1,
                EditOp::Substitute { gold, hyp } => {
                    n_gold += 1;
                    n_sub += 1;
                    *subs.entry(gold).or_default().entry(hyp).or_insert(0) += 1;
                }
                EditOp::Delete(_) => {
                    n_gold += 1;
                    n_del += 1;
                }
                EditOp::Insert(w) => {
                    n_ins += 1;
                    *ins.entry(w).or_insert(0) += 1;
                }
            }
        }
    }
    if n_gold == 0 {
        return Err(NoiseError::NoGoldTokens);
    }
    let p_substitute = if n_gold == n_del {
        log::warn!("every gold token was deleted; substitution probability set to 0");
        0.0
    } else {
        n_sub as f64 / (n_gold - n_del) as f64
    };
    let model = LexicalNoiseModel {
        p_insert: n_ins as f64 / (n_gold + n_ins) as f64,
        p_delete: n_del as f64 / n_gold as f64,
        p_substitute,
        substitution_table: subs.into_iter().map(|(g, c)| (g, normalize(c))).collect(),
        insertion_table: normalize(ins),
        scale_c: 1.0,
    };
    model.validate()?;
    Ok(model)
}

/// WER the model produces in expectation, using the scaled probabilities:
/// p_I / (1 - p_I) + p_D + (1 - p_D) p_S.
pub fn expected_wer(model: &LexicalNoiseModel) -> Result<f64, NoiseError> {
    let (pi, pd, ps) = (
        model.scaled_insert(),
        model.scaled_delete(),
        model.scaled_substitute(),
    );
    if pi >= 1.0 {
        return Err(NoiseError::InfiniteInsertionRate(pi));
    }
    Ok(pi / (1.0 - pi) + pd + (1.0 - pd) * ps)
}

/// Left-hand side of the linearized rescaling equation at scale `c`:
/// c p_I + c p_D + (1 - c p_D) c p_S, with unscaled probabilities.
pub fn linearized_wer(model: &LexicalNoiseModel, c: f64) -> f64 {
    let (pi, pd, ps) = (model.p_insert, model.p_delete, model.p_substitute);
    c * pi + c * pd + (1.0 - c * pd) * c * ps
}

/// Supremum of targets [`rescale_to_wer`] can reach: the linearized WER is
/// increasing up to its vertex and every scaled probability must stay below 1.
pub fn max_attainable_wer(model: &LexicalNoiseModel) -> f64 {
    let (pi, pd, ps) = (model.p_insert, model.p_delete, model.p_substitute);
    let pmax = pi.max(pd).max(ps);
    if pmax == 0.0 {
        return 0.0;
    }
    let a = pd * ps;
    let mut c = 1.0 / pmax;
    if a > 0.0 {
        c = c.min((pi + pd + ps) / (2.0 * a));
    }
    linearized_wer(model, c)
}

/// A desired WER (a ratio, so 0.15 for 15%).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerTarget(f64);

impl WerTarget {
    pub fn new(wer: f64) -> Result<Self, NoiseError> {
        if wer.is_finite() && wer >= 0.0 {
            Ok(Self(wer))
        } else {
            Err(NoiseError::InvalidTarget(wer))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Finds the scale `c` solving p_D p_S c^2 - (p_I + p_D + p_S) c + W = 0 and
/// returns the model with `scale_c = c`. The smallest non-negative root is
/// taken; a model with p_D p_S = 0 is solved linearly. Rescaling always
/// starts from the unscaled probabilities.
pub fn rescale_to_wer(model: &LexicalNoiseModel, target: WerTarget) -> Result<LexicalNoiseModel, NoiseError> {
    let w = target.value();
    let (pi, pd, ps) = (model.p_insert, model.p_delete, model.p_substitute);
    let sum = pi + pd + ps;
    let unattainable = || NoiseError::Unattainable {
        target: w,
        max: max_attainable_wer(model),
    };
    let c = if sum == 0.0 {
        if w == 0.0 {
            0.0
        } else {
            return Err(NoiseError::DegenerateModel);
        }
    } else {
        let a = pd * ps;
        if a == 0.0 {
            w / sum
        } else {
            let disc = sum * sum - 4.0 * a * w;
            if disc < 0.0 {
                return Err(unattainable());
            }
            // (sum - sqrt(disc)) / 2a, written without cancellation.
            2.0 * w / (sum + disc.sqrt())
        }
    };
    if c * pi >= 1.0 || c * pd >= 1.0 || c * ps >= 1.0 {
        return Err(unattainable());
    }
    let mut scaled = model.clone();
    scaled.scale_c = c;
    Ok(scaled)
}

/// How substitution treats words missing from the substitution table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubstitutionFallback {
    /// Keep the word unchanged.
    #[default]
    Keep,
    /// Draw uniformly from every replacement word seen in training.
    UniformVocabulary,
}

/// Noise application engine with precomputed lookup tables.
#[derive(Debug, Clone)]
pub struct NoiseApplier<'a> {
    model: &'a LexicalNoiseModel,
    fallback: SubstitutionFallback,
    fallback_vocab: Vec<&'a str>,
}

fn draw(dist: &WordDistribution, u: f64) -> &str {
    let mut acc = 0.0;
    for (w, p) in dist {
        acc += p;
        if u < acc {
            return w;
        }
    }
    &dist.last().expect("non-empty distribution").0
}

/// Per-sentence RNG seed: the corpus seed XOR the sentence index.
pub fn sentence_seed(seed: u64, index: usize) -> u64 {
    seed ^ index as u64
}

impl<'a> NoiseApplier<'a> {
    pub fn new(model: &'a LexicalNoiseModel, fallback: SubstitutionFallback) -> Self {
        let fallback_vocab: BTreeSet<&str> = model
            .substitution_table
            .values()
            .flat_map(|d| d.iter().map(|(w, _)| w.as_str()))
            .collect();
        Self {
            model,
            fallback,
            fallback_vocab: fallback_vocab.into_iter().collect(),
        }
    }

    fn insertion_run(&self, rng: &mut ChaCha8Rng, out: &mut Vec<String>) {
        let p = self.model.scaled_insert();
        if p <= 0.0 || self.model.insertion_table.is_empty() {
            return;
        }
        while rng.random::<f64>() < p {
            let u = rng.random::<f64>();
            out.push(draw(&self.model.insertion_table, u).to_string());
        }
    }

    /// Noises one sentence with a generator seeded by `seed`.
    pub fn apply_words(&self, words: &[String], seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pd, ps) = (self.model.scaled_delete(), self.model.scaled_substitute());
        let mut out = Vec::with_capacity(words.len() + 2);
        self.insertion_run(&mut rng, &mut out);
        for word in words {
            if rng.random::<f64>() < pd {
                // deleted
            } else if rng.random::<f64>() < ps {
                let u = rng.random::<f64>();
                let replacement = match self.model.substitution_table.get(word) {
                    Some(dist) => draw(dist, u),
                    None => match self.fallback {
                        SubstitutionFallback::UniformVocabulary if !self.fallback_vocab.is_empty() => {
                            let k = ((u * self.fallback_vocab.len() as f64) as usize)
                                .min(self.fallback_vocab.len() - 1);
                            self.fallback_vocab[k]
                        }
                        _ => word.as_str(),
                    },
                };
                out.push(replacement.to_string());
            } else {
                out.push(word.clone());
            }
            self.insertion_run(&mut rng, &mut out);
        }
        out
    }

    pub fn apply(&self, sentence: &TokenSequence, seed: u64) -> TokenSequence {
        TokenSequence::from_words(&self.apply_words(sentence.tokens(), seed))
    }

    /// Noises a corpus; sentence `i` uses [`sentence_seed`]`(seed, i)`.
    pub fn apply_corpus(&self, sentences: &[TokenSequence], seed: u64) -> Vec<TokenSequence> {
        sentences
            .iter()
            .enumerate()
            .map(|(i, s)| self.apply(s, sentence_seed(seed, i)))
            .collect()
    }
}

/// Noises one sentence: per gold token, delete with the scaled p_D, otherwise
/// substitute with the scaled p_S; an insertion run with the scaled p_I follows
/// the sentence start and every token.
pub fn apply_noise(model: &LexicalNoiseModel, sentence: &TokenSequence, seed: u64) -> TokenSequence {
    NoiseApplier::new(model, SubstitutionFallback::Keep).apply(sentence, seed)
}

pub fn apply_noise_corpus(
    model: &LexicalNoiseModel,
    sentences: &[TokenSequence],
    seed: u64,
) -> Vec<TokenSequence> {
    NoiseApplier::new(model, SubstitutionFallback::Keep).apply_corpus(sentences, seed)
}

pub fn model_to_string(model: &LexicalNoiseModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MODEL_MAGIC}\t{MODEL_VERSION}");
    let _ = writeln!(s, "p_insert\t{}", model.p_insert);
    let _ = writeln!(s, "p_delete\t{}", model.p_delete);
    let _ = writeln!(s, "p_substitute\t{}", model.p_substitute);
    let _ = writeln!(s, "scale_c\t{}", model.scale_c);
    for (gold, dist) in &model.substitution_table {
        for (w, p) in dist {
            let _ = writeln!(s, "{gold}\t{w}\t{p}");
        }
    }
    for (w, p) in &model.insertion_table {
        let _ = writeln!(s, "\t{w}\t{p}");
    }
    s
}

pub fn model_from_str(text: &str) -> Result<LexicalNoiseModel, NoiseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let parse_err = |line: usize, message: String| NoiseError::Parse { line, message };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty model file".into()))?;
    let version = header
        .strip_prefix(MODEL_MAGIC)
        .map(|v| v.trim())
        .ok_or_else(|| parse_err(1, "missing model header".into()))?;
    if version != MODEL_VERSION {
        return Err(NoiseError::Version {
            found: version.to_string(),
        });
    }
    let mut header_value = |key: &str| -> Result<f64, NoiseError> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("truncated before `{key}`")))?;
        let value = line
            .strip_prefix(key)
            .and_then(|rest| rest.strip_prefix('\t'))
            .ok_or_else(|| parse_err(n, format!("expected `{key}`")))?;
        value
            .parse()
            .map_err(|_| parse_err(n, format!("bad number `{value}`")))
    };
    let p_insert = header_value("p_insert")?;
    let p_delete = header_value("p_delete")?;
    let p_substitute = header_value("p_substitute")?;
    let scale_c = header_value("scale_c")?;
    let mut subs: BTreeMap<String, WordDistribution> = BTreeMap::new();
    let mut insertion_table = Vec::new();
    for (n, line) in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 || cols[1].is_empty() {
            return Err(parse_err(n, "expected `gold<TAB>word<TAB>prob`".into()));
        }
        let p: f64 = cols[2]
            .parse()
            .map_err(|_| parse_err(n, format!("bad probability `{}`", cols[2])))?;
        let entry = (cols[1].to_string(), p);
        if cols[0].is_empty() {
            insertion_table.push(entry);
        } else {
            subs.entry(cols[0].to_string()).or_default().push(entry);
        }
    }
    let model = LexicalNoiseModel {
        p_insert,
        p_delete,
        p_substitute,
        substitution_table: subs,
        insertion_table,
        scale_c,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &LexicalNoiseModel, path: &Path) -> Result<(), NoiseError> {
    fs::write(path, model_to_string(model)).map_err(|source| NoiseError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<LexicalNoiseModel, NoiseError> {
    let text = fs::read_to_string(path).map_err(|source| NoiseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_str(&text)
}
