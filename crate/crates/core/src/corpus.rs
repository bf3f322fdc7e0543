//! Tokenized sentences, line-aligned parallel documents, gold/ASR transcript
//! pairs and Pharaoh word alignments.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: line {line}: invalid UTF-8", path.display())]
    Decode { path: PathBuf, line: usize },
    #[error(
        "line-count mismatch: {} has {first_lines} lines, {} has {second_lines}",
        first.display(),
        second.display()
    )]
    LineCountMismatch {
        first: PathBuf,
        first_lines: usize,
        second: PathBuf,
        second_lines: usize,
    },
    #[error("line {line}, column {column}: malformed alignment pair `{token}`")]
    AlignmentParse {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("line {line}, column {column}: duplicate alignment pair `{token}`")]
    DuplicateLink {
        line: usize,
        column: usize,
        token: String,
    },
    #[error("prefix length {prefix_len} out of range for a sentence of {len} tokens")]
    PrefixOutOfRange { prefix_len: usize, len: usize },
    #[error("sentence tuple {index} has {got} entries, expected {expected}")]
    RaggedTuple {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("token `{token}` not found in raw text")]
    Coverage { token: String },
}

/// Whitespace as understood by Python's `str.split()`, which the reference
/// scorers rely on. This is Unicode White_Space plus the ASCII separators
/// U+001C..U+001F.
pub fn is_split_space(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// Splits on [`is_split_space`], dropping empty pieces.
pub fn split_words(s: &str) -> impl Iterator<Item = &str> {
    s.split(is_split_space).filter(|w| !w.is_empty())
}

/// A tokenized sentence together with the raw text its tokens were cut from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    tokens: Vec<String>,
    raw: String,
    char_offsets: Vec<usize>,
}

impl TokenSequence {
    /// Locates `tokens` left to right inside `raw` and records their character
    /// offsets. Fails if some token cannot be found after its predecessor.
    pub fn locate(raw: impl Into<String>, tokens: Vec<String>) -> Result<Self, CorpusError> {
        let raw = raw.into();
        let mut char_offsets = Vec::with_capacity(tokens.len());
        let mut byte_pos = 0;
        let mut char_pos = 0;
        for tok in &tokens {
            if tok.is_empty() {
                return Err(CorpusError::Coverage { token: tok.clone() });
            }
            let rest = &raw[byte_pos..];
            let found = rest
                .find(tok.as_str())
                .ok_or_else(|| CorpusError::Coverage { token: tok.clone() })?;
            char_pos += rest[..found].chars().count();
            char_offsets.push(char_pos);
            byte_pos += found + tok.len();
            char_pos += tok.chars().count();
        }
        Ok(Self {
            tokens,
            raw,
            char_offsets,
        })
    }

    /// Builds a sequence whose raw text is the words joined by single spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        let tokens: Vec<String> = words
            .iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !w.is_empty())
            .collect();
        let mut char_offsets = Vec::with_capacity(tokens.len());
        let mut pos = 0;
        for t in &tokens {
            char_offsets.push(pos);
            pos += t.chars().count() + 1;
        }
        let raw = tokens.join(" ");
        Self {
            tokens,
            raw,
            char_offsets,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn char_offsets(&self) -> &[usize] {
        &self.char_offsets
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Character position just past the `n`-th token (0 for `n == 0`).
    pub fn end_of_prefix(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            self.char_offsets[n - 1] + self.tokens[n - 1].chars().count()
        }
    }

    /// The first `n` tokens, with the raw text cut right after the last one.
    pub fn prefix(&self, n: usize) -> TokenSequence {
        let n = n.min(self.len());
        let end = self.end_of_prefix(n);
        let raw: String = self.raw.chars().take(end).collect();
        TokenSequence {
            tokens: self.tokens[..n].to_vec(),
            raw,
            char_offsets: self.char_offsets[..n].to_vec(),
        }
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Normalization applied before whitespace tokenization of transcripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalization {
    pub lowercase: bool,
    /// Trim non-alphanumeric characters from both ends of every word; words
    /// that become empty are dropped.
    pub strip_punctuation: bool,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: false,
        }
    }
}

/// Whitespace tokenization used for alignment, WER and the noise model.
pub fn tokenize_words(raw: &str, norm: Normalization) -> TokenSequence {
    let text = if norm.lowercase {
        raw.to_lowercase()
    } else {
        raw.to_string()
    };
    let mut tokens = Vec::new();
    for word in split_words(&text) {
        let word = if norm.strip_punctuation {
            word.trim_matches(|c: char| !c.is_alphanumeric())
        } else {
            word
        };
        if !word.is_empty() {
            tokens.push(word.to_string());
        }
    }
    TokenSequence::locate(text, tokens).expect("words are substrings of their source text")
}

struct Regexes13a {
    symbols: Regex,
    period_comma_after_nondigit: Regex,
    period_comma_before_nondigit: Regex,
    dash_after_digit: Regex,
}

fn regexes_13a() -> &'static Regexes13a {
    static RE: OnceLock<Regexes13a> = OnceLock::new();
    RE.get_or_init(|| Regexes13a {
        symbols: Regex::new(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])").unwrap(),
        period_comma_after_nondigit: Regex::new(r"([^0-9])([\.,])").unwrap(),
        period_comma_before_nondigit: Regex::new(r"([\.,])([^0-9])").unwrap(),
        dash_after_digit: Regex::new(r"([0-9])(-)").unwrap(),
    })
}

fn preprocess_13a(line: &str) -> String {
    let mut line = line
        .replace("<skipped>", "")
        .replace("-\n", "")
        .replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    line
}

/// The mteval-v13a tokenization as plain strings.
pub fn tokenize_13a_str(line: &str) -> Vec<String> {
    let re = regexes_13a();
    let line = format!(" {} ", preprocess_13a(line));
    let line = re.symbols.replace_all(&line, " $1 ");
    let line = re.period_comma_after_nondigit.replace_all(&line, "$1 $2 ");
    let line = re.period_comma_before_nondigit.replace_all(&line, " $1 $2");
    let line = re.dash_after_digit.replace_all(&line, "$1 $2 ");
    split_words(&line).map(str::to_string).collect()
}

/// 13a tokenization. The raw text of the result is the input after entity
/// unescaping (`&quot;` and friends), which is what the tokens are cut from.
pub fn tokenize_13a(raw: &str) -> TokenSequence {
    let tokens = tokenize_13a_str(raw);
    TokenSequence::locate(preprocess_13a(raw), tokens)
        .expect("13a only inserts separators between characters")
}

/// Fraction of the sentence's characters covered by its first `prefix_len`
/// tokens: 0 for the empty prefix, 1 for the whole sentence.
pub fn char_fraction(sentence: &TokenSequence, prefix_len: usize) -> Result<f64, CorpusError> {
    let n = sentence.len();
    if prefix_len > n {
        return Err(CorpusError::PrefixOutOfRange {
            prefix_len,
            len: n,
        });
    }
    if prefix_len == 0 {
        return Ok(0.0);
    }
    let total = sentence.end_of_prefix(n);
    Ok(sentence.end_of_prefix(prefix_len) as f64 / total as f64)
}

/// How raw lines become token sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tokenization {
    Words(Normalization),
    Scorer13a,
}

impl Default for Tokenization {
    fn default() -> Self {
        Tokenization::Words(Normalization::default())
    }
}

impl Tokenization {
    pub fn apply(&self, raw: &str) -> TokenSequence {
        match self {
            Tokenization::Words(norm) => tokenize_words(raw, *norm),
            Tokenization::Scorer13a => tokenize_13a(raw),
        }
    }
}

/// Reads a UTF-8 text file as lines. CRLF is normalized to LF and a final
/// newline does not start an extra line.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = Vec::new();
    if bytes.is_empty() {
        return Ok(lines);
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    for (i, chunk) in body.split(|b| *b == b'\n').enumerate() {
        let chunk = chunk.strip_suffix(b"\r").unwrap_or(chunk);
        let line = std::str::from_utf8(chunk).map_err(|_| CorpusError::Decode {
            path: path.to_path_buf(),
            line: i + 1,
        })?;
        lines.push(line.to_string());
    }
    Ok(lines)
}

/// Writes one line per item, each terminated by LF.
pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<(), CorpusError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = io::BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for line in lines {
        out.write_all(line.as_ref().as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Sentence-aligned text in several languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelDocument {
    languages: Vec<String>,
    sentences: Vec<Vec<TokenSequence>>,
}

impl ParallelDocument {
    pub fn new(
        languages: Vec<String>,
        sentences: Vec<Vec<TokenSequence>>,
    ) -> Result<Self, CorpusError> {
        for (index, tuple) in sentences.iter().enumerate() {
            if tuple.len() != languages.len() {
                return Err(CorpusError::RaggedTuple {
                    index,
                    got: tuple.len(),
                    expected: languages.len(),
                });
            }
        }
        Ok(Self {
            languages,
            sentences,
        })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn tuples(&self) -> &[Vec<TokenSequence>] {
        &self.sentences
    }

    pub fn language_index(&self, lang: &str) -> Option<usize> {
        self.languages.iter().position(|l| l == lang)
    }

    /// All sentences of one language, in order.
    pub fn column(&self, lang_idx: usize) -> Vec<TokenSequence> {
        self.sentences.iter().map(|t| t[lang_idx].clone()).collect()
    }
}

/// Loads one file per language; line `i` of every file forms tuple `i`.
pub fn load_parallel(
    inputs: &[(String, PathBuf)],
    tokenization: Tokenization,
) -> Result<ParallelDocument, CorpusError> {
    let mut columns: Vec<Vec<String>> = Vec::with_capacity(inputs.len());
    for (_, path) in inputs {
        columns.push(read_lines(path)?);
    }
    if let Some((first, rest)) = columns.split_first() {
        for (k, col) in rest.iter().enumerate() {
            if col.len() != first.len() {
                return Err(CorpusError::LineCountMismatch {
                    first: inputs[0].1.clone(),
                    first_lines: first.len(),
                    second: inputs[k + 1].1.clone(),
                    second_lines: col.len(),
                });
            }
        }
    }
    let n = columns.first().map_or(0, Vec::len);
    let sentences = (0..n)
        .map(|i| columns.iter().map(|c| tokenization.apply(&c[i])).collect())
        .collect();
    ParallelDocument::new(inputs.iter().map(|(l, _)| l.clone()).collect(), sentences)
}

/// Writes each language's raw sentences to its file.
pub fn save_parallel(doc: &ParallelDocument, paths: &[PathBuf]) -> Result<(), CorpusError> {
    for (k, path) in paths.iter().enumerate() {
        write_lines(path, doc.tuples().iter().map(|t| t[k].raw()))?;
    }
    Ok(())
}

/// A gold transcript and an ASR hypothesis of the same utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptPair {
    pub gold: TokenSequence,
    pub hyp: TokenSequence,
}

impl TranscriptPair {
    pub fn new(gold: TokenSequence, hyp: TokenSequence) -> Self {
        Self { gold, hyp }
    }
}

/// Zero-based `(source, target)` token links of one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordAlignment {
    links: Vec<(usize, usize)>,
}

impl WordAlignment {
    pub fn new(links: Vec<(usize, usize)>) -> Option<Self> {
        let mut seen = HashSet::new();
        if links.iter().all(|l| seen.insert(*l)) {
            Some(Self { links })
        } else {
            None
        }
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// First link that falls outside the given sentence lengths.
    pub fn out_of_bounds(&self, src_len: usize, tgt_len: usize) -> Option<(usize, usize)> {
        self.links
            .iter()
            .copied()
            .find(|&(s, t)| s >= src_len || t >= tgt_len)
    }

    /// Parses one Pharaoh line such as `0-0 1-2`. `line_no` is used in errors.
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, CorpusError> {
        let mut links = Vec::new();
        let mut seen = HashSet::new();
        let mut column = 1;
        let mut rest = line;
        while !rest.is_empty() {
            let skip = rest.len() - rest.trim_start_matches(is_split_space).len();
            column += rest[..skip].chars().count();
            rest = &rest[skip..];
            if rest.is_empty() {
                break;
            }
            let end = rest.find(is_split_space).unwrap_or(rest.len());
            let token = &rest[..end];
            let malformed = || CorpusError::AlignmentParse {
                line: line_no,
                column,
                token: token.to_string(),
            };
            let (s, t) = token.split_once('-').ok_or_else(malformed)?;
            let s: usize = s.parse().map_err(|_| malformed())?;
            let t: usize = t.parse().map_err(|_| malformed())?;
            if !seen.insert((s, t)) {
                return Err(CorpusError::DuplicateLink {
                    line: line_no,
                    column,
                    token: token.to_string(),
                });
            }
            links.push((s, t));
            column += token.chars().count();
            rest = &rest[end..];
        }
        Ok(Self { links })
    }

    pub fn to_pharaoh(&self) -> String {
        self.links
            .iter()
            .map(|(s, t)| format!("{s}-{t}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Reads a Pharaoh alignment file, one line per sentence pair.
pub fn load_word_alignment(path: &Path) -> Result<Vec<WordAlignment>, CorpusError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, line)| WordAlignment::parse_line(line, i + 1))
        .collect()
}
