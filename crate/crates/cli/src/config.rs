//! Sweep configuration: a versioned TOML file whose paths are relative to the
//! file itself.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use simulmt_core::mock_mt::UnknownPolicy;
use simulmt_core::simul::{Combiner, OutputMode};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub language: String,
    /// Gold source text, one sentence per line.
    pub text: PathBuf,
    /// `source<TAB>target` lexicon for this language's mock translator.
    pub lexicon: PathBuf,
    /// Trained noise model; required when any WER in `wer` is positive.
    pub noise_model: Option<PathBuf>,
    /// Target WER grid for this language (ratios, e.g. 0.15).
    pub wer: Vec<f64>,
    #[serde(default)]
    pub unknown_policy: PolicyName,
    pub unknown_margin: Option<f64>,
    /// Source words whose translation the mock defers to the sentence end.
    #[serde(default)]
    pub deferred: Vec<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    #[default]
    Copy,
    Tag,
}

impl From<PolicyName> for UnknownPolicy {
    fn from(p: PolicyName) -> Self {
        match p {
            PolicyName::Copy => UnknownPolicy::Copy,
            PolicyName::Tag => UnknownPolicy::Tag,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CombinerName {
    #[default]
    Mean,
    MeanLogSoftmax,
}

impl From<CombinerName> for Combiner {
    fn from(c: CombinerName) -> Self {
        match c {
            CombinerName::Mean => Combiner::MeanRaw,
            CombinerName::MeanLogSoftmax => Combiner::MeanLogSoftmax,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    #[default]
    Committed,
    Retranslation,
}

impl From<ModeName> for OutputMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Committed => OutputMode::Committed,
            ModeName::Retranslation => OutputMode::Retranslation,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub la_sizes: Vec<usize>,
    /// One or more reference files for the target language.
    pub references: Vec<PathBuf>,
    pub sources: Vec<SourceConfig>,
    /// Language whose reads define latency for the multi-source system.
    pub primary: Option<String>,
    #[serde(default)]
    pub tie_order: Vec<String>,
    #[serde(default)]
    pub combiner: CombinerName,
    #[serde(default = "yes")]
    pub count_all_reads: bool,
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default)]
    pub uniform_fallback: bool,
    #[serde(default)]
    pub lowercase: bool,
    #[serde(default = "yes")]
    pub check_determinism: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::config(format!("malformed config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        self.references.iter_mut().for_each(fix);
        for s in &mut self.sources {
            fix(&mut s.text);
            fix(&mut s.lexicon);
            if let Some(m) = &mut s.noise_model {
                fix(m);
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            ));
        }
        if self.sources.is_empty() {
            return bad("at least one source is required".into());
        }
        if self.seeds.is_empty() {
            return bad("`seeds` must not be empty".into());
        }
        if self.la_sizes.is_empty() || self.la_sizes.contains(&0) {
            return bad("`la_sizes` must be non-empty and every size at least 1".into());
        }
        if self.references.is_empty() {
            return bad("at least one reference file is required".into());
        }
        let mut langs = BTreeSet::new();
        for s in &self.sources {
            if !langs.insert(s.language.as_str()) {
                return bad(format!("language `{}` is listed twice", s.language));
            }
            if s.wer.is_empty() {
                return bad(format!("`wer` grid of `{}` is empty", s.language));
            }
            if s.wer.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return bad(format!("`wer` grid of `{}` has a negative or non-finite value", s.language));
            }
            if s.noise_model.is_none() && s.wer.iter().any(|w| *w > 0.0) {
                return bad(format!("`{}` has positive WER targets but no `noise_model`", s.language));
            }
            if let Some(m) = s.unknown_margin {
                if !(m.is_finite() && m >= 0.0) {
                    return bad(format!("`unknown_margin` of `{}` must be non-negative", s.language));
                }
            }
        }
        if let Some(p) = &self.primary {
            if !langs.contains(p.as_str()) {
                return bad(format!("primary language `{p}` is not a source"));
            }
        }
        for t in &self.tie_order {
            if !langs.contains(t.as_str()) {
                return bad(format!("tie_order language `{t}` is not a source"));
            }
        }
        Ok(())
    }

    pub fn languages(&self) -> Vec<String> {
        self.sources.iter().map(|s| s.language.clone()).collect()
    }

    pub fn primary_language(&self) -> &str {
        self.primary.as_deref().unwrap_or(&self.sources[0].language)
    }
}
