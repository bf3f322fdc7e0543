//! Single-purpose subcommands. Each returns the text printed on stdout and
//! writes its artifacts to the given paths.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use simulmt_core::corpus::{
    read_lines, write_lines, Normalization, TokenSequence, Tokenization, TranscriptPair, WordAlignment,
    load_word_alignment,
};
use simulmt_core::independence::{analyze_independence, IndependenceReport, Transcripts};
use simulmt_core::metrics::{bleu, chrf2, corpus_breakdown, paired_bootstrap, Contingency2x2, MetricKind};
use simulmt_core::mock_mt::{build_vocabulary, lexicon_to_tsv, load_lexicon, LexiconTranslator};
use simulmt_core::noise::{
    expected_wer, load_model, model_to_string, rescale_to_wer, sentence_seed, train_noise_model, NoiseApplier,
    SubstitutionFallback, WerTarget,
};
use simulmt_core::simul::{generate_prefix_pairs, run_simul, SimulConfig, SimulMember};
use simulmt_core::synthetic::{parallel_toy_corpus, ToyAsrChannel, ToyCorpusSpec};

use crate::error::{CliError, CliResult};

pub fn words_tokenization(keep_case: bool, strip_punctuation: bool) -> Tokenization {
    Tokenization::Words(Normalization {
        lowercase: !keep_case,
        strip_punctuation,
    })
}

pub fn load_tokens(path: &Path, tok: Tokenization) -> CliResult<Vec<TokenSequence>> {
    Ok(read_lines(path)?.iter().map(|l| tok.apply(l)).collect())
}

fn same_length(a: (&Path, usize), b: (&Path, usize)) -> CliResult<()> {
    if a.1 == b.1 {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "line-count mismatch: {} has {} lines, {} has {}",
            a.0.display(),
            a.1,
            b.0.display(),
            b.1
        )))
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub struct ScoreArgs<'a> {
    pub hyp: &'a Path,
    pub refs: &'a [PathBuf],
    pub wer: bool,
    pub baseline: Option<&'a Path>,
    pub resamples: usize,
    pub seed: u64,
}

/// Corpus BLEU and chrF2 (and optionally WER against the first reference)
/// as `metric<TAB>value` rows; with a baseline, paired bootstrap rows follow.
pub fn cmd_score(args: &ScoreArgs<'_>) -> CliResult<String> {
    let hyps = read_lines(args.hyp)?;
    let mut refs = Vec::new();
    for r in args.refs {
        let lines = read_lines(r)?;
        same_length((args.hyp, hyps.len()), (r, lines.len()))?;
        refs.push(lines);
    }
    let mut out = String::from("metric\tvalue\n");
    let _ = writeln!(out, "BLEU\t{:.4}", bleu(&hyps, &refs)?);
    let _ = writeln!(out, "chrF2\t{:.4}", chrf2(&hyps, &refs)?);
    if args.wer {
        let tok = Tokenization::default();
        let pairs: Vec<TranscriptPair> = refs[0]
            .iter()
            .zip(&hyps)
            .map(|(g, h)| TranscriptPair::new(tok.apply(g), tok.apply(h)))
            .collect();
        let b = corpus_breakdown(&pairs);
        let w = b.wer().ok_or(simulmt_core::metrics::MetricsError::EmptyGold)?;
        let _ = writeln!(out, "WER\t{w:.4}");
        let _ = writeln!(out, "substitutions\t{}", b.substitutions);
        let _ = writeln!(out, "deletions\t{}", b.deletions);
        let _ = writeln!(out, "insertions\t{}", b.insertions);
        let _ = writeln!(out, "gold_words\t{}", b.gold_words);
    }
    if let Some(base) = args.baseline {
        let base_lines = read_lines(base)?;
        same_length((args.hyp, hyps.len()), (base, base_lines.len()))?;
        for metric in [MetricKind::Bleu, MetricKind::Chrf2] {
            // p is the share of resamples where the baseline is at least as good.
            let r = paired_bootstrap(&hyps, &base_lines, &refs, metric, args.resamples, args.seed)?;
            let name = metric.name();
            let _ = writeln!(out, "{name}_baseline\t{:.4}", r.score_b);
            let _ = writeln!(out, "{name}_p_value\t{:.4}", r.p_value);
        }
    }
    Ok(out)
}

pub fn cmd_noise_train(gold: &Path, asr: &Path, out: &Path, tok: Tokenization) -> CliResult<String> {
    let g = load_tokens(gold, tok)?;
    let a = load_tokens(asr, tok)?;
    same_length((gold, g.len()), (asr, a.len()))?;
    let pairs: Vec<TranscriptPair> = g.into_iter().zip(a).map(|(g, a)| TranscriptPair::new(g, a)).collect();
    let model = train_noise_model(&pairs)?;
    write_text(out, &model_to_string(&model))?;
    let b = corpus_breakdown(&pairs);
    let mut s = String::new();
    let _ = writeln!(s, "p_insert\t{:.6}", model.p_insert);
    let _ = writeln!(s, "p_delete\t{:.6}", model.p_delete);
    let _ = writeln!(s, "p_substitute\t{:.6}", model.p_substitute);
    let _ = writeln!(s, "expected_wer\t{:.6}", expected_wer(&model)?);
    let _ = writeln!(s, "training_wer\t{:.6}", b.wer().unwrap_or(0.0));
    Ok(s)
}

pub struct NoiseApplyArgs<'a> {
    pub model: &'a Path,
    pub target_wer: f64,
    pub seed: u64,
    pub input: &'a Path,
    pub output: &'a Path,
    pub uniform_fallback: bool,
    pub tokenization: Tokenization,
}

/// Rescales the model to the target WER and noises every line; line `i`
/// uses seed `seed XOR i`.
pub fn cmd_noise_apply(args: &NoiseApplyArgs<'_>) -> CliResult<String> {
    let model = load_model(args.model)?;
    let scaled = rescale_to_wer(&model, WerTarget::new(args.target_wer)?)?;
    let gold = load_tokens(args.input, args.tokenization)?;
    let fallback = if args.uniform_fallback {
        SubstitutionFallback::UniformVocabulary
    } else {
        SubstitutionFallback::Keep
    };
    let noisy = NoiseApplier::new(&scaled, fallback).apply_corpus(&gold, args.seed);
    write_lines(args.output, noisy.iter().map(TokenSequence::joined))?;
    let pairs: Vec<TranscriptPair> = gold.into_iter().zip(noisy).map(|(g, h)| TranscriptPair::new(g, h)).collect();
    let mut s = String::new();
    let _ = writeln!(s, "target_wer\t{:.6}", args.target_wer);
    let _ = writeln!(s, "scale_c\t{:.6}", scaled.scale_c);
    let _ = writeln!(s, "expected_wer\t{:.6}", expected_wer(&scaled)?);
    let _ = writeln!(s, "measured_wer\t{:.6}", corpus_breakdown(&pairs).wer().unwrap_or(0.0));
    Ok(s)
}

pub enum IndependenceInput<'a> {
    Files {
        src_gold: &'a Path,
        src_asr: &'a Path,
        tgt_gold: &'a Path,
        tgt_asr: &'a Path,
        alignment: &'a Path,
        tokenization: Tokenization,
    },
    /// Precomputed cells `[src ok/tgt ok, src ok/tgt err, src err/tgt ok,
    /// src err/tgt err]` plus source gold token count.
    Counts { cells: [u64; 4], src_gold_tokens: u64 },
}

pub fn cmd_independence(input: &IndependenceInput<'_>, alpha: f64, yates: bool, out: Option<&Path>) -> CliResult<String> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::config(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let report = match input {
        IndependenceInput::Files {
            src_gold,
            src_asr,
            tgt_gold,
            tgt_asr,
            alignment,
            tokenization,
        } => {
            let sg = load_tokens(src_gold, *tokenization)?;
            let sa = load_tokens(src_asr, *tokenization)?;
            let tg = load_tokens(tgt_gold, *tokenization)?;
            let ta = load_tokens(tgt_asr, *tokenization)?;
            let al: Vec<WordAlignment> = load_word_alignment(alignment)?;
            analyze_independence(Transcripts::new(&sg, &sa), Transcripts::new(&tg, &ta), &al, alpha, yates)?
        }
        IndependenceInput::Counts { cells, src_gold_tokens } => IndependenceReport::from_table(
            Contingency2x2::new([[cells[0], cells[1]], [cells[2], cells[3]]]),
            *src_gold_tokens,
            0,
            alpha,
            yates,
        )?,
    };
    if let Some(path) = out {
        write_text(path, &report.to_tsv())?;
    }
    Ok(report.summary())
}

pub struct SimulateArgs<'a> {
    pub sources: &'a [(String, PathBuf)],
    pub lexicons: &'a [(String, PathBuf)],
    pub config: SimulConfig,
    pub output: &'a Path,
    pub log: Option<&'a Path>,
    pub tokenization: Tokenization,
}

/// Streams every sentence through the lexicon mocks and writes the final
/// outputs, plus the concatenated event logs with a leading sentence column.
pub fn cmd_simulate(args: &SimulateArgs<'_>) -> CliResult<String> {
    if args.sources.is_empty() {
        return Err(CliError::config("at least one --source is required"));
    }
    let mut docs = Vec::new();
    let mut lexicons = Vec::new();
    for (lang, path) in args.sources {
        let lex_path = args
            .lexicons
            .iter()
            .find(|(l, _)| l == lang)
            .map(|(_, p)| p)
            .ok_or_else(|| CliError::config(format!("no --lexicon given for `{lang}`")))?;
        lexicons.push(load_lexicon(lex_path)?);
        docs.push(load_tokens(path, args.tokenization)?);
    }
    for (k, d) in docs.iter().enumerate().skip(1) {
        same_length((&args.sources[0].1, docs[0].len()), (&args.sources[k].1, d.len()))?;
    }
    let vocab = build_vocabulary(&lexicons, &[] as &[&str]);
    let translators: Vec<LexiconTranslator> = args
        .sources
        .iter()
        .zip(lexicons)
        .map(|((lang, _), lex)| LexiconTranslator::new(lang.clone(), lex, vocab.clone()))
        .collect();
    let mut outputs = Vec::with_capacity(docs[0].len());
    let mut log_text = String::from("sentence\tevent_index\tkind\tlanguage\ttoken\n");
    for i in 0..docs[0].len() {
        let members: Vec<SimulMember> = args
            .sources
            .iter()
            .zip(&docs)
            .zip(&translators)
            .filter(|((_, d), _)| !d[i].is_empty())
            .map(|(((lang, _), d), t)| SimulMember {
                language: lang,
                source: &d[i],
                translator: t,
            })
            .collect();
        if members.is_empty() {
            outputs.push(String::new());
            continue;
        }
        let out = run_simul(&members, &args.config)?;
        for line in out.log.to_tsv().lines().skip(1) {
            let _ = writeln!(log_text, "{}\t{line}", i + 1);
        }
        outputs.push(out.output.join(" "));
    }
    write_lines(args.output, &outputs)?;
    if let Some(p) = args.log {
        write_text(p, &log_text)?;
    }
    Ok(format!("sentences\t{}\n", outputs.len()))
}

pub struct PrefixPairArgs<'a> {
    pub src: &'a Path,
    pub tgt: &'a Path,
    pub samples: usize,
    pub seed: u64,
    pub out_src: &'a Path,
    pub out_tgt: &'a Path,
}

/// Prefix pairs plus matching full pairs for every sentence pair; sentence
/// `i` samples with seed `seed XOR i`. Empty sentence pairs are skipped.
pub fn cmd_prefix_pairs(args: &PrefixPairArgs<'_>) -> CliResult<String> {
    let src = read_lines(args.src)?;
    let tgt = read_lines(args.tgt)?;
    same_length((args.src, src.len()), (args.tgt, tgt.len()))?;
    let tok = Tokenization::Words(Normalization {
        lowercase: false,
        strip_punctuation: false,
    });
    let (mut out_s, mut out_t) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for (i, (s, t)) in src.iter().zip(&tgt).enumerate() {
        let (s, t) = (tok.apply(s), tok.apply(t));
        if s.is_empty() || t.is_empty() {
            skipped += 1;
            continue;
        }
        for p in generate_prefix_pairs(&s, &t, args.samples, sentence_seed(args.seed, i))? {
            out_s.push(p.source.raw().to_string());
            out_t.push(p.target.raw().to_string());
        }
    }
    write_lines(args.out_src, &out_s)?;
    write_lines(args.out_tgt, &out_t)?;
    Ok(format!("pairs\t{}\nskipped_sentences\t{skipped}\n", out_s.len()))
}

pub struct SynthArgs<'a> {
    pub out_dir: &'a Path,
    pub languages: &'a [String],
    pub target: &'a str,
    pub vocab_size: usize,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub seed: u64,
}

/// Writes a toy experiment kit: per source language gold/ASR training
/// transcripts, a test set and a lexicon; the target test references; identity
/// alignments between the first two languages; and a sweep config.
pub fn cmd_synth(args: &SynthArgs<'_>) -> CliResult<String> {
    if args.languages.is_empty() || args.vocab_size == 0 || args.test_sentences == 0 || args.train_sentences == 0 {
        return Err(CliError::config("need at least one language and non-zero sizes"));
    }
    let langs: Vec<&str> = args.languages.iter().map(String::as_str).collect();
    let spec = ToyCorpusSpec::new(&langs, args.vocab_size, args.train_sentences + args.test_sentences, args.seed);
    let c = parallel_toy_corpus(&spec);
    let dir = args.out_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    let split = args.train_sentences;
    let channel = ToyAsrChannel::default();
    for (k, lang) in args.languages.iter().enumerate() {
        let train = &c.sources[k][..split];
        let pairs = channel.training_pairs(train, &c.source_vocab[k], args.seed.wrapping_add(100 + k as u64));
        write_lines(&dir.join(format!("train.{lang}.gold")), pairs.iter().map(|p| p.gold.joined()))?;
        write_lines(&dir.join(format!("train.{lang}.asr")), pairs.iter().map(|p| p.hyp.joined()))?;
        write_lines(&dir.join(format!("test.{lang}")), c.sources[k][split..].iter().map(TokenSequence::joined))?;
        write_text(&dir.join(format!("lex.{lang}.tsv")), &lexicon_to_tsv(&c.lexicons[k]))?;
    }
    write_lines(
        &dir.join(format!("test.{}", args.target)),
        c.target[split..].iter().map(TokenSequence::joined),
    )?;
    if args.languages.len() >= 2 {
        let name = format!("train.{}-{}.align", args.languages[0], args.languages[1]);
        write_lines(
            &dir.join(name),
            c.sources[0][..split].iter().map(|s| {
                WordAlignment::new((0..s.len()).map(|i| (i, i)).collect())
                    .expect("distinct links")
                    .to_pharaoh()
            }),
        )?;
    }
    let mut cfg = String::new();
    let _ = writeln!(cfg, "version = 1");
    let _ = writeln!(cfg, "output_dir = \"results\"");
    let _ = writeln!(cfg, "seeds = [1, 2, 3]");
    let _ = writeln!(cfg, "la_sizes = [2, 5, 10, 15]");
    let _ = writeln!(cfg, "references = [\"test.{}\"]", args.target);
    for lang in args.languages {
        let _ = writeln!(cfg, "\n[[sources]]");
        let _ = writeln!(cfg, "language = \"{lang}\"");
        let _ = writeln!(cfg, "text = \"test.{lang}\"");
        let _ = writeln!(cfg, "lexicon = \"lex.{lang}.tsv\"");
        let _ = writeln!(cfg, "noise_model = \"noise.{lang}.model\"");
        let _ = writeln!(cfg, "wer = [0.0, 0.1, 0.2, 0.3]");
    }
    write_text(&dir.join("sweep.toml"), &cfg)?;
    Ok(format!(
        "languages\t{}\ntrain_sentences\t{}\ntest_sentences\t{}\n",
        args.languages.join(","),
        args.train_sentences,
        args.test_sentences
    ))
}
