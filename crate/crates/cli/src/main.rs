use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use simulmt_core::simul::SimulConfig;
use simulmt_cli::commands::{self, IndependenceInput};
use simulmt_cli::config::{CombinerName, ModeName};
use simulmt_cli::error::{CliError, CliResult};
use simulmt_cli::sweep;

#[derive(Parser)]
#[command(name = "simulmt", version, about = "Simultaneous multi-source translation experiments under ASR noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct TokenFlags {
    /// Do not lowercase before whitespace tokenization.
    #[arg(long)]
    keep_case: bool,
    /// Trim punctuation from both ends of every word.
    #[arg(long)]
    strip_punct: bool,
}

impl TokenFlags {
    fn tokenization(self) -> simulmt_core::corpus::Tokenization {
        commands::words_tokenization(self.keep_case, self.strip_punct)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    Mean,
    MeanLogSoftmax,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Committed,
    Retranslation,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus BLEU and chrF2, optionally WER and a paired bootstrap test.
    Score {
        #[arg(long)]
        hyp: PathBuf,
        /// Reference file; repeat for multiple references.
        #[arg(long = "ref", required = true)]
        refs: Vec<PathBuf>,
        /// Also report WER against the first reference.
        #[arg(long)]
        wer: bool,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Learn a lexical noise model from gold/ASR transcript pairs.
    NoiseTrain {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        asr: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tok: TokenFlags,
    },
    /// Rescale a noise model to a target WER and corrupt a text.
    NoiseApply {
        #[arg(long)]
        model: PathBuf,
        /// Target WER as a ratio, e.g. 0.15.
        #[arg(long)]
        wer: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Substitute unseen words with a uniform draw over the learned vocabulary.
        #[arg(long)]
        uniform_fallback: bool,
        #[command(flatten)]
        tok: TokenFlags,
    },
    /// Chi-square test of ASR error independence across two languages.
    Independence {
        #[arg(long, requires_all = ["src_asr", "tgt_gold", "tgt_asr", "alignment"], conflicts_with = "counts")]
        src_gold: Option<PathBuf>,
        #[arg(long)]
        src_asr: Option<PathBuf>,
        #[arg(long)]
        tgt_gold: Option<PathBuf>,
        #[arg(long)]
        tgt_asr: Option<PathBuf>,
        /// Pharaoh `i-j` alignments, one line per sentence.
        #[arg(long)]
        alignment: Option<PathBuf>,
        /// Precomputed cells: both ok, src ok/tgt err, src err/tgt ok, both err.
        #[arg(long, value_delimiter = ',', requires = "src_gold_tokens")]
        counts: Option<Vec<u64>>,
        #[arg(long)]
        src_gold_tokens: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Apply Yates' continuity correction.
        #[arg(long)]
        yates: bool,
        /// Write the full report as TSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tok: TokenFlags,
    },
    /// Stream sentences through lexicon translators with Local Agreement.
    Simulate {
        /// `lang=path`; repeat for multi-source.
        #[arg(long = "source", required = true, value_parser = parse_pair)]
        sources: Vec<(String, PathBuf)>,
        /// `lang=path` lexicon for each source language.
        #[arg(long = "lexicon", required = true, value_parser = parse_pair)]
        lexicons: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = 2)]
        la: usize,
        #[arg(long, value_enum, default_value_t = CombinerArg::Mean)]
        combiner: CombinerArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Committed)]
        mode: ModeArg,
        /// Count only reads of the first source as updates.
        #[arg(long)]
        primary_reads_only: bool,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        tok: TokenFlags,
    },
    /// Run a configured experiment grid.
    Sweep { config: PathBuf },
    /// Sample source/target prefix pairs for training.
    PrefixPairs {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out_src: PathBuf,
        #[arg(long)]
        out_tgt: PathBuf,
    },
    /// Write a synthetic toy experiment kit.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "en,de")]
        languages: Vec<String>,
        #[arg(long, default_value = "cs")]
        target: String,
        #[arg(long, default_value_t = 150)]
        vocab_size: usize,
        #[arg(long, default_value_t = 1200)]
        train_sentences: usize,
        #[arg(long, default_value_t = 300)]
        test_sentences: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn parse_pair(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((l, p)) if !l.is_empty() && !p.is_empty() => Ok((l.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected LANG=PATH, got `{s}`")),
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Score { hyp, refs, wer, baseline, resamples, seed } => commands::cmd_score(&commands::ScoreArgs {
            hyp: &hyp,
            refs: &refs,
            wer,
            baseline: baseline.as_deref(),
            resamples,
            seed,
        }),
        Command::NoiseTrain { gold, asr, out, tok } => commands::cmd_noise_train(&gold, &asr, &out, tok.tokenization()),
        Command::NoiseApply { model, wer, seed, input, output, uniform_fallback, tok } => {
            commands::cmd_noise_apply(&commands::NoiseApplyArgs {
                model: &model,
                target_wer: wer,
                seed,
                input: &input,
                output: &output,
                uniform_fallback,
                tokenization: tok.tokenization(),
            })
        }
        Command::Independence {
            src_gold,
            src_asr,
            tgt_gold,
            tgt_asr,
            alignment,
            counts,
            src_gold_tokens,
            alpha,
            yates,
            out,
            tok,
        } => {
            let input = match (counts, src_gold_tokens, &src_gold) {
                (Some(c), _, _) if c.len() != 4 => {
                    return Err(CliError::config(format!("--counts takes 4 values, got {}", c.len())));
                }
                (Some(c), Some(n), None) => IndependenceInput::Counts {
                    cells: [c[0], c[1], c[2], c[3]],
                    src_gold_tokens: n,
                },
                (None, _, Some(sg)) => IndependenceInput::Files {
                    src_gold: sg,
                    src_asr: src_asr.as_deref().expect("required by clap"),
                    tgt_gold: tgt_gold.as_deref().expect("required by clap"),
                    tgt_asr: tgt_asr.as_deref().expect("required by clap"),
                    alignment: alignment.as_deref().expect("required by clap"),
                    tokenization: tok.tokenization(),
                },
                _ => return Err(CliError::config("give either the four transcript files and --alignment, or --counts")),
            };
            commands::cmd_independence(&input, alpha, yates, out.as_deref())
        }
        Command::Simulate {
            sources,
            lexicons,
            la,
            combiner,
            mode,
            primary_reads_only,
            output,
            log,
            tok,
        } => {
            if la == 0 {
                return Err(CliError::config("--la must be at least 1"));
            }
            let combiner = match combiner {
                CombinerArg::Mean => CombinerName::Mean,
                CombinerArg::MeanLogSoftmax => CombinerName::MeanLogSoftmax,
            };
            let mode = match mode {
                ModeArg::Committed => ModeName::Committed,
                ModeArg::Retranslation => ModeName::Retranslation,
            };
            let config = SimulConfig {
                la_n: la,
                combiner: combiner.into(),
                count_all_reads: !primary_reads_only,
                mode: mode.into(),
                tie_order: sources.iter().map(|(l, _)| l.clone()).collect(),
                check_determinism: true,
            };
            commands::cmd_simulate(&commands::SimulateArgs {
                sources: &sources,
                lexicons: &lexicons,
                config,
                output: &output,
                log: log.as_deref(),
                tokenization: tok.tokenization(),
            })
        }
        Command::Sweep { config } => sweep::cmd_sweep(&config),
        Command::PrefixPairs { src, tgt, samples, seed, out_src, out_tgt } => {
            commands::cmd_prefix_pairs(&commands::PrefixPairArgs {
                src: &src,
                tgt: &tgt,
                samples,
                seed,
                out_src: &out_src,
                out_tgt: &out_tgt,
            })
        }
        Command::Synth { out_dir, languages, target, vocab_size, train_sentences, test_sentences, seed } => {
            commands::cmd_synth(&commands::SynthArgs {
                out_dir: &out_dir,
                languages: &languages,
                target: &target,
                vocab_size,
                train_sentences,
                test_sentences,
                seed,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
