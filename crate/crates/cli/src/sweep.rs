//! Grid experiments: WER grid x agreement sizes x systems x seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use simulmt_core::corpus::{read_lines, TokenSequence, Tokenization, Normalization};
use simulmt_core::metrics::{average_lagging, bleu, chrf2, normalized_erasure};
use simulmt_core::mock_mt::{build_vocabulary, load_lexicon, LexiconTranslator, ReorderingTranslator};
use simulmt_core::noise::{load_model, rescale_to_wer, LexicalNoiseModel, NoiseApplier, SubstitutionFallback, WerTarget};
use simulmt_core::simul::{IncrementalTranslator, SimulConfig, SimulMember, run_simul};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MULTI: &str = "multi";

/// One grid cell and seed for one system and agreement size.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Target WER per source language, in config order.
    pub wer: Vec<f64>,
    pub system: String,
    pub la_n: usize,
    pub bleu: f64,
    pub chrf2: f64,
    pub al: f64,
    pub ne: f64,
    pub seed: u64,
}

/// Noise seed for source language `k`: the first output of a ChaCha8
/// stream keyed by the run seed, on stream `k + 1`.
pub fn language_seed(seed: u64, k: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64 + 1);
    rng.random()
}

struct Prepared {
    languages: Vec<String>,
    sources: Vec<Vec<TokenSequence>>,
    refs: Vec<Vec<String>>,
    /// `scaled[k][w]` is language k's model rescaled to its w-th WER target.
    scaled: Vec<Vec<Option<LexicalNoiseModel>>>,
    translators: Vec<Box<dyn IncrementalTranslator>>,
    simul: SimulConfig,
    primary: String,
    uniform_fallback: bool,
}

fn prepare(cfg: &ExperimentConfig) -> CliResult<Prepared> {
    let tok = Tokenization::Words(Normalization {
        lowercase: cfg.lowercase,
        strip_punctuation: false,
    });
    let mut sources = Vec::new();
    let mut lexicons = Vec::new();
    let mut scaled = Vec::new();
    for s in &cfg.sources {
        let lines = read_lines(&s.text)?;
        sources.push(lines.iter().map(|l| tok.apply(l)).collect::<Vec<_>>());
        lexicons.push(load_lexicon(&s.lexicon)?);
        let model = match &s.noise_model {
            Some(p) => Some(load_model(p)?),
            None => None,
        };
        let mut per_wer = Vec::new();
        for &w in &s.wer {
            per_wer.push(match (&model, w > 0.0) {
                (Some(m), true) => Some(
                    rescale_to_wer(m, WerTarget::new(w)?)
                        .map_err(|e| CliError::from(e).context(format!("source `{}`", s.language)))?,
                ),
                _ => None,
            });
        }
        scaled.push(per_wer);
    }
    let mut refs = Vec::new();
    for r in &cfg.references {
        refs.push(read_lines(r)?);
    }
    let n = sources[0].len();
    for (k, s) in sources.iter().enumerate() {
        if s.len() != n {
            return Err(CliError::input(format!(
                "{} has {} lines, {} has {n}",
                cfg.sources[k].text.display(),
                s.len(),
                cfg.sources[0].text.display()
            )));
        }
    }
    for (k, r) in refs.iter().enumerate() {
        if r.len() != n {
            return Err(CliError::input(format!(
                "{} has {} lines, sources have {n}",
                cfg.references[k].display(),
                r.len()
            )));
        }
    }
    let vocab = build_vocabulary(&lexicons, &[] as &[&str]);
    let translators = cfg
        .sources
        .iter()
        .zip(lexicons)
        .map(|(s, lex)| {
            let mut t = LexiconTranslator::new(s.language.clone(), lex, vocab.clone()).with_policy(s.unknown_policy.into());
            if let Some(m) = s.unknown_margin {
                t = t.with_unknown_margin(m);
            }
            if s.deferred.is_empty() {
                Box::new(t) as Box<dyn IncrementalTranslator>
            } else {
                Box::new(ReorderingTranslator::new(t, s.deferred.iter().cloned()))
            }
        })
        .collect();
    let tie_order = if cfg.tie_order.is_empty() {
        cfg.languages()
    } else {
        cfg.tie_order.clone()
    };
    Ok(Prepared {
        languages: cfg.languages(),
        sources,
        refs,
        scaled,
        translators,
        simul: SimulConfig {
            la_n: 1,
            combiner: cfg.combiner.into(),
            count_all_reads: cfg.count_all_reads,
            mode: cfg.mode.into(),
            tie_order,
            check_determinism: cfg.check_determinism,
        },
        primary: cfg.primary_language().to_string(),
        uniform_fallback: cfg.uniform_fallback,
    })
}

/// Every combination of per-language WER indices, first language slowest.
fn grid_cells(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new()];
    for &n in sizes {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                (0..n).map(move |i| {
                    let mut c = c.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    cells
}

#[derive(Default)]
struct SystemScores {
    bleu: f64,
    chrf2: f64,
    al: f64,
    ne: f64,
}

#[allow(clippy::needless_range_loop)]
fn run_system(p: &Prepared, noisy: &[Vec<TokenSequence>], members_idx: &[usize], primary: &str, la_n: usize) -> CliResult<SystemScores> {
    let cfg = SimulConfig {
        la_n,
        ..p.simul.clone()
    };
    let n = p.refs[0].len();
    let mut hyps = Vec::with_capacity(n);
    let (mut al_sum, mut al_count) = (0.0, 0usize);
    let (mut erased, mut final_len) = (0usize, 0usize);
    for i in 0..n {
        let members: Vec<SimulMember> = members_idx
            .iter()
            .filter(|&&k| !noisy[k][i].is_empty())
            .map(|&k| SimulMember {
                language: &p.languages[k],
                source: &noisy[k][i],
                translator: p.translators[k].as_ref(),
            })
            .collect();
        if members.is_empty() {
            hyps.push(String::new());
            continue;
        }
        let out = run_simul(&members, &cfg)?;
        if let Ok(l) = average_lagging(&out.log, primary) {
            al_sum += l.al;
            al_count += 1;
        }
        if let Ok(e) = normalized_erasure(&out.log) {
            erased += e.erased_tokens;
            final_len += e.final_length;
        }
        hyps.push(out.output.join(" "));
    }
    Ok(SystemScores {
        bleu: bleu(&hyps, &p.refs)?,
        chrf2: chrf2(&hyps, &p.refs)?,
        al: if al_count > 0 { al_sum / al_count as f64 } else { 0.0 },
        ne: if final_len > 0 { erased as f64 / final_len as f64 } else { 0.0 },
    })
}

fn run_job(p: &Prepared, cfg: &ExperimentConfig, cell: &[usize], seed: u64) -> CliResult<Vec<ResultRow>> {
    let fallback = if p.uniform_fallback {
        SubstitutionFallback::UniformVocabulary
    } else {
        SubstitutionFallback::Keep
    };
    let noisy: Vec<Vec<TokenSequence>> = cell
        .iter()
        .enumerate()
        .map(|(k, &w)| match &p.scaled[k][w] {
            Some(m) => NoiseApplier::new(m, fallback).apply_corpus(&p.sources[k], language_seed(seed, k)),
            None => p.sources[k].clone(),
        })
        .collect();
    let wer: Vec<f64> = cell.iter().enumerate().map(|(k, &w)| cfg.sources[k].wer[w]).collect();
    let mut systems: Vec<(String, Vec<usize>, String)> = (0..p.languages.len())
        .map(|k| (p.languages[k].clone(), vec![k], p.languages[k].clone()))
        .collect();
    if p.languages.len() > 1 {
        systems.push((MULTI.to_string(), (0..p.languages.len()).collect(), p.primary.clone()));
    }
    let mut rows = Vec::new();
    for (name, members, primary) in &systems {
        for &la_n in &cfg.la_sizes {
            let s = run_system(p, &noisy, members, primary, la_n)?;
            rows.push(ResultRow {
                wer: wer.clone(),
                system: name.clone(),
                la_n,
                bleu: s.bleu,
                chrf2: s.chrf2,
                al: s.al,
                ne: s.ne,
                seed,
            });
        }
    }
    Ok(rows)
}

/// Runs every job, then orders rows by grid cell, system, agreement size and
/// seed, each in config order.
pub fn run_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<ResultRow>> {
    let p = prepare(cfg)?;
    let cells = grid_cells(&cfg.sources.iter().map(|s| s.wer.len()).collect::<Vec<_>>());
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.seeds.len()).map(move |s| (c, s)))
        .collect();
    eprintln!("sweep: {} cells x {} seeds", cells.len(), cfg.seeds.len());
    let results: Vec<CliResult<Vec<(usize, usize, ResultRow)>>> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let rows = run_job(&p, cfg, &cells[c], cfg.seeds[s])?;
            Ok(rows.into_iter().map(|r| (c, s, r)).collect())
        })
        .collect();
    let mut keyed = Vec::new();
    for r in results {
        keyed.extend(r?);
    }
    let system_rank = |name: &str| p.languages.iter().position(|l| l == name).unwrap_or(p.languages.len());
    let la_rank = |n: usize| cfg.la_sizes.iter().position(|&x| x == n).unwrap_or(usize::MAX);
    keyed.sort_by_key(|(c, s, r)| (*c, system_rank(&r.system), la_rank(r.la_n), *s));
    Ok(keyed.into_iter().map(|(_, _, r)| r).collect())
}

pub fn results_header(languages: &[String]) -> String {
    let mut h: Vec<String> = languages.iter().map(|l| format!("{l}_wer")).collect();
    h.extend(["system", "la_n", "bleu", "chrf2", "al", "ne", "seed"].map(String::from));
    h.join("\t")
}

pub fn results_tsv(languages: &[String], rows: &[ResultRow]) -> String {
    let mut s = results_header(languages);
    s.push('\n');
    for r in rows {
        for w in &r.wer {
            let _ = write!(s, "{w:.4}\t");
        }
        let _ = writeln!(
            s,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
            r.system, r.la_n, r.bleu, r.chrf2, r.al, r.ne, r.seed
        );
    }
    s
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub wer: Vec<f64>,
    pub system: String,
    pub la_n: usize,
    pub bleu: (f64, f64),
    pub chrf2: (f64, f64),
    pub al: (f64, f64),
    pub ne: (f64, f64),
    pub seeds: usize,
}

/// Averages rows over seeds, keeping the row order of the first seed.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    let key = |r: &ResultRow| (r.wer.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), r.system.clone(), r.la_n);
    let mut index = std::collections::HashMap::new();
    for r in rows {
        let k = key(r);
        let id = *index.entry(k).or_insert_with(|| {
            order.push(r);
            order.len() - 1
        });
        groups.entry(id).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let col = |f: fn(&ResultRow) -> f64| mean_std(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                wer: g[0].wer.clone(),
                system: g[0].system.clone(),
                la_n: g[0].la_n,
                bleu: col(|r| r.bleu),
                chrf2: col(|r| r.chrf2),
                al: col(|r| r.al),
                ne: col(|r| r.ne),
                seeds: g.len(),
            }
        })
        .collect()
}

pub fn summary_tsv(languages: &[String], rows: &[SummaryRow]) -> String {
    let mut h: Vec<String> = languages.iter().map(|l| format!("{l}_wer")).collect();
    h.extend(
        [
            "system", "la_n", "bleu_mean", "bleu_std", "chrf2_mean", "chrf2_std", "al_mean", "al_std", "ne_mean",
            "ne_std", "seeds",
        ]
        .map(String::from),
    );
    let mut s = h.join("\t");
    s.push('\n');
    for r in rows {
        for w in &r.wer {
            let _ = write!(s, "{w:.4}\t");
        }
        let _ = writeln!(
            s,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
            r.system, r.la_n, r.bleu.0, r.bleu.1, r.chrf2.0, r.chrf2.1, r.al.0, r.al.1, r.ne.0, r.ne.1, r.seeds
        );
    }
    s
}

fn cell_name(languages: &[String], wer: &[f64]) -> String {
    let parts: Vec<String> = languages
        .iter()
        .zip(wer)
        .map(|(l, w)| format!("{l}{:.1}", 100.0 * w))
        .collect();
    format!("tradeoff_{}.tsv", parts.join("_"))
}

/// One (AL, BLEU) point file per noise cell.
pub fn tradeoff_files(languages: &[String], rows: &[SummaryRow]) -> Vec<(String, String)> {
    let mut files: Vec<(String, String)> = Vec::new();
    for r in rows {
        let name = cell_name(languages, &r.wer);
        if files.last().is_none_or(|(n, _)| *n != name) {
            files.push((name, "system\tla_n\tal\tbleu\tbleu_std\n".to_string()));
        }
        let body = &mut files.last_mut().expect("just pushed").1;
        let _ = writeln!(body, "{}\t{}\t{:.4}\t{:.4}\t{:.4}", r.system, r.la_n, r.al.0, r.bleu.0, r.bleu.1);
    }
    files
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

/// Runs the sweep and writes `results.tsv`, `summary.tsv` and the trade-off
/// files into the output directory. Returns the stdout summary.
pub fn cmd_sweep(config_path: &Path) -> CliResult<String> {
    let cfg = ExperimentConfig::load(config_path)?;
    let rows = run_sweep(&cfg)?;
    let langs = cfg.languages();
    let summary = summarize(&rows);
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::input(format!("{}: {e}", cfg.output_dir.display())))?;
    write(&cfg.output_dir.join("results.tsv"), &results_tsv(&langs, &rows))?;
    let summary_text = summary_tsv(&langs, &summary);
    write(&cfg.output_dir.join("summary.tsv"), &summary_text)?;
    for (name, body) in tradeoff_files(&langs, &summary) {
        write(&cfg.output_dir.join(name), &body)?;
    }
    let mut out = String::new();
    for r in &summary {
        let cell: Vec<String> = langs.iter().zip(&r.wer).map(|(l, w)| format!("{l}={:.0}%", 100.0 * w)).collect();
        let _ = writeln!(
            out,
            "{:<24} {:<8} LA-{:<3} BLEU {:6.2}±{:5.2}  AL {:6.2}",
            cell.join(" "),
            r.system,
            r.la_n,
            r.bleu.0,
            r.bleu.1,
            r.al.0
        );
    }
    Ok(out)
}
