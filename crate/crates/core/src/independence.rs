//! Cross-lingual ASR error independence: project per-token correctness of two
//! parallel ASR streams through gold word alignments and test the resulting
//! 2x2 table.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{TokenSequence, WordAlignment};
use crate::metrics::{align_edit, chi_square_2x2, token_correctness, ChiSquareResult, Contingency2x2, MetricsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndependenceError {
    #[error("{what}: expected {expected} sentences, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("sentence {sentence}: link {src}-{tgt} is out of range (source has {src_len} tokens, target has {tgt_len})")]
    LinkOutOfRange {
        sentence: usize,
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Gold and ASR transcripts of one language, sentence-aligned.
#[derive(Debug, Clone, Copy)]
pub struct Transcripts<'a> {
    pub gold: &'a [TokenSequence],
    pub asr: &'a [TokenSequence],
}

impl<'a> Transcripts<'a> {
    pub fn new(gold: &'a [TokenSequence], asr: &'a [TokenSequence]) -> Self {
        Self { gold, asr }
    }

    fn correctness(&self, i: usize) -> Vec<bool> {
        token_correctness(&align_edit(self.gold[i].tokens(), self.asr[i].tokens()))
    }

    fn gold_tokens(&self) -> usize {
        self.gold.iter().map(TokenSequence::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedCorrectness {
    pub src_index: usize,
    pub tgt_index: usize,
    pub src_correct: bool,
    pub tgt_correct: bool,
}

/// Aligned token pairs of every sentence with their correctness flags.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorrectnessProjection {
    pub sentences: Vec<Vec<AlignedCorrectness>>,
}

impl CorrectnessProjection {
    pub fn contingency(&self) -> Contingency2x2 {
        let mut table = Contingency2x2::default();
        for link in self.sentences.iter().flatten() {
            table.increment(link.src_correct, link.tgt_correct);
        }
        table
    }

    pub fn link_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Distinct (source, target) token counts covered by at least one link.
    pub fn unique_tokens(&self) -> (usize, usize) {
        let mut src = 0;
        let mut tgt = 0;
        for links in &self.sentences {
            src += links.iter().map(|l| l.src_index).collect::<BTreeSet<_>>().len();
            tgt += links.iter().map(|l| l.tgt_index).collect::<BTreeSet<_>>().len();
        }
        (src, tgt)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), IndependenceError> {
    if expected == got {
        Ok(())
    } else {
        Err(IndependenceError::LengthMismatch { what, expected, got })
    }
}

pub fn project_correctness(
    src: Transcripts<'_>,
    tgt: Transcripts<'_>,
    alignments: &[WordAlignment],
) -> Result<CorrectnessProjection, IndependenceError> {
    let n = src.gold.len();
    check_len("source ASR", n, src.asr.len())?;
    check_len("target gold", n, tgt.gold.len())?;
    check_len("target ASR", n, tgt.asr.len())?;
    check_len("alignments", n, alignments.len())?;
    let mut sentences = Vec::with_capacity(n);
    for (k, alignment) in alignments.iter().enumerate() {
        let (src_len, tgt_len) = (src.gold[k].len(), tgt.gold[k].len());
        if let Some((i, j)) = alignment.out_of_bounds(src_len, tgt_len) {
            return Err(IndependenceError::LinkOutOfRange {
                sentence: k + 1,
                src: i,
                tgt: j,
                src_len,
                tgt_len,
            });
        }
        let sc = src.correctness(k);
        let tc = tgt.correctness(k);
        sentences.push(
            alignment
                .links()
                .iter()
                .map(|&(i, j)| AlignedCorrectness {
                    src_index: i,
                    tgt_index: j,
                    src_correct: sc[i],
                    tgt_correct: tc[j],
                })
                .collect(),
        );
    }
    Ok(CorrectnessProjection { sentences })
}

/// One count per alignment link in the cell (source correct?, target correct?).
pub fn build_contingency(
    src: Transcripts<'_>,
    tgt: Transcripts<'_>,
    alignments: &[WordAlignment],
) -> Result<Contingency2x2, IndependenceError> {
    Ok(project_correctness(src, tgt, alignments)?.contingency())
}

/// Aligned links as a fraction of source gold tokens.
pub fn coverage(links: u64, src_gold_tokens: u64) -> f64 {
    if src_gold_tokens == 0 {
        0.0
    } else {
        links as f64 / src_gold_tokens as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    RejectIndependence,
    FailToReject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub link_count: u64,
    pub unique_src_tokens: u64,
    pub unique_tgt_tokens: u64,
    pub src_gold_tokens: u64,
    pub tgt_gold_tokens: u64,
    pub coverage: f64,
    pub table: Contingency2x2,
    pub test: ChiSquareResult,
    pub alpha: f64,
    pub decision: Decision,
}

impl IndependenceReport {
    /// Builds the report from a table and token tallies; unique-token counts
    /// default to the link count when unknown.
    pub fn from_table(
        table: Contingency2x2,
        src_gold_tokens: u64,
        tgt_gold_tokens: u64,
        alpha: f64,
        yates: bool,
    ) -> Result<Self, IndependenceError> {
        let test = chi_square_2x2(&table, yates)?;
        let link_count = table.total();
        Ok(Self {
            link_count,
            unique_src_tokens: link_count,
            unique_tgt_tokens: link_count,
            src_gold_tokens,
            tgt_gold_tokens,
            coverage: coverage(link_count, src_gold_tokens),
            table,
            test,
            alpha,
            decision: if test.reject_at(alpha) {
                Decision::RejectIndependence
            } else {
                Decision::FailToReject
            },
        })
    }

    pub fn to_tsv(&self) -> String {
        let c = self.table.cells;
        let rows: [(&str, String); 16] = [
            ("links", self.link_count.to_string()),
            ("unique_src_tokens", self.unique_src_tokens.to_string()),
            ("unique_tgt_tokens", self.unique_tgt_tokens.to_string()),
            ("src_gold_tokens", self.src_gold_tokens.to_string()),
            ("tgt_gold_tokens", self.tgt_gold_tokens.to_string()),
            ("coverage_pct", format!("{:.2}", 100.0 * self.coverage)),
            ("src_ok_tgt_ok", c[0][0].to_string()),
            ("src_ok_tgt_err", c[0][1].to_string()),
            ("src_err_tgt_ok", c[1][0].to_string()),
            ("src_err_tgt_err", c[1][1].to_string()),
            ("chi2", format!("{}", self.test.statistic)),
            ("df", self.test.df.to_string()),
            ("p_value", format!("{:e}", self.test.p_value)),
            ("alpha", format!("{}", self.alpha)),
            ("critical_value", format!("{}", crate::metrics::chisq::chi2_1_critical(self.alpha))),
            (
                "decision",
                match self.decision {
                    Decision::RejectIndependence => "reject",
                    Decision::FailToReject => "fail_to_reject",
                }
                .to_string(),
            ),
        ];
        let mut s = String::from("key\tvalue\n");
        for (k, v) in rows {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    pub fn summary(&self) -> String {
        let c = self.table.cells;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "aligned links: {} ({:.2}% of {} source gold tokens); unique tokens src {} / tgt {}",
            self.link_count,
            100.0 * self.coverage,
            self.src_gold_tokens,
            self.unique_src_tokens,
            self.unique_tgt_tokens
        );
        let _ = writeln!(s, "                 tgt correct  tgt error");
        let _ = writeln!(s, "src correct   {:>13} {:>10}", c[0][0], c[0][1]);
        let _ = writeln!(s, "src error     {:>13} {:>10}", c[1][0], c[1][1]);
        let _ = writeln!(
            s,
            "chi2 = {:.4} (df {}), p = {:.3e}, alpha = {}",
            self.test.statistic, self.test.df, self.test.p_value, self.alpha
        );
        match self.decision {
            Decision::RejectIndependence => {
                let _ = writeln!(
                    s,
                    "conventional reading: independence rejected at alpha = {}; the error streams are associated",
                    self.alpha
                );
                let _ = writeln!(
                    s,
                    "alternative reading: p < alpha read as evidence of independent errors (not supported by the test's null hypothesis)"
                );
            }
            Decision::FailToReject => {
                let _ = writeln!(
                    s,
                    "conventional reading: independence not rejected at alpha = {}",
                    self.alpha
                );
                let _ = writeln!(s, "alternative reading: no association detected between the error streams");
            }
        }
        s
    }
}

pub fn analyze_independence(
    src: Transcripts<'_>,
    tgt: Transcripts<'_>,
    alignments: &[WordAlignment],
    alpha: f64,
    yates: bool,
) -> Result<IndependenceReport, IndependenceError> {
    let projection = project_correctness(src, tgt, alignments)?;
    let mut report = IndependenceReport::from_table(
        projection.contingency(),
        src.gold_tokens() as u64,
        tgt.gold_tokens() as u64,
        alpha,
        yates,
    )?;
    let (us, ut) = projection.unique_tokens();
    report.unique_src_tokens = us as u64;
    report.unique_tgt_tokens = ut as u64;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(lines: &[&str]) -> Vec<TokenSequence> {
        lines
            .iter()
            .map(|l| TokenSequence::from_words(&l.split_whitespace().collect::<Vec<_>>()))
            .collect()
    }

    fn identity_links(doc: &[TokenSequence]) -> Vec<WordAlignment> {
        doc.iter()
            .map(|s| WordAlignment::new((0..s.len()).map(|i| (i, i)).collect()).unwrap())
            .collect()
    }

    #[test]
    fn toy_corpus_table() {
        let sg = seqs(&["the cat sleeps", "a dog barks loudly"]);
        let sa = seqs(&["the bat sleeps", "a dog barks loudly"]);
        let tg = seqs(&["die katze schläft", "ein hund bellt laut"]);
        let ta = seqs(&["die katze schläft", "ein hund fällt laut"]);
        let al = identity_links(&sg);
        let t = build_contingency(Transcripts::new(&sg, &sa), Transcripts::new(&tg, &ta), &al).unwrap();
        // 7 links; the source error is on link (1,1) of sentence 1, the target
        // error on link (2,2) of sentence 2.
        assert_eq!(t.cells, [[5, 1], [1, 0]]);
        assert_eq!(t.total(), 7);
    }

    #[test]
    fn clean_streams_fill_one_cell() {
        let g = seqs(&["a b c", "d e"]);
        let al = identity_links(&g);
        let t = build_contingency(Transcripts::new(&g, &g), Transcripts::new(&g, &g), &al).unwrap();
        assert_eq!(t.cells, [[5, 0], [0, 0]]);
    }

    #[test]
    fn empty_alignment_is_degenerate_downstream() {
        let g = seqs(&["a b c"]);
        let al = vec![WordAlignment::default()];
        let t = build_contingency(Transcripts::new(&g, &g), Transcripts::new(&g, &g), &al).unwrap();
        assert_eq!(t.cells, [[0, 0], [0, 0]]);
        assert!(matches!(
            analyze_independence(Transcripts::new(&g, &g), Transcripts::new(&g, &g), &al, 0.01, false),
            Err(IndependenceError::Metrics(MetricsError::DegenerateTable { .. }))
        ));
    }

    #[test]
    fn out_of_range_link_names_sentence() {
        let g = seqs(&["a b", "c d"]);
        let al = vec![
            WordAlignment::new(vec![(0, 0)]).unwrap(),
            WordAlignment::new(vec![(0, 5)]).unwrap(),
        ];
        let err = build_contingency(Transcripts::new(&g, &g), Transcripts::new(&g, &g), &al).unwrap_err();
        assert!(matches!(err, IndependenceError::LinkOutOfRange { sentence: 2, src: 0, tgt: 5, .. }));
        assert!(err.to_string().contains("sentence 2"));
    }

    #[test]
    fn swapping_sides_transposes() {
        let sg = seqs(&["a b c d e f", "g h i j"]);
        let sa = seqs(&["a x c d f", "g h i j k"]);
        let tg = seqs(&["A B C D E F", "G H I J"]);
        let ta = seqs(&["A B Y D E F", "G Z I"]);
        let al = vec![
            WordAlignment::new(vec![(0, 0), (1, 1), (1, 2), (2, 2), (4, 5), (5, 3)]).unwrap(),
            WordAlignment::new(vec![(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap(),
        ];
        let flipped: Vec<WordAlignment> = al
            .iter()
            .map(|a| WordAlignment::new(a.links().iter().map(|&(i, j)| (j, i)).collect()).unwrap())
            .collect();
        let fwd = build_contingency(Transcripts::new(&sg, &sa), Transcripts::new(&tg, &ta), &al).unwrap();
        let back = build_contingency(Transcripts::new(&tg, &ta), Transcripts::new(&sg, &sa), &flipped).unwrap();
        assert_eq!(back, fwd.transpose());
        assert_eq!(fwd.total(), 10);
    }

    #[test]
    fn large_scale_coverage() {
        let c = coverage(16962, 44494);
        assert_eq!(format!("{:.2}", 100.0 * c), "38.12");
        assert_eq!(c, 16962.0 / 44494.0);
        let r = IndependenceReport::from_table(
            Contingency2x2::new([[13815, 1497], [1228, 422]]),
            44494,
            0,
            0.01,
            false,
        )
        .unwrap();
        assert_eq!(r.link_count, 16962);
        assert_eq!(r.decision, Decision::RejectIndependence);
        assert!(r.to_tsv().contains("coverage_pct\t38.12\n"));
        assert!(r.summary().contains("alternative reading"));
    }

    #[test]
    fn unique_token_tallies() {
        let g = seqs(&["a b c"]);
        let al = vec![WordAlignment::new(vec![(0, 0), (0, 1), (1, 1)]).unwrap()];
        let r = analyze_independence(
            Transcripts::new(&g, &seqs(&["a x c"])),
            Transcripts::new(&g, &seqs(&["y b c"])),
            &al,
            0.01,
            false,
        );
        let r = r.unwrap();
        assert_eq!(r.table.cells, [[1, 1], [1, 0]]);
        assert_eq!((r.link_count, r.unique_src_tokens, r.unique_tgt_tokens), (3, 2, 2));
    }
}
