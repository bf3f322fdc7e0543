use std::collections::HashMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simulmt_core::corpus::{read_lines, TranscriptPair, Tokenization};
use simulmt_core::metrics::{align_edit, bleu, chrf2, corpus_wer, edit_distance};

fn fixture(name: &str) -> Vec<String> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    read_lines(&p).unwrap()
}

// sacrebleu 2.6.0 corpus_bleu / corpus_chrf with default settings, and
// jiwer 4 corpus WER on the lowercased whitespace tokens.
const BLEU_1REF: f64 = 48.59734897435434;
const BLEU_2REF: f64 = 55.96210310067428;
const CHRF_1REF: f64 = 77.25900007864267;
const CHRF_2REF: f64 = 78.07304361710844;
const WER: f64 = 0.26842105263157895;

#[test]
fn twenty_sentence_fixture() {
    let hyp = fixture("metrics.hyp");
    let r1 = fixture("metrics.ref");
    let r2 = fixture("metrics.ref2");
    assert_eq!(hyp.len(), 20);
    let one = vec![r1.clone()];
    let two = vec![r1.clone(), r2];
    assert!((bleu(&hyp, &one).unwrap() - BLEU_1REF).abs() < 1e-4);
    assert!((bleu(&hyp, &two).unwrap() - BLEU_2REF).abs() < 1e-4);
    assert!((chrf2(&hyp, &one).unwrap() - CHRF_1REF).abs() < 1e-4);
    assert!((chrf2(&hyp, &two).unwrap() - CHRF_2REF).abs() < 1e-4);
    let tok = Tokenization::default();
    let pairs: Vec<TranscriptPair> = r1
        .iter()
        .zip(&hyp)
        .map(|(g, h)| TranscriptPair::new(tok.apply(g), tok.apply(h)))
        .collect();
    assert!((corpus_wer(&pairs).unwrap() - WER).abs() < 1e-4);
}

/// Minimum over every way of consuming both strings one operation at a time.
fn oracle(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len() + b.len();
    }
    if let Some(&v) = memo.get(&(a.len(), b.len())) {
        return v;
    }
    let sub = oracle(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
    let del = oracle(&a[1..], b, memo) + 1;
    let ins = oracle(a, &b[1..], memo) + 1;
    let v = sub.min(del).min(ins);
    memo.insert((a.len(), b.len()), v);
    v
}

#[test]
fn edit_distance_matches_recursive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..3000 {
        let la = rng.random_range(0..=12);
        let lb = rng.random_range(0..=12);
        let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..4)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..4)).collect();
        let want = oracle(&a, &b, &mut HashMap::new());
        assert_eq!(edit_distance(&a, &b), want, "{a:?} {b:?}");
        let sa: Vec<String> = a.iter().map(u8::to_string).collect();
        let sb: Vec<String> = b.iter().map(u8::to_string).collect();
        let script = align_edit(&sa, &sb);
        assert_eq!(script.cost(), want);
        assert_eq!(script.gold(), sa.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(script.hyp(), sb.iter().map(String::as_str).collect::<Vec<_>>());
    }
}
