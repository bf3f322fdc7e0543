use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn simulmt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulmt")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = simulmt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Small two-language kit with trained noise models.
fn kit() -> TempDir {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(&[
        "synth", "--out-dir", p(d), "--vocab-size", "60", "--train-sentences", "300", "--test-sentences", "30",
        "--seed", "5",
    ]);
    for l in ["en", "de"] {
        ok(&[
            "noise-train",
            "--gold",
            p(&d.join(format!("train.{l}.gold"))),
            "--asr",
            p(&d.join(format!("train.{l}.asr"))),
            "--out",
            p(&d.join(format!("noise.{l}.model"))),
        ]);
    }
    dir
}

fn write_config(d: &Path, out_dir: &str, wer: &str, seeds: &str, la: &str) -> std::path::PathBuf {
    let mut cfg = format!(
        "version = 1\noutput_dir = \"{out_dir}\"\nseeds = {seeds}\nla_sizes = {la}\nreferences = [\"test.cs\"]\n"
    );
    for l in ["en", "de"] {
        cfg += &format!(
            "\n[[sources]]\nlanguage = \"{l}\"\ntext = \"test.{l}\"\nlexicon = \"lex.{l}.tsv\"\nnoise_model = \"noise.{l}.model\"\nwer = {wer}\n"
        );
    }
    let path = d.join(format!("{out_dir}.toml"));
    fs::write(&path, cfg).unwrap();
    path
}

fn column(tsv: &str, name: &str) -> Vec<String> {
    let mut lines = tsv.lines();
    let idx = lines.next().unwrap().split('\t').position(|h| h == name).unwrap();
    lines.map(|l| l.split('\t').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn zero_noise_sweep_is_perfect_for_every_system() {
    let dir = kit();
    let cfg = write_config(dir.path(), "clean", "[0.0]", "[1]", "[2]");
    ok(&["sweep", p(&cfg)]);
    let results = fs::read_to_string(dir.path().join("clean/results.tsv")).unwrap();
    assert_eq!(column(&results, "system"), ["en", "de", "multi"]);
    assert!(column(&results, "bleu").iter().all(|b| b == "100.0000"));
    assert!(column(&results, "ne").iter().all(|b| b == "0.0000"));
    assert!(dir.path().join("clean/summary.tsv").exists());
    assert!(dir.path().join("clean/tradeoff_en0.0_de0.0.tsv").exists());
}

#[test]
fn sweep_is_reproducible() {
    let dir = kit();
    let a = write_config(dir.path(), "run_a", "[0.2]", "[3, 4]", "[2, 3]");
    let b = write_config(dir.path(), "run_b", "[0.2]", "[3, 4]", "[2, 3]");
    let out_a = ok(&["sweep", p(&a)]);
    let out_b = ok(&["sweep", p(&b)]);
    assert_eq!(out_a, out_b);
    for f in ["results.tsv", "summary.tsv", "tradeoff_en20.0_de20.0.tsv"] {
        let x = fs::read(dir.path().join("run_a").join(f)).unwrap();
        let y = fs::read(dir.path().join("run_b").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    // Noise is on, so seeds must differ somewhere.
    let results = fs::read_to_string(dir.path().join("run_a/results.tsv")).unwrap();
    let bleu = column(&results, "bleu");
    assert!(bleu.iter().any(|b| b != "100.0000"));
}

#[test]
fn score_identical_files() {
    let dir = kit();
    let r = dir.path().join("test.cs");
    let out = ok(&["score", "--hyp", p(&r), "--ref", p(&r), "--wer"]);
    assert!(out.contains("BLEU\t100.0000\n"), "{out}");
    assert!(out.contains("chrF2\t100.0000\n"), "{out}");
    assert!(out.contains("WER\t0.0000\n"), "{out}");
}

#[test]
fn noise_apply_hits_its_target() {
    let dir = kit();
    let d = dir.path();
    let out = ok(&[
        "noise-apply",
        "--model",
        p(&d.join("noise.en.model")),
        "--wer",
        "0.25",
        "--seed",
        "9",
        "--input",
        p(&d.join("train.en.gold")),
        "--output",
        p(&d.join("noisy.en")),
    ]);
    let measured: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("measured_wer\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((measured - 0.25).abs() < 0.03, "{out}");
    let noisy = fs::read_to_string(d.join("noisy.en")).unwrap();
    let gold = fs::read_to_string(d.join("train.en.gold")).unwrap();
    assert_eq!(noisy.lines().count(), gold.lines().count());
}

#[test]
fn simulate_and_prefix_pairs() {
    let dir = kit();
    let d = dir.path();
    let out = d.join("out.cs");
    let log = d.join("log.tsv");
    ok(&[
        "simulate",
        "--source",
        &format!("en={}", p(&d.join("test.en"))),
        "--source",
        &format!("de={}", p(&d.join("test.de"))),
        "--lexicon",
        &format!("en={}", p(&d.join("lex.en.tsv"))),
        "--lexicon",
        &format!("de={}", p(&d.join("lex.de.tsv"))),
        "--la",
        "3",
        "--output",
        p(&out),
        "--log",
        p(&log),
    ]);
    assert_eq!(fs::read_to_string(&out).unwrap(), fs::read_to_string(d.join("test.cs")).unwrap());
    assert!(fs::read_to_string(&log).unwrap().lines().count() > 30);

    let stdout = ok(&[
        "prefix-pairs",
        "--src",
        p(&d.join("test.en")),
        "--tgt",
        p(&d.join("test.cs")),
        "--samples",
        "2",
        "--out-src",
        p(&d.join("pp.en")),
        "--out-tgt",
        p(&d.join("pp.cs")),
    ]);
    assert!(stdout.contains("pairs\t120\n"), "{stdout}");
}

#[test]
fn independence_from_counts() {
    let dir = TempDir::new().unwrap();
    let tsv = dir.path().join("report.tsv");
    let out = ok(&["independence", "--counts", "5,1,1,0", "--src-gold-tokens", "18", "--out", p(&tsv)]);
    assert!(!out.is_empty());
    let report = fs::read_to_string(&tsv).unwrap();
    assert!(report.contains("coverage_pct\t38.89\n"), "{report}");
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = kit();
    let d = dir.path();
    let missing = d.join("nope.txt");
    assert_eq!(simulmt(&["score", "--hyp", p(&missing), "--ref", p(&missing)]).status.code(), Some(2));

    let bad = d.join("bad.toml");
    fs::write(&bad, "version = 7\n").unwrap();
    assert_eq!(simulmt(&["sweep", p(&bad)]).status.code(), Some(3));

    let unattainable = write_config(d, "hopeless", "[5.0]", "[1]", "[2]");
    let out = simulmt(&["sweep", p(&unattainable)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = simulmt(&["independence", "--counts", "1,0,0,0", "--src-gold-tokens", "1"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Usage errors come from the argument parser.
    assert_eq!(simulmt(&["score"]).status.code(), Some(2));
}
