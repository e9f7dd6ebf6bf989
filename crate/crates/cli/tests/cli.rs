use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jfront_core::corpus::load_corpus;

fn toy(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy").join(name)
}

fn jfront(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jfront"))
        .args(args)
        .env_remove("JFRONT_TEST")
        .env_remove("JFRONT_TRAIN")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn config() -> String {
    toy("run.toml").to_str().unwrap().to_string()
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let corpus = toy("corpus.txt");
    let o = jfront(&["--config", &config(), "eval", "--pred", s(&corpus)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    for row in rows {
        assert!(row.ends_with("1.000000"), "{row}");
    }
}

#[test]
fn missing_corpus_is_a_data_error_naming_the_path() {
    let o = jfront(&["--config", &config(), "eval", "--pred", "/no/such/pred.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/pred.txt"));

    let o = Command::new(env!("CARGO_BIN_EXE_jfront"))
        .args(["--config", &config(), "eval", "--pred", s(&toy("corpus.txt"))])
        .env("JFRONT_TEST", "/no/such/gold.txt")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/gold.txt"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(jfront(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(jfront(&["--config", &config(), "train", "--out", "/tmp/x", "--preset", "PD9"]).status.code(), Some(1));
    // The provider preset needs an embedding file that is not configured.
    let o = jfront(&["--config", &config(), "train", "--out", "/tmp/x", "--preset", "PD6"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("embeddings"));
    assert_eq!(jfront(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_logs_config_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.bin");
    let o = jfront(&["--config", &config(), "train", "--task", "apbp", "--max-epochs", "1", "--seed", "5", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("seeds = [5]"), "{err}");
    assert!(err.contains("seed 5"));
}

#[test]
fn gold_boundaries_reproduce_gold_phrases() {
    let corpus = toy("corpus.txt");
    let o = jfront(&["--config", &config(), "pipeline", "--corpus", s(&corpus), "--gold-boundaries"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let phrases: Vec<&str> = out.lines().filter(|l| l.starts_with("phrases\t")).collect();
    let gold = load_corpus(&corpus).unwrap();
    assert_eq!(phrases.len(), gold.len());
    for (line, s) in phrases.iter().zip(gold.iter()) {
        let want: Vec<String> = s
            .gold_phrases()
            .0
            .iter()
            .map(|p| {
                let text: String = s.sentence.morphemes[p.span.clone()].iter().map(|m| m.surface.as_str()).collect();
                format!("{text}/{}", p.nucleus)
            })
            .collect();
        assert_eq!(*line, format!("phrases\t{}", want.join(" ")), "{}", s.id());
    }
    // Gold boundaries need gold tokenization.
    let o = jfront(&["--config", &config(), "pipeline", "--input", s(&toy("raw.txt")), "--gold-boundaries"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let model = dir.path().join(format!("{tag}.bin"));
        let report = dir.path().join(format!("{tag}.tsv"));
        let o = jfront(&[
            "--config",
            &config(),
            "train",
            "--task",
            "anpp",
            "--max-epochs",
            "3",
            "--seed",
            "2",
            "--seed",
            "3",
            "--out",
            s(&model),
            "--report",
            s(&report),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let seeds: Vec<Vec<u8>> = [2, 3]
            .iter()
            .map(|k| std::fs::read(dir.path().join(format!("{tag}.seed{k}.bin"))).unwrap())
            .collect();
        (seeds, std::fs::read(&report).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert_ne!(a.0[0], a.0[1]);
    let report = String::from_utf8(a.1).unwrap();
    assert!(report.contains("best_metric\tanpp\tmean\t"));
}

#[test]
fn train_predict_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("apbp.bin");
    let pred = dir.path().join("pred.txt");
    let c = config();
    let o = jfront(&["--config", &c, "train", "--task", "apbp", "--max-epochs", "2", "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = jfront(&["--config", &c, "predict", "--model", s(&model), "--out", s(&pred)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let by_file = jfront(&["--config", &c, "eval", "--pred", s(&pred)]);
    let by_model = jfront(&["--config", &c, "eval", "--model", s(&model)]);
    assert_eq!(by_model.status.code(), Some(0), "{}", stderr(&by_model));
    let f1 = |o: &Output| {
        stdout(o)
            .lines()
            .find(|l| l.starts_with("apbp_f1") && l.contains(" all "))
            .map(|l| l.split_whitespace().last().unwrap().to_string())
            .unwrap()
    };
    assert_eq!(f1(&by_file), f1(&by_model));

    let o = jfront(&["--config", &c, "pipeline", "--input", s(&toy("raw.txt")), "--apbp-model", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("pitch\t"));
    // AP0 is the rule-based system and takes no accent models.
    let o = jfront(&["--config", &c, "--preset", "AP0", "pipeline", "--input", s(&toy("raw.txt")), "--apbp-model", s(&model)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ngram_and_charlm_presets_train() {
    let dir = tempfile::tempdir().unwrap();
    let c = config();
    let ngrams = dir.path().join("ngrams.tsv");
    let lm = dir.path().join("charlm.bin");
    let raw = toy("raw.txt");
    let o = jfront(&["--config", &c, "build-ngrams", "--input", s(&raw), "--out", s(&ngrams)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = jfront(&["--config", &c, "train-charlm", "--input", s(&raw), "--out", s(&lm)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("epoch\tperplexity\n"));

    let model = dir.path().join("m.bin");
    let o = jfront(&[
        "--config", &c, "--preset", "AP1", "--task", "apbp", "--ngrams", s(&ngrams), "train", "--max-epochs", "1", "--out",
        s(&model),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = jfront(&["--config", &c, "--preset", "PD7", "--charlm", s(&lm), "train", "--max-epochs", "1", "--out", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = jfront(&["--config", &c, "--charlm", s(&lm), "eval", "--model", s(&model)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("pd_accuracy"));
}

#[test]
fn tokenize_prints_ranked_analyses() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.txt");
    std::fs::write(&input, "京都京都\n").unwrap();
    let o = jfront(&["--config", &config(), "tokenize", "--nbest", "3", s(&input)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ranks: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("#rank")).map(String::from).collect();
    assert_eq!(ranks.len(), 3);
    assert!(ranks[0].starts_with("#rank 1 cost "));
}
