use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const WORDS: [&str; 12] = [
    "the", "cat", "sat", "on", "mat", "dog", "ran", "far", "house", "red", "tree", "sky",
];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_litref"));
    c.env_remove("LITREF_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// 30 groups in two languages and six books, with 1 to 3 references each.
/// Reference `k` replaces the first `k * (i % 3)` words of the base text.
fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = String::new();
    let mut good = String::new();
    let mut bad = String::new();
    for i in 0..30usize {
        let lang = if i % 2 == 0 { "fr" } else { "de" };
        let base: Vec<&str> = (0..6).map(|k| WORDS[(i + 3 * k) % WORDS.len()]).collect();
        let refs: Vec<String> = (0..1 + i % 3)
            .map(|r| {
                let mut t = base.clone();
                for w in t.iter_mut().take(r * (i % 3)) {
                    *w = WORDS[(i * 7 + r) % WORDS.len()];
                }
                format!(r#"{{"ref_id":"r{}","text":"{}"}}"#, r + 1, t.join(" "))
            })
            .collect();
        writeln!(
            corpus,
            r#"{{"group_id":"g{i}","language":"{lang}","book_id":"{lang}{}","paragraph_index":{i},"source_text":"src {i}","references":[{}]}}"#,
            i % 3,
            refs.join(",")
        )
        .unwrap();
        writeln!(
            good,
            r#"{{"segment_id":"g{i}","language":"{lang}","hypothesis":"{}"}}"#,
            base.join(" ")
        )
        .unwrap();
        writeln!(
            bad,
            r#"{{"segment_id":"g{i}","language":"{lang}","hypothesis":"qq ww ee rr tt"}}"#
        )
        .unwrap();
    }
    let mut emb = String::new();
    for (i, w) in WORDS.iter().enumerate() {
        let v: Vec<String> = (0..6).map(|k| format!("{}", ((i * 5 + k * 3) % 11) as f64 / 10.0 - 0.4)).collect();
        writeln!(emb, "{w} {}", v.join(" ")).unwrap();
    }
    fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    fs::write(dir.path().join("emb.txt"), emb).unwrap();
    fs::write(dir.path().join("good.hyp"), good).unwrap();
    fs::write(dir.path().join("bad.hyp"), bad).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        r#"seed = 11
[input]
corpus = "corpus.jsonl"
embeddings = "emb.txt"
[output]
dir = "out"
[[datasets]]
name = "medium"
kind = "bin_filtered"
bin = "medium"
[[datasets]]
name = "unfiltered"
kind = "unfiltered"
"#,
    )
    .unwrap();
    dir
}

fn read(p: PathBuf) -> Vec<u8> {
    fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn score_writes_output_and_manifest() {
    let dir = fixture();
    let out = run(
        dir.path(),
        &["score", "--corpus", "corpus.jsonl", "--embeddings", "emb.txt", "--out", "scored.jsonl"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let scored = String::from_utf8(read(dir.path().join("scored.jsonl"))).unwrap();
    // groups with i % 3 == 0 have a single reference
    assert_eq!(scored.lines().count(), 20);
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("scored.jsonl.manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "score");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["outputs"][0]["path"], "scored.jsonl");
}

#[test]
fn usage_errors_exit_2() {
    let dir = fixture();
    let steps = run(
        dir.path(),
        &[
            "build", "--corpus", "corpus.jsonl", "--scored", "s.jsonl", "--kind", "medium_plus",
            "--add-bin", "high", "--steps", "11", "--out", "x.jsonl",
        ],
    );
    assert_eq!(code(&steps), 2);
    assert_eq!(code(&run(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&run(dir.path(), &["score", "--corpus", "corpus.jsonl"])), 2);

    fs::write(dir.path().join("bad.toml"), "seed = 1\ncolour = \"red\"\n").unwrap();
    let cfg = run(dir.path(), &["--config", "bad.toml", "pipeline"]);
    assert_eq!(code(&cfg), 2);
    assert!(!dir.path().join("out").exists(), "no work before config validation");

    let threads = bin()
        .current_dir(dir.path())
        .env("LITREF_THREADS", "0")
        .args(["report", "stats", "--corpus", "corpus.jsonl", "--out", "s.json"])
        .output()
        .unwrap();
    assert_eq!(code(&threads), 2);
}

#[test]
fn data_errors_exit_1() {
    let dir = fixture();
    fs::write(dir.path().join("broken.jsonl"), "{\"group_id\": 3}\n").unwrap();
    let out = run(dir.path(), &["ingest", "--corpus", "broken.jsonl", "--out", "o.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    let lenient = run(dir.path(), &["ingest", "--corpus", "broken.jsonl", "--out", "o.jsonl", "--lenient"]);
    assert_eq!(code(&lenient), 0);
}

#[test]
fn sigtest_prints_table() {
    let dir = fixture();
    let out = run(
        dir.path(),
        &[
            "sigtest", "--refs", "corpus.jsonl", "--baseline", "bad.hyp", "--system", "good.hyp",
            "--metric", "bleu", "--resamples", "200", "--out", "sig.json",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("baseline: bad.hyp"));
    let row = table.lines().find(|l| l.starts_with("good.hyp")).unwrap();
    assert!(row.contains("bleu") && row.ends_with("yes"), "{row}");
    let records: serde_json::Value = serde_json::from_slice(&read(dir.path().join("sig.json"))).unwrap();
    assert_eq!(records[0]["result"]["p_value"], 0.0);
    assert_eq!(records[0]["result"]["wins_system"], 200);
}

#[test]
fn eval_and_gain() {
    let dir = fixture();
    for (hyp, out) in [("bad.hyp", "a.json"), ("good.hyp", "b.json")] {
        let o = run(
            dir.path(),
            &["eval", "--refs", "corpus.jsonl", "--hyp", hyp, "--metric", "chrf++", "--out", out],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let b: serde_json::Value = serde_json::from_slice(&read(dir.path().join("b.json"))).unwrap();
    assert_eq!(b["metric"], "chrf++");
    assert_eq!(b["per_language"]["fr"]["segments"], 15);
    let g = run(dir.path(), &["report", "gain", "--a", "a.json", "--b", "b.json", "--out", "gain.csv"]);
    assert_eq!(code(&g), 0);
    let csv = String::from_utf8(read(dir.path().join("gain.csv"))).unwrap();
    assert!(csv.starts_with("language,gain\nde,"));
    assert!(csv.lines().last().unwrap().starts_with("overall,"));
}

#[test]
fn external_scores_average() {
    let dir = fixture();
    let mut rows = String::from("segment_id,ref_id,score\n");
    for i in 0..30 {
        rows.push_str(&format!("g{i},r1,0.7\ng{i},r2,0.9\n"));
    }
    fs::write(dir.path().join("ext.csv"), rows).unwrap();
    let out = run(
        dir.path(),
        &["eval", "--refs", "corpus.jsonl", "--metric", "external", "--external-scores", "ext.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["corpus_score"].as_f64().unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn pipeline_is_deterministic_and_matches_stages() {
    let dir = fixture();
    let p = dir.path();
    let first = run(p, &["--config", "run.toml", "--threads", "1", "pipeline"]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(p, &["--config", "run.toml", "--threads", "3", "pipeline", "--out-dir", "out2"]);
    assert_eq!(code(&second), 0);

    let mut files: Vec<PathBuf> = Vec::new();
    let mut stack = vec![p.join("out")];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path.strip_prefix(p.join("out")).unwrap().to_path_buf());
            }
        }
    }
    assert!(files.len() > 15);
    for f in &files {
        assert_eq!(read(p.join("out").join(f)), read(p.join("out2").join(f)), "{}", f.display());
    }

    // stage by stage
    let steps: [&[&str]; 4] = [
        &["score", "--corpus", "corpus.jsonl", "--embeddings", "emb.txt", "--out", "s/scored.jsonl"],
        &["split", "--corpus", "corpus.jsonl", "--scored", "s/scored.jsonl", "--out-dir", "s/split", "--seed", "11"],
        &["build", "--corpus", "s/split/train.jsonl", "--scored", "s/scored.jsonl", "--kind", "medium", "--seed", "11", "--out", "s/medium.pairs.jsonl"],
        &["export", "--dataset", "s/medium.pairs.jsonl", "--format", "prompt_lines", "--out", "s/medium.prompt.txt"],
    ];
    for args in steps {
        let o = run(p, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for (staged, piped) in [
        ("s/scored.jsonl", "out/scored.jsonl"),
        ("s/split/train.jsonl", "out/split/train.jsonl"),
        ("s/split/test.jsonl", "out/split/test.jsonl"),
        ("s/medium.pairs.jsonl", "out/datasets/medium.pairs.jsonl"),
        ("s/medium.prompt.txt", "out/datasets/medium.prompt.txt"),
    ] {
        assert_eq!(read(p.join(staged)), read(p.join(piped)), "{staged}");
    }
}

#[test]
fn export_rejects_delimiter_collision() {
    let dir = fixture();
    fs::write(
        dir.path().join("pairs.jsonl"),
        "{\"source\":\"a ###> b\",\"target\":\"c\",\"language\":\"fr\",\"group_id\":\"g\",\"ref_id\":\"r1\"}\n",
    )
    .unwrap();
    let out = run(dir.path(), &["export", "--dataset", "pairs.jsonl", "--format", "prompt_lines", "--out", "p.txt"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("(g, r1)"));
}
