use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic").join(name)
}

fn bodyimage(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bodyimage"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("BODYIMAGE_")) {
        cmd.env_remove(k);
    }
    cmd
}

fn with_inputs(cmd: &mut Command) -> &mut Command {
    cmd.arg("--responses")
        .arg(fixture("responses.jsonl"))
        .arg("--embeddings")
        .arg(fixture("vectors.txt"))
        .arg("--vad")
        .arg(fixture("vad.tsv"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_defaults_reproduce_the_bundled_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = bodyimage(&["synth", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["responses.jsonl", "vad.tsv", "vectors.txt", "ground_truth.json"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(fixture(name)).unwrap(),
            "{name} differs"
        );
    }
}

#[test]
fn missing_embeddings_is_an_input_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = bodyimage(&["analyze", "--embeddings", "no/such/vectors.txt"])
        .arg("--responses")
        .arg(fixture("responses.jsonl"))
        .arg("--vad")
        .arg(fixture("vad.tsv"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("no/such/vectors.txt"), "{err}");
    assert!(err.contains("error[cli.missing_input]"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    let out = bodyimage(&["analyze", "--mask", "diagonal"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bodyimage(&["graph"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--responses"));
}

#[test]
fn unknown_target_word_is_an_analysis_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_inputs(&mut bodyimage(&["humandist", "--target-word", "zzzzqq"]))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("semantics.target_missing"), "{}", stderr(&out));
}

#[test]
fn too_few_baseline_words_is_reported_per_robot() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_inputs(&mut bodyimage(&["humandist", "--min-baseline-words", "500"]))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = stderr(&out);
    assert!(err.contains("semantics.sparse_baseline") && err.contains("robot `"), "{err}");
}

#[test]
fn analyze_bundle_verifies_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_inputs(&mut bodyimage(&["analyze"])).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("bodyimage analyze: k=3 "));
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# estimation: maximum likelihood (not REML)"));
    assert!(manifest.contains("# input.embeddings: vectors.txt"));
    assert!(!manifest.contains(env!("CARGO_MANIFEST_DIR")));

    let ok = bodyimage(&["report"]).arg(dir.path()).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("9 files verified"));

    fs::write(dir.path().join("clusters.csv"), "robot,cluster\n").unwrap();
    let bad = bodyimage(&["report"]).arg(dir.path()).output().unwrap();
    assert_eq!(bad.status.code(), Some(4));
    assert!(stderr(&bad).contains("clusters.csv"));
}

#[test]
fn env_overrides_flags_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = with_inputs(bodyimage(&["graph"]).env("BODYIMAGE_K", "4").env("BODYIMAGE_OUT", dir.path()))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains(" k=4 "));
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("# k: 4"));
    assert!(dir.path().join("body_graph.dot").exists());
}

#[test]
fn subcommands_write_their_own_tables() {
    let cases: [(&str, &[&str]); 3] = [
        ("affect", &["affect_participant_robot.csv"]),
        ("lme", &["lme_fits.csv", "fig_attitude_affect.svg"]),
        ("humandist", &["standardized_affect.csv", "fig_human_distance.svg"]),
    ];
    for (cmd, files) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = with_inputs(&mut bodyimage(&[cmd])).arg("--out").arg(dir.path()).output().unwrap();
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
        for f in files {
            assert!(dir.path().join(f).exists(), "{cmd} did not write {f}");
        }
    }
    let out = bodyimage(&["ingest"]).arg("--responses").arg(fixture("responses.jsonl")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("participants 30") && text.contains("associations 300"), "{text}");
}

#[test]
fn malformed_vectors_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 3\ncat 1 0\n").unwrap();
    let out = bodyimage(&["graph"])
        .arg("--responses")
        .arg(fixture("responses.jsonl"))
        .arg("--embeddings")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("embedding.arity"), "{}", stderr(&out));
}
