use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signhash")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

const DESK: [&str; 12] = [
    "--preset", "slashdot", "--set", "d0=16", "--set", "hidden=32,32", "--set", "d=16", "--set", "epochs=5", "--set",
    "batch_size=128",
];

fn synth(dir: &TempDir) -> String {
    let g = p(dir, "g.tsv");
    ok(&["synth", "--nodes-per-block", "20", "--out", &g]);
    g
}

#[test]
fn stats_on_tiny_fixture() {
    let dir = TempDir::new().unwrap();
    let g = p(&dir, "tiny.tsv");
    std::fs::write(&g, "1\t2\t1\n2\t3\t-1\n3\t1\t1\n").unwrap();
    assert_eq!(
        ok(&["stats", &g]),
        "num_nodes\t3\nnum_pos_links\t2\nnum_neg_links\t1\npos_fraction\t0.666667\n"
    );
}

#[test]
fn missing_and_malformed_inputs_fail() {
    let out = run(&["stats", "/definitely/not/here.tsv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    let dir = TempDir::new().unwrap();
    let g = p(&dir, "bad.tsv");
    std::fs::write(&g, "1 2 1\n1 2 2\n").unwrap();
    let out = run(&["stats", &g]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(run(&["train", &g, "--set", "colour=red", "--checkpoint", &p(&dir, "m")]).status.code(), Some(1));
}

#[test]
fn sample_dump_format() {
    let dir = TempDir::new().unwrap();
    let g = p(&dir, "g.tsv");
    std::fs::write(&g, "10 11 1\n10 12 -1\n").unwrap();
    assert_eq!(ok(&["sample", &g]), "0 1 2\n1 0 -1\n");
}

#[test]
fn pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    let g = synth(&dir);
    let (ck, rep, codes) = (p(&dir, "m.bin"), p(&dir, "r.tsv"), p(&dir, "c.txt"));
    let mut args = vec!["train", &g, "--checkpoint", &ck, "--report", &rep];
    args.extend(DESK);
    ok(&args);
    let report = std::fs::read_to_string(&rep).unwrap();
    assert_eq!(report.lines().count(), 5);
    assert!(report.lines().all(|l| l.split('\t').count() == 7));

    ok(&["encode", "--checkpoint", &ck, "--graph", &g, "--out", &codes]);
    let text = std::fs::read_to_string(&codes).unwrap();
    assert!(text.starts_with("# d=16\n"));
    let first: Vec<&str> = text.lines().nth(1).unwrap().split('\t').collect();
    let id = first[0];

    let knn = ok(&["knn", "--codes", &codes, "--query", id, "-k", "5"]);
    let rows: Vec<Vec<&str>> = knn.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][..2], [id, "1"]);
    assert_eq!(rows[0][3], "0");

    let eval = ok(&["eval", "--graph", &g, "--codes", &codes]);
    let means: Vec<&str> = eval.lines().filter(|l| l.contains("\tmean\t")).collect();
    assert_eq!(means.len(), 4);
    assert_eq!(eval.lines().count(), 44);

    let one = ok(&["eval", "--graph", &g, "--codes", &codes, "--operators", "l1_weight", "--folds", "5"]);
    assert_eq!(one.lines().count(), 6);
    let out = run(&["eval", "--graph", &g, "--codes", &codes, "--operators", "cosine"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn encode_rejects_a_foreign_graph() {
    let dir = TempDir::new().unwrap();
    let g = synth(&dir);
    let ck = p(&dir, "m.bin");
    let mut args = vec!["train", &g, "--checkpoint", &ck];
    args.extend(DESK);
    ok(&args);
    let other = p(&dir, "other.tsv");
    std::fs::write(&other, "1 2 1\n2 3 -1\n").unwrap();
    let out = run(&["encode", "--checkpoint", &ck, "--graph", &other]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let g = synth(&dir);
    let mut outputs = Vec::new();
    for (run_id, threads) in [("a", "1"), ("b", "1"), ("c", "3")] {
        let ck = p(&dir, &format!("{run_id}.bin"));
        let rep = p(&dir, &format!("{run_id}.tsv"));
        let mut args = vec!["--threads", threads, "train", &g, "--checkpoint", &ck, "--report", &rep];
        args.extend(DESK);
        ok(&args);
        outputs.push((std::fs::read(&ck).unwrap(), std::fs::read(&rep).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn config_file_and_dump() {
    let dir = TempDir::new().unwrap();
    let g = synth(&dir);
    let cfg = p(&dir, "run.cfg");
    std::fs::write(&cfg, "d0 = 8\nhidden = 8\nd = 8\nepochs = 2\ndelta = 6\neta = 0.5\n").unwrap();
    let out = run(&["train", &g, "--config", &cfg, "--checkpoint", &p(&dir, "m"), "--dump-config"]);
    assert!(out.status.success());
    let dumped = String::from_utf8(out.stderr).unwrap();
    assert!(dumped.contains("delta0 = 3.0\n"), "{dumped}");
    assert!(dumped.contains("eta = 0.5\n"));
}

#[test]
fn lr_range_columns() {
    let dir = TempDir::new().unwrap();
    let g = synth(&dir);
    let mut args = vec!["lr-range", &g, "--steps", "20"];
    args.extend(DESK);
    let text = ok(&args);
    let lrs: Vec<f64> = text.lines().map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert!(!lrs.is_empty() && lrs.len() <= 20);
    assert_eq!(lrs[0], 1e-5);
    assert!(lrs.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn synth_is_seeded() {
    let a = ok(&["synth", "--seed", "4"]);
    assert_eq!(a, ok(&["synth", "--seed", "4"]));
    assert_ne!(a, ok(&["synth", "--seed", "5"]));
    assert!(Path::new(env!("CARGO_BIN_EXE_signhash")).exists());
}
