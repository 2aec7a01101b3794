use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn permtest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permtest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn distance_prints_fraction() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.perm", "1 2 3 4\n");
    let b = write(&dir, "b.perm", "2 1 4 3\n");
    let out = permtest(&["distance", "--metric", "kendall", s(&a), s(&b)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "1/3\n");
    let out = permtest(&["distance", "--metric", "rectangular", s(&a), s(&b)]);
    assert!(out.status.success());
    assert!(stdout(&out).trim().contains('/'));
}

#[test]
fn branching_writes_31_node_tree_and_constants_read_trees() {
    let dir = TempDir::new().unwrap();
    let basis = write(&dir, "basis.txt", "# decreasing pairs\n2 1\n");
    let tree = dir.path().join("tree.json");
    let out = permtest(&["branching", "--basis", s(&basis), "--k", "2", "--mmax", "4", "--out", s(&tree)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "nodes 31 depth 2 root_weight 8\n");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&tree).unwrap()).unwrap();
    assert_eq!(json["root_weight"], "8");

    let all = dir.path().join("all.json");
    let out = permtest(&["branching", "--property", "all", "--k", "20", "--out", s(&all)]);
    assert!(out.status.success());
    let out = permtest(&["constants", "--epsilon0", "1/2", "--tree", s(&all)]);
    assert!(out.status.success());
    let text = stdout(&out);
    for line in ["k = 20", "epsilon = 1/20", "epsilon_prime = 1/420", "K = 20", "M = 8400"] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }
    let out = permtest(&["constants", "--epsilon0", "1/2", "--tree", s(&tree)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decompose_dumps_grid_and_walks() {
    let dir = TempDir::new().unwrap();
    let pi = write(&dir, "id.perm", "1 2 3 4\n");
    let out = permtest(&["decompose", s(&pi), "--K", "2", "--kk", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("i,j,count,density\n1,1,2,"));

    let tree = dir.path().join("tree.json");
    assert!(permtest(&["branching", "--property", "av:21", "--k", "2", "--out", s(&tree)]).status.success());
    let rev: Vec<String> = (1..=384).rev().map(|v| v.to_string()).collect();
    let rev = write(&dir, "rev.perm", &rev.join(" "));
    let out = permtest(&["decompose", s(&rev), "--tree", s(&tree), "--epsilon", "1/4", "--epsprime", "1/4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).starts_with("witnessing ({2},{1}) order 1"));
}

#[test]
fn tester_and_csv_report() {
    let dir = TempDir::new().unwrap();
    let rev: Vec<String> = (1..=200).rev().map(|v| v.to_string()).collect();
    let rev = write(&dir, "rev.perm", &rev.join(" "));
    let report = dir.path().join("report.csv");
    let out = permtest(&[
        "test", s(&rev), "--property", "av:21", "--sample", "2", "--trials", "1000", "--seed", "4",
        "--out", s(&report),
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "rejections 1000/1000 rate 1/1\n");
    let csv = fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 1002);
    assert_eq!(csv.lines().last(), Some("summary,4,1/1"));

    let out = permtest(&["test", s(&rev), "--property", "av:21", "--sample", "201"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn repair_trace() {
    let dir = TempDir::new().unwrap();
    let pi = write(&dir, "id.perm", "1 2 3 4 5 6 7 8\n");
    let out = permtest(&[
        "repair", s(&pi), "--property", "av:21",
        "--pattern", r#"{"k":2,"sets":[[1],[2]]}"#,
        "--blocks", r#"{"k":4,"sets":[[2],[4]]}"#,
        "--K", "4", "--kk", "2", "--epsprime", "1/4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "z 1 2 3 4 5 6 15 16\nrepaired 1 2 3 4 5 6 7 8\nkendall 0/1\n");
}

#[test]
fn generate_certifies_distance() {
    let out = permtest(&["generate", "--property", "av:21", "--n", "6", "--epsilon", "1/3", "--seed", "2"]);
    assert!(out.status.success());
    let images: Vec<usize> = stdout(&out).split_whitespace().map(|t| t.parse().unwrap()).collect();
    let inversions = (0..6)
        .flat_map(|i| (i + 1..6).map(move |j| (i, j)))
        .filter(|&(i, j)| images[i] > images[j])
        .count();
    assert!(inversions >= 5);
    let out = permtest(&["generate", "--property", "av:21", "--n", "6", "--epsilon", "3/2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = permtest(&[
            "experiment", "--property", "av:21", "--family", "reverse:200", "--family", "identity:40",
            "--sample", "2", "--sample", "3", "--trials", "100", "--seed", "7", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,sample_size,trials,rejections,rate_num,rate_den,seed");
    assert!(lines[1].starts_with("200,2,100,100,1,1,"));
    assert!(lines[2].starts_with("200,3,100,100,1,1,"));
    assert!(lines[3].starts_with("40,2,100,0,0,1,"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let pi = write(&dir, "p.perm", "1 2\n");
    let o = permtest(&["test", s(&pi), "--sample", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--basis"));
    let o = permtest(&["distance", "--metric", "hamming", s(&pi), s(&pi)]);
    assert_eq!(o.status.code(), Some(2));
    let o = permtest(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = permtest(&["experiment", "--property", "av:21", "--family", "spiral:4", "--sample", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--family"));
}
