use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn treegraft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treegraft"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

struct Files {
    dir: TempDir,
}

impl Files {
    fn new() -> Self {
        Files {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn write(&self, name: &str, text: &str) -> String {
        let path: PathBuf = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path.to_str().unwrap().to_string()
    }
}

#[test]
fn refine_star_with_binary_source() {
    let files = Files::new();
    let t = files.write("t.nwk", "(a,b,c,d);\n");
    let s = files.write("s.nwk", "((a,b),(c,d));\n");
    for engine in ["fast", "basic", "oracle"] {
        let out = treegraft(&["refine", &t, &s, "--engine", engine, "--canonical", "--report"]);
        assert!(out.status.success(), "{engine}");
        assert_eq!(stdout(&out), "((a,b),(c,d));\n");
        let report = String::from_utf8(out.stderr).unwrap();
        assert!(report.contains(&format!("engine={engine}")), "{report}");
        assert!(report.contains("accepted=2"), "{report}");
        assert!(report.contains("rf_before=2"), "{report}");
        assert!(report.contains("rf_after=0"), "{report}");
    }
}

#[test]
fn refine_with_itself_changes_nothing() {
    let files = Files::new();
    let t = files.write("t.nwk", "((a,b),(c,(d,e)));");
    let out = treegraft(&["refine", &t, &t, "--report"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "((a,b),(c,(d,e)));\n");
    let report = String::from_utf8(out.stderr).unwrap();
    assert!(report.contains("rf_after=0"));
    assert!(report.contains("inserted=0"));
}

#[test]
fn leaf_set_mismatch_exits_with_two() {
    let files = Files::new();
    let t = files.write("t.nwk", "(a,b,c);");
    let s = files.write("s.nwk", "((a,b),x);");
    let out = treegraft(&["refine", &t, &s]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
    assert_eq!(treegraft(&["rf", &t, &s]).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_with_one() {
    let files = Files::new();
    let t = files.write("t.nwk", "((a,b),c;");
    let s = files.write("s.nwk", "((a,b),c);");
    let out = treegraft(&["refine", &t, &s]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let missing = files.dir.path().join("missing.nwk");
    let out = treegraft(&["refine", missing.to_str().unwrap(), &s]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rf_one_sided_and_symmetric() {
    let files = Files::new();
    let a = files.write("a.nwk", "((a,b),c,d);");
    let b = files.write("b.nwk", "((c,d),a,b);");
    assert_eq!(stdout(&treegraft(&["rf", &a, &b])), "1\n");
    assert_eq!(stdout(&treegraft(&["rf", &a, &b, "--symmetric"])), "2\n");

    let star = files.write("star.nwk", "(a,b,c,d);");
    let binary = files.write("bin.nwk", "((a,b),(c,d));");
    assert_eq!(stdout(&treegraft(&["rf", &star, &binary])), "0\n");
    assert_eq!(stdout(&treegraft(&["rf", &binary, &star])), "2\n");
    assert_eq!(stdout(&treegraft(&["rf", &star, &binary, "--symmetric"])), "2\n");
}

#[test]
fn gen_is_deterministic() {
    let args = ["gen", "--leaves", "40", "--seed", "7", "--contract", "0.3"];
    let first = stdout(&treegraft(&args));
    assert_eq!(first, stdout(&treegraft(&args)));
    assert!(first.ends_with(";\n"));
    let other = stdout(&treegraft(&["gen", "--leaves", "40", "--seed", "8", "--contract", "0.3"]));
    assert_ne!(first, other);
}

#[test]
fn gen_small_and_fixed_shapes() {
    assert_eq!(stdout(&treegraft(&["gen", "--leaves", "1"])), "t1;\n");
    assert_eq!(
        stdout(&treegraft(&["gen", "--leaves", "4", "--shape", "caterpillar", "--canonical"])),
        "(((t1,t2),t3),t4);\n"
    );
    assert_eq!(
        stdout(&treegraft(&["gen", "--leaves", "4", "--contract", "1"])),
        stdout(&treegraft(&["gen", "--leaves", "4", "--contract", "1"]))
    );
    assert!(!treegraft(&["gen", "--leaves", "0"]).status.success());
    assert!(!treegraft(&["gen", "--leaves", "5", "--shape", "zigzag"]).status.success());
}

#[test]
fn verify_reports_success() {
    let out = treegraft(&["verify", "--trials", "50", "--max-n", "2"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("ok: 50 trials"));
    let out = treegraft(&["verify", "--trials", "30", "--max-n", "20", "--seed", "4"]);
    assert!(out.status.success());
}

#[test]
fn bench_prints_csv() {
    let out = treegraft(&["bench", "--sizes", "16,32", "--engines", "fast,basic,oracle"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,engine,wall_time_s,leaf_updates,loop_iterations,bounds_ok");
    assert_eq!(lines.len(), 7);
    for row in &lines[1..] {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 6);
        assert_eq!(fields[5], "true");
    }
    assert!(!treegraft(&["bench", "--sizes", "32,16"]).status.success());
}
