use std::path::Path;
use std::process::{Command, Output};

const GAMMA: &str = "
(declare-real price 0 3000)
(declare-real sqft 0 200)
(assert (or (< price (+ (* 10 sqft) 1000)) (< price (+ (* 20 sqft) 100))))
";

fn smi(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smi")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workdir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("gamma.smi"), GAMMA).unwrap();
    std::fs::write(dir.path().join("q.smi"), "(assert (< price 2000))").unwrap();
    dir
}

#[test]
fn solve_prints_exact_and_approx() {
    let dir = workdir();
    let out = smi(&["solve", "gamma.smi"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "exact: 430250/1\napprox: 430250\n");
}

#[test]
fn solve_flags_do_not_change_the_value() {
    let dir = workdir();
    for flags in [
        &["--cache", "off"][..],
        &["--pseudo-tree", "balanced"],
        &["--threads", "3"],
        &["--strategy", "selector"],
    ] {
        let mut args = vec!["solve", "gamma.smi"];
        args.extend_from_slice(flags);
        let out = smi(&args, dir.path());
        assert!(stdout(&out).starts_with("exact: 430250/1\n"), "{flags:?}");
    }
}

#[test]
fn stats_and_dump() {
    let dir = workdir();
    let out = stdout(&smi(&["solve", "gamma.smi", "--stats", "--dump-pieces"], dir.path()));
    assert!(out.starts_with("sqft [0,200]:0\nprice [0,100]:0 [100,1000]:0 [1000,1900]:1 [1900,3000]:1\n"), "{out}");
    assert!(out.contains("nodes_expanded: "));
    assert!(out.contains("(within)"));
}

#[test]
fn probability_is_reduced() {
    let dir = workdir();
    let out = smi(&["prob", "gamma.smi", "--query", "q.smi"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "exact: 1401/1721\napprox: 0.814061592098\n");
}

#[test]
fn generated_star_solves() {
    let dir = workdir();
    assert_eq!(smi(&["gen", "star", "--n", "1", "-o", "f.smi"], dir.path()).status.code(), Some(0));
    assert!(stdout(&smi(&["solve", "f.smi"], dir.path())).starts_with("exact: 2/1\n"));
}

#[test]
fn oracle_reports_an_estimate() {
    let dir = workdir();
    let out = stdout(&smi(&["oracle", "gamma.smi", "--samples", "200000", "--seed", "4"], dir.path()));
    let line = out.lines().next().unwrap();
    let mean: f64 = line.strip_prefix("estimate: ").unwrap().parse().unwrap();
    let err: f64 = out.lines().nth(1).unwrap().strip_prefix("std_error: ").unwrap().parse().unwrap();
    assert!((mean - 430250.0).abs() <= 4.0 * err, "{out}");
}

#[test]
fn bench_writes_csv() {
    let dir = workdir();
    let out = smi(&["bench", "star", "--n-list", "1,3", "--csv", "b.csv", "--repeats", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_path(dir.path().join("b.csv")).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["family", "n", "wallclock_ms", "nodes_expanded", "value"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][4], "2");
    assert_eq!(&rows[1][0], "star");
}

#[test]
fn exit_codes() {
    let dir = workdir();
    assert_eq!(smi(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(smi(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(smi(&["solve", "gamma.smi", "--cache", "maybe"], dir.path()).status.code(), Some(1));
    assert_eq!(smi(&["solve", "gamma.smi", "--threads", "0"], dir.path()).status.code(), Some(1));
    assert_eq!(smi(&["solve", "missing.smi"], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("bad.smi"), "(declare-real x 0 1) (assert (= x 1))").unwrap();
    let out = smi(&["solve", "bad.smi"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.smi:1:"));

    std::fs::write(
        dir.path().join("cycle.smi"),
        "(declare-real a 0 1) (declare-real b 0 1) (declare-real c 0 1)
         (assert (or (<= a b) (<= b c))) (assert (<= c a))",
    )
    .unwrap();
    assert_eq!(smi(&["solve", "cycle.smi"], dir.path()).status.code(), Some(3));

    assert_eq!(smi(&["gen", "house", "--n", "2", "--offset=-1", "-o", "h.smi"], dir.path()).status.code(), Some(2));
    assert_eq!(smi(&["gen", "star", "--n", "0", "-o", "s.smi"], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("empty.smi"), "(declare-real x 0 1) (assert (<= x -1))").unwrap();
    std::fs::write(dir.path().join("qx.smi"), "(assert (<= x 1/2))").unwrap();
    assert_eq!(smi(&["prob", "empty.smi", "--query", "qx.smi"], dir.path()).status.code(), Some(2));
}
