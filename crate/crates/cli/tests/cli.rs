use std::path::Path;
use std::process::{Command, Output};

fn kolmo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmo"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("kolmo runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = kolmo(dir, args);
    assert!(
        out.status.success(),
        "kolmo {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Data lines of a CSV after the comment banner and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const REALIZABLE: &str = "dimension = 2\nu = 0\nv = 2\nT = 1\nD = 1\npayoff = put 0.5 0.5 1\n";

#[test]
fn certify_table_csv_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--out-dir", "a", "certify", "--dim", "1", "--eps", "0.1", "--rho", "0.05"];
    let table = ok(dir.path(), &args);
    for q in ["m ", "P(a)", "R ", "L(a)", "max_width"] {
        assert!(table.contains(q), "missing {q} in\n{table}");
    }
    let first = read(dir.path().join("a/certificate.csv"));
    let mut lines = first.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "quantity,value,formula,paper_ref");

    ok(dir.path(), &args);
    assert_eq!(read(dir.path().join("a/certificate.csv")), first);
}

#[test]
fn certify_rejects_eps_outside_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(dir.path(), &["certify", "--eps", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ε must lie in (0,1)"), "{err}");
}

#[test]
fn missing_problem_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(dir.path(), &["pipeline", "--problem", "absent.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kolmo(dir.path(), &["pipeline"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), REALIZABLE).unwrap();
    let out = kolmo(
        dir.path(),
        &["pipeline", "--problem", "p.txt", "--samples", "500", "--hidden", "8", "--lr", "1e308", "--iterations", "50", "--grid", "4"],
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn realizable_pipeline_reaches_target() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("p.txt"), REALIZABLE).unwrap();
    ok(
        dir.path(),
        &[
            "--seed", "3", "pipeline", "--problem", "p.txt", "--samples", "4096", "--hidden", "16", "--iterations", "4000",
            "--eval-every", "500", "--lr", "5e-3", "--grid", "64",
        ],
    );
    let summary = read(dir.path().join("summary.csv"));
    assert!(summary.lines().next().unwrap().contains("seeds=3"));
    assert_eq!(
        summary.lines().nth(1).unwrap(),
        "d,m,architecture,final_empirical_risk,l2_error,noise_floor,oracle"
    );
    let row = &rows(&summary)[0];
    assert_eq!(row[0], "2");
    assert!(summary.contains(",\"(2,16,1)\","));
    // the quoted architecture holds commas; index from the end
    let n = row.len();
    assert_eq!(row[n - 1], "exact");
    let l2: f64 = row[n - 3].parse().unwrap();
    assert!(l2 <= 1e-3, "L2 error {l2}");
    assert!(read(dir.path().join("trace.csv")).contains("iter,batch_risk,full_risk"));
    assert!(read(dir.path().join("network.txt")).starts_with("arch: 2 16 1"));
}

#[test]
fn generate_train_evaluate_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init", "--dim", "1", "--output", "p.txt"]);
    ok(d, &["--out-dir", "data", "generate", "--problem", "p.txt", "--samples", "2000", "--csv"]);
    let csv = read(d.join("data/dataset.csv"));
    assert_eq!(csv.lines().nth(1).unwrap(), "x_1,y");
    assert_eq!(rows(&csv).len(), 2000);

    ok(d, &["--out-dir", "fit", "train", "--data", "data/dataset.bin", "--hidden", "8,8", "--iterations", "300", "--eval-every", "100"]);
    ok(d, &["--out-dir", "ref", "simulate", "--problem", "p.txt", "--grid", "16"]);
    let reference = read(d.join("ref/reference.csv"));
    assert_eq!(reference.lines().nth(1).unwrap(), "x_1,estimate,std_error");

    ok(d, &["--out-dir", "ev1", "evaluate", "--network", "fit/network.txt", "--problem", "p.txt", "--grid", "16"]);
    ok(d, &["--out-dir", "ev2", "evaluate", "--network", "fit/network.txt", "--reference", "ref/reference.csv"]);
    let l2 = |p: &str| rows(&read(d.join(p)))[0][1].parse::<f64>().unwrap();
    // same closed-form grid either way
    assert_eq!(l2("ev1/evaluation.csv"), l2("ev2/evaluation.csv"));
    assert_eq!(rows(&read(d.join("ev1/predictions.csv"))).len(), 16);
}

#[test]
fn build_writes_network_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["init", "--dim", "2", "--output", "p.txt"]);
    let out = ok(d, &["build", "--problem", "p.txt", "--n", "32", "--retries", "2", "--grid", "8", "--paths", "500"]);
    assert!(out.contains("selected retry"));
    let report = read(d.join("build_report.csv"));
    assert_eq!(report.lines().nth(1).unwrap(), "retry,l2_error_estimate,theta_norm,param_count");
    assert_eq!(rows(&report).len(), 2);
    assert!(read(d.join("network.txt")).starts_with("arch: 2 "));
}

#[test]
fn scaling_study_needs_three_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let out = kolmo(dir.path(), &["scaling-study", "--dims", "2", "--iterations", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scaling_study_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |out: &str| {
        ok(
            d,
            &[
                "--out-dir", out, "scaling-study", "--dims", "1,2,3", "--base", "200", "--hidden", "4", "--iterations", "100",
                "--eval-every", "50", "--grid", "4", "--paths", "200", "--target", "1",
            ],
        )
    };
    let stdout = run("a");
    assert!(stdout.contains("verdict PASS"), "{stdout}");
    run("b");
    for f in ["scaling.csv", "audit.csv"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{f}");
    }
}

#[test]
fn config_sections_feed_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.ini"), "seed = 11\nout-dir = cfg\n[certify]\neps = 0.2\ndim = 3\n").unwrap();
    ok(d, &["--config", "run.ini", "certify"]);
    ok(d, &["--out-dir", "flags", "--seed", "11", "certify", "--eps", "0.2", "--dim", "3"]);
    // identical resolved settings give identical files, hash included
    assert_eq!(read(d.join("cfg/certificate.csv")), read(d.join("flags/certificate.csv")));

    std::fs::write(d.join("bad.ini"), "[certify]\nepsilon = 0.2\n").unwrap();
    let out = kolmo(d, &["--config", "bad.ini", "certify"]);
    assert_eq!(out.status.code(), Some(2));
}
