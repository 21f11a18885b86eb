use std::path::Path;
use std::process::{Command, Output};

fn plci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plci"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_lines(text: &str) -> Vec<serde_json::Value> {
    text.lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn quadratic_demo_interval() {
    let o = plci(&["ci", "--demo", "quadratic", "--params", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("[-1.959964, 1.959964]"), "{out}");
    let records = json_lines(&out);
    assert_eq!(records.len(), 1);
    assert_eq!(records[0]["upper_status"], "converged");
}

#[test]
fn flat_demo_is_unbounded() {
    let o = plci(&["ci", "--demo", "flat", "--params", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("(-inf, inf)"), "{out}");
    assert!(out.contains("inestimable/inestimable"));
    let records = json_lines(&out);
    assert_eq!(records[0]["lower"], "-inf");
    assert_eq!(records[0]["upper"], "inf");
}

#[test]
fn one_record_per_method() {
    let o = plci(&["ci", "--demo", "quadratic", "--params", "1", "--method", "wald,rvm"]);
    assert_eq!(o.status.code(), Some(0));
    let records = json_lines(&stdout(&o));
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["method"], "wald");
    assert_eq!(records[1]["method"], "rvm");
}

#[test]
fn alpha_changes_the_level() {
    let o = plci(&["ci", "--demo", "quadratic", "--params", "0", "--alpha", "0.1"]);
    assert!(stdout(&o).contains("[-1.644854, 1.644854]"), "{}", stdout(&o));
}

#[test]
fn trace_goes_to_stderr() {
    let o = plci(&["ci", "--demo", "quadratic", "--params", "0", "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("iter=1"));
    assert_eq!(json_lines(&stdout(&o)).len(), 1);
}

#[test]
fn json_lines_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ci.jsonl");
    let o = plci(&["ci", "--demo", "quadratic", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(json_lines(&stdout(&o)).is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(json_lines(&text).len(), 2);
}

#[test]
fn family_ci_on_dumped_data_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let csv = csv.to_str().unwrap();
    let sim = plci(&["ci", "--family", "transformed3", "--n", "2000", "--seed", "3", "--params", "2", "--methods", "wald", "--dump-data", csv]);
    assert_eq!(sim.status.code(), Some(0), "{}", stderr(&sim));
    assert!(std::fs::read_to_string(csv).unwrap().starts_with("x,c1\n"));
    let read = plci(&["ci", "--family", "transformed3", "--data", csv, "--params", "2", "--methods", "wald"]);
    assert_eq!(read.status.code(), Some(0), "{}", stderr(&read));
    assert_eq!(stdout(&sim), stdout(&read));
}

#[test]
fn malformed_data_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    std::fs::write(&csv, "x,c1\n1,2.0\n0,abc\n").unwrap();
    let o = plci(&["ci", "--data", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

fn run_benchmark(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["benchmark", "--family", "transformed3", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    plci(&args)
}

#[test]
fn benchmark_rows_and_report_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_benchmark(
        dir.path(),
        &["--n", "1000", "--replicates", "5", "--methods", "rvm,wald", "--seed", "1"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert!(runs.starts_with("method,family,N,replicate,param,side,endpoint,truth,success,status,n_evals,error\n"));
    assert_eq!(runs.lines().count() - 1, 5 * 3 * 2 * 2);
    assert!(runs.ends_with('\n') && !runs.contains('\r'));

    let inline = stdout(&o);
    let report_file = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(inline, report_file);
    let again = plci(&["report", dir.path().join("runs.csv").to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again), inline);
}

#[test]
fn report_over_split_files_matches_combined() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let both = dir.path().join("both");
    let common = ["--n", "300", "--methods", "rvm,vm", "--replicates", "3"];
    let one = run_benchmark(&a, &[&common[..], &["--seed", "4"]].concat());
    let two = run_benchmark(&b, &[&common[..], &["--seed", "5"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(two.status.code(), Some(0));
    // the same rows in one file
    let ra = std::fs::read_to_string(a.join("runs.csv")).unwrap();
    let rb = std::fs::read_to_string(b.join("runs.csv")).unwrap();
    std::fs::create_dir_all(&both).unwrap();
    let joined = format!("{ra}{}", rb.split_once('\n').unwrap().1);
    std::fs::write(both.join("runs.csv"), joined).unwrap();

    let split = plci(&["report", a.join("runs.csv").to_str().unwrap(), b.join("runs.csv").to_str().unwrap()]);
    let combined = plci(&["report", both.join("runs.csv").to_str().unwrap()]);
    assert_eq!(split.status.code(), Some(0));
    assert_eq!(stdout(&split), stdout(&combined));
}

#[test]
fn parallel_and_sequential_files_are_identical() {
    let seq = tempfile::tempdir().unwrap();
    let par = tempfile::tempdir().unwrap();
    let args = ["--n", "500", "--replicates", "4", "--methods", "rvm,bisection", "--seed", "9"];
    let a = run_benchmark(seq.path(), &[&args[..], &["--jobs", "1"]].concat());
    let b = run_benchmark(par.path(), &[&args[..], &["--jobs", "2"]].concat());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    for f in ["runs.csv", "report.csv"] {
        assert_eq!(
            std::fs::read(seq.path().join(f)).unwrap(),
            std::fs::read(par.path().join(f)).unwrap()
        );
    }
}

#[test]
fn report_schema_mismatch_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_benchmark(dir.path(), &["--n", "1000", "--replicates", "1", "--methods", "wald", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let runs = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    let mut lines: Vec<String> = runs.lines().map(String::from).collect();
    lines[2] = lines[2].replacen("wald", "newton", 1);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let r = plci(&["report", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert!(stderr(&r).contains("line 3"), "{}", stderr(&r));
}

#[test]
fn config_file_supplies_flags_and_knobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "methods = [\"rvm\"]\nreplicates = 2\nn = 300\nseed = 11\ngamma = 0.4\ngrid_step = 0.1\n").unwrap();
    let o = run_benchmark(dir.path(), &["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().nth(1).unwrap().starts_with("rvm,transformed3,300,"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "alpha = 0.5\n").unwrap();
    let o = plci(&["ci", "--demo", "quadratic", "--params", "0", "--config", cfg.to_str().unwrap(), "--alpha", "0.05"]);
    assert!(stdout(&o).contains("[-1.959964, 1.959964]"));
}

#[test]
fn singular_policy_flag() {
    for p in ["hold", "mpi"] {
        let o = plci(&["ci", "--demo", "flat", "--params", "0", "--singular-policy", p]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("(-inf, inf)"));
    }
    let o = plci(&["ci", "--demo", "flat", "--singular-policy", "qr"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["ci", "--bogus"][..],
        &["ci", "--demo", "quadratic", "--methods", "newton"],
        &["ci", "--demo", "quadratic", "--alpha", "1.5"],
        &["ci", "--demo", "quadratic", "--params", "7"],
        &["benchmark", "--replicates", "0", "--out", "/tmp"],
        &["benchmark", "--family", "cubic"],
        &["report"],
    ] {
        let o = plci(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "gama = 1\n").unwrap();
    let o = plci(&["ci", "--demo", "quadratic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gama"));
}

#[test]
fn io_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    std::fs::write(&file, "").unwrap();
    // a file where the output directory should go
    let o = run_benchmark(&file, &["--n", "100", "--replicates", "1", "--methods", "wald"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = plci(&["report", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = plci(&["ci", "--demo", "quadratic", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let o = plci(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("benchmark"));
}
