use std::path::Path;
use std::process::{Command, Output};

use fairfed_cli::commands::run_experiment;
use fairfed_cli::report::{summary_row, RunReportFile};
use fairfed_cli::spec::ExperimentSpec;

const BIN: &str = env!("CARGO_BIN_EXE_fairfed");

fn fairfed(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("FAIRFED_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const SPEC: &str = "\
seed = 5
data.seed = 9
data.n = 400
clients = 4
methods = fedminmax, centralized, fedavg:fa
rounds = 15
hidden = 6
fa.rounds = 3
fa.local_epochs = 2
";

#[test]
fn gen_data_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    for f in ["a.csv", "b.csv"] {
        let o = fairfed(&["gen-data", "--n", "300", "--seed", "4", "--out", f], dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 301);

    let o = fairfed(&["gen-data", "--u1h", "1.01", "--out", "c.csv"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(!dir.path().join("c.csv").exists());
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = fairfed(&["gen-data", "--n", "10", "--out", "missing/dir/d.csv"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn partition_writes_one_file_per_client() {
    let dir = tempfile::tempdir().unwrap();
    fairfed(&["gen-data", "--n", "200", "--seed", "1", "--out", "d.csv"], dir.path());
    let o = fairfed(
        &["partition", "--data", "d.csv", "--scheme", "ssg", "--clients", "4", "--seed", "2", "--out", "p"],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let files = std::fs::read_dir(dir.path().join("p")).unwrap().count();
    assert_eq!(files, 4);

    let o = fairfed(
        &["partition", "--data", "d.csv", "--scheme", "ssg", "--clients", "3", "--seed", "2", "--out", "q"],
        dir.path(),
    );
    assert_eq!(code(&o), 2, "3 clients cannot split 2 groups evenly");
}

#[test]
fn train_rejects_bad_specs_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "seed = 1\ndata.seed = 1\nmethods =\nout = o\n",
        "seed = 1\ndata.seed = 1\nmethods = fedminmax\nscheme = psg\nout = o\n",
        "data.seed = 1\nmethods = fedminmax\nout = o\n",
    ];
    for (i, text) in cases.iter().enumerate() {
        let path = dir.path().join(format!("s{i}.txt"));
        std::fs::write(&path, text).unwrap();
        let o = fairfed(&["train", path.to_str().unwrap()], dir.path());
        assert_eq!(code(&o), 2, "case {i}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = fairfed(&["train", "does-not-exist.txt"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn psg_error_names_the_precondition() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), "seed = 1\ndata.seed = 1\nmethods = fedavg\nscheme = psg\nout = o\n").unwrap();
    let o = fairfed(&["train", "s.txt"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("more than two groups"));
}

#[test]
fn federated_and_centralized_runs_emit_the_same_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), SPEC).unwrap();
    let o = fairfed(&["train", "s.txt", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let load = |label: &str| -> RunReportFile {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o").join(label).join("run_report.json")).unwrap()).unwrap()
    };
    let (fed, central) = (load("fedminmax"), load("centralized"));
    assert_eq!(fed.rounds.len(), 15);
    for (a, b) in fed.rounds.iter().zip(&central.rounds) {
        for (x, y) in a.mu.as_ref().unwrap().iter().zip(b.mu.as_ref().unwrap()) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.group_risks.iter().zip(&b.group_risks) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn emitted_files_round_trip_to_in_memory_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::parse(SPEC, dir.path(), None).unwrap();
    let outcomes = run_experiment(&spec, false).unwrap();
    fairfed_cli::commands::write_outputs(&outcomes, dir.path()).unwrap();

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), outcomes.len());
    for (o, row) in outcomes.iter().zip(&rows) {
        let text = std::fs::read_to_string(dir.path().join(&o.label).join("run_report.json")).unwrap();
        let parsed: RunReportFile = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, o.file);
        assert_eq!(&summary_row(&o.file), row);
        let worst: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
        assert_eq!(worst, o.file.risk_table.worst_risk.mean);

        let model = fairfed_cli::report::ModelFile::load(&dir.path().join(&o.label).join("model.json")).unwrap();
        assert_eq!(&model, o.report.model());
    }
}

#[test]
fn seed_env_overrides_spec_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), SPEC).unwrap();
    let run = |out: &str, seed: Option<&str>| {
        let mut cmd = Command::new(BIN);
        cmd.args(["train", "s.txt", "--out", out]).current_dir(dir.path());
        match seed {
            Some(s) => cmd.env("FAIRFED_SEED", s),
            None => cmd.env_remove("FAIRFED_SEED"),
        };
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(dir.path().join(out).join("fedminmax/run_report.json")).unwrap()
    };
    let base = run("a", None);
    let same = run("b", Some("5"));
    let other = run("c", Some("6"));
    assert_eq!(base, same);
    assert_ne!(base, other);
    assert!(other.contains("\"seed\": 6"));

    let mut cmd = Command::new(BIN);
    let o = cmd
        .args(["train", "s.txt", "--out", "d"])
        .current_dir(dir.path())
        .env("FAIRFED_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn parallel_flag_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), SPEC).unwrap();
    assert_eq!(code(&fairfed(&["train", "s.txt", "--out", "seq"], dir.path())), 0);
    assert_eq!(code(&fairfed(&["train", "s.txt", "--out", "par", "--parallel"], dir.path())), 0);
    for f in ["summary.csv", "fedminmax/run_report.json", "fa/run_report.json", "fa/model.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("seq").join(f)).unwrap(),
            std::fs::read(dir.path().join("par").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn eval_reads_saved_models() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.txt"), SPEC).unwrap();
    fairfed(&["train", "s.txt", "--out", "o"], dir.path());
    fairfed(&["gen-data", "--n", "100", "--seed", "3", "--out", "t.csv"], dir.path());
    let o = fairfed(&["eval", "--model", "o/fedminmax/model.json", "--data", "t.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("group 0: risk") && out.contains("group 1: risk"));

    let o = fairfed(&["eval", "--model", "o/fedminmax/model.json"], dir.path());
    assert_eq!(code(&o), 2, "missing --data is a usage error");
}

#[test]
fn oracle_prints_the_minimax_point() {
    let o = fairfed(&["eval", "--oracle"], Path::new("."));
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("q = (0.3000, 0.6000)"), "{out}");
    assert!(out.contains("(0.4500, 0.3100)"), "{out}");
    assert!(out.contains("(0.4825, 0.2125)"), "{out}");
}

#[test]
fn check_suites_and_injected_failure() {
    let o = fairfed(&["check"], Path::new("."));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().filter(|l| l.starts_with("PASS")).count(), 4);

    let o = fairfed(&["check", "--suite", "projection"], Path::new("."));
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("PASS projection"));

    let o = fairfed(&["check", "--suite", "equivalence", "--inject-lr-mismatch"], Path::new("."));
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("FAIL equivalence"));

    assert_eq!(code(&fairfed(&["check", "--suite", "bogus"], Path::new("."))), 2);
}
