use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gi_core::{EditOp, Patch, Provenance, SourceUnit};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn gi(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gi"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn gi")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const TESTS: &str = r#"
[[tests]]
id = "fib10"
args = ["10"]
expected_stdout = "55"

[[tests]]
id = "fib1"
args = ["1"]
expected_stdout = "1"

[[tests]]
id = "fib2"
args = ["2"]
expected_stdout = "1"
"#;

/// Writes a config next to a copy of `target` and returns its path.
fn config(dir: &Path, target: &str, extra: &str) -> PathBuf {
    std::fs::copy(fixtures().join(target), dir.join("target.py")).unwrap();
    let text = format!(
        "[target]\nfile = \"target.py\"\nentry_function = \"fibonacci\"\n{extra}\n[objective]\nname = \"time\"\nrepeats = 3\n\n[workload]\nargs = [\"27\"]\n{TESTS}"
    );
    let path = dir.join("gi.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn no_llm(generations: usize) -> String {
    format!("\n[evolution]\npopulation_size = 4\nmax_generations = {generations}\np_llm = 0.0\nseed = 1\n")
}

#[test]
fn missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = gi(&["run", "--config", "nope.toml"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));
}

#[test]
fn invalid_objective_and_population_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(1));
    let text = std::fs::read_to_string(&cfg).unwrap();

    std::fs::write(&cfg, text.replace("name = \"time\"", "name = \"energy\"")).unwrap();
    let out = gi(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("objective.name"));

    std::fs::write(&cfg, text.replace("population_size = 4", "population_size = 1")).unwrap();
    let out = gi(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("population_size"));
}

#[test]
fn missing_interpreter_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let profile = "\n[target.profile]\nsyntax_check_cmd = \"gi-no-such-interpreter -m py_compile {file}\"\nrun_cmd = \"gi-no-such-interpreter {file} {args}\"\n";
    let cfg = config(dir.path(), "fib_time.py", &format!("{profile}{}", no_llm(1)));
    let out = gi(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unreachable_provider_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let extra = format!(
        "\n[evolution]\npopulation_size = 4\nmax_generations = 2\np_llm = 1.0\n\n[provider]\nendpoint = \"http://127.0.0.1:{port}/v1/completions\"\nretry_attempts = 1\n"
    );
    let cfg = config(dir.path(), "fib_time.py", &extra);
    let out = gi(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn already_optimal_target_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "expected/fib_time_best.py", &no_llm(1));
    let out = gi(&["run", "--config", cfg.to_str().unwrap(), "--out", "out"], dir.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn default_output_layout_and_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(2));
    let out = gi(&["run", "--config", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
    assert!([0, 3].contains(&code(&out)), "{}", String::from_utf8_lossy(&out.stderr));

    let runs: Vec<_> = std::fs::read_dir(dir.path().join("runs")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(runs.len(), 1);
    let run_dir = &runs[0];
    assert!(run_dir.join("best.py").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("report.json")).unwrap()).unwrap();

    let keys: Vec<&str> = report.as_object().unwrap().keys().map(String::as_str).collect();
    let mut expected = vec![
        "run_id", "started_at", "finished_at", "config", "baseline", "best", "generations", "lineage", "provider",
        "measurement_method",
    ];
    expected.sort_unstable();
    let mut keys_sorted = keys.clone();
    keys_sorted.sort_unstable();
    assert_eq!(keys_sorted, expected);

    let run_id = report["run_id"].as_str().unwrap();
    assert_eq!(run_dir.file_name().unwrap().to_str().unwrap(), run_id);
    assert!(uuid::Uuid::parse_str(run_id).is_ok());
    for stamp in ["started_at", "finished_at"] {
        assert!(chrono::DateTime::parse_from_rfc3339(report[stamp].as_str().unwrap()).is_ok());
    }
    assert_eq!(report["config"]["seed"], 9);
    assert_eq!(report["config"]["population_size"], 4);
    assert_eq!(report["config"]["objective"], "time");
    assert_eq!(report["baseline"]["tests_passed"], 3);
    assert!(report["best"]["minimized"].is_boolean());
    assert!(report["best"]["patch"]["edits"].is_array());
    assert_eq!(report["best"]["patch"]["base_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["generations"].as_array().unwrap().len(), 3);
    assert!(report["generations"][1]["operator_counts"]["elite"].is_number());
    assert_eq!(report["provider"]["endpoint"], "none");
    assert!(report["measurement_method"].as_str().unwrap().contains("wall"));
}

#[test]
fn eval_prints_a_fitness_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(1));
    let src = fixtures().join("fib_time.py");
    let out = gi(&["eval", "--source", src.to_str().unwrap(), "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!((report["tests_passed"].as_u64(), report["tests_total"].as_u64()), (Some(3), Some(3)));

    std::fs::write(dir.path().join("broken.py"), "def fibonacci(n):\n  return (\n").unwrap();
    let out = gi(&["eval", "--source", "broken.py", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], false);

    let out = gi(&["eval", "--source", "absent.py", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&out), 1);
    let out = gi(&["eval", "--source", src.to_str().unwrap(), "--config", "absent.toml"], dir.path());
    assert_eq!(code(&out), 1);
}

fn three_edit_patch(unit: &SourceUnit) -> Patch {
    let fast = std::fs::read_to_string(fixtures().join("expected/fib_time_best.py")).unwrap();
    let end = unit.text().trim_end().len();
    Patch::new(
        unit,
        vec![
            EditOp::Swap { a: 1, b: 2 },
            EditOp::replace(0, end, fast.trim_end(), Provenance::Manual),
            EditOp::Delete { target: 3 },
        ],
    )
}

#[test]
fn minimize_keeps_only_the_load_bearing_edit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(1)).to_str().unwrap().to_string();
    let unit = SourceUnit::python(&std::fs::read_to_string(fixtures().join("fib_time.py")).unwrap());
    let patch = three_edit_patch(&unit);
    std::fs::write(dir.path().join("p.json"), patch.to_json()).unwrap();

    let out = gi(&["minimize", "--patch", "p.json", "--config", &cfg, "--out", "min.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let min = Patch::from_json(&std::fs::read_to_string(dir.path().join("min.json")).unwrap()).unwrap();
    assert_eq!(min.edits, vec![patch.edits[1].clone()]);

    std::fs::write(dir.path().join("id.json"), Patch::identity(&unit).to_json()).unwrap();
    let out = gi(&["minimize", "--patch", "id.json", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(Patch::from_json(&String::from_utf8_lossy(&out.stdout)).unwrap(), Patch::identity(&unit));
}

#[test]
fn minimize_rejects_a_stale_base() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(1)).to_str().unwrap().to_string();
    let other = SourceUnit::python("def fibonacci(n):\n  return 1\n");
    let patch = Patch::new(&other, vec![EditOp::Delete { target: 0 }]);
    std::fs::write(dir.path().join("p.json"), patch.to_json()).unwrap();
    let out = gi(&["minimize", "--patch", "p.json", "--config", &cfg], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not match"));
}

#[test]
fn repeated_runs_write_identical_best_source() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "fib_time.py", &no_llm(2)).to_str().unwrap().to_string();
    for out_dir in ["a", "b"] {
        gi(&["run", "--config", &cfg, "--out", out_dir], dir.path());
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("best.py")).unwrap();
    assert_eq!(read("a"), read("b"));
}
