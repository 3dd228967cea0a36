use std::path::PathBuf;
use std::process::Command;

fn fixture(rel: &str) -> String {
    btflow_cli::plant::fixtures_dir().join(rel).to_str().unwrap().to_string()
}

fn scratch(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn btflow(args: &[&str]) -> (i32, String, String) {
    btflow_env(args, "0")
}

fn btflow_env(args: &[&str], color: &str) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_btflow")).args(args).env("BTFLOW_COLOR", color).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn check_reports_findings_as_json_and_text() {
    let (code, stdout, stderr) = btflow(&["check", &fixture("invalid/parallel_writers.btlf")]);
    assert_eq!(code, 1);
    let item: serde_json::Value = serde_json::from_str(stdout.lines().next().unwrap()).unwrap();
    assert_eq!(item["code"], "E004");
    assert_eq!(item["nodePath"], "/0");
    assert_eq!((item["line"].as_u64(), item["col"].as_u64()), (Some(5), Some(5)));
    assert!(stderr.contains("parallel_writers.btlf:5:5: error[E004]"), "{stderr}");
    assert!(!stderr.contains('\x1b'));
    let (_, _, colored) = btflow_env(&["check", &fixture("invalid/parallel_writers.btlf")], "1");
    assert!(colored.contains("\x1b[1;31m"));
}

#[test]
fn syntax_errors_exit_one_with_location() {
    let path = scratch("broken.btlf");
    std::fs::write(&path, "behaviortree T {\n  sequence { }\n}\n").unwrap();
    let (code, stdout, stderr) = btflow(&["check", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stdout.contains("\"code\":\"E000\""));
    assert!(stderr.contains("broken.btlf:2:3: error: sequence requires at least one child"), "{stderr}");
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(btflow(&["check", "does/not/exist.btlf"]).0, 2);
    assert_eq!(btflow(&["frobnicate"]).0, 2);
    assert_eq!(btflow(&["run", &fixture("sequence_demo.btlf")]).0, 2);
    assert_eq!(btflow(&["dot", &fixture("sequence_demo.btlf"), "--view", "sideways"]).0, 2);
    let (code, stdout, _) = btflow(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("fuzz"));
}

#[test]
fn dot_views_are_deterministic() {
    let file = fixture("plant/agv.btlf");
    let (code, bt, _) = btflow(&["dot", &file, "--view", "bt"]);
    assert_eq!(code, 0);
    assert!(bt.contains("shape=ellipse, label=\"Has Job?\""));
    assert!(bt.contains("shape=box, label=\"Stop\""));
    assert_eq!(bt, btflow(&["dot", &file, "--view", "bt"]).1);
    let out = scratch("backward.dot");
    let args = ["dot", &fixture("channels/backward.btlf"), "--view", "reactors", "-o", out.to_str().unwrap()];
    assert_eq!(btflow(&args).0, 0);
    let first = std::fs::read(&out).unwrap();
    assert!(String::from_utf8_lossy(&first).contains("Pre_x"));
    btflow(&args);
    assert_eq!(first, std::fs::read(&out).unwrap());
}

#[test]
fn run_writes_a_trace_and_oracle_matches_it() {
    let cases = [
        ("sequence_demo.btlf", "sequence_demo.json"),
        ("channels/forward.btlf", "channels/ticks.json"),
        ("channels/backward.btlf", "channels/ticks.json"),
        ("plant/agv.btlf", "plant/scenario.json"),
    ];
    for (i, (tree, scenario)) in cases.iter().enumerate() {
        let compiled = scratch(&format!("compiled{i}.jsonl"));
        let oracle = scratch(&format!("oracle{i}.jsonl"));
        let base = ["run", &fixture(tree), "--scenario", &fixture(scenario), "--trace"];
        assert_eq!(btflow(&[&base[..], &[compiled.to_str().unwrap()]].concat()).0, 0);
        assert_eq!(btflow(&[&base[..], &[oracle.to_str().unwrap(), "--oracle"]].concat()).0, 0);
        assert_eq!(std::fs::read(&compiled).unwrap(), std::fs::read(&oracle).unwrap(), "{tree}");
    }
    let (_, trace, _) = btflow(&["run", &fixture("sequence_demo.btlf"), "--scenario", &fixture("sequence_demo.json")]);
    let starts = trace.lines().filter(|l| l.contains("\"subject\":\"start\"")).count();
    assert_eq!(starts, 3);
}

#[test]
fn full_traces_include_internal_ports() {
    let args = ["run", &fixture("channels/backward.btlf"), "--scenario", &fixture("channels/ticks.json")];
    let (_, plain, _) = btflow(&args);
    let (_, full, _) = btflow(&[&args[..], &["--full"]].concat());
    assert!(full.contains("Pre_x.out") && !plain.contains("Pre_x.out"));
    assert_eq!(btflow(&[&args[..], &["--full", "--oracle"]].concat()).0, 2);
}

#[test]
fn runtime_failures_exit_one() {
    let (code, _, stderr) = btflow(&["run", &fixture("sequence_demo.btlf"), "--scenario", &fixture("unknown_port.json")]);
    assert_eq!(code, 1);
    assert!(stderr.contains("unknown port `speed`"));
    let (code, trace, stderr) = btflow(&["run", &fixture("double_status.btlf"), "--scenario", &fixture("sequence_demo.json")]);
    assert_eq!(code, 1);
    assert!(stderr.contains("/1 at (250 ms, 0)"), "{stderr}");
    assert!(trace.lines().last().unwrap().contains("\"kind\":\"error\""));
}

#[test]
fn fuzz_reports_equivalence() {
    assert_eq!(btflow(&["fuzz", "--count", "0"]).1, "0/0 equivalent\n");
    let (code, stdout, _) = btflow(&["fuzz", "--count", "10", "--seed", "42"]);
    assert_eq!((code, stdout.as_str()), (0, "10/10 equivalent\n"));
}

#[test]
fn fuzz_catches_a_miscompiled_fallback() {
    let repro = scratch("repro.btlf");
    let args = ["fuzz", "--count", "10", "--seed", "42", "--mutate", "swap-fallback", "--repro", repro.to_str().unwrap()];
    let (code, stdout, _) = btflow(&args);
    assert_eq!(code, 1);
    assert!(stdout.contains("traces diverge at event"));
    assert_eq!(stdout, btflow(&args).1);
    let text = std::fs::read_to_string(&repro).unwrap();
    assert!(text.starts_with("// btflow fuzz --seed"));
    assert!(btflow_core::parse(&text).is_ok());
    assert!(repro.with_extension("json").exists());
}

#[test]
fn plant_matches_its_golden_trace() {
    let (code, stdout, stderr) = btflow(&["plant"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("jobs completed: 15"));
    assert!(stdout.contains("golden trace matches"));
}

#[test]
fn plant_detects_a_stale_golden() {
    let dir = scratch("stale-fixtures");
    std::fs::create_dir_all(dir.join("plant")).unwrap();
    std::fs::write(dir.join("plant/golden.jsonl"), "{}\n").unwrap();
    assert_eq!(btflow(&["plant", "--fixtures", dir.to_str().unwrap()]).0, 1);
    assert_eq!(btflow(&["plant", "--bless", "--fixtures", dir.to_str().unwrap()]).0, 0);
    assert_eq!(btflow(&["plant", "--fixtures", dir.to_str().unwrap()]).0, 0);
}
