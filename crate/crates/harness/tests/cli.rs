use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7
[train]
episodes = 4
iterations_per_episode = 10
[sweep]
loads = [0.3, 0.8]
repetitions = 2
trials = 20
[convergence]
loads = [0.2]
repetitions = 3
episode = 2
[virtual_compare]
grid = [0, 40]
speedup_loads = [0.6]
repetitions = 2
trials = 20
[waterfall]
loads = [0.7]
repetitions = 2
trials = 20
[coverage]
repetitions = 1
budget = 200
"#;

fn irsa_rl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsa-rl"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn stdout_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.lines().last().expect("status line")).unwrap()
}

#[test]
fn every_subcommand_succeeds_and_writes_csv() {
    let dir = setup();
    let cases = [
        ("baseline", vec!["baseline.csv"]),
        ("train", vec!["trace.csv", "policies.csv", "qtables.csv"]),
        ("eval", vec!["eval.csv"]),
        ("sweep", vec!["sweep.csv"]),
        ("convergence", vec!["convergence.csv"]),
        ("virtual-compare", vec!["virtual_compare.csv", "virtual_convergence.csv", "coverage.csv"]),
        ("waterfall", vec!["waterfall.csv", "waterfall_onset.csv"]),
    ];
    for (cmd, files) in cases {
        let out_dir = format!("out-{cmd}");
        let out = irsa_rl(dir.path(), &[cmd, "--config", "small.toml", "--out", &out_dir, "--workers", "2"]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout_json(&out)["status"], "ok");
        for f in files.iter().chain(&["summary.txt"]) {
            assert!(dir.path().join(&out_dir).join(f).is_file(), "{cmd} missing {f}");
        }
    }
    let trace = fs::read_to_string(dir.path().join("out-train/trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("trial,episode,iteration,mean_reward,throughput,resets"));
    assert_eq!(trace.lines().count(), 1 + 2 * 40);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = setup();
    let common = ["--config", "small.toml", "--seed", "11", "--variant", "vanilla_irsa,dec_rl,dec_rl_virtual"];
    let mut a = vec!["sweep", "--out", "a", "--workers", "1"];
    a.extend(common);
    let mut b = vec!["sweep", "--out", "b", "--workers", "4"];
    b.extend(common);
    assert!(irsa_rl(dir.path(), &a).status.success());
    assert!(irsa_rl(dir.path(), &b).status.success());
    let read = |d: &str| fs::read(dir.path().join(d).join("sweep.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    let mut c = vec!["sweep", "--out", "c", "--workers", "4", "--config", "small.toml", "--seed", "12"];
    c.extend(["--variant", "vanilla_irsa,dec_rl,dec_rl_virtual"]);
    assert!(irsa_rl(dir.path(), &c).status.success());
    assert_ne!(read("a"), read("c"));
}

#[test]
fn flags_override_the_configuration() {
    let dir = setup();
    let out = irsa_rl(
        dir.path(),
        &["baseline", "--config", "small.toml", "--reps", "3", "--trials", "5", "--variant", "slotted_aloha", "--out", "o"],
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("o/baseline.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.starts_with("slotted_aloha,") && r.split(',').nth(4) == Some("3")));
}

#[test]
fn empty_load_list_gives_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("empty.toml"), "[sweep]\nloads = []\n").unwrap();
    let out = irsa_rl(dir.path(), &["sweep", "--config", "empty.toml", "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().expect("error line")).unwrap()
}

#[test]
fn failures_exit_nonzero_with_a_json_error_line() {
    let dir = setup();
    let out = irsa_rl(dir.path(), &["sweep", "--variant", "csma", "--config", "small.toml"]);
    assert_eq!(out.status.code(), Some(2));
    let e = error_line(&out);
    assert_eq!(e["status"], "error");
    assert_eq!(e["kind"], "config");
    assert!(e["message"].as_str().unwrap().contains("csma"));

    fs::write(dir.path().join("bad.toml"), "[train]\nn_slotz = 3\n").unwrap();
    let out = irsa_rl(dir.path(), &["baseline", "--config", "bad.toml"]);
    assert_eq!(error_line(&out)["kind"], "config");
    assert!(!out.status.success());

    let out = irsa_rl(dir.path(), &["baseline", "--config", "missing.toml"]);
    let e = error_line(&out);
    assert_eq!(e["kind"], "io");
    assert!(e["message"].as_str().unwrap().contains("missing.toml"));

    fs::write(dir.path().join("blocker"), "not a directory").unwrap();
    let out = irsa_rl(dir.path(), &["baseline", "--config", "small.toml", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(error_line(&out)["message"].as_str().unwrap().contains("blocker"));

    let out = irsa_rl(dir.path(), &["train", "--config", "small.toml", "--variant", "vanilla_irsa"]);
    assert_eq!(out.status.code(), Some(2));
}
