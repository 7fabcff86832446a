use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::CommandFactory;
use wdnsense::cli::Cli;
use wdnsense::formats::{self, ReportDoc, ResultDoc, SessionDoc};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wdnsense"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    formats::parse(&std::fs::read_to_string(path).unwrap(), true).unwrap()
}

/// Desk network and its centrality in a fresh directory.
fn desk(dir: &Path) -> (PathBuf, PathBuf) {
    let net = dir.join("net.json");
    let cent = dir.join("cent.json");
    ok(&["generate", "--seed", "42", "--out", &s(&net)]);
    ok(&["centrality", "--network", &s(&net), "--out", &s(&cent)]);
    (net, cent)
}

#[test]
fn every_flag_is_documented() {
    let mut cmd = Cli::command();
    cmd.build();
    let mut checked = 0;
    for sub in cmd.get_subcommands().filter(|c| c.get_name() != "help") {
        let help = ok(&[sub.get_name(), "--help"]);
        for arg in sub.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            assert!(arg.get_help().is_some(), "{} --{id} has no help text", sub.get_name());
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{} --help omits --{long}", sub.get_name());
            }
            checked += 1;
        }
    }
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if id != "help" && id != "version" {
            assert!(arg.get_help().is_some(), "global --{id} has no help text");
        }
    }
    assert!(checked > 30, "only {checked} flags inspected");
}

#[test]
fn solve_on_desk_grid_writes_documents() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = desk(dir.path());
    let stdout = ok(&["solve", "--network", &s(&net), "--sensors", "5", "--out-dir", &s(dir.path())]);
    assert!(stdout.contains("best energy"), "{stdout}");
    let result: ResultDoc = read(&dir.path().join("result.json"));
    let report: ReportDoc = read(&dir.path().join("report.json"));
    assert_eq!(result.schema_version, formats::SCHEMA_VERSION);
    assert_eq!(report.sensor_count, 5);
    assert!(report.constraint_satisfied);
    assert_eq!(report.selected, result.best_assignment);
    assert!(stdout.contains(&format!("best energy {}", result.best_energy)), "{stdout}");
}

#[test]
fn solve_records_one_energy_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let (net, cent) = desk(dir.path());
    ok(&[
        "solve", "--network", &s(&net), "--centrality", &s(&cent), "--sensors", "5", "--runs", "100", "--sweeps",
        "100", "--out-dir", &s(dir.path()),
    ]);
    let result: ResultDoc = read(&dir.path().join("result.json"));
    assert_eq!(result.energies.len(), 100);
    assert_eq!(result.metadata.wall_time_seconds.len(), 100);
    assert_eq!(result.best_energy, result.energies[result.best_run]);
}

#[test]
fn replan_with_rejected_node_drops_it() {
    let dir = tempfile::tempdir().unwrap();
    let (net, cent) = desk(dir.path());
    let session = dir.path().join("crew.json");
    let (net, cent, session_arg) = (s(&net), s(&cent), s(&session));
    let common = [
        "--network", &net, "--centrality", &cent, "--session", &session_arg, "--sensors", "5", "--runs", "20",
        "--sweeps", "200",
    ];
    let first = dir.path().join("first");
    std::fs::create_dir(&first).unwrap();
    let mut args = vec!["replan"];
    args.extend(common);
    let first_arg = s(&first);
    args.extend(["--out-dir", &first_arg]);
    let first_out = ok(&args);
    let report: ReportDoc = read(&first.join("report.json"));
    let victim = report.selected[0].clone();
    assert!(first_out.contains(&victim));

    let mark = format!("{victim}=rejected");
    let mut args = vec!["replan"];
    args.extend(common);
    args.extend(["--mark", &mark]);
    let second = ok(&args);
    let doc: SessionDoc = read(&session);
    assert_eq!(doc.id, "crew");
    assert_eq!(doc.rejected, vec![victim.clone()]);
    let last = doc.last_report.expect("replan stores its report");
    assert!(!last.selected.contains(&victim));
    assert_eq!(last.sensor_count, 5);
    let line = second.lines().find(|l| l.starts_with("selected ")).unwrap();
    assert!(!line.trim_start_matches("selected ").split(',').any(|id| id == victim));

    // a conflicting mark fails and leaves the session file untouched
    let before = std::fs::read(&session).unwrap();
    let mark = format!("{victim}=installed");
    let mut args = vec!["replan"];
    args.extend(common);
    args.extend(["--mark", &mark]);
    let out = run(&args);
    assert!(!out.status.success());
    assert_eq!(std::fs::read(&session).unwrap(), before);
}

fn error_line(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    assert_ne!(out.status.code(), Some(0));
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    let value: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert!(value["error"]["message"].is_string(), "{value}");
    value
}

#[test]
fn failures_print_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let v = error_line(&run(&["centrality", "--network", &s(&missing), "--out", &s(&dir.path().join("c.json"))]));
    assert_eq!(v["error"]["kind"], "io");

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"nodes\": [], \"edges\": 3}").unwrap();
    let v = error_line(&run(&["centrality", "--network", &s(&bad), "--out", &s(&dir.path().join("c.json"))]));
    assert_eq!(v["error"]["kind"], "document");
    assert!(v["error"]["message"].as_str().unwrap().contains("edges"), "{v}");

    let (net, _) = desk(dir.path());
    let v = error_line(&run(&["solve", "--network", &s(&net), "--sensors", "99"]));
    assert_eq!(v["error"]["kind"], "placement");
    let v = error_line(&run(&["generate", "--size", "1", "--out", &s(&dir.path().join("g.json"))]));
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn unknown_fields_are_rejected_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let (net, _) = desk(dir.path());
    let text = std::fs::read_to_string(&net).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["nodes"][0]["colour"] = serde_json::Value::from("blue");
    let odd = dir.path().join("odd.json");
    std::fs::write(&odd, value.to_string()).unwrap();
    let out_path = dir.path().join("c.json");
    let v = error_line(&run(&["centrality", "--network", &s(&odd), "--out", &s(&out_path)]));
    assert!(v["error"]["message"].as_str().unwrap().contains("nodes[0].colour"), "{v}");
    ok(&["--lenient", "centrality", "--network", &s(&odd), "--out", &s(&out_path)]);
    assert!(out_path.exists());
}

#[test]
fn repeated_commands_give_identical_bytes() {
    let outputs: Vec<Vec<(String, Vec<u8>)>> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let (net, cent) = desk(dir.path());
            let p = |n: &str| s(&dir.path().join(n));
            ok(&["build", "--network", &s(&net), "--sensors", "5", "--out", &p("qubo.json")]);
            ok(&[
                "solve", "--network", &s(&net), "--centrality", &s(&cent), "--sensors", "5", "--runs", "8",
                "--sweeps", "100", "--seed", "3", "--out-dir", &s(dir.path()),
            ]);
            ok(&[
                "evaluate", "--network", &s(&net), "--result", &p("result.json"), "--sensors", "5",
                "--baseline-trials", "500", "--out", &p("evaluation.json"),
            ]);
            ok(&["histogram", "--result", &p("result.json"), "--bins", "7", "--out", &p("hist.csv")]);
            let result: ResultDoc = read(&dir.path().join("result.json"));
            let mut files: Vec<(String, Vec<u8>)> =
                ["net.json", "cent.json", "qubo.json", "report.json", "evaluation.json", "hist.csv"]
                    .iter()
                    .map(|n| (n.to_string(), std::fs::read(dir.path().join(n)).unwrap()))
                    .collect();
            files.push(("result.json".into(), formats::to_pretty(&result.without_metadata()).into_bytes()));
            files
        })
        .collect();
    for (a, b) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(a, b, "{} differs between runs", a.0);
    }
}

#[test]
fn exact_solver_matches_sa_document_shape() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("small.json");
    ok(&["generate", "--size", "3", "--out", &s(&net)]);
    ok(&["solve", "--network", &s(&net), "--sensors", "2", "--solver", "exact", "--out-dir", &s(dir.path())]);
    let result: ResultDoc = read(&dir.path().join("result.json"));
    assert_eq!(result.solver, "exact");
    assert_eq!(result.energies.len(), 1);
    let report: ReportDoc = read(&dir.path().join("report.json"));
    assert_eq!(report.sensor_count, 2);
}
