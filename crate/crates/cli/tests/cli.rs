use std::path::Path;
use std::process::{Command, Output};

fn inav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inav")).args(args).env_remove("INAV_BENCH_DIR").output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap()
}

#[test]
fn generate_writes_deterministic_scenes() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = inav(&["generate", "--rooms", "4", "--count", "10", "--seed", "3", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout(&out).lines().count(), 10);
    }
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10);
    for name in names {
        let name = name.to_str().unwrap();
        assert_eq!(read(&a, name), read(&b, name), "{name} differs");
        let scene = inav_core::scene::load_scene(&String::from_utf8(read(&a, name)).unwrap()).unwrap();
        assert!(scene.doors.len() + scene.openings.len() >= 3);
    }
}

#[test]
fn invalid_input_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = inav(&["generate", "--rooms", "0", "--count", "1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = inav(&["run", "--scene", "no_such_scene.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_scene.json"));
}

#[test]
fn run_reports_metrics() {
    let out = inav(&["run", "--scene", "empty_room", "--agent", "path_follower", "--seed", "0"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("status success"));
    let p: f64 = text.lines().find_map(|l| l.strip_prefix("P_eff ")).unwrap().parse().unwrap();
    assert!(p >= 0.95);

    let out = inav(&["run", "--scene", "blocked_corridor", "--agent", "avoider", "--seed", "0"]);
    assert!(stdout(&out).contains("status timeout"));
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut dirs = Vec::new();
    for workers in ["1", "8"] {
        let dir = tmp.path().join(format!("w{workers}"));
        let out = inav(&[
            "sweep",
            "--scene",
            "empty_room",
            "--scene",
            "blocked_corridor",
            "--param",
            "0,0.1,1.0",
            "--seeds-per-cell",
            "3",
            "--workers",
            workers,
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        dirs.push(dir);
    }
    let records = std::fs::read_to_string(dirs[0].join("records.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 3 * 3 * 2 * 3);
    assert_eq!(std::fs::read_dir(dirs[0].join("records")).unwrap().count(), 54);
    for file in ["summary.csv", "tradeoff.csv", "ins_vs_alpha.csv", "ttest.json"] {
        assert_eq!(read(&dirs[0], file), read(&dirs[1], file), "{file} differs");
    }

    // cost_aware trades path efficiency for effort efficiency as lambda grows
    let text = String::from_utf8(read(&dirs[0], "tradeoff.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let cost_aware: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r[0] == "cost_aware")
        .map(|r| (r[3].parse().unwrap(), r[4].parse().unwrap()))
        .collect();
    assert_eq!(cost_aware.len(), 3);
    assert!(cost_aware[0].0 >= cost_aware[2].0);
    assert!(cost_aware[0].1 <= cost_aware[2].1);

    // report regenerates the same tables from the records
    let again = tmp.path().join("report");
    let out = inav(&[
        "report",
        "--in",
        dirs[0].to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&dirs[0], "summary.csv"), read(&again, "summary.csv"));
}

#[test]
fn bench_reports_throughput() {
    let out = inav(&["bench", "--steps", "500"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("steps/s"));
}

#[test]
fn serve_speaks_ndjson() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(env!("CARGO_BIN_EXE_inav"))
        .args(["serve", "--scene", "empty_room", "--seed", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"{\"op\":\"reset\"}\n{\"op\":\"step\",\"action\":[1.0,1.0]}\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1]["info"]["t"], 1);
    assert!(lines[1]["reward"].is_number());
}
