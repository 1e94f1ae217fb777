use std::path::PathBuf;
use std::process::{Command, Output};

fn sensedeploy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensedeploy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

#[test]
fn report_ranks_all_cities() {
    let input = fixtures().join("winter-2015-cities.csv");
    let out = sensedeploy(&[
        "report",
        "--disease",
        "fibromyalgia",
        "--input",
        input.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rank,city,country,closeness");
    assert_eq!(lines.len(), 13);
    assert!(lines[1].starts_with("1,Phoenix,"), "{}", lines[1]);
}

#[test]
fn unknown_disease_is_rejected() {
    let input = fixtures().join("winter-2015-cities.csv");
    let out = sensedeploy(&[
        "report",
        "--disease",
        "gout",
        "--input",
        input.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn topsis_on_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    std::fs::write(&path, "option,cost:min,quality:max\na,1,1\nb,2,2\nc,1,2\n").unwrap();
    let out = sensedeploy(&["topsis", "--input", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("rank,option,closeness"));
    assert_eq!(lines.next(), Some("1,c,1"));
}

#[test]
fn deploy_with_local_agents() {
    let out = sensedeploy(&[
        "deploy",
        "--region",
        "europe",
        "--count",
        "30",
        "--local-agents",
        "3",
        "--selector",
        "random",
        "--seed",
        "4",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let view: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(view["state"], "complete");
    assert_eq!(view["devices"].as_array().unwrap().len(), 3);
    assert!(view["setup_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn deploy_to_dead_target_exits_nonzero() {
    let out = sensedeploy(&[
        "deploy",
        "--region=-10,10,40,50",
        "--count",
        "5",
        "--targets",
        "http://127.0.0.1:9",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let view: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(view["state"], "failed");
    assert_eq!(view["devices"][0]["ack"]["status"], "failed");
}

#[test]
fn bench_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("results");
    let out = sensedeploy(&[
        "bench",
        "--devices",
        "1,2",
        "--sensors",
        "200",
        "--reps",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trials = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 5);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary
        .lines()
        .next()
        .unwrap()
        .contains("setup_ms_mean,setup_ms_ci95"));
    assert!(!out_dir.join("work").exists());
}

#[test]
fn gen_fixture_writes_one_record_per_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.owm.ndjson");
    let out = sensedeploy(&[
        "gen-fixture",
        "--region",
        "north-america",
        "--count",
        "25",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 25);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["coord"]["lat"].is_number());
    }
}

#[test]
fn bad_region_is_rejected() {
    let out = sensedeploy(&[
        "deploy",
        "--region",
        "1,2,3",
        "--count",
        "5",
        "--targets",
        "http://x",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("four bounds"));
}
