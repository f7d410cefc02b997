use std::path::Path;
use std::process::{Command, Output};
use std::thread;

use evoxplain::{Explanation, RasterImage, SuperpixelMap};
use tiny_http::{Response, Server};

fn evoxplain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evoxplain"))
        .args(args)
        .env_remove("EVOXPLAIN_MODEL_URL")
        .output()
        .expect("run evoxplain")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Answers every request with `status` and `body`.
fn mock(status: u16, body: &'static str) -> String {
    let server = Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    thread::spawn(move || {
        for mut request in server.incoming_requests() {
            let mut sink = Vec::new();
            let _ = request.as_reader().read_to_end(&mut sink);
            let _ = request.respond(Response::from_string(body).with_status_code(status));
        }
    });
    format!("http://127.0.0.1:{port}")
}

#[test]
fn segment_uniform_image_into_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("u.png");
    let map_path = dir.path().join("map.json");
    let overlay = dir.path().join("overlay.png");
    RasterImage::filled(16, 16, [120, 80, 40]).unwrap().write_png(&img).unwrap();
    let o = evoxplain(&[
        "segment",
        "--image",
        path_str(&img),
        "--superpixels",
        "4",
        "--out",
        path_str(&overlay),
        "--map-out",
        path_str(&map_path),
        "--check",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("check: ok"));
    let map = SuperpixelMap::from_json(&std::fs::read_to_string(&map_path).unwrap()).unwrap();
    assert_eq!(map.ns(), 4);
    for y in 0..16 {
        for x in 0..16 {
            assert_eq!(map.label_at(x, y), (x / 8) + 2 * (y / 8));
        }
    }
    assert_eq!(RasterImage::read_png(&overlay).unwrap().dimensions(), (16, 16));
}

#[test]
fn segment_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("u.png");
    RasterImage::filled(16, 16, [1, 2, 3]).unwrap().write_png(&img).unwrap();
    let o = evoxplain(&["segment", "--image", path_str(&img), "--superpixels", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let corrupt = dir.path().join("bad.png");
    std::fs::write(&corrupt, b"\x89PNG\r\n\x1a\nnot really").unwrap();
    let o = evoxplain(&["segment", "--image", path_str(&corrupt)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let o = evoxplain(&["segment", "--image", path_str(&dir.path().join("missing.png"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn segment_check_on_a_photo_sized_image() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("p.png");
    RasterImage::from_fn(224, 224, |x, y| {
        let r = ((x as f64 / 9.0).sin() * 60.0 + 120.0) as u8;
        let g = ((y as f64 / 13.0).cos() * 70.0 + 110.0) as u8;
        [r, g, ((x + y) % 256) as u8]
    })
    .unwrap()
    .write_png(&img)
    .unwrap();
    let o = evoxplain(&["segment", "--image", path_str(&img), "--superpixels", "100", "--check"]);
    assert!(o.status.success(), "{o:?}");
    let ns: usize = stdout(&o).lines().next().unwrap().trim_start_matches("superpixels: ").parse().unwrap();
    assert!((1..=100).contains(&ns));
}

#[test]
fn explain_builtin_demo_and_matching_baseline_budget() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("elime.json");
    let png = dir.path().join("elime.png");
    let o = evoxplain(&[
        "explain",
        "--model",
        "builtin:demo",
        "--seed",
        "4",
        "--report",
        path_str(&report),
        "--out",
        path_str(&png),
    ]);
    assert!(o.status.success(), "{o:?}");
    let e = Explanation::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(e.history.len(), 51);
    assert!(e.history.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(e.classifier_calls, 100 * 51 + 1);
    assert_eq!(RasterImage::read_png(&png).unwrap().dimensions(), (64, 48));

    let lime_report = dir.path().join("lime.json");
    let o = evoxplain(&[
        "explain",
        "--model",
        "builtin:demo",
        "--method",
        "lime",
        "--budget-from",
        path_str(&report),
        "--report",
        path_str(&lime_report),
    ]);
    assert!(o.status.success(), "{o:?}");
    let l = Explanation::from_json(&std::fs::read_to_string(&lime_report).unwrap()).unwrap();
    assert_eq!(l.selected_count(), e.selected_count());
    assert_eq!(l.classifier_calls, 1001);
}

#[test]
fn explain_parameter_errors() {
    let o = evoxplain(&["explain", "--model", "builtin:demo", "--method", "lime"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evoxplain(&["explain", "--model", "builtin:nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evoxplain(&["explain", "--model", "ftp://x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evoxplain(&["explain", "--model", "builtin:demo", "--population-size", "7"]);
    assert_eq!(o.status.code(), Some(2));
    let o = evoxplain(&["explain"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "model = builtin:demo\ngenerations = 3\npopulation_size = 10\n").unwrap();
    let report = dir.path().join("r.json");
    let o = evoxplain(&[
        "--config",
        path_str(&cfg),
        "explain",
        "--generations",
        "5",
        "--report",
        path_str(&report),
    ]);
    assert!(o.status.success(), "{o:?}");
    let e = Explanation::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(e.history.len(), 6);
    assert_eq!(e.classifier_calls, 10 * 6 + 1);

    std::fs::write(&cfg, "generatoins = 3\n").unwrap();
    let o = evoxplain(&["--config", path_str(&cfg), "explain", "--model", "builtin:demo"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn explain_against_remote_model() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("i.png");
    RasterImage::from_fn(24, 24, |x, y| [40 + x as u8 * 5, 40 + y as u8 * 5, 100]).unwrap().write_png(&img).unwrap();

    let healthy = mock(200, r#"{"classes": 2, "probabilities": [0.25, 0.75]}"#);
    let o = Command::new(env!("CARGO_BIN_EXE_evoxplain"))
        .args(["explain", "--image", path_str(&img), "--superpixels", "4", "--generations", "1"])
        .args(["--population-size", "4", "--jobs", "2"])
        .env("EVOXPLAIN_MODEL_URL", &healthy)
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("calls 9"), "{}", stdout(&o));

    let bad_sum = mock(200, r#"{"classes": 2, "probabilities": [0.25, 0.25]}"#);
    let o = evoxplain(&["explain", "--image", path_str(&img), "--model", &bad_sum]);
    assert_eq!(o.status.code(), Some(4));

    let o = evoxplain(&["explain", "--image", path_str(&img), "--model", "http://127.0.0.1:9"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_model_exit_codes() {
    let healthy = mock(200, r#"{"classes": 1000}"#);
    let o = evoxplain(&["check-model", "--model", &healthy]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "classes: 1000");

    let o = evoxplain(&["check-model", "--model", "http://127.0.0.1:9", "--timeout-ms", "1000"]);
    assert_eq!(o.status.code(), Some(3));

    let malformed = mock(200, "classes=1000");
    let o = evoxplain(&["check-model", "--model", &malformed]);
    assert_eq!(o.status.code(), Some(4));

    let failing = mock(503, r#"{"error": "loading"}"#);
    let o = evoxplain(&["check-model", "--model", &failing]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn bench_single_run_reports_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite.toml");
    std::fs::write(
        &suite,
        r#"
methods = ["elime", "lime"]

[ga]
population_size = 20
generations = 10

[lime]
num_samples = 100

[[scenario]]
name = "tiny"
ns = 12
salient = 4
distractors = 2
weight = 3.0
width = 64
height = 48
seed = 7
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = evoxplain(&["bench", "--suite", path_str(&suite), "--runs", "1", "--out-dir", path_str(&out)]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[col("std_fitness")], "0");
        assert_eq!(cells[col("std_time_s")], "0");
        assert_eq!(cells[col("median_oracle_gap")].is_empty(), false);
    }
    assert!(out.join("report.json").exists());

    std::fs::write(&suite, "runs = [").unwrap();
    let o = evoxplain(&["bench", "--suite", path_str(&suite), "--out-dir", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn demo_image_matches_builtin_reference() {
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("demo.png");
    let o = evoxplain(&["demo-image", "--out", path_str(&png)]);
    assert!(o.status.success());
    let report = dir.path().join("r.json");
    let o = evoxplain(&[
        "explain",
        "--model",
        "builtin:demo",
        "--image",
        path_str(&png),
        "--generations",
        "2",
        "--report",
        path_str(&report),
    ]);
    assert!(o.status.success(), "{o:?}");
}
