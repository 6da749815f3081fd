use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use shuttlelab_core::model::MatchBundle;
use shuttlelab_core::stats::{summarize, Scope};
use shuttlelab_core::GameHalf;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shuttlelab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, seed: u64, rallies: usize) -> PathBuf {
    let input = dir.join(format!("in-{seed}"));
    let out = run(&[
        "synth",
        p(&input),
        "--seed",
        &seed.to_string(),
        "--rallies",
        &rallies.to_string(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    input
}

fn analyzed(dir: &Path, seed: u64, rallies: usize) -> PathBuf {
    let input = synth(dir, seed, rallies);
    let bundle = dir.join(format!("bundle-{seed}.json"));
    let out = run(&["analyze", p(&input), "-o", p(&bundle)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    bundle
}

fn read_bundle(path: &Path) -> MatchBundle {
    MatchBundle::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert_eq!(
            code(&run(&["synth", p(d), "--seed", "42", "--rallies", "30"])),
            0
        );
    }
    let mut names: Vec<_> = std::fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for name in names {
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn synth_with_zero_rallies_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", p(&dir.path().join("x")), "--rallies", "0"]);
    assert_ne!(code(&out), 0);
    assert!(stderr(&out).contains("at least one rally"));
}

#[test]
fn synth_analyze_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in [1, 2] {
        let input = synth(dir.path(), seed, 3);
        assert_eq!(code(&run(&["validate", p(&input)])), 0);
        let out = run(&["analyze", p(&input)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        let bundle = input.join("bundle.json");
        let out = run(&["validate", p(&bundle)]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
        let b = read_bundle(&bundle);
        assert!(b.shots().all(|(_, _, s)| s.fit.is_some()));
    }
}

#[test]
fn stats_json_matches_bundle_fields() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = analyzed(dir.path(), 4, 6);
    let b = read_bundle(&bundle);

    let out = run(&["stats", p(&bundle), "--format", "json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["summary"]["rally_count"], b.rally_count());
    assert_eq!(v["matched_shots"], b.shots().count());
    assert_eq!(
        v["games"],
        serde_json::to_value(&b.summaries.games).unwrap()
    );

    let out = run(&[
        "stats",
        p(&bundle),
        "--game",
        "1",
        "--half",
        "first",
        "--format",
        "json",
    ]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let want = summarize(
        &b,
        Scope::Half {
            game: 1,
            half: GameHalf::First,
        },
    );
    assert_eq!(v["summary"], serde_json::to_value(&want).unwrap());

    let text = stdout(&run(&["stats", p(&bundle)]));
    let m = &b.summaries.matches;
    assert!(
        text.contains(&format!("rallies         {}", m.rally_count)),
        "{text}"
    );
    assert!(text.contains(&format!("avg shots/rally {:.2}", m.avg_shots_per_rally)));
    assert!(text.contains("Shots from") && text.contains("Shots to"));
}

#[test]
fn stats_reports_an_empty_filter_explicitly() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 5, 2);
    let bundle = dir.path().join("b.json");
    assert_eq!(
        code(&run(&["analyze", p(&input), "--no-fit", "-o", p(&bundle)])),
        0
    );
    // Without fits nothing is labeled, so no shot is a winner.
    let out = run(&["stats", p(&bundle), "--role", "winners"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("0 shots"), "{}", stdout(&out));
}

#[test]
fn no_fit_leaves_tendencies_absent() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 6, 3);
    let bundle = dir.path().join("b.json");
    let out = run(&["analyze", p(&input), "--no-fit", "-o", p(&bundle)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let b = read_bundle(&bundle);
    assert!(b
        .shots()
        .all(|(_, _, s)| s.tendency.is_none() && s.fit.is_none()));
    assert!(b.rallies().all(|r| r.degenerate.is_some()));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 7, 2);
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "jobs = 1\n[analyze]\nno_fit = true\nzone_bounds = [2.0, 4.0]\n",
    )
    .unwrap();
    let bundle = dir.path().join("b.json");
    let out = run(&["--config", p(&cfg), "analyze", p(&input), "-o", p(&bundle)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let b = read_bundle(&bundle);
    assert_eq!(b.court.zone_bounds, [2.0, 4.0]);
    assert!(b.shots().all(|(_, _, s)| s.fit.is_none()));

    std::fs::write(&cfg, "[analyze]\nbogus = 1\n").unwrap();
    assert_eq!(code(&run(&["--config", p(&cfg), "analyze", p(&input)])), 2);
}

#[test]
fn invalid_inputs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 8, 3);

    let overlapping = dir.path().join("overlap");
    copy_dir(&input, &overlapping);
    let rallies = overlapping.join("rallies.csv");
    let text = std::fs::read_to_string(&rallies).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // Start rally 2 one frame before rally 1 ends.
    let end1: u64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    let mut f: Vec<String> = lines[2].split(',').map(String::from).collect();
    f[1] = (end1 - 1).to_string();
    lines[2] = f.join(",");
    std::fs::write(&rallies, lines.join("\n") + "\n").unwrap();
    let out = run(&["validate", p(&overlapping)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("overlaps"), "{}", stderr(&out));

    let no_shots = dir.path().join("no-shots");
    copy_dir(&input, &no_shots);
    std::fs::remove_file(no_shots.join("shots.csv")).unwrap();
    let out = run(&["validate", p(&no_shots)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("shots.csv"));

    let bad_cal = dir.path().join("bad-cal");
    copy_dir(&input, &bad_cal);
    std::fs::write(
        bad_cal.join("calibration.json"),
        r#"{"projection": [0,0,0,0, 0,0,0,0, 0,0,0,0]}"#,
    )
    .unwrap();
    assert_eq!(code(&run(&["analyze", p(&bad_cal)])), 1);
    assert_eq!(code(&run(&["validate", p(&bad_cal)])), 1);
    assert_eq!(code(&run(&["validate", p(&dir.path().join("absent"))])), 1);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 9, 1);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(
        code(&run(&["analyze", p(&input), "--zone-bounds", "4,2"])),
        2
    );
    assert_eq!(
        code(&run(&["analyze", p(&input), "--zone-bounds", "abc"])),
        2
    );
    assert_eq!(code(&run(&["analyze", p(&input), "--vt", "-3"])), 2);
    assert_eq!(code(&run(&["--jobs", "0", "analyze", p(&input)])), 2);
    assert_eq!(code(&run(&["stats", "x.json", "--half", "first"])), 2);
    assert_eq!(code(&run(&["serve"])), 2);
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(
        s,
        "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    let status = resp.split_whitespace().nth(1).unwrap().parse().unwrap();
    (status, resp)
}

#[test]
fn serve_answers_and_reports_startup_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), 10, 2);
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    assert_eq!(
        code(&run(&[
            "analyze",
            p(&input),
            "--no-fit",
            "-o",
            p(&data.join("m.json"))
        ])),
        0
    );

    let mut child = bin()
        .args([
            "serve",
            "--data-dir",
            p(&data),
            "--port",
            "0",
            "--bind",
            "127.0.0.1",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .unwrap()
        .to_string();
    let (status, body) = http_get(&addr, "/api/matches");
    assert_eq!(status, 200);
    assert!(body.contains("synth-10"));

    // The port is taken now.
    let port = addr.rsplit(':').next().unwrap();
    let busy = run(&["serve", "--data-dir", p(&data), "--port", port]);
    assert_eq!(code(&busy), 3, "{}", stderr(&busy));
    child.kill().unwrap();
    child.wait().unwrap();

    let missing = run(&[
        "serve",
        "--data-dir",
        p(&dir.path().join("nope")),
        "--port",
        "0",
    ]);
    assert_eq!(code(&missing), 1);
    assert!(stderr(&missing).contains("nope"));
}
