use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn mtmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mtmc(args);
    assert!(
        out.status.success(),
        "mtmc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn value(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .to_string()
}

fn synth(dir: &Path, seed: &str) {
    ok(&["synth", "--seed", seed, "--out-dir", p(dir)]);
}

#[test]
fn synth_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "11");
    synth(&b, "11");
    for name in ["detections.txt", "features.txt", "ground_truth.txt", "labels.txt", "config.txt"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let gt = fs::read_to_string(a.join("ground_truth.txt")).unwrap();
    let ids: std::collections::BTreeSet<&str> = gt.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ids.len(), 10);
}

#[test]
fn full_run_on_easy_scene() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("scene");
    synth(&s, "4");
    let cfg = s.join("config.txt");
    let (dets, feats) = (tmp.path().join("d.txt"), tmp.path().join("f.txt"));
    let out = ok(&[
        "preprocess",
        "--detections",
        p(&s.join("detections.txt")),
        "--features",
        p(&s.join("features.txt")),
        "--features-out",
        p(&feats),
        "--config",
        p(&cfg),
        "--out",
        p(&dets),
    ]);
    let after: usize = value(&out, "after").parse().unwrap();
    assert!(after <= value(&out, "before").parse().unwrap());
    assert_eq!(fs::read_to_string(&dets).unwrap().lines().count(), after);

    let hyp = tmp.path().join("hyp.txt");
    let track = |jobs: &str, out: &Path| {
        ok(&[
            "track",
            "--detections",
            p(&dets),
            "--features",
            p(&feats),
            "--config",
            p(&cfg),
            "--out",
            p(out),
            "--jobs",
            jobs,
        ])
    };
    let stdout = track("1", &hyp);
    assert_eq!(value(&stdout, "identities"), "10");

    let again = tmp.path().join("hyp2.txt");
    track("4", &again);
    assert_eq!(fs::read(&hyp).unwrap(), fs::read(&again).unwrap());

    let row = tmp.path().join("row.csv");
    let report = ok(&[
        "evaluate",
        "--gt",
        p(&s.join("ground_truth.txt")),
        "--hyp",
        p(&hyp),
        "--row",
        p(&row),
    ]);
    let idf1: f64 = value(&report, "idf1").parse().unwrap();
    assert!(idf1 >= 0.9, "{report}");
    let csv = fs::read_to_string(&row).unwrap();
    assert!(csv.starts_with("idf1,idp,idr,idtp,idfp,idfn\n"));
}

#[test]
fn sct_only_keeps_per_camera_trajectories() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("scene");
    synth(&s, "2");
    let hyp = tmp.path().join("hyp.txt");
    let out = ok(&[
        "track",
        "--detections",
        p(&s.join("detections.txt")),
        "--features",
        p(&s.join("features.txt")),
        "--config",
        p(&s.join("config.txt")),
        "--out",
        p(&hyp),
        "--sct-only",
    ]);
    let per_camera: usize = out
        .lines()
        .filter(|l| l.starts_with("camera_"))
        .map(|l| l.rsplit(' ').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(value(&out, "identities").parse::<usize>().unwrap(), per_camera);
}

#[test]
fn evaluate_identical_and_split() {
    let tmp = TempDir::new().unwrap();
    let gt = tmp.path().join("gt.txt");
    let split = tmp.path().join("split.txt");
    let line = |id: u32, f: u32| format!("{id},1,{f},0.000000,0.000000,10.000000,20.000000,0\n");
    fs::write(&gt, (0..100).map(|f| line(1, f)).collect::<String>()).unwrap();
    fs::write(
        &split,
        (0..100).map(|f| line(if f < 50 { 1 } else { 2 }, f)).collect::<String>(),
    )
    .unwrap();
    let same = ok(&["evaluate", "--gt", p(&gt), "--hyp", p(&gt)]);
    assert_eq!(value(&same, "idf1"), "1.000000");
    let half = ok(&["evaluate", "--gt", p(&gt), "--hyp", p(&split)]);
    assert_eq!(value(&half, "idf1"), "0.500000");
    assert_eq!(value(&half, "idp"), "0.500000");
    assert_eq!(value(&half, "idr"), "0.500000");

    // Same frames in another camera all count as errors.
    let moved = tmp.path().join("moved.txt");
    fs::write(&moved, fs::read_to_string(&gt).unwrap().replace("1,1,", "1,2,")).unwrap();
    let r = ok(&["evaluate", "--gt", p(&gt), "--hyp", p(&moved)]);
    assert_eq!(value(&r, "idf1"), "0.000000");
    assert_eq!(value(&r, "idfn"), "100");
}

#[test]
fn empty_detections_give_empty_output() {
    let tmp = TempDir::new().unwrap();
    let (d, f, o) = (
        tmp.path().join("d.txt"),
        tmp.path().join("f.txt"),
        tmp.path().join("o.txt"),
    );
    fs::write(&d, "").unwrap();
    fs::write(&f, "d=8\n").unwrap();
    let out = ok(&["track", "--detections", p(&d), "--features", p(&f), "--out", p(&o)]);
    assert_eq!(value(&out, "identities"), "0");
    assert_eq!(fs::read_to_string(&o).unwrap(), "");
}

#[test]
fn zero_threshold_keeps_low_confidence() {
    let tmp = TempDir::new().unwrap();
    let (d, cfg, o) = (
        tmp.path().join("d.txt"),
        tmp.path().join("c.txt"),
        tmp.path().join("o.txt"),
    );
    fs::write(&d, "1,0,0,0,10,10,0.2\n1,0,100,100,110,110,0.95\n").unwrap();
    fs::write(&cfg, "detection_confidence_threshold = 0\n").unwrap();
    let out = ok(&["preprocess", "--detections", p(&d), "--config", p(&cfg), "--out", p(&o)]);
    assert_eq!(value(&out, "after"), "2");
    let out = ok(&["preprocess", "--detections", p(&d), "--out", p(&o)]);
    assert_eq!(value(&out, "after"), "1");
}

#[test]
fn failures_exit_nonzero() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.txt");
    let o = tmp.path().join("o.txt");
    let r = mtmc(&["preprocess", "--detections", p(&missing), "--out", p(&o)]);
    assert!(!r.status.success());
    assert!(r.stdout.is_empty());
    assert!(!r.stderr.is_empty());

    let d = tmp.path().join("d.txt");
    fs::write(&d, "1,5,50,20,10,120,0.9\n").unwrap();
    assert!(!mtmc(&["preprocess", "--detections", p(&d), "--out", p(&o)]).status.success());

    let cfg = tmp.path().join("c.txt");
    fs::write(&cfg, "bogus = 1\n").unwrap();
    fs::write(&d, "").unwrap();
    assert!(!mtmc(&["preprocess", "--detections", p(&d), "--config", p(&cfg), "--out", p(&o)]).status.success());

    let f = tmp.path().join("f.txt");
    fs::write(&d, "1,0,0,0,10,10,0.95\n").unwrap();
    fs::write(&f, "d=2\n").unwrap();
    let r = mtmc(&["track", "--detections", p(&d), "--features", p(&f), "--out", p(&o)]);
    assert!(!r.status.success(), "feature count mismatch must fail");

    let world = tmp.path().join("w.txt");
    fs::write(&world, "n_cameras = 2\ntransitions = 1>2:10..20\n").unwrap();
    let r = mtmc(&["synth", "--world", p(&world), "--out-dir", p(&tmp.path().join("s"))]);
    assert!(!r.status.success(), "camera 2 has no way out");
}
