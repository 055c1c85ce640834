use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pointing-augment"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset() -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["synth", "--out-dir", s(d.path()), "--rooms", "2", "--spacing", "0.04"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    d
}

const FAST: [&str; 4] = ["--voxel-size", "0.05", "--margin-voxels", "4"];

fn impute(data: &Path, out: &Path, seed: &str, extra: &[&str]) -> Output {
    let scenes = data.join("scenes");
    let avatars = data.join("avatars");
    let mut args = vec![
        "impute",
        "--scenes-dir",
        s(&scenes),
        "--avatars-dir",
        s(&avatars),
        "--out-dir",
        s(out),
        "--seed",
        seed,
        "--num-placements",
        "2",
        "--target",
        "room000:1",
        "--target",
        "room001:1",
    ];
    if extra.contains(&"--margin-voxels") {
        args.extend_from_slice(&FAST[..2]);
    } else {
        args.extend_from_slice(&FAST);
    }
    args.extend_from_slice(extra);
    bin().args(&args).output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn find(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| s(p).ends_with(suffix)).collect();
    v.sort();
    v
}

#[test]
fn impute_is_deterministic_and_thread_independent() {
    let data = dataset();
    let (a, b, c, d) = (data.path().join("a"), data.path().join("b"), data.path().join("c"), data.path().join("d"));
    assert!(impute(data.path(), &a, "5", &[]).status.success());
    assert!(impute(data.path(), &b, "5", &[]).status.success());
    assert!(impute(data.path(), &d, "5", &["--threads", "3"]).status.success());
    let fa = files(&a);
    let same = |x: &[(String, Vec<u8>)], y: &[(String, Vec<u8>)]| x == y;
    assert!(same(&fa, &files(&b)));
    assert!(same(&fa, &files(&d)));
    // 2 targets x (records + 2 clouds) + run manifest
    assert_eq!(fa.len(), 7);
    for (name, _) in &fa {
        assert!(name.contains("_s5"), "{name}");
    }
    assert!(impute(data.path(), &c, "6", &[]).status.success());
    let ra: Vec<Vec<u8>> = find(&a, ".records.json").iter().map(|p| fs::read(p).unwrap()).collect();
    let rc: Vec<Vec<u8>> = find(&c, ".records.json").iter().map(|p| fs::read(p).unwrap()).collect();
    assert_ne!(ra, rc);

    let rec: Value = serde_json::from_slice(&ra[0]).unwrap();
    let first = &rec[0];
    for key in [
        "scene_id",
        "target_object_id",
        "avatar_id",
        "handedness",
        "foot_position_world",
        "yaw_deg",
        "jitter_deg",
        "pointing_elevation_deg",
        "shoulder_world",
        "fingertip_world",
        "distance_to_target_m",
        "rng_seed",
    ] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["rng_seed"], 5);
    assert!(first["jitter_deg"].as_f64().unwrap().abs() <= 9.0);
}

#[test]
fn ascii_output_and_config_file() {
    let data = dataset();
    let cfg = data.path().join("run.json");
    let body = serde_json::json!({
        "scenes_dir": data.path().join("scenes"),
        "avatars_dir": data.path().join("avatars"),
        "out_dir": data.path().join("out"),
        "voxel_size": 0.05,
        "margin_voxels": 4,
        "num_placements": 1,
        "seed": 1,
        "targets": [["room000", 1]],
        "ascii_ply": true
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let o = run(&["impute", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ply = find(&data.path().join("out"), ".ply");
    assert_eq!(ply.len(), 1);
    let text = fs::read(&ply[0]).unwrap();
    assert!(text.starts_with(b"ply\nformat ascii 1.0\n"));
}

#[test]
fn exit_codes() {
    let data = dataset();
    let out = data.path().join("out");
    // unknown flag
    assert_eq!(run(&["impute", "--bogus"]).status.code(), Some(2));
    // missing scene directory
    let o = run(&["impute", "--scenes-dir", "/nonexistent", "--avatars-dir", "/nonexistent", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // invalid parameter
    assert_eq!(impute(data.path(), &out, "1", &["--num-placements", "0"]).status.code(), Some(2));
    // avatar too wide for any footprint
    assert_eq!(impute(data.path(), &out, "1", &["--margin-voxels", "500"]).status.code(), Some(4));
    // corrupt scene file
    fs::write(data.path().join("scenes/room001.ply"), b"ply\nformat ascii 1.0\nelement vertex 3\n").unwrap();
    assert_eq!(impute(data.path(), &out, "1", &[]).status.code(), Some(3));
}

#[test]
fn eval_report() {
    let d = tempfile::tempdir().unwrap();
    let preds = d.path().join("preds.json");
    let unit = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let half = [0.5, 0.0, 0.0, 1.5, 1.0, 1.0];
    let body = serde_json::json!([
        {"sample_id": "a", "pred": unit, "gt": unit, "distance_m": 0.46},
        {"sample_id": "b", "pred": half, "gt": unit, "distance_m": 3.7},
        {"sample_id": "c", "pred": unit, "gt": unit, "distance_m": 0.2},
        {"sample_id": "d", "pred": half, "gt": unit, "distance_m": 1.22},
    ]);
    fs::write(&preds, body.to_string()).unwrap();
    let out = d.path().join("rep");
    let o = run(&["eval", "--predictions", s(&preds), "--out-dir", s(&out)]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("Personal") && table.contains("overall"));
    let rep: Value = serde_json::from_slice(&fs::read(&find(&out, ".json")[0]).unwrap()).unwrap();
    assert_eq!(rep["overall"]["iou@0.25"], 1.0);
    assert_eq!(rep["overall"]["iou@0.5"], 0.5);
    let keys: Vec<&String> = rep["buckets"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["Intimate", "Personal", "Social", "Public"]);
    assert_eq!(rep["buckets"]["Public"]["iou@0.5"], 0.0);

    fs::write(&preds, "[]").unwrap();
    assert_eq!(run(&["eval", "--predictions", s(&preds)]).status.code(), Some(3));
}

#[test]
fn prompt_score_and_inspect() {
    let data = dataset();
    let out = data.path().join("out");
    assert!(impute(data.path(), &out, "2", &[]).status.success());
    let records = find(&out, ".records.json")[0].clone();
    let scenes = data.path().join("scenes");

    let pdir = data.path().join("prompts");
    let o = run(&["prompt", "--records", s(&records), "--scenes-dir", s(&scenes), "--out-dir", s(&pdir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let prompts = find(&pdir, ".prompt.txt");
    assert_eq!(prompts.len(), 2);
    let text = fs::read_to_string(&prompts[0]).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.contains("table") && l.contains("pointing")));
    let o = run(&["prompt", "--records", s(&records), "--label", " ", "--out-dir", s(&pdir)]);
    assert_eq!(o.status.code(), Some(2));

    // the target box and one far-away decoy
    let rec: Value = serde_json::from_slice(&fs::read(&records).unwrap()).unwrap();
    let seg: Value = serde_json::from_slice(&fs::read(scenes.join("room000.seg.json")).unwrap()).unwrap();
    assert!(seg["objects"].as_array().unwrap().iter().any(|o| o["id"] == 1));
    let sh: Vec<f64> = serde_json::from_value(rec[0]["shoulder_world"].clone()).unwrap();
    let tip: Vec<f64> = serde_json::from_value(rec[0]["fingertip_world"].clone()).unwrap();
    let along: Vec<f64> = (0..3).map(|a| sh[a] + 4.0 * (tip[a] - sh[a])).collect();
    let behind: Vec<f64> = (0..3).map(|a| sh[a] - 4.0 * (tip[a] - sh[a])).collect();
    let boxed = |c: &[f64]| vec![c[0] - 0.1, c[1] - 0.1, c[2] - 0.1, c[0] + 0.1, c[1] + 0.1, c[2] + 0.1];
    let props = serde_json::json!([{
        "scene_id": rec[0]["scene_id"],
        "target_object_id": rec[0]["target_object_id"],
        "proposals": [boxed(&behind), boxed(&along)],
        "s_conf": [0.5, 0.5]
    }]);
    let pfile = data.path().join("props.json");
    fs::write(&pfile, props.to_string()).unwrap();
    let sdir = data.path().join("scores");
    let o = run(&["score", "--records", s(&records), "--proposals", s(&pfile), "--w-score", "0,1", "--out-dir", s(&sdir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scores: Value = serde_json::from_slice(&fs::read(&find(&sdir, ".json")[0]).unwrap()).unwrap();
    assert_eq!(scores[0]["argmax"], 1);
    let o = run(&["score", "--records", s(&records), "--proposals", s(&pfile), "--w-score", "0.3,0.3", "--out-dir", s(&sdir)]);
    assert_eq!(o.status.code(), Some(2));

    let idir = data.path().join("inspect");
    let mut args = vec!["inspect", "--scenes-dir", s(&scenes), "--scene", "room000", "--target", "1", "--out-dir", s(&idir)];
    args.extend_from_slice(&FAST);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(find(&idir, ".rle.json").len(), 2);
    assert_eq!(find(&idir, ".csv").len(), 1);
    let summary: Value = serde_json::from_slice(&fs::read(&find(&idir, "summary.json")[0]).unwrap()).unwrap();
    assert_eq!(summary["floor"]["h_hat_fv"], 4);
}
