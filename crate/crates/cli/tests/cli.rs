use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use topofuse::fusion::Histogram1D;
use topofuse::volio::{to_json_string, write_volume, Volume, VolumeFormat, WriteOptions};

fn topofuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topofuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ramp_volume(path: &Path, scale: f64) {
    let values: Vec<f64> = (0..4 * 4 * 4).map(|i| (i as f64 * scale).sin() * 10.0 + i as f64).collect();
    let v = Volume::new([4, 4, 4], values).unwrap();
    write_volume(&v, path, VolumeFormat::detect(path), &WriteOptions::default()).unwrap();
}

#[test]
fn missing_file_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.nrrd");
    let o = topofuse(&["correlate", s(&missing), s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(s(&missing)));
}

#[test]
fn correlate_ranks_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.nrrd"), dir.path().join("b.nrrd"), dir.path().join("c.raw"));
    ramp_volume(&a, 0.3);
    ramp_volume(&b, 0.3);
    ramp_volume(&c, 1.7);
    let o = topofuse(&["correlate", s(&a), s(&b)]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).trim_end().ends_with("1.000"));
    let o = topofuse(&["correlate", s(&a), s(&b), s(&c)]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
}

#[test]
fn usage_and_config_errors_exit_2() {
    assert_eq!(topofuse(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(topofuse(&["--threads", "0", "peaks", "x.json"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "persistence_threshold = -1.0\n[input.synth]\n").unwrap();
    let o = topofuse(&["fuse", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("persistence_threshold"));
    let unknown = dir.path().join("unknown.toml");
    std::fs::write(&unknown, "bogus = 1\n").unwrap();
    assert_eq!(topofuse(&["fuse", "--config", s(&unknown)]).status.code(), Some(2));
}

#[test]
fn peaks_of_monotone_and_flat_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let mono = dir.path().join("mono.json");
    let h = Histogram1D::uniform(0.0, 1.0, (0..20).map(|i| i as f64).collect(), "ramp").unwrap();
    std::fs::write(&mono, to_json_string(&h).unwrap()).unwrap();
    assert_eq!(stdout_json(&topofuse(&["peaks", s(&mono)]))["data"]["count"], 1);

    let bumps = dir.path().join("bumps.json");
    let w = vec![0.0, 5.0, 0.0, 3.0, 0.0, 4.0, 0.0];
    std::fs::write(&bumps, to_json_string(&Histogram1D::uniform(0.0, 1.0, w, "b").unwrap()).unwrap()).unwrap();
    assert_eq!(stdout_json(&topofuse(&["peaks", s(&bumps)]))["data"]["count"], 3);
    let out = dir.path().join("report.json");
    let r = stdout_json(&topofuse(&["peaks", s(&bumps), "--min-persistence", "1.0", "--out", s(&out)]));
    assert!(r["data"]["count"].as_u64().unwrap() <= 1);
    assert!(out.exists());
}

/// The staged subcommands reproduce the field written by a single `fuse`
/// run with the same parameters.
#[test]
fn staged_commands_match_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let d = |x: &str| dir.path().join(x);
    let synth = stdout_json(&topofuse(&["synth", "--voxels-per-blob", "20000", "--out", s(&d("vol"))]));
    assert!(synth["artifacts"]["v1"]["sha256"].is_string());
    let (v1, v2) = (d("vol/v1.nrrd"), d("vol/v2.nrrd"));

    stdout_json(&topofuse(&["histogram", "--v1", s(&v1), "--v2", s(&v2), "--bins", "96", "--out", s(&d("h"))]));
    let topo = stdout_json(&topofuse(&["topo", "--histogram", s(&d("h/histogram")), "--out", s(&d("t"))]));
    assert!(topo["critical"]["maxima"].as_u64().unwrap() >= 8);
    stdout_json(&topofuse(&[
        "path", "--histogram", s(&d("h/histogram.json")), "--mst", s(&d("t/mst.json")), "--tau", "0.5", "--out",
        s(&d("p")),
    ]));
    stdout_json(&topofuse(&[
        "spline", "--histogram", s(&d("h/histogram")), "--paths", s(&d("p/paths.json")), "--sample-count", "20000",
        "--out", s(&d("s")),
    ]));

    let fuse = stdout_json(&topofuse(&[
        "--threads", "2", "fuse", "--v1", s(&v1), "--v2", s(&v2), "--bins", "96", "--tau", "0.5", "--sample-count",
        "20000", "--out", s(&d("f")),
    ]));
    for name in ["histogram_counts", "density", "mst", "paths", "fused_field", "spline_histogram"] {
        let file = fuse["artifacts"][name]["file"].as_str().unwrap();
        let staged_file = ["h", "t", "p", "s"]
            .iter()
            .map(|sub| d(sub).join(file))
            .find(|p| p.exists())
            .unwrap();
        let bytes = std::fs::read(staged_file).unwrap();
        assert_eq!(
            std::fs::read(d("f").join(file)).unwrap(),
            bytes,
            "{name} differs"
        );
    }

    let peaks = stdout_json(&topofuse(&["peaks", s(&d("s/spline_histogram.json"))]));
    assert_eq!(peaks["data"]["count"], fuse["peaks"]["spline"]);
}

#[test]
fn runtime_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = |x: &str| dir.path().join(x);
    stdout_json(&topofuse(&["synth", "--voxels-per-blob", "2000", "--out", s(&d("vol"))]));
    stdout_json(&topofuse(&[
        "histogram", "--v1", s(&d("vol/v1.nrrd")), "--v2", s(&d("vol/v2.nrrd")), "--bins", "32", "--out", s(&d("h")),
    ]));
    stdout_json(&topofuse(&["topo", "--histogram", s(&d("h/histogram")), "--out", s(&d("t"))]));
    let o = topofuse(&[
        "path", "--histogram", s(&d("h/histogram")), "--mst", s(&d("t/mst.json")), "--branch", "0,100000", "--out",
        s(&d("p")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown node"));
}
