use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dtof_core::io::{self, Report};
use dtof_core::types::DenseDepthMap;
use dtof_core::PointLabel;

const BLOB_CONFIG: &str = r#"
seed = 7

[sensor]
noise_rate = 0.0
blank_rate = 0.0
max_shift_dtof_px = 0.0

[simulation]
region_count_range = [1, 1]
region_area_range = [0.08, 0.12]
error_region_probability = 1.0
"#;

const CLEAN_CONFIG: &str = r#"
[sensor]
noise_rate = 0.0
blank_rate = 0.0
max_shift_dtof_px = 0.0

[simulation]
region_count_range = [0, 0]
"#;

fn dtof(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtof"))
        .args(args)
        .env_remove("DTOF_SEED")
        .output()
        .expect("spawn dtof")
}

fn ok(args: &[&dyn AsRef<std::ffi::OsStr>]) {
    let out = dtof(args);
    assert!(
        out.status.success(),
        "dtof failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(config: &str, warp: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("run.toml"), config).unwrap();
        let f = Fixture { dir };
        ok(&[
            &"scene",
            &"--seed",
            &"11",
            &"--warp",
            &warp,
            &"--out-gt",
            &f.path("gt.pfm"),
            &"--out-rel",
            &f.path("rel.pfm"),
        ]);
        ok(&[
            &"simulate",
            &"--gt",
            &f.path("gt.pfm"),
            &"--config",
            &f.path("run.toml"),
            &"--out-points",
            &f.path("points.csv"),
            &"--out-labels",
            &f.path("labels.csv"),
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn report(path: &Path) -> Report {
    Report::read(path).unwrap()
}

#[test]
fn clean_frame_passes_the_gate() {
    let f = Fixture::new(CLEAN_CONFIG, "0");
    ok(&[
        &"detect",
        &"--points",
        &f.path("points.csv"),
        &"--rel",
        &f.path("rel.pfm"),
        &"--rel-inverse",
        &"--out",
        &f.path("inliers.csv"),
        &"--report",
        &f.path("detect.txt"),
    ]);
    let r = report(&f.path("detect.txt"));
    assert!(r.get_f64("detect.gamma").unwrap() > 0.95);
    assert_eq!(r.get("detect.n_flagged"), Some("0"));
    assert_eq!(
        std::fs::read(f.path("points.csv")).unwrap(),
        std::fs::read(f.path("inliers.csv")).unwrap()
    );
}

fn blob_mask(f: &Fixture) -> PathBuf {
    let gt = io::read_dense_depth(&f.path("gt.pfm")).unwrap();
    let (h, w) = (gt.height(), gt.width());
    let (ch, cw) = (h / 30, w / 40);
    let labeled = io::read_points(&f.path("labels.csv"), h, w).unwrap();
    let labels = labeled.labels.unwrap();
    let mut values = vec![0.0f32; h * w];
    for (p, l) in labeled.points.iter().zip(&labels) {
        if *l != PointLabel::Error {
            continue;
        }
        let (r0, c0) = (p.row / ch * ch, p.col / cw * cw);
        for r in r0..r0 + ch {
            values[r * w + c0..r * w + c0 + cw].fill(1.0);
        }
    }
    assert!(values.iter().any(|&v| v > 0.0));
    let path = f.path("mask.pfm");
    io::write_dense_depth(&path, &DenseDepthMap::from_values(h, w, values).unwrap()).unwrap();
    path
}

fn blob_rmse(f: &Fixture, mask: &Path, extra: &[&str]) -> f64 {
    let mut args: Vec<&dyn AsRef<std::ffi::OsStr>> = vec![];
    let (pts, rel, out) = (f.path("points.csv"), f.path("rel.pfm"), f.path("pred.pfm"));
    args.extend([
        &"complete" as &dyn AsRef<std::ffi::OsStr>,
        &"--points",
        &pts,
        &"--rel",
        &rel,
        &"--rel-inverse",
        &"--out",
        &out,
    ]);
    for e in extra {
        args.push(e);
    }
    ok(&args);
    let rep = f.path("eval.txt");
    ok(&[
        &"evaluate",
        &"--pred",
        &out,
        &"--gt",
        &f.path("gt.pfm"),
        &"--mask",
        &mask,
        &"--report",
        &rep,
    ]);
    report(&rep).get_f64("eval.rmse").unwrap()
}

#[test]
fn detection_lowers_blob_error() {
    let f = Fixture::new(BLOB_CONFIG, "0");
    let mask = blob_mask(&f);
    let plain = blob_rmse(&f, &mask, &[]);
    let detected = blob_rmse(&f, &mask, &["--detect"]);
    assert!(detected < plain, "{detected} vs {plain}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = dtof(&[&"detect", &"--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(out.stdout.is_empty());

    assert_eq!(dtof(&[&"frobnicate"]).status.code(), Some(1));
    assert_eq!(dtof(&[&"detect", &"--out", &"x.csv"]).status.code(), Some(1));
}

#[test]
fn bad_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pfm");
    let out = dtof(&[
        &"evaluate",
        &"--pred",
        &missing,
        &"--gt",
        &missing,
        &"--report",
        &dir.path().join("r.txt"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pfm"));

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[detector]\nbogus_key = 1\n").unwrap();
    let out = dtof(&[
        &"simulate",
        &"--gt",
        &missing,
        &"--config",
        &cfg,
        &"--out-points",
        &dir.path().join("p.csv"),
        &"--out-labels",
        &dir.path().join("l.csv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

#[test]
fn seed_precedence() {
    let f = Fixture::new(BLOB_CONFIG, "0.02");
    let run = |seed_flag: Option<&str>, env: Option<&str>, name: &str| {
        let out = f.path(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dtof"));
        cmd.args(["simulate", "--gt"])
            .arg(f.path("gt.pfm"))
            .arg("--config")
            .arg(f.path("run.toml"))
            .arg("--out-points")
            .arg(&out)
            .arg("--out-labels")
            .arg(f.path("l.csv"))
            .env_remove("DTOF_SEED");
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("DTOF_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        std::fs::read(out).unwrap()
    };
    let config_seed = run(None, None, "a.csv");
    assert_eq!(config_seed, std::fs::read(f.path("points.csv")).unwrap());
    let env_seed = run(None, Some("99"), "b.csv");
    assert_ne!(env_seed, config_seed);
    assert_eq!(run(Some("99"), None, "c.csv"), env_seed);
    assert_eq!(run(Some("7"), Some("99"), "d.csv"), config_seed);
}

#[test]
fn colorize_writes_rgb_png() {
    let f = Fixture::new(CLEAN_CONFIG, "0.02");
    ok(&[
        &"colorize",
        &"--in",
        &f.path("gt.pfm"),
        &"--min",
        &"0.3",
        &"--max",
        &"9.5",
        &"--out",
        &f.path("gt.png"),
    ]);
    let bytes = std::fs::read(f.path("gt.png")).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
}

fn pipeline(dir: &Path) -> Vec<Vec<u8>> {
    let p = |n: &str| dir.join(n);
    std::fs::write(p("run.toml"), "seed = 42\n").unwrap();
    ok(&[&"scene", &"--seed", &"42", &"--out-gt", &p("gt.pfm"), &"--out-rel", &p("rel.pfm")]);
    ok(&[
        &"simulate",
        &"--gt",
        &p("gt.pfm"),
        &"--config",
        &p("run.toml"),
        &"--out-points",
        &p("points.csv"),
        &"--out-labels",
        &p("labels.csv"),
    ]);
    ok(&[
        &"detect",
        &"--points",
        &p("points.csv"),
        &"--rel",
        &p("rel.pfm"),
        &"--rel-inverse",
        &"--out",
        &p("inliers.csv"),
        &"--report",
        &p("detect.txt"),
    ]);
    ok(&[
        &"complete",
        &"--points",
        &p("points.csv"),
        &"--rel",
        &p("rel.pfm"),
        &"--rel-inverse",
        &"--detect",
        &"--robust",
        &"--residuals",
        &"--out",
        &p("pred.pfm"),
        &"--report",
        &p("complete.txt"),
    ]);
    ok(&[&"evaluate", &"--pred", &p("pred.pfm"), &"--gt", &p("gt.pfm"), &"--report", &p("eval.txt")]);
    [
        "points.csv",
        "labels.csv",
        "inliers.csv",
        "detect.txt",
        "pred.pfm",
        "complete.txt",
        "eval.txt",
    ]
    .iter()
    .map(|n| std::fs::read(p(n)).unwrap())
    .collect()
}

#[test]
fn pipeline_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(pipeline(a.path()), pipeline(b.path()));
}
