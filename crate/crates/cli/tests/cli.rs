//! End-to-end tests against the built binary: exit codes, artifacts, and the
//! byte-determinism contract.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tomolith"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn usage_errors_exit_64() {
    let out = run(&["optimize", "--target"]);
    assert_code(&out, 64);

    let out = run(&["nonsense-subcommand"]);
    assert_code(&out, 64);

    // runtime-level usage error: optimize without --angles
    let dir = tempfile::tempdir().unwrap();
    let rect = dir.path().join("rect.png");
    let out = run(&[
        "gen", "--shape", "rect", "--size", "32", "--out",
        rect.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let out = run(&[
        "optimize",
        "--target",
        rect.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_code(&out, 64);
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_code(&out, 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("reconstruct"));
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "reconstruct",
        "--target",
        "/definitely/not/here.png",
        "--angles",
        "16",
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
}

#[test]
fn malformed_sinogram_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cals");
    std::fs::write(&bad, b"not a sinogram").unwrap();
    let out = run(&[
        "reconstruct",
        "--sinogram",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert_code(&out, 1);
}

#[test]
fn dimension_mismatch_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.png");
    let big = dir.path().join("big.png");
    for (path, size) in [(&small, "32"), (&big, "48")] {
        let out = run(&["gen", "--shape", "disk", "--size", size, "--out", path.to_str().unwrap()]);
        assert_code(&out, 0);
    }
    // project the small target, then reconstruct against the big reference
    let rdir = dir.path().join("r1");
    let out = run(&[
        "reconstruct",
        "--target",
        small.to_str().unwrap(),
        "--angles",
        "24",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let out = run(&[
        "reconstruct",
        "--target",
        big.to_str().unwrap(),
        "--sinogram",
        rdir.join("sinogram.cals").to_str().unwrap(),
        "--out",
        dir.path().join("r2").to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn reconstruct_writes_artifacts_and_consistent_error() {
    let dir = tempfile::tempdir().unwrap();
    let disk = dir.path().join("disk.png");
    run(&["gen", "--shape", "disk", "--size", "64", "--out", disk.to_str().unwrap()]);
    let rdir = dir.path().join("recon");
    let out = run(&[
        "reconstruct",
        "--target",
        disk.to_str().unwrap(),
        "--angles",
        "101",
        "--filter",
        "ramp-exp",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(rdir.join("sinogram.cals").exists());
    assert!(rdir.join("sinogram.csv").exists());
    assert!(rdir.join("reconstruction.png").exists());

    // the error printed on stdout matches the metrics CSV
    let stdout = String::from_utf8_lossy(&out.stdout);
    let printed: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("reconstruction relative L2 error: "))
        .expect("error line printed")
        .trim()
        .parse()
        .unwrap();
    let metrics = std::fs::read_to_string(rdir.join("metrics.csv")).unwrap();
    let in_csv: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("recon_rel_l2_error,"))
        .expect("metric present")
        .parse()
        .unwrap();
    assert_eq!(printed, in_csv);
}

#[test]
fn reconstruct_heuristic_outputs_non_negative_sinogram() {
    let dir = tempfile::tempdir().unwrap();
    let star = dir.path().join("star.png");
    run(&["gen", "--shape", "star", "--size", "64", "--out", star.to_str().unwrap()]);
    let rdir = dir.path().join("heur");
    let out = run(&[
        "reconstruct",
        "--target",
        star.to_str().unwrap(),
        "--angles",
        "101",
        "--heuristic",
        "clamp",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let positive = tomolith::Sinogram::read_cals(&rdir.join("positive.cals")).unwrap();
    assert!(positive.min_value() >= 0.0);
    assert!(rdir.join("dose.png").exists());
}

#[test]
fn optimize_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let rect = dir.path().join("rect.png");
    run(&[
        "gen", "--shape", "rect", "--size", "32", "--width", "11", "--height", "16", "--out",
        rect.to_str().unwrap(),
    ]);
    let args = |out: &Path, threads: &str| {
        vec![
            "optimize".to_string(),
            "--target".into(),
            rect.to_str().unwrap().into(),
            "--angles".into(),
            "51".into(),
            "--init".into(),
            "random".into(),
            "--seed".into(),
            "9".into(),
            "--iters".into(),
            "8".into(),
            "--threads".into(),
            threads.into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    // different worker counts must still produce identical bytes
    let out = bin().args(args(&a, "1")).output().unwrap();
    assert_code(&out, 0);
    let out = bin().args(args(&b, "4")).output().unwrap();
    assert_code(&out, 0);
    assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b));
}

#[test]
fn optimize_accepts_config_file_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let rect = dir.path().join("rect.png");
    run(&[
        "gen", "--shape", "rect", "--size", "32", "--width", "11", "--height", "16", "--out",
        rect.to_str().unwrap(),
    ]);
    let first = dir.path().join("first");
    let out = run(&[
        "optimize",
        "--target",
        rect.to_str().unwrap(),
        "--angles",
        "51",
        "--iters",
        "4",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    // the emitted config re-runs to identical artifacts
    let second = dir.path().join("second");
    let out = run(&[
        "optimize",
        "--config",
        first.join("config.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert_eq!(read_dir_bytes(&first), read_dir_bytes(&second));

    // unknown keys are rejected
    let text = std::fs::read_to_string(first.join("config.json")).unwrap();
    let bad = text.replacen("\"version\"", "\"surprise\": 1, \"version\"", 1);
    let bad_path = dir.path().join("bad.json");
    std::fs::write(&bad_path, bad).unwrap();
    let out = run(&[
        "optimize",
        "--config",
        bad_path.to_str().unwrap(),
        "--out",
        dir.path().join("third").to_str().unwrap(),
    ]);
    assert_code(&out, 64);

    // wrong version is rejected
    let text = std::fs::read_to_string(first.join("config.json")).unwrap();
    let bad = text.replacen("\"version\": \"1\"", "\"version\": \"99\"", 1);
    std::fs::write(&bad_path, bad).unwrap();
    let out = run(&[
        "optimize",
        "--config",
        bad_path.to_str().unwrap(),
        "--out",
        dir.path().join("fourth").to_str().unwrap(),
    ]);
    assert_code(&out, 64);
}

#[test]
fn frames_manifest_matches_rotation_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let vol = dir.path().join("slices");
    std::fs::create_dir_all(&vol).unwrap();
    for (i, shape) in ["disk", "disk"].iter().enumerate() {
        run(&[
            "gen",
            "--shape",
            shape,
            "--size",
            "24",
            "--out",
            vol.join(format!("slice_{i:02}.png")).to_str().unwrap(),
        ]);
    }
    let fdir = dir.path().join("frames");
    let out = run(&[
        "frames",
        "--volume",
        vol.to_str().unwrap(),
        "--speed",
        "25",
        "--angles",
        "500",
        "--iters",
        "2",
        "--out",
        fdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fdir.join("manifest.json")).unwrap())
            .unwrap();
    // 500 frames over 360 degrees at 25 deg/s
    assert_eq!(manifest["frames_per_revolution"], 500);
    assert_eq!(manifest["angle_range_deg"], 360.0);
    let rate = manifest["frame_rate_hz"].as_f64().unwrap();
    assert!((rate - 34.72).abs() < 0.01, "frame rate {rate}");
    assert!(fdir.join("frame_00000.pgm").exists());
    assert!(fdir.join("frame_00499.pgm").exists());
    assert!(!fdir.join("frame_00500.pgm").exists());
}

#[test]
fn resin_cal_writes_matrix_and_doc_table() {
    let dir = tempfile::tempdir().unwrap();
    let rdir = dir.path().join("resin");
    let out = run(&[
        "resin-cal",
        "--intensities",
        "0.05,0.2,0.8",
        "--times",
        "0.5,2,8,32",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    assert!(rdir.join("dose_matrix.pgm").exists());
    let doc = std::fs::read_to_string(rdir.join("doc.csv")).unwrap();
    assert_eq!(doc.lines().count(), 1 + 3 * 4);
    assert!(doc.starts_with("intensity_w_cm2,time_s,doc,cured"));
    assert!(rdir.join("resin_params.json").exists());
}

#[test]
fn lightfield_reproduces_worked_example() {
    let out = run(&["lightfield", "--r", "0.1", "--R", "0.3", "--N", "500"]);
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["n_angular"], 785);
    assert_eq!(report["subpixels_per_lens"], 160);
    let lambda = report["subpixel_size_m"].as_f64().unwrap();
    assert!((lambda - 1.25e-6).abs() / 1.25e-6 < 0.01);

    let out = run(&[
        "lightfield", "--r", "0.05", "--N", "1000", "--lambda", "1e-5", "--solve", "R",
    ]);
    assert_code(&out, 0);
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let solved = report["solved_outer_radius_m"].as_f64().unwrap();
    assert!((solved - 10.0).abs() / 10.0 < 0.02, "R = {solved}");
}

#[test]
fn lightfield_sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = run(&[
        "lightfield",
        "--r",
        "0.1",
        "--R",
        "0.3",
        "--N",
        "500",
        "--sweep-n",
        "100:500:100",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
}

#[test]
fn sweep_counts_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let rect = dir.path().join("rect.png");
    run(&[
        "gen", "--shape", "rect", "--size", "32", "--width", "11", "--height", "16", "--out",
        rect.to_str().unwrap(),
    ]);
    let odir = dir.path().join("opt");
    run(&[
        "optimize",
        "--target",
        rect.to_str().unwrap(),
        "--angles",
        "51",
        "--out",
        odir.to_str().unwrap(),
    ]);
    let sdir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "--projections",
        odir.join("projections.cals").to_str().unwrap(),
        "--scales",
        "0.25,1.0,4.0",
        "--out",
        sdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let csv = std::fs::read_to_string(sdir.join("sweep.csv")).unwrap();
    let counts: Vec<u64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(counts[0] <= counts[1] && counts[1] <= counts[2], "{counts:?}");
}

#[test]
fn repro_fig5_writes_per_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let rdir = dir.path().join("fig5");
    let out = run(&[
        "repro",
        "fig5",
        "--angles",
        "202",
        "--iters",
        "2",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    for name in ["angles_16", "angles_64", "angles_202"] {
        assert!(rdir.join(name).join("error_history.csv").exists());
        assert!(rdir.join(name).join("config.json").exists());
    }
    assert!(rdir.join("summary.csv").exists());
}

#[test]
fn repro_fig7_orders_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let rdir = dir.path().join("fig7");
    let out = run(&[
        "repro",
        "fig7",
        "--angles",
        "202",
        "--iters",
        "50",
        "--out",
        rdir.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let summary = std::fs::read_to_string(rdir.join("summary.csv")).unwrap();
    let get = |name: &str| -> f64 {
        summary
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap()
            .split(',')
            .nth(3)
            .unwrap()
            .parse()
            .unwrap()
    };
    // the soft sigmoid keeps more contrast in the unthresholded dose
    assert!(get("sigmoid_soft") > get("sigmoid_sharp"));
}
