//! End-to-end tests of the `diffvox` binary: file round trips, exit
//! codes, and a small reconstruction driven entirely through the CLI.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use diffvox::geometry::ScanGeometry;
use diffvox::io;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_diffvox")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "expected success, got {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

/// Small orbit whose detector comfortably covers a 16 mm test volume.
fn small_geometry(n_views: usize) -> ScanGeometry {
    ScanGeometry::circular_orbit(n_views, 30.0, 90.0, 12, 12, 4.0, 4.0).unwrap()
}

fn write_geometry(dir: &Path, geometry: &ScanGeometry) -> PathBuf {
    let path = dir.join("geom.json");
    std::fs::write(&path, serde_json::to_string(geometry).unwrap()).unwrap();
    path
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn phantom_writes_header_and_raw_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    for out in ["a", "b"] {
        assert_ok(&run(&["phantom", "--kind", "shell_filaments", "--dims", "16,16,16",
                         "--spacing", "1,1,1", "--seed", "3", "--out", &p(base, out)]));
    }
    assert!(base.join("a.volhdr.json").is_file());
    assert!(base.join("a.vol.raw").is_file());
    let a = std::fs::read(base.join("a.vol.raw")).unwrap();
    let b = std::fs::read(base.join("b.vol.raw")).unwrap();
    assert_eq!(a, b);
    // f32 default dtype: 16^3 voxels, 4 bytes each.
    assert_eq!(a.len(), 16 * 16 * 16 * 4);

    let (grid, _) = io::read_volume(&base.join("a")).unwrap();
    assert_eq!(grid.dims, [16, 16, 16]);
    assert!(grid.values.iter().any(|&v| v > 0.0));
}

#[test]
fn phantom_rejects_unknown_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["phantom", "--kind", "checkerboard", "--dims", "8,8,8", "--spacing", "1,1,1",
                    "--out", &p(dir.path(), "x")]);
    assert_eq!(exit_code(&out), 1);
    assert!(!dir.path().join("x.volhdr.json").exists());
}

#[test]
fn render_of_zero_volume_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let geom = write_geometry(base, &small_geometry(3));
    // A spheres phantom scaled to zero: easiest all-zero volume is the
    // library writer, but the CLI must do the rendering.
    let grid = diffvox::grid::VoxelGrid::centered([16, 16, 16], [1.0; 3]).unwrap();
    io::write_volume(&base.join("zero"), &grid, io::Dtype::F32).unwrap();

    for renderer in ["siddon", "trilinear"] {
        let out_name = format!("proj_{renderer}");
        assert_ok(&run(&["render", "--volume", &p(base, "zero"), "--geometry",
                         geom.to_str().unwrap(), "--renderer", renderer,
                         "--out", &p(base, &out_name)]));
        let (set, _) = io::read_projections(&base.join(out_name)).unwrap();
        assert_eq!(set.images.len(), 3 * 12 * 12);
        assert!(set.images.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn renderers_agree_on_a_smooth_volume() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let geom = write_geometry(base, &small_geometry(4));
    assert_ok(&run(&["phantom", "--kind", "smooth_noise", "--dims", "32,32,32",
                     "--spacing", "0.5,0.5,0.5", "--out", &p(base, "vol"),
                     "--dtype", "f64"]));
    for renderer in ["siddon", "trilinear"] {
        assert_ok(&run(&["render", "--volume", &p(base, "vol"), "--geometry",
                         geom.to_str().unwrap(), "--renderer", renderer,
                         "--out", &p(base, renderer)]));
    }
    let (sid, _) = io::read_projections(&base.join("siddon")).unwrap();
    let (tri, _) = io::read_projections(&base.join("trilinear")).unwrap();
    let n = sid.images.len() as f64;
    let mean = sid.images.iter().sum::<f64>() / n;
    let mse = sid
        .images
        .iter()
        .zip(&tri.images)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    assert!(mean > 0.1, "degenerate test: mean intensity {mean}");
    // The interpolant ramps to half value over the outermost half voxel,
    // so the two discretizations differ by ~1-2% per ray even on smooth
    // volumes; anything beyond a few percent RMS is a real disagreement.
    assert!(mse < 1e-3 * mean * mean, "renderers disagree: mse {mse}, mean {mean}");
}

#[test]
fn render_rejects_zero_views_and_missing_volume() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let geom = write_geometry(base, &small_geometry(2));
    let grid = diffvox::grid::VoxelGrid::centered([8, 8, 8], [1.0; 3]).unwrap();
    io::write_volume(&base.join("vol"), &grid, io::Dtype::F32).unwrap();

    let out = run(&["render", "--volume", &p(base, "vol"), "--geometry",
                    geom.to_str().unwrap(), "--views", "0", "--out", &p(base, "x")]);
    assert_eq!(exit_code(&out), 1);

    let out = run(&["render", "--volume", &p(base, "nope"), "--geometry",
                    geom.to_str().unwrap(), "--out", &p(base, "x")]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn reconstruct_drives_loss_down_and_reproduces_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let geom = write_geometry(base, &small_geometry(6));
    assert_ok(&run(&["phantom", "--kind", "uniform", "--dims", "16,16,16",
                     "--spacing", "1,1,1", "--out", &p(base, "gt")]));
    assert_ok(&run(&["render", "--volume", &p(base, "gt"), "--geometry",
                     geom.to_str().unwrap(), "--out", &p(base, "proj")]));

    let recon = |out: &str, csv: &str| {
        assert_ok(&run(&["reconstruct", "--projections", &p(base, "proj"),
                         "--dims", "16,16,16", "--spacing", "1,1,1",
                         "--lambda-tv", "0", "--iterations", "120", "--seed", "9",
                         "--dtype", "f64", "--progress-csv", &p(base, csv),
                         "--out", &p(base, out)]));
    };
    recon("ra", "loss_a.csv");
    recon("rb", "loss_b.csv");

    let csv = std::fs::read_to_string(base.join("loss_a.csv")).unwrap();
    let losses: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 120, "one progress row per full-batch epoch");
    let (first, last) = (losses[0], *losses.last().unwrap());
    assert!(
        last < first / 100.0,
        "loss only fell from {first} to {last}"
    );

    // Identical seeds reproduce the volume bitwise.
    let a = std::fs::read(base.join("ra.vol.raw")).unwrap();
    let b = std::fs::read(base.join("rb.vol.raw")).unwrap();
    assert_eq!(a, b);

    // The reconstruction should also be close to the flat ground truth.
    let (gt, _) = io::read_volume(&base.join("gt")).unwrap();
    let (rec, _) = io::read_volume(&base.join("ra")).unwrap();
    let mse = gt
        .values
        .iter()
        .zip(&rec.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / gt.values.len() as f64;
    assert!(mse < 1e-4, "reconstruction mse vs ground truth: {mse}");
}

#[test]
fn reconstruct_rejects_malformed_config() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    let geom = write_geometry(base, &small_geometry(2));
    assert_ok(&run(&["phantom", "--kind", "uniform", "--dims", "8,8,8",
                     "--spacing", "1,1,1", "--out", &p(base, "gt")]));
    assert_ok(&run(&["render", "--volume", &p(base, "gt"), "--geometry",
                     geom.to_str().unwrap(), "--out", &p(base, "proj")]));

    // Unknown key must be rejected, not ignored.
    std::fs::write(base.join("cfg.json"), r#"{"renderer":"siddon","lambda_tv":1.0,
        "iterations":1,"lr_initial":0.1,"batch_rays":64,"m_samples":16,
        "softplus_beta":20.0,"seed":0,"momentum":0.9}"#).unwrap();
    let out = run(&["reconstruct", "--projections", &p(base, "proj"),
                    "--dims", "8,8,8", "--spacing", "1,1,1",
                    "--config", &p(base, "cfg.json"), "--out", &p(base, "x")]);
    assert_eq!(exit_code(&out), 2);

    // Invalid value caught by config validation: usage error.
    let out = run(&["reconstruct", "--projections", &p(base, "proj"),
                    "--dims", "8,8,8", "--spacing", "1,1,1",
                    "--lr=-1", "--out", &p(base, "x")]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn evaluate_self_comparison_and_png_export() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    assert_ok(&run(&["phantom", "--kind", "spheres", "--dims", "16,16,16",
                     "--spacing", "1,1,1", "--out", &p(base, "vol")]));
    let out = run(&["evaluate", "--test", &p(base, "vol"), "--reference", &p(base, "vol"),
                    "--slice", "8", "--axis", "2", "--png", &p(base, "slice.png")]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["ssim"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(report["mse"].as_f64().unwrap(), 0.0);
    assert_eq!(report["psnr"], serde_json::json!("inf"));
    assert!((report["pcc"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let png = std::fs::read(base.join("slice.png")).unwrap();
    assert_eq!(&png[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn evaluate_rejects_mismatched_dims() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path();
    assert_ok(&run(&["phantom", "--kind", "uniform", "--dims", "8,8,8",
                     "--spacing", "1,1,1", "--out", &p(base, "a")]));
    assert_ok(&run(&["phantom", "--kind", "uniform", "--dims", "8,8,10",
                     "--spacing", "1,1,1", "--out", &p(base, "b")]));
    let out = run(&["evaluate", "--test", &p(base, "a"), "--reference", &p(base, "b")]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn threads_flag_validation_and_help() {
    let out = run(&["--threads", "0", "phantom", "--kind", "uniform", "--dims", "4,4,4",
                    "--spacing", "1,1,1", "--out", "/tmp/unused"]);
    assert_eq!(exit_code(&out), 1);

    let out = run(&["--help"]);
    assert_eq!(exit_code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["phantom", "render", "reconstruct", "evaluate"] {
        assert!(text.contains(sub), "--help must mention '{sub}'");
    }
}
