//! End-to-end runs of the `meshstyle` binary.

use std::path::Path;
use std::process::{Command, Output};

use meshstyle::synth::{quadruped, AssetFiles, QuadrupedParams};

fn meshstyle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshstyle"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn fixtures(dir: &Path, parts: usize) -> (AssetFiles, AssetFiles) {
    let a = quadruped(&QuadrupedParams::random(5).with_parts(parts)).write(dir, "a").unwrap();
    let b = quadruped(&QuadrupedParams::random(6).with_parts(parts)).write(dir, "b").unwrap();
    (a, b)
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "sample_count = 600\nellipsoid_surface_samples = 96\ngeo_iters = 30\njoint_steps = 3\n\
         views = 2\nimage_resolution = 40\nellipsoid_refine_iters = 2\npyramid_levels = 2\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn metrics_of_a_mesh_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = fixtures(dir.path(), 4);
    let out = dir.path().join("m");
    let o = meshstyle(&[
        "metrics",
        "--pred",
        s(&a.mesh),
        "--gt",
        s(&a.mesh),
        "--pred-labels",
        s(&a.labels),
        "--gt-labels",
        s(&a.labels),
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["chamfer_l1"], 0.0);
    assert_eq!(m["chamfer_l2"], 0.0);
    assert_eq!(m["f_score"], 1.0);
    assert_eq!(m["part_distance"], 0.0);
    assert!(m["symmetry_distance"].as_f64().unwrap() >= 0.0);
    let printed: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed, m);
}

#[test]
fn stylize_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = fixtures(dir.path(), 3);
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = meshstyle(&[
        "stylize",
        "--source",
        s(&a.mesh),
        "--target",
        s(&b.mesh),
        "--source-labels",
        s(&a.labels),
        "--target-labels",
        s(&b.labels),
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "mesh.obj",
        "mesh.mtl",
        "texture.png",
        "transforms.json",
        "color_transform.json",
        "ellipsoids.json",
        "ledger.json",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let mesh = meshstyle::asset_io::load_mesh(out.join("mesh.obj")).unwrap();
    assert_eq!(mesh.texture.as_deref(), Some(out.join("texture.png").as_path()));
    let ledger = json(&out.join("ledger.json"));
    assert_eq!(ledger["steps"].as_array().unwrap().len(), 3);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["command"], "stylize");
    // config, two meshes, two label files, two textures
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 7);
    let (_, names) = meshstyle::warp::PartTransforms::from_json(&std::fs::read_to_string(out.join("transforms.json")).unwrap()).unwrap();
    assert_eq!(names.len(), 3);
}

#[test]
fn geometry_texture_and_ellipsoid_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = fixtures(dir.path(), 2);
    let cfg = small_config(dir.path());
    let pair = ["--source", s(&a.mesh), "--target", s(&b.mesh), "--source-labels", s(&a.labels), "--target-labels", s(&b.labels)];
    let run = |cmd: &str, out: &str, files: &[&str]| {
        let out = dir.path().join(out);
        let mut args = vec![cmd];
        args.extend_from_slice(&pair);
        args.extend_from_slice(&["--config", &cfg, "--out-dir", s(&out)]);
        let o = meshstyle(&args);
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(out.join(f).is_file(), "{cmd}: missing {f}");
        }
    };
    run("transfer-geometry", "g", &["mesh.obj", "transforms.json", "ellipsoids.json", "trace.json", "manifest.json"]);
    run("transfer-texture", "t", &["texture.png", "color_transform.json", "manifest.json"]);
    run("fit-ellipsoids", "e", &["ellipsoids.json", "manifest.json"]);
    let (ells, names) = meshstyle::part_field::ellipsoids_from_json(
        &std::fs::read_to_string(dir.path().join("e/ellipsoids.json")).unwrap(),
    )
    .unwrap();
    assert_eq!((ells.len(), names.len()), (2, 2));
}

#[test]
fn render_writes_views_and_masks() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = fixtures(dir.path(), 2);
    let out = dir.path().join("r");
    let o = meshstyle(&["render", "--source", s(&a.mesh), "--views", "3", "--resolution", "24", "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..3 {
        let view = meshstyle::asset_io::load_texture(out.join(format!("view_{i:03}.png"))).unwrap();
        assert_eq!((view.width, view.height), (24, 24));
        assert!(out.join(format!("mask_{i:03}.png")).is_file());
    }
    assert!(!out.join("view_003.png").exists());
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = fixtures(dir.path(), 2);
    let missing = dir.path().join("nowhere.obj");
    let o = meshstyle(&["metrics", "--pred", s(&missing), "--gt", s(&a.mesh), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.obj"));
}

#[test]
fn mismatched_part_labels_are_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = fixtures(dir.path(), 3);
    let o = meshstyle(&[
        "transfer-geometry",
        "--source",
        s(&a.mesh),
        "--target",
        s(&b.mesh),
        "--source-labels",
        s(&a.labels),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    let o = meshstyle(&["metrics", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(meshstyle(&["explode"]).status.code(), Some(1));
    assert_eq!(meshstyle(&[]).status.code(), Some(1));
    let o = meshstyle(&["stylize", "--source", "x.obj"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--target"));
}

#[test]
fn help_and_version_exit_cleanly() {
    let o = meshstyle(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = String::from_utf8_lossy(&o.stdout);
    for cmd in ["fit-ellipsoids", "transfer-geometry", "transfer-texture", "stylize", "render", "metrics"] {
        assert!(help.contains(cmd), "{cmd} not listed");
    }
    assert_eq!(meshstyle(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_config_and_thread_count_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = fixtures(dir.path(), 2);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "lambda = -1\n").unwrap();
    let o = meshstyle(&["render", "--source", s(&a.mesh), "--config", s(&bad), "--out-dir", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_meshstyle"))
        .args(["render", "--source", s(&a.mesh), "--out-dir", s(dir.path())])
        .env("MESHSTYLE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = fixtures(dir.path(), 2);
    let cfg = small_config(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = Command::new(env!("CARGO_BIN_EXE_meshstyle"))
            .args(["stylize", "--source", s(&a.mesh), "--target", s(&b.mesh), "--config", &cfg, "--out-dir", s(&out)])
            .env("MESHSTYLE_THREADS", threads)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(out.join("mesh.obj")).unwrap(),
            std::fs::read(out.join("texture.png")).unwrap(),
            std::fs::read(out.join("ledger.json")).unwrap(),
        ));
    }
    assert!(outputs[0] == outputs[1]);
}
