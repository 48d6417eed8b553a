//! The `flexfit` binary end to end: artifacts, exit codes and
//! reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use flexfit_cli::config::{EvalConfig, FitShapeConfig, InvertConfig, RenderConfig};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn flexfit(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_flexfit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn run_config(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![sub, config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, err) = flexfit(&args);
    assert!(code == 0 || !err.is_empty(), "silent failure");
    code
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn metric(csv: &str, name: &str, subject: &str) -> Option<String> {
    csv.lines().skip(1).find_map(|l| {
        let parts: Vec<&str> = l.splitn(3, ',').collect();
        (parts[0] == name && parts[2] == subject).then(|| parts[1].to_string())
    })
}

#[test]
fn every_bundled_config_parses() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        let name = path.file_name().unwrap().to_str().unwrap();
        let ok = if name.starts_with("invert") {
            serde_json::from_str::<InvertConfig>(&text).is_ok()
        } else if name.starts_with("render") {
            serde_json::from_str::<RenderConfig>(&text).is_ok()
        } else if name.starts_with("eval") {
            serde_json::from_str::<EvalConfig>(&text).is_ok()
        } else {
            serde_json::from_str::<FitShapeConfig>(&text).is_ok()
        };
        assert!(ok, "{name} does not parse");
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn fit_shape_is_reproducible_and_round_trips_through_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs().join("capsule_union.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run_config("fit-shape", &config, &a, &["--iters", "8"]), 0);
    assert_eq!(run_config("fit-shape", &config, &b, &["--iters", "8"]), 0);
    for f in ["mesh.obj", "network.ckpt", "loss.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let loss = fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().next(), Some("iter,stage,loss_total,loss_sdf,loss_eik,chamfer"));
    assert_eq!(loss.lines().count(), 17);
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("metric,value,subject"));
    assert!(metric(&metrics, "watertight", "mesh.obj").is_some());
    assert!(metric(&metrics, "chamfer_l1", "mesh.obj").is_some());

    let ckpt = write_config(
        tmp.path(),
        "extract.json",
        &format!(r#"{{"seed": 1, "checkpoint": "{}", "resolution": 64}}"#, a.join("network.ckpt").display()),
    );
    let c = tmp.path().join("c");
    assert_eq!(run_config("extract-mesh", &ckpt, &c, &[]), 0);
    assert_eq!(fs::read(c.join("mesh.obj")).unwrap(), fs::read(a.join("mesh.obj")).unwrap());
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let negative = write_config(
        tmp.path(),
        "neg.json",
        r#"{"seed": 1, "target": {"kind": "sphere", "radius": 0.3},
            "schedule": {"stages": [{"resolution": -32, "iterations": 5}]}}"#,
    );
    assert_eq!(run_config("fit-shape", &negative, &out, &[]), 2);
    let unknown = write_config(tmp.path(), "unknown.json", r#"{"seed": 1, "target": {"kind": "sphere", "radius": 0.3}, "speed": 2}"#);
    assert_eq!(run_config("fit-shape", &unknown, &out, &[]), 2);
    let seedless = write_config(tmp.path(), "seedless.json", r#"{"target": {"kind": "sphere", "radius": 0.3}}"#);
    assert_eq!(run_config("fit-shape", &seedless, &out, &[]), 2);
    let outside = write_config(tmp.path(), "outside.json", r#"{"seed": 1, "target": {"kind": "sphere", "radius": 0.49}}"#);
    assert_eq!(run_config("fit-shape", &outside, &out, &[]), 2);
    assert_eq!(run_config("fit-shape", &tmp.path().join("absent.json"), &out, &[]), 2);
    let no_vocab = write_config(
        tmp.path(),
        "inv.json",
        r#"{"seed": 1, "vocabulary": {"file": "missing.txt"}, "style_query": {"token": "a"},
            "object_query": {"token": "a"}, "oracle": {"kind": "cosine"}, "target": {"token": "a"}}"#,
    );
    assert_eq!(run_config("invert", &no_vocab, &out, &[]), 2);
    fs::write(tmp.path().join("bad.obj"), "v 0 0 0\nf 1 2 zebra\n").unwrap();
    let bad_mesh = write_config(
        tmp.path(),
        "render.json",
        r#"{"seed": 1, "mesh": "bad.obj", "cameras": []}"#,
    );
    assert_eq!(run_config("render", &bad_mesh, &out, &[]), 2);
    let (code, _) = flexfit(&["fit-shape"]);
    assert_eq!(code, 2);
}

#[test]
fn diverging_training_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "diverge.json",
        r#"{"seed": 1, "target": {"kind": "sphere", "radius": 0.3},
            "init": {"skip": true},
            "network": {"encoding": {"levels": 2, "table_size": 512}, "hidden": 8},
            "schedule": {"stages": [{"resolution": 8, "iterations": 20}]},
            "fit": {"rates": {"table": 1e300, "mlp": 1e300}, "chamfer_every": 0, "chamfer_samples": 100}}"#,
    );
    assert_eq!(run_config("fit-shape", &config, &tmp.path().join("out"), &[]), 3);
}

#[test]
fn invert_writes_one_line_per_slot_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let config = configs().join("invert_quadratic.json");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run_config("invert", &config, &a, &["--iters", "3"]), 0);
    assert_eq!(run_config("invert", &config, &b, &["--iters", "3"]), 0);
    let emb = fs::read_to_string(a.join("embedding.txt")).unwrap();
    assert_eq!(emb, fs::read_to_string(b.join("embedding.txt")).unwrap());
    assert_eq!(emb.lines().count(), 3);
    assert!(emb.lines().all(|l| l.split_whitespace().count() == 768));
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("generation,best_loss,sigma"));
    assert_eq!(trace.lines().count(), 4);

    let one = tmp.path().join("one");
    assert_eq!(run_config("invert", &config, &one, &["--iters", "1", "--seed", "9"]), 0);
    assert_eq!(fs::read_to_string(one.join("trace.csv")).unwrap().lines().count(), 2);
}

#[test]
fn quadratic_config_converges_within_its_budget() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_config("invert", &configs().join("invert_quadratic.json"), tmp.path(), &[]), 0);
    let metrics = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    let initial: f64 = metric(&metrics, "initial_loss", "oracle").unwrap().parse().unwrap();
    let trace = fs::read_to_string(tmp.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 201);
    let last: f64 = trace.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last < 1e-6 * initial, "{last} vs {initial}");
}

#[test]
fn noisy_file_based_inversion_runs() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_config("invert", &configs().join("invert_noisy.json"), tmp.path(), &["--iters", "10"]), 0);
    let emb = fs::read_to_string(tmp.path().join("embedding.txt")).unwrap();
    assert!(emb.lines().all(|l| l.split_whitespace().count() == 16));
}

#[test]
fn render_emits_three_files_per_camera() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("two");
    assert_eq!(run_config("render", &configs().join("render_sphere.json"), &out, &["--iters", "20"]), 0);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 6);

    let one = write_config(
        tmp.path(),
        "one.json",
        &format!(
            r#"{{"seed": 4, "mesh": "{}", "cameras": [{{
                "projection": {{"mode": "orthographic", "half_extent": 0.5}},
                "position": [0, 0, 2], "look_at": [0, 0, 0], "up": [0, 1, 0], "width": 24, "height": 24}}]}}"#,
            configs().join("data/sphere.obj").display()
        ),
    );
    let single = tmp.path().join("one");
    assert_eq!(run_config("render", &one, &single, &[]), 0);
    let mut names: Vec<String> = fs::read_dir(&single)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["view0.ppm", "view0_depth.pgm", "view0_normal.nrm"]);

    let eval = write_config(
        tmp.path(),
        "eval.json",
        &format!(
            r#"{{"seed": 1, "psnr": [{{"a": "{0}", "b": "{0}"}}]}}"#,
            single.join("view0.ppm").display()
        ),
    );
    let m = tmp.path().join("m");
    assert_eq!(run_config("eval", &eval, &m, &[]), 0);
    let csv = fs::read_to_string(m.join("metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("psnr,99,"));
}

#[test]
fn bundled_eval_reports_topology_psnr_and_chamfer() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_config("eval", &configs().join("eval_sphere.json"), tmp.path(), &[]), 0);
    let csv = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert_eq!(metric(&csv, "watertight", "data/sphere.obj").as_deref(), Some("true"));
    assert_eq!(metric(&csv, "euler_characteristic", "data/sphere.obj").as_deref(), Some("2"));
    assert_eq!(metric(&csv, "psnr", "data/sphere_view.ppm|data/sphere_view.ppm").as_deref(), Some("99"));
    let spacing = (4.0 * std::f64::consts::PI * 0.35f64.powi(2) / 20_000.0).sqrt();
    let own: f64 = metric(&csv, "chamfer_l1", "data/sphere.obj|data/sphere.obj").unwrap().parse().unwrap();
    assert!(own > 0.2 * spacing && own < 2.0 * spacing, "self chamfer {own}, spacing {spacing}");
    let to_shape: f64 = metric(&csv, "chamfer_l1", "data/sphere.obj").unwrap().parse().unwrap();
    assert!(to_shape < 2.0 * spacing);
}
