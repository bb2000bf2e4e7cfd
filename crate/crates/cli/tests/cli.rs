use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn zk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zk"))
        .args(args)
        .env_remove("ZK_THREADS")
        .output()
        .expect("zk runs")
}

fn ok(args: &[&str]) -> Output {
    let out = zk(args);
    assert!(
        out.status.success(),
        "zk {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn write_spec(dir: &Path, spec: Value) -> PathBuf {
    let path = dir.join("spec.json");
    fs::write(&path, spec.to_string()).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn parabola_csv(dir: &Path) -> PathBuf {
    let path = dir.join("parabola.csv");
    let mut text = String::from("x,y\n");
    for i in 0..20 {
        let x = 0.37 * i as f64 + 0.05 * (i % 3) as f64;
        text.push_str(&format!("{x},{}\n", 1.0 - 2.0 * x + 3.0 * x * x));
    }
    fs::write(&path, text).unwrap();
    path
}

// One Brownian path gives a noisy variogram, so a single realization can
// show a small fitted intercept; the check is over several seeds, on short
// lags where the estimate is most precise.
#[test]
fn simulated_brownian_axis_fits_as_linear() {
    let dir = tempfile::tempdir().unwrap();
    let (mut linear, mut slopes) = (0, 0.0);
    for seed in 1..=10 {
        let spec = write_spec(
            dir.path(),
            json!({"n": 2000, "seed": seed, "axes": [
                {"name": "depth", "residual": {"kind": "brownian", "slope": 1.0}, "bounds": [0.0, 10.0]}
            ]}),
        );
        let data = dir.path().join("sim.csv");
        ok(&["simulate", "--spec", p(&spec), "--output", p(&data)]);
        let model = dir.path().join("model.json");
        ok(&[
            "fit",
            "--data",
            p(&data),
            "--model",
            p(&model),
            "--n-bins",
            "40",
            "--max-lag-fraction",
            "0.05",
        ]);
        let report = read_json(&dir.path().join("model.report.json"));
        let axis = &report["axes"][0];
        assert_eq!(axis["name"], "depth");
        assert_ne!(axis["model"]["kind"], "pure_nugget");
        if axis["model"]["kind"] == "linear" {
            linear += 1;
        }
        slopes += axis["model"]["slope"].as_f64().unwrap();
    }
    assert!(linear >= 6, "only {linear}/10 fits selected linear");
    let mean = slopes / 10.0;
    assert!((mean - 1.0).abs() < 0.1, "mean slope {mean}");
    assert!(dir.path().join("model.manifest.json").exists());
}

#[test]
fn quadratic_drift_recovers_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let model = dir.path().join("m.json");
    ok(&[
        "fit",
        "--data",
        p(&data),
        "--model",
        p(&model),
        "--drift",
        "quadratic",
    ]);
    let m = read_json(&model);
    let drift = &m["axis_drifts"][0];
    let a2 = drift["a"][2].as_f64().unwrap();
    assert!((a2 - 3.0).abs() < 1e-6, "a2 = {a2}");
}

#[test]
fn predicting_training_points_interpolates() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        json!({"n": 60, "seed": 9, "axes": [
            {"residual": {"kind": "brownian", "slope": 1.0}, "a1": 1.0},
            {"residual": {"kind": "brownian", "slope": 0.5}, "a2": -2.0}
        ]}),
    );
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--spec", p(&spec), "--output", p(&data)]);
    let model = dir.path().join("m.json");
    ok(&["fit", "--data", p(&data), "--model", p(&model)]);
    let pred = dir.path().join("pred.csv");
    ok(&[
        "predict",
        "--model",
        p(&model),
        "--queries",
        p(&data),
        "--output",
        p(&pred),
    ]);
    let rows = csv_rows(&pred);
    assert_eq!(
        rows[0],
        [
            "id",
            "estimate",
            "variance",
            "drift",
            "component_x1",
            "component_x2"
        ]
    );
    let truth = csv_rows(&data);
    assert_eq!(rows.len(), truth.len());
    for (r, t) in rows[1..].iter().zip(&truth[1..]) {
        let est: f64 = r[1].parse().unwrap();
        let y: f64 = t[2].parse().unwrap();
        assert!((est - y).abs() < 1e-6, "{est} vs {y}");
        let parts: f64 = r[3..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((parts - est).abs() < 1e-9);
    }
}

#[test]
fn empty_queries_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let model = dir.path().join("m.json");
    ok(&["fit", "--data", p(&data), "--model", p(&model)]);
    for (name, body) in [("blank.csv", ""), ("header.csv", "x\n")] {
        let q = dir.path().join(name);
        fs::write(&q, body).unwrap();
        let out = dir.path().join(format!("out-{name}"));
        ok(&[
            "predict",
            "--model",
            p(&model),
            "--queries",
            p(&q),
            "--output",
            p(&out),
        ]);
        assert_eq!(
            fs::read_to_string(&out).unwrap(),
            "id,estimate,variance,drift,component_x\n"
        );
    }
}

#[test]
fn axis_mismatch_exits_2_with_names() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let model = dir.path().join("m.json");
    ok(&["fit", "--data", p(&data), "--model", p(&model)]);
    let q = dir.path().join("q.csv");
    fs::write(&q, "x,w\n1,2\n").unwrap();
    let out_path = dir.path().join("out.csv");
    let out = zk(&[
        "predict",
        "--model",
        p(&model),
        "--queries",
        p(&q),
        "--output",
        p(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unexpected columns [w]"), "{err}");
    assert!(!out_path.exists());
}

#[test]
fn missing_input_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    let out = zk(&[
        "fit",
        "--data",
        p(&dir.path().join("nope.csv")),
        "--model",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"drift_orders": 2}"#).unwrap();
    let out = zk(&[
        "fit",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--model",
        "m.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
}

#[test]
fn config_file_supplies_paths_and_options() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let model = dir.path().join("m.json");
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        json!({"data": data, "model": model, "zonal": {"drift_order": 2}}).to_string(),
    )
    .unwrap();
    ok(&["fit", "--config", p(&cfg)]);
    assert_eq!(read_json(&model)["drift_order"], 2);
    ok(&["fit", "--config", p(&cfg), "--drift", "linear"]);
    assert_eq!(read_json(&model)["drift_order"], 1);
}

#[test]
fn simulate_is_reproducible_and_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        json!({"n": 50, "seed": 1, "axes": [
            {"residual": {"kind": "white", "sill": 0.5}},
            {"residual": {"kind": "short_range", "sill": 1.0, "range": 0.1}}
        ]}),
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&[
        "simulate",
        "--spec",
        p(&spec),
        "--output",
        p(&a),
        "--seed",
        "42",
    ]);
    ok(&[
        "simulate",
        "--spec",
        p(&spec),
        "--output",
        p(&b),
        "--seed",
        "42",
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let manifest = read_json(&dir.path().join("a.manifest.json"));
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    let truth = read_json(&dir.path().join("a.truth.json"));
    assert_eq!(truth["spec"]["seed"], 42);
    assert_eq!(truth["drift"].as_array().unwrap().len(), 50);
    let c = dir.path().join("c.csv");
    ok(&[
        "simulate",
        "--spec",
        p(&spec),
        "--output",
        p(&c),
        "--seed",
        "43",
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn thread_count_does_not_change_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        json!({"n": 120, "seed": 5, "axes": [
            {"residual": {"kind": "brownian", "slope": 1.0}},
            {"residual": {"kind": "white", "sill": 0.2}},
            {"residual": {"kind": "brownian", "slope": 2.0}, "a1": 1.0}
        ]}),
    );
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--spec", p(&spec), "--output", p(&data)]);
    let model = dir.path().join("m.json");
    ok(&["fit", "--data", p(&data), "--model", p(&model)]);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("p{threads}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_zk"))
            .args([
                "predict",
                "--model",
                p(&model),
                "--queries",
                p(&data),
                "--output",
                p(&out),
            ])
            .env("ZK_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        let manifest = read_json(&out.with_extension("manifest.json"));
        assert_eq!(manifest["threads"], threads.parse::<u64>().unwrap());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn variogram_writes_lag_table_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let out = dir.path().join("vg.csv");
    ok(&[
        "variogram",
        "--data",
        p(&data),
        "--output",
        p(&out),
        "--n-bins",
        "4",
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows[0], ["axis", "lag", "gamma_hat", "count"]);
    assert_eq!(rows.len(), 5);
    let fit = read_json(&dir.path().join("vg.fit.json"));
    assert_eq!(fit[0]["name"], "x");
    assert!(fit[0]["axis_range"].as_f64().unwrap() > 0.0);
}

#[test]
fn validate_single_axis_agrees_with_dense() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        json!({"n": 80, "seed": 2, "axes": [
            {"residual": {"kind": "brownian", "slope": 1.0}, "a1": 0.5}
        ]}),
    );
    let data = dir.path().join("d.csv");
    ok(&["simulate", "--spec", p(&spec), "--output", p(&data)]);
    let model = dir.path().join("m.json");
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        json!({"zonal": {"overrides": {"x1": {"kind": "linear", "slope": 1.0}}}}).to_string(),
    )
    .unwrap();
    ok(&[
        "fit",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--model",
        p(&model),
    ]);
    let q = dir.path().join("q.csv");
    let mut text = String::from("x1\n");
    for i in 0..30 {
        text.push_str(&format!("{}\n", -0.1 + 0.04 * i as f64));
    }
    fs::write(&q, text).unwrap();
    let report = dir.path().join("report.json");
    ok(&[
        "validate",
        "--model",
        p(&model),
        "--queries",
        p(&q),
        "--output",
        p(&report),
    ]);
    let r = read_json(&report);
    assert_eq!(
        r["agreement"]["within_tolerance"], true,
        "{}",
        r["agreement"]
    );
    assert_eq!(r["queries"].as_array().unwrap().len(), 30);
    assert!(r["accuracy"].is_null());
    assert_eq!(r["sill_sensitivity"].as_array().unwrap().len(), 3);
    let dense_shift = r["sill_sensitivity"][2]["max_abs_delta_dense_lambda"]
        .as_f64()
        .unwrap();
    assert!(dense_shift < 1e-8, "dense shift {dense_shift}");
}

#[test]
fn validate_three_axes_reports_mse_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        json!({"n": 300, "seed": 17, "axes": [
            {"residual": {"kind": "brownian", "slope": 1.0}, "a1": 2.0},
            {"residual": {"kind": "short_range", "sill": 0.3, "range": 0.002}, "a1": -1.5},
            {"residual": {"kind": "white", "sill": 0.1}, "a2": 3.0}
        ]}),
    );
    let all = dir.path().join("all.csv");
    ok(&["simulate", "--spec", p(&spec), "--output", p(&all)]);
    let text = fs::read_to_string(&all).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    fs::write(&train, lines[..201].join("\n")).unwrap();
    fs::write(&test, format!("{}\n{}", lines[0], lines[201..].join("\n"))).unwrap();
    let report = dir.path().join("r.json");
    ok(&[
        "validate",
        "--data",
        p(&train),
        "--queries",
        p(&test),
        "--output",
        p(&report),
        "--drift",
        "quadratic",
        "--scaling",
        "50,100,200",
    ]);
    let r = read_json(&report);
    let acc = &r["accuracy"];
    let ratio = acc["mse_ratio"].as_f64().unwrap();
    assert!(ratio <= 1.2, "ratio {ratio}");
    assert!(acc["mse_zonal"].as_f64().unwrap() < acc["mse_mean_baseline"].as_f64().unwrap());
    assert_eq!(r["scaling"].as_array().unwrap().len(), 3);
    assert!(r["timing"]["dense_setup_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn validate_refuses_above_dense_limit() {
    let dir = tempfile::tempdir().unwrap();
    let data = parabola_csv(dir.path());
    let out = zk(&[
        "validate",
        "--data",
        p(&data),
        "--output",
        p(&dir.path().join("r.json")),
        "--dense-limit",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("limited to 10"));
}

#[test]
fn coincident_samples_make_dense_singular() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("dup.csv");
    fs::write(&data, "a,b,y\n0,0,1\n0,0,1\n1,2,3\n2,1,0\n3,3,2\n4,0,1\n").unwrap();
    let model = dir.path().join("m.json");
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        json!({"zonal": {"drift_order": 0, "overrides": {
            "a": {"kind": "linear", "slope": 1.0},
            "b": {"kind": "linear", "slope": 1.0}
        }}})
        .to_string(),
    )
    .unwrap();
    ok(&[
        "fit",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--model",
        p(&model),
    ]);
    let out = zk(&[
        "validate",
        "--model",
        p(&model),
        "--output",
        p(&dir.path().join("r.json")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn classify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("labels.csv");
    let mut text = String::from("u,v,class\n");
    for i in 0..40 {
        let u = i as f64 / 39.0;
        let v = ((i * 7) % 11) as f64 / 10.0;
        let class = if u < 0.5 { "left" } else { "right" };
        text.push_str(&format!("{u},{v},{class}\n"));
    }
    fs::write(&data, text).unwrap();
    let model = dir.path().join("cm.json");
    ok(&["classify", "fit", "--data", p(&data), "--model", p(&model)]);
    let report = read_json(&dir.path().join("cm.report.json"));
    assert_eq!(report["classes"][0]["name"], "left");
    assert!((report["k"][0][0].as_f64().unwrap() - 0.25).abs() < 1e-12);
    let q = dir.path().join("q.csv");
    fs::write(&q, "v,u,class\n0.5,0.1,left\n0.5,0.9,right\n").unwrap();
    let out = dir.path().join("cp.csv");
    ok(&[
        "classify",
        "predict",
        "--model",
        p(&model),
        "--queries",
        p(&q),
        "--output",
        p(&out),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(
        rows[0],
        [
            "id",
            "raw_left",
            "raw_right",
            "clipped_left",
            "clipped_right",
            "class"
        ]
    );
    assert_eq!(rows[1][5], "left");
    assert_eq!(rows[2][5], "right");
    for r in &rows[1..] {
        for cell in &r[3..5] {
            let c: f64 = cell.parse().unwrap();
            assert!((0.0..=1.0).contains(&c));
        }
    }
}
