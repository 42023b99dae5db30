use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regret-tree"))
}

fn run(dir: &Path, cmd: &str, config: &Value, extra: &[&str]) -> Output {
    let path = dir.join(format!("{cmd}.json"));
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    bin()
        .arg(cmd)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn synthetic(name: &str, seed: u64) -> Value {
    json!({
        "name": name, "source": "synthetic", "n": 600, "d": 3,
        "weights": [2.0, -2.0, 1.0], "seed": seed
    })
}

fn small_config(out: &Path) -> Value {
    json!({
        "datasets": [synthetic("small", 1)],
        "tree": {"min_leaf": 40, "max_depth": 5},
        "realizations": 30,
        "bootstrap": 20,
        "eval_points": 15,
        "sweep_grid": [5, 20, 80],
        "sweep_realizations": 5,
        "seed": 3,
        "out": out
    })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, rows)
}

fn assert_svg(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    assert_eq!(doc.root_element().tag_name().name(), "svg");
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn validate_writes_parseable_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(dir.path(), "validate", &small_config(&out), &[]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out.join("decomposition.csv"));
    assert_eq!(header[3], "total_estimated");
    assert_eq!(rows.len(), 15);
    let json: Value =
        serde_json::from_str(&fs::read_to_string(out.join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(json["points"].as_array().unwrap().len(), 15);
    assert_svg(&out.join("fig1.svg"));

    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k].parse().unwrap()).collect() };
    let printed = stdout_value(&res, "correlation");
    assert!((printed - pearson(&col(3), &col(4))).abs() < 1e-9);
}

#[test]
fn missing_schema_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    fs::write(&data, "x,y\n1,0\n2,1\n").unwrap();
    let schema = dir.path().join("missing.schema.json");
    let config = json!({
        "datasets": [{"name": "d", "source": "csv", "path": data, "schema": schema}],
        "out": dir.path().join("out")
    });
    let res = run(dir.path(), "validate", &config, &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains(&schema.display().to_string()));
}

#[test]
fn malformed_config_and_bad_thread_env_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{ not json").unwrap();
    let res = bin()
        .args(["table", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));

    let res = bin()
        .args(["table", "--config"])
        .arg(dir.path().join("absent.json"))
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));

    let out = dir.path().join("out");
    let config = small_config(&out);
    let cfg = dir.path().join("ok.json");
    fs::write(&cfg, config.to_string()).unwrap();
    let res = bin()
        .args(["validate", "--config"])
        .arg(&cfg)
        .env("REGRET_TREE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    // min_leaf larger than the training split passes validation but cannot be fitted
    let dir = tempfile::tempdir().unwrap();
    let mut config = small_config(&dir.path().join("out"));
    config["tree"]["min_leaf"] = json!(5000);
    let res = run(dir.path(), "table", &config, &[]);
    assert_eq!(
        res.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn sweep_with_one_grid_value_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = small_config(&out);
    config["sweep_grid"] = json!([25]);
    let res = run(dir.path(), "sweep", &config, &[]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out.join("sweep.csv"));
    assert_eq!(header, ["min_leaf", "leaf_regret", "log_loss"]);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "25");
    assert_svg(&out.join("fig2.svg"));
}

#[test]
fn table_has_one_consistent_row_per_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = small_config(&out);
    config["datasets"] = json!([synthetic("a", 1), synthetic("b", 2)]);
    let res = run(
        dir.path(),
        "table",
        &config,
        &["--resample", "label-redraw"],
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out.join("table1.csv"));
    assert_eq!(
        header,
        ["dataset", "leaf_regret", "structural_regret", "ratio"]
    );
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|s| s.parse().unwrap()).collect();
        assert!((v[2] - v[1] / v[0]).abs() < 0.01);
    }
    let (h, per_instance) = read_csv(&out.join("regret_a.csv"));
    assert_eq!(
        h,
        [
            "instance",
            "leaf_id",
            "n_leaf",
            "p_hat",
            "leaf_regret",
            "structural_regret",
            "total"
        ]
    );
    assert_eq!(per_instance.len(), 180);
    let json: Value =
        serde_json::from_str(&fs::read_to_string(out.join("regret_b.json")).unwrap()).unwrap();
    assert_eq!(json["resampling"], "label-redraw");
}

#[test]
fn selective_rows_cover_every_strategy_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut config = small_config(&out);
    config["coverage_grid"] = json!([1.0, 0.75, 0.5, 0.25]);
    let res = run(dir.path(), "selective", &config, &[]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows) = read_csv(&out.join("selective.csv"));
    assert_eq!(
        header,
        [
            "strategy",
            "coverage",
            "recall",
            "retained",
            "retained_positives"
        ]
    );
    assert_eq!(rows.len(), 3 * 4);
    let full: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "1").collect();
    assert_eq!(full.len(), 3);
    assert!(full.iter().all(|r| r[2..] == full[0][2..]));
    assert_svg(&out.join("fig3.svg"));
    let summary = fs::read_to_string(out.join("selective.json")).unwrap();
    assert!(summary.contains("retained subset"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("elsewhere");
    let config = small_config(&dir.path().join("ignored"));
    let res = run(
        dir.path(),
        "validate",
        &config,
        &[
            "--out",
            out.to_str().unwrap(),
            "--replications",
            "12",
            "--min-leaf",
            "60",
            "--seed",
            "9",
        ],
    );
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert!(!dir.path().join("ignored").exists());
    let json: Value =
        serde_json::from_str(&fs::read_to_string(out.join("decomposition.json")).unwrap()).unwrap();
    assert_eq!(json["realizations"], 12);
    assert_eq!(json["seed"], 9);
}

#[test]
fn relative_csv_paths_resolve_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let sub: PathBuf = dir.path().join("data");
    fs::create_dir(&sub).unwrap();
    let mut csv = String::from("x,group,y\n");
    for i in 0..200 {
        let g = ["a", "b"][i % 2];
        csv.push_str(&format!(
            "{},{g},{}\n",
            i as f64 / 10.0,
            u8::from(i % 7 < 3)
        ));
    }
    fs::write(sub.join("d.csv"), csv).unwrap();
    fs::write(
        sub.join("d.schema.json"),
        r#"[{"name":"x","kind":"numeric"},{"name":"group","kind":"categorical","categories":["a","b"]},{"name":"y","kind":"label"}]"#,
    )
    .unwrap();
    let config = json!({
        "datasets": [{"name": "csv", "source": "csv", "path": "data/d.csv", "schema": "data/d.schema.json"}],
        "tree": {"min_leaf": 10, "max_depth": 3},
        "bootstrap": 10,
        "out": dir.path().join("out")
    });
    let res = run(dir.path(), "table", &config, &[]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
