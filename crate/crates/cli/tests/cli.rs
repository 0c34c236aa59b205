use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atomic-deconv")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn simulate_to(dir: &TempDir, name: &str, seed: &str) -> String {
    let path = dir.path().join(name);
    let p = path.to_str().unwrap().to_string();
    let out = run(&[
        "simulate", "--model", "normal:3,9", "--p", "0.1", "--sigma", "1", "--n", "1000", "--seed", seed, "--out", &p,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    p
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_header_and_rows() {
    let dir = TempDir::new().unwrap();
    let p = simulate_to(&dir, "s.csv", "7");
    let text = fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x"));
    assert_eq!(lines.count(), 1000);
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate_to(&dir, "a.csv", "7");
    let b = simulate_to(&dir, "b.csv", "7");
    let c = simulate_to(&dir, "c.csv", "8");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn simulate_rejects_bad_atom_mass() {
    let out = run(&["simulate", "--p", "1.2", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invalid p"), "{}", stderr(&out));
}

#[test]
fn simulate_rejects_bad_model_string() {
    let out = run(&["simulate", "--model", "cauchy:1", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("model"));
}

#[test]
fn estimate_plug_in_writes_grid_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let sample = simulate_to(&dir, "s.csv", "7");
    let grid = dir.path().join("f.csv");
    let out = run(&[
        "estimate", &sample, "--h", "0.58", "--g", "0.5", "--grid-n", "4096", "--out", grid.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().next(), Some("x,value"));
    assert_eq!(text.lines().count(), 4097);

    let meta = read_json(&dir.path().join("f.csv.meta.json"));
    assert_eq!(meta["mode"], "plug_in");
    assert_eq!(meta["h"], 0.58);
    assert_eq!(meta["g"], 0.5);
    assert_eq!(meta["grid"]["n_points"], 4096);
    let p_hat = meta["p_hat"].as_f64().unwrap();
    assert!((0.0..0.25).contains(&p_hat), "p_hat = {p_hat}");
    assert_eq!(meta["p_raw"], meta["p_hat"]);
}

#[test]
fn estimate_modes_dispatch() {
    let dir = TempDir::new().unwrap();
    let sample = simulate_to(&dir, "s.csv", "3");
    let mut peaks = Vec::new();
    for mode in [&["--mode", "known-p", "--p", "0.1"][..], &["--mode", "classical"][..]] {
        let grid = dir.path().join("g.json");
        let mut args = vec!["estimate", &sample, "--grid-n", "4096", "--format", "json", "--window", "-5,12"];
        args.extend_from_slice(mode);
        args.extend_from_slice(&["--out", grid.to_str().unwrap()]);
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        let json = read_json(&grid);
        let xs: Vec<f64> = serde_json::from_value(json["xs"].clone()).unwrap();
        let values: Vec<f64> = serde_json::from_value(json["values"].clone()).unwrap();
        assert!(xs.iter().all(|x| (-5.0..=12.0).contains(x)));
        let at_zero = values[xs.iter().position(|x| x.abs() < 1e-9).unwrap()];
        peaks.push((json["estimator_tag"].as_str().unwrap().to_string(), at_zero));
    }
    assert_eq!(peaks[0].0, "known_p");
    assert_eq!(peaks[1].0, "classical");
    // classical = (1 - p) known_p + p w_h, with w(0) = 8 / (15 pi) and the default h = 0.58.
    let wh0 = 8.0 / (15.0 * std::f64::consts::PI * 0.58);
    assert!((peaks[1].1 - (0.9 * peaks[0].1 + 0.1 * wh0)).abs() < 1e-6, "{peaks:?}");
}

#[test]
fn estimate_known_p_requires_p() {
    let dir = TempDir::new().unwrap();
    let sample = simulate_to(&dir, "s.csv", "1");
    let grid = dir.path().join("g.csv");
    let out = run(&["estimate", &sample, "--mode", "known-p", "--out", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("invalid p"));
}

#[test]
fn estimate_overflow_exits_3_with_hint() {
    let dir = TempDir::new().unwrap();
    let sample = simulate_to(&dir, "s.csv", "1");
    let grid = dir.path().join("g.csv");
    let out = run(&["estimate", &sample, "--h", "0.02", "--out", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("increase h"), "{}", stderr(&out));
}

#[test]
fn estimate_bad_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let grid = dir.path().join("g.csv");
    let out = run(&["estimate", missing.to_str().unwrap(), "--out", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = dir.path().join("bad.csv");
    fs::write(&garbage, "x\n1.0\nabc\n").unwrap();
    let out = run(&["estimate", garbage.to_str().unwrap(), "--out", grid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("abc"));
}

#[test]
fn mc_table_presets_and_custom_list() {
    let t1 = run(&["mc-table", "--preset", "table1", "--reps", "10", "--seed", "1"]);
    assert!(t1.status.success(), "{}", stderr(&t1));
    let text = stdout(&t1);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "g,R,n,mean,sd,asymptotic_sd,corrected_sd,seed");
    let gs: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(gs, ["0.5", "0.55", "0.6", "0.65"]);
    assert!(lines[1].starts_with("0.5,10,1000,"));

    let t2 = run(&["mc-table", "--preset", "table2", "--reps", "10"]);
    let text = stdout(&t2);
    let gs: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(gs, ["0.45", "0.5", "0.6", "0.65"]);
    assert!(text.lines().nth(1).unwrap().starts_with("0.45,10,500,"));

    let custom = run(&["mc-table", "--g", "0.4,0.7", "--reps", "5"]);
    assert_eq!(stdout(&custom).lines().count(), 3);
}

#[test]
fn mc_table_json_and_csv_encode_identical_numbers() {
    let csv = stdout(&run(&["mc-table", "--g", "0.5,0.6", "--reps", "8", "--n", "200", "--seed", "5"]));
    let json: serde_json::Value = serde_json::from_str(&stdout(&run(&[
        "mc-table", "--g", "0.5,0.6", "--reps", "8", "--n", "200", "--seed", "5", "--format", "json",
    ])))
    .unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    for (row, obj) in csv.lines().skip(1).zip(json.as_array().unwrap()) {
        for (key, cell) in header.iter().zip(row.split(',')) {
            let from_csv: f64 = cell.parse().unwrap();
            assert_eq!(from_csv, obj[*key].as_f64().unwrap(), "column {key}");
        }
    }
}

#[test]
fn mc_table_is_deterministic() {
    let args = ["mc-table", "--g", "0.6", "--reps", "6", "--n", "300", "--seed", "11"];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn kernel_info_reports() {
    let out = run(&["kernel-info", "--kernel", "sextic_w", "--h", "0.5", "--sigma", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("edge asymptote ratio (h = 0.5, sigma = 1): 0.4299"), "{text}");
    assert!(text.contains("moment 2: 6.000000"));
    assert!(text.contains("moment 4: n/a"));

    let atom = stdout(&run(&["kernel-info", "--kernel", "atom_k"]));
    assert!(atom.contains("integral of phi: 2.000000"), "{atom}");

    let out = run(&["kernel-info", "--kernel", "epanechnikov"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown kernel"));
}

#[test]
fn asymptotics_json_matches_csv() {
    let csv = stdout(&run(&["asymptotics", "--n", "1000", "--g", "0.5", "--h", "0.58"]));
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["asymptotics", "--n", "1000", "--g", "0.5", "--h", "0.58", "--format", "json"])))
            .unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    for (key, v) in header.iter().zip(row) {
        assert_eq!(v, json[*key].as_f64().unwrap(), "{key}");
    }
    assert!((json["asymptotic_sd_p"].as_f64().unwrap() - 1.7891).abs() < 1e-3);
    assert_eq!(run(&["asymptotics", "--n", "4"]).status.code(), Some(2));
}

#[test]
fn figure_preset_writes_estimate_and_truth() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("fig5.csv");
    let out = run(&["figure", "--preset", "fig5", "--seed", "2", "--grid-n", "4096", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next(), Some("x,f_star,f_known_p,truth"));
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    let peak = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!((peak[0] - 3.0).abs() < 1.5, "peak at {}", peak[0]);
}
