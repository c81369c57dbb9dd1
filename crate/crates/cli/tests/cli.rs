use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labelaug")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    listing(dir).into_iter().map(|n| (n.clone(), std::fs::read(dir.join(&n)).unwrap())).collect()
}

#[test]
fn verify_jensen_gap_passes_and_stays_in_its_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("reports");
    let o = run(&["verify", "--suite", "jensen-gap", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("jensen-gap: 1000/1000 passed"));
    assert_eq!(listing(tmp.path()), vec!["reports"]);
    assert_eq!(listing(&out), vec!["jensen-gap.json", "manifest.json"]);
    assert!(stdout(&o).contains("jensen-gap.json"));
}

#[test]
fn unknown_suite_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--suite", "nope", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_idx_file_is_a_data_error() {
    let o = run(&["data", "load-mnist", "--images", "missing.idx", "--labels", "missing-labels.idx"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.idx"));
}

#[test]
fn bad_flags_and_configs_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&["sweep", "--recipe", "nope", "--method", "mixup", "--out", s(&out)])), 1);
    assert_eq!(code(&run(&["sweep", "--recipe", "defC1", "--out", s(&out)])), 1);
    assert_eq!(code(&run(&["sweep", "--bogus-flag"])), 1);
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, "{not json").unwrap();
    assert_eq!(code(&run(&["sweep", "--config", s(&cfg), "--recipe", "defC1", "--method", "mixup", "--out", s(&out)])), 1);
    std::fs::write(&cfg, r#"{"train": {"epochs": "many"}}"#).unwrap();
    assert_eq!(code(&run(&["sweep", "--config", s(&cfg), "--recipe", "defC1", "--method", "mixup", "--out", s(&out)])), 1);
    assert!(run(&["--help"]).status.success());
}

#[test]
fn diverging_training_is_a_numeric_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "train", "--recipe", "defC1", "--method", "weight_decay", "--value", "0", "--optimizer", "sgd", "--lr", "1e308", "--epochs", "3",
        "--n", "200", "--out", s(tmp.path()),
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

const SMALL_SWEEP: [&str; 14] = [
    "sweep", "--recipe", "defC1", "--method", "label_smoothing", "--points", "3", "--seeds", "1,2", "--epochs", "4", "--n", "300", "--jobs",
];

#[test]
fn sweep_writes_csvs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, jobs) in [(&a, "1"), (&b, "3")] {
        let mut args = SMALL_SWEEP.to_vec();
        args.extend([jobs, "--seed", "5", "--out", s(dir)]);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let printed = stdout(&o);
        for f in ["raw.csv", "aggregate.csv", "manifest.json"] {
            assert!(printed.contains(s(&dir.join(f))), "{printed}");
        }
    }
    assert_eq!(read_all(&a), read_all(&b));
    let raw = std::fs::read_to_string(a.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 3 * 2);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["master_seed"], 5);
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "defC1", "method": "mixup", "train": {"epochs": 7, "learning_rate": 0.01}, "data": {"synthetic": {"n": 100}}}"#,
    )
    .unwrap();
    let out = tmp.path().join("t");
    let o = run(&["train", "--config", s(&cfg), "--epochs", "2", "--value", "1", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let c = &m["config"];
    assert_eq!(c["train"]["epochs"], 2);
    assert_eq!(c["train"]["learning_rate"], 0.01);
    assert_eq!(c["train"]["batch_size"], 500);
    assert_eq!(c["data"]["synthetic"]["n"], 100);
    assert_eq!(c["data"]["synthetic"]["d"], 10);
    assert_eq!(c["method"], "mixup");
    let history = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 3);
}

#[test]
fn identical_invocations_give_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["train", "--recipe", "defC1", "--method", "mixup", "--value", "2", "--epochs", "3", "--n", "200", "--seed", "9"],
        vec!["boundary", "--method", "weight_decay", "--value", "0.0005", "--epochs", "20", "--resolution", "20", "--seed", "9"],
        vec!["verify", "--suite", "certificates", "--cases", "20", "--seed", "9"],
    ];
    for (i, case) in cases.iter().enumerate() {
        let dirs = [tmp.path().join(format!("{i}a")), tmp.path().join(format!("{i}b"))];
        for d in &dirs {
            let mut args = case.clone();
            args.extend(["--out", s(d)]);
            let o = run(&args);
            assert_eq!(code(&o), 0, "{case:?}: {}", String::from_utf8_lossy(&o.stderr));
        }
        assert_eq!(read_all(&dirs[0]), read_all(&dirs[1]), "{case:?}");
    }
    let files: Vec<_> = (0..2).map(|i| tmp.path().join(format!("syn{i}.csv"))).collect();
    for f in &files {
        assert_eq!(code(&run(&["data", "synthetic", "--n", "50", "--seed", "4", "--out", s(f)])), 0);
    }
    assert_eq!(std::fs::read(&files[0]).unwrap(), std::fs::read(&files[1]).unwrap());
    let other = tmp.path().join("syn-other.csv");
    run(&["data", "synthetic", "--n", "50", "--seed", "5", "--out", s(&other)]);
    assert_ne!(std::fs::read(&files[0]).unwrap(), std::fs::read(&other).unwrap());
}

#[test]
fn sweep_curve_with_one_value_draws_an_error_bar() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("aggregate.csv");
    std::fs::write(&csv, "value_index,value,n_ok,n_failed,test_error_mean,test_error_std\n0,0.1,5,0,0.2,0.05\n").unwrap();
    let svg = tmp.path().join("curve.svg");
    let o = run(&["plot", "--kind", "sweep_curve", "--csv", s(&csv), "--out", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml") && text.contains("version=\"1.1\""));
    assert_eq!(text.matches("<circle").count(), 1);
    assert_eq!(text.matches("class=\"errorbar\"").count(), 1);
}

#[test]
fn sweep_curve_has_bands_for_each_series() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for name in ["label_smoothing", "mixup"] {
        let dir = tmp.path().join(name);
        std::fs::create_dir(&dir).unwrap();
        let csv = dir.join("aggregate.csv");
        std::fs::write(&csv, "value,test_error_mean,test_error_std\n0,0.1,0.01\n0.5,0.2,0.02\n1,0.3,\n").unwrap();
        csvs.push(csv);
    }
    let svg = tmp.path().join("curve.svg");
    let o = run(&["plot", "--kind", "sweep_curve", "--csv", s(&csvs[0]), s(&csvs[1]), "--out", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("class=\"band\"").count(), 2);
    assert_eq!(text.matches("class=\"mean\"").count(), 2);
    assert!(text.contains("data-label=\"mixup\""));
}

#[test]
fn boundary_heatmap_has_every_cell_and_a_contour() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("grid.csv");
    let mut text = String::from("x,y,p\n");
    for iy in 0..100 {
        for ix in 0..100 {
            let (x, y) = (ix as f64 / 99.0 * 2.0 - 1.0, iy as f64 / 99.0 * 2.0 - 1.0);
            text.push_str(&format!("{x},{y},{}\n", 1.0 / (1.0 + (-(3.0 * x + y)).exp())));
        }
    }
    std::fs::write(&csv, text).unwrap();
    let svg = tmp.path().join("heat.svg");
    let o = run(&["plot", "--kind", "boundary_heatmap", "--csv", s(&csv), "--out", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    let cells = text.split("<g class=\"cells\"").nth(1).unwrap().split("</g>").next().unwrap();
    assert_eq!(cells.matches("<rect").count(), 10_000);
    let contour = text.split("class=\"contour\" d=\"").nth(1).unwrap().split('"').next().unwrap();
    // One segment per crossed cell; 3x + y = 0 crosses the lattice.
    assert!(contour.matches('M').count() >= 99);
}

#[test]
fn malformed_plot_inputs_are_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let header_only = tmp.path().join("header.csv");
    std::fs::write(&header_only, "value,test_error_mean,test_error_std\n").unwrap();
    let ragged = tmp.path().join("ragged.csv");
    std::fs::write(&ragged, "x,y,p\n0,0,0.5\n1,0,0.5\n0,1,0.4\n").unwrap();
    let out = tmp.path().join("x.svg");
    for (kind, csv) in [("sweep_curve", &empty), ("sweep_curve", &header_only), ("boundary_heatmap", &ragged), ("variance_timeseries", &header_only)] {
        let o = run(&["plot", "--kind", kind, "--csv", s(csv), "--out", s(&out)]);
        assert_eq!(code(&o), 2, "{kind} {}", csv.display());
    }
    assert!(!out.exists());
}

#[test]
fn variance_timeseries_averages_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let o = run(&["train", "--recipe", "defC1", "--method", "label_smoothing", "--value", "0.2", "--epochs", "6", "--every", "2", "--n", "200", "--data-seed", seed, "--out", s(&out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        csvs.push(out.join("diagnostics.csv"));
    }
    let svg = tmp.path().join("var.svg");
    let o = run(&["plot", "--kind", "variance_timeseries", "--csv", s(&csvs[0]), s(&csvs[1]), "--out", s(&svg)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    // Samples at epochs 0, 2, 4, 6.
    let line = text.split("class=\"mean\" points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(line.split(' ').count(), 4);
    assert!(text.contains("class=\"band\""));
}

#[test]
fn data_commands_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let f = tmp.path().join("nested").join("b.csv");
    let o = run(&["data", "boundary2d", "--n", "10", "--seed", "1", "--out", s(&f)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), s(&f));
    assert_eq!(std::fs::read_to_string(&f).unwrap().lines().count(), 11);
}
