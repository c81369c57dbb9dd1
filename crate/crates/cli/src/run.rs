use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use labelaug::datagen::{
    add_low_var_noise, colorize_backgrounds, load_cifar10_binary, load_mnist_idx, sample_boundary_2d, sample_lowvar_highvar,
    select_binary_classes, write_dataset_csv, Dataset, SyntheticConfig,
};
use labelaug::diagnostics::{boundary_grid, Region};
use labelaug::rng::cell_stream;
use labelaug::sweep::{aggregate_and_write, initial_model, plan_grid, prepare_data, run_sweep, Recipe, SweepConfig};
use labelaug::train::{fit_with_rng, Model, TrainReport};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::output::OutputDir;
use crate::{plot, verify, BoundaryArgs, DataCommand, PlotArgs, PlotKind, SweepArgs, TrainArgs, VerifyArgs};

fn summarize(ds: &Dataset) {
    eprintln!("{}: n={} d={} k={} class counts {:?}", ds.name, ds.n(), ds.d(), ds.k, ds.class_counts());
}

fn save_dataset(ds: &Dataset, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    summarize(ds);
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            write_dataset_csv(ds, p)?;
            Ok(vec![p.to_path_buf()])
        }
        None => Ok(Vec::new()),
    }
}

pub fn data(cmd: DataCommand) -> CliResult<Vec<PathBuf>> {
    match cmd {
        DataCommand::Synthetic(a) => {
            let cfg = SyntheticConfig {
                d: a.d,
                n: a.n,
                gamma: a.gamma,
                high_range: (a.high_lo, a.high_hi),
                seed: a.seed,
            };
            let mut ds = sample_lowvar_highvar(&cfg)?;
            if a.noise > 0.0 {
                ds = add_low_var_noise(&ds, a.noise, a.seed ^ 0x5eed)?;
            }
            save_dataset(&ds, Some(&a.out))
        }
        DataCommand::Boundary2d(a) => save_dataset(&sample_boundary_2d(a.n, a.seed)?, Some(&a.out)),
        DataCommand::LoadMnist(a) => {
            let mut img = load_mnist_idx(&a.images, &a.labels)?;
            if a.colorize {
                img = colorize_backgrounds(&img, a.max_intensity, a.permute, a.seed)?;
            }
            save_dataset(&img.to_dataset(1.0 / 255.0, "mnist")?, a.out.as_deref())
        }
        DataCommand::LoadCifar(a) => {
            let img = load_cifar10_binary(&a.files)?;
            let ds = match a.classes.as_deref() {
                Some([neg, pos]) => select_binary_classes(&img, *neg, *pos)?,
                _ => img.to_dataset(1.0 / 255.0, "cifar10")?,
            };
            save_dataset(&ds, a.out.as_deref())
        }
    }
}

fn history_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,train_loss,test_error\n");
    for r in &report.history {
        let _ = writeln!(s, "{},{:.16e},{:.16e}", r.epoch, r.train_loss, r.test_error);
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

fn diagnostics_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,output_variance,target_output_variance,activation_variance,norm_low,norm_high,norm_ratio\n");
    for d in &report.samples {
        let w = d.weight_norms;
        let _ = writeln!(
            s,
            "{},{:.16e},{},{},{},{},{}",
            d.epoch,
            d.output_variance.per_class_total_variance,
            opt(d.output_variance.target_output_variance),
            opt(d.activation_variance),
            opt(w.map(|w| w.norm_low)),
            opt(w.map(|w| w.norm_high)),
            opt(w.map(|w| w.ratio_first)),
        );
    }
    s
}

/// Trains the single cell `(grid[0], seeds[0])` on the stream a sweep would
/// give it.
fn train_cell(cfg: &SweepConfig) -> CliResult<TrainReport> {
    cfg.validate()?;
    let data = prepare_data(cfg.experiment, &cfg.data, cfg.seeds[0])?;
    let mut rng = cell_stream(cfg.master_seed, 0, 0);
    let (spec, wd) = cfg.method.setting(cfg.grid[0], cfg.base_weight_decay);
    let mut train = cfg.train.clone();
    train.adamw.weight_decay = wd;
    let model = initial_model(cfg.experiment, &cfg.data, &data.train, &mut rng)?;
    Ok(fit_with_rng(model, &data.train, &data.test, &spec, &train, &mut rng)?)
}

fn single_config(run: &crate::config::RunArgs, value: f64, data_seed: Option<u64>, every: Option<usize>) -> CliResult<SweepConfig> {
    let mut cfg = run.sweep_config()?;
    cfg.grid = vec![value];
    if let Some(s) = data_seed {
        cfg.seeds = vec![s];
    }
    cfg.seeds.truncate(1);
    cfg.train.diagnostics_every = every.unwrap_or((cfg.train.epochs / 20).max(1));
    Ok(cfg)
}

fn config_value(cfg: &SweepConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serialises")
}

pub fn train(a: TrainArgs) -> CliResult<Vec<PathBuf>> {
    let cfg = single_config(&a.run, a.value, a.data_seed, a.every)?;
    let report = train_cell(&cfg)?;
    eprintln!("final test error {:.4}", report.final_test_error());
    let mut out = OutputDir::create(&a.out)?;
    out.write("model.json", &(report.model.to_json()? + "\n"))?;
    out.write("history.csv", &history_csv(&report))?;
    out.write("diagnostics.csv", &diagnostics_csv(&report))?;
    out.finish("train", &config_value(&cfg))
}

pub fn sweep(a: SweepArgs) -> CliResult<Vec<PathBuf>> {
    let mut cfg = a.run.sweep_config()?;
    if let Some(g) = a.grid {
        cfg.grid = g;
    } else if a.lo.is_some() || a.hi.is_some() || a.points.is_some() {
        let (lo, hi) = cfg.method.default_range();
        cfg.grid = plan_grid(cfg.method, a.lo.unwrap_or(lo), a.hi.unwrap_or(hi), a.points.unwrap_or(cfg.grid.len()))?;
    }
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    let result = run_sweep(&cfg, a.jobs)?;
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column of raw.csv", result.cells.len());
    }
    let manifest = aggregate_and_write(&result, &a.out)?;
    let mut paths: Vec<PathBuf> = manifest.files.iter().map(|f| a.out.join(&f.path)).collect();
    paths.push(a.out.join(labelaug::sweep::MANIFEST_FILE));
    Ok(paths)
}

pub fn verify(a: VerifyArgs) -> CliResult<Vec<PathBuf>> {
    let suites: Vec<&str> = if a.suite == "all" { verify::SUITES.to_vec() } else { vec![a.suite.as_str()] };
    let mut reports = Vec::new();
    for s in &suites {
        let r = verify::run_suite(s, a.cases, a.seed)?;
        eprintln!("{}: {}/{} passed", r.suite, r.passed, r.cases);
        for f in &r.failures {
            eprintln!("  {f}");
        }
        reports.push(r);
    }
    let mut out = OutputDir::create(&a.out)?;
    for r in &reports {
        out.write(&format!("{}.json", r.suite), &(serde_json::to_string_pretty(r).expect("report serialises") + "\n"))?;
    }
    let paths = out.finish("verify", &json!({"suites": suites, "cases": a.cases, "seed": a.seed}))?;
    let failing: Vec<String> = reports.iter().filter(|r| r.passed < r.cases).map(|r| format!("{} ({}/{})", r.suite, r.passed, r.cases)).collect();
    if failing.is_empty() {
        Ok(paths)
    } else {
        Err(CliError::Verify(failing.join(", ")))
    }
}

pub fn boundary(a: BoundaryArgs) -> CliResult<Vec<PathBuf>> {
    let region = Region {
        x_min: a.region[0],
        x_max: a.region[1],
        y_min: a.region[2],
        y_max: a.region[3],
    };
    let (model, config) = match &a.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            (Model::from_json(&text)?, json!({"model": path, "region": region, "resolution": a.resolution}))
        }
        None => {
            let value = a.value.ok_or_else(|| CliError::Config("--value is required when no --model is given".into()))?;
            let mut run = a.run.clone();
            run.recipe = Some(run.recipe.unwrap_or_else(|| Recipe::Boundary2d.name().to_string()));
            let cfg = single_config(&run, value, a.data_seed, None)?;
            let report = train_cell(&cfg)?;
            (report.model, json!({"train": config_value(&cfg), "region": region, "resolution": a.resolution}))
        }
    };
    let grid = boundary_grid(&model, region, a.resolution)?;
    if let Some(angle) = grid.angle_degrees {
        eprintln!("boundary normal angle {angle:.3} degrees from the x1 axis");
    }
    let mut out = OutputDir::create(&a.out)?;
    let csv_path = a.out.join("boundary.csv");
    grid.write_csv(&csv_path)?;
    let csv_text = std::fs::read_to_string(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    out.write("boundary.csv", &csv_text)?;
    if a.model.is_none() {
        out.write("model.json", &(model.to_json()? + "\n"))?;
    }
    out.finish("boundary", &config)
}

pub fn plot(a: PlotArgs) -> CliResult<Vec<PathBuf>> {
    let svg = match a.kind {
        PlotKind::SweepCurve => plot::sweep_curve(&a.csv, a.metric.as_deref().unwrap_or("test_error"))?,
        PlotKind::VarianceTimeseries => plot::variance_timeseries(&a.csv, a.metric.as_deref().unwrap_or("output_variance"))?,
        PlotKind::BoundaryHeatmap => {
            if a.csv.len() != 1 {
                return Err(CliError::Config("boundary_heatmap takes exactly one --csv".into()));
            }
            plot::boundary_heatmap(&a.csv[0])?
        }
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(&a.out, svg).map_err(|e| CliError::io(&a.out, e))?;
    Ok(vec![a.out])
}
