//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints exactly one PASS or FAIL line; the process fails if
//! any criterion does. Pass substrings as arguments to run a subset.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use labelaug::datagen::{
    encode_cifar10_binary, encode_idx_images, encode_idx_labels, load_mnist_idx, parse_cifar10_binary, parse_idx_images, parse_idx_labels,
    read_dataset_csv, sample_lowvar_highvar, synthetic_image_standin, write_dataset_csv, Dataset, ImageDataset, StandinConfig,
    SyntheticConfig, CIFAR_RECORD_BYTES,
};
use labelaug::diagnostics::ls_lower_bound_certificate;
use labelaug::losses::FiniteDistribution;
use labelaug::rng::seeded;
use labelaug::sweep::{raw_csv, run_sweep, CifarFiles, Method, MnistFiles, Recipe, SweepConfig, SweepResult, DEFAULT_SEEDS};
use ndarray::Array2;
use rand::Rng;

// Pinned tolerances and thresholds.
const LS_MIX_HIGH_NORM_MAX: f64 = 0.05;
const WD_OVER_LS_MIX_HIGH_NORM: f64 = 10.0;
const BOUNDARY_RATIO_FACTOR: f64 = 5.0;
const SPURIOUS_RATIO_FACTOR: f64 = 10.0;
const COLORED_ERROR_FACTOR: f64 = 3.0;
const NOISE_MONOTONE_TOL: f64 = 1e-9;
const OPTIMUM_SLACK_TOL: f64 = 1e-6;

struct Outcome {
    ok: bool,
    detail: String,
}

impl Outcome {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Outcome { ok, detail: detail.into() }
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn means(r: &SweepResult, metric: &str) -> Vec<f64> {
    r.means(metric).unwrap().into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()
}

fn sweep(cfg: &SweepConfig) -> SweepResult {
    let r = run_sweep(cfg, 1).expect("sweep runs");
    for c in &r.cells {
        if let Some(e) = &c.error {
            eprintln!("  cell value {} seed {} failed: {e}", c.value, c.seed);
        }
    }
    r
}

fn verify_suite(suite: &str) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_labelaug"))
        .args(["verify", "--suite", suite, "--out"])
        .arg(tmp.path())
        .output()
        .expect("binary runs");
    let text = std::fs::read_to_string(tmp.path().join(format!("{suite}.json"))).unwrap_or_default();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap_or(serde_json::Value::Null);
    let (cases, passed) = (report["cases"].as_u64().unwrap_or(0), report["passed"].as_u64().unwrap_or(0));
    Outcome::new(o.status.success() && cases > 0 && cases == passed, format!("{suite}: {passed}/{cases} cases"))
}

fn gradients() -> Outcome {
    let o = verify_suite("gradients");
    Outcome::new(o.ok && o.detail.ends_with("200/200 cases"), o.detail)
}

fn degeneracy() -> Outcome {
    verify_suite("degeneracy")
}

fn jensen() -> Outcome {
    let o = verify_suite("jensen-gap");
    Outcome::new(o.ok && o.detail.ends_with("1000/1000 cases"), o.detail)
}

fn low_variance_share() -> Outcome {
    // 20 datasets x d in {2, 4, 10} x (three penalties + max-margin).
    let o = verify_suite("low-variance");
    Outcome::new(o.ok && o.detail.ends_with("240/240 cases"), o.detail)
}

fn def_c1_sweeps(high_range: (f64, f64)) -> Vec<SweepResult> {
    Method::ALL
        .into_iter()
        .map(|m| {
            let mut cfg = SweepConfig::for_recipe(Recipe::DefC1, m);
            cfg.data.synthetic.high_range = high_range;
            sweep(&cfg)
        })
        .collect()
}

/// `(ok, detail)` for the high-norm separation of one set of defC1 sweeps.
fn high_norm_separation(sweeps: &[SweepResult]) -> Outcome {
    let positive = |r: &SweepResult| -> Vec<f64> {
        r.config.grid.iter().zip(means(r, "norm_high")).filter(|(v, _)| **v > 0.0).map(|(_, n)| n).collect()
    };
    let wd = means(&sweeps[0], "norm_high");
    let ls = positive(&sweeps[1]);
    let mix = positive(&sweeps[2]);
    let largest = ls.iter().chain(&mix).cloned().fold(f64::NEG_INFINITY, f64::max);
    let wd_min = wd.iter().cloned().fold(f64::INFINITY, f64::min);
    let small = largest < LS_MIX_HIGH_NORM_MAX;
    let separated = wd_min > WD_OVER_LS_MIX_HIGH_NORM * largest;
    Outcome::new(
        small && separated,
        format!(
            "largest LS/Mixup |w_H| {largest:.4} (< {LS_MIX_HIGH_NORM_MAX}: {small}); smallest WD |w_H| {wd_min:.4} = {:.2}x (> {WD_OVER_LS_MIX_HIGH_NORM}x: {separated})",
            wd_min / largest
        ),
    )
}

fn shrinkage_trend(base_ls: &SweepResult) -> Outcome {
    let shrunk = def_c1_sweeps((1.0, 10.0));
    let range = high_norm_separation(&shrunk);
    let mut curves = vec![means(base_ls, "norm_high")];
    for width in [0.01, 0.1] {
        let mut cfg = SweepConfig::for_recipe(Recipe::DefC1, Method::LabelSmoothing);
        cfg.data.low_var_noise = width;
        curves.push(means(&sweep(&cfg), "norm_high"));
    }
    let grid = &base_ls.config.grid;
    let mut violations = Vec::new();
    for (j, &alpha) in grid.iter().enumerate().filter(|(_, a)| **a > 0.0) {
        let col: Vec<f64> = curves.iter().map(|c| c[j]).collect();
        if col.windows(2).any(|w| !(w[1] >= w[0] - NOISE_MONOTONE_TOL * w[0].abs().max(1.0))) {
            violations.push(format!("alpha {alpha:.3}: {}", fmt_list(&col)));
        }
    }
    let monotone = violations.is_empty();
    let mean_at = |c: &Vec<f64>| c.iter().zip(grid).filter(|(_, a)| **a > 0.0).map(|(v, _)| v).sum::<f64>() / (grid.len() - 1) as f64;
    Outcome::new(
        range.ok && monotone,
        format!(
            "H range [1,10]: {}; noise widths 0/0.01/0.1 average LS |w_H| {} (non-decreasing at every alpha: {monotone}{})",
            range.detail,
            fmt_list(&curves.iter().map(mean_at).collect::<Vec<_>>()),
            if monotone { String::new() } else { format!("; {}", violations.join("; ")) }
        ),
    )
}

fn smoothed_outputs(pi: &FiniteDistribution, alpha: f64) -> Array2<f64> {
    let k = pi.k;
    let classes = pi.class_indices();
    Array2::from_shape_fn((pi.m(), k), |(i, c)| alpha / k as f64 + if c == classes[i] { 1.0 - alpha } else { 0.0 })
}

fn certificates() -> Outcome {
    // Random and trained models come from the verify suite; the smoothed
    // targets are the label-smoothing optimum.
    let suite = verify_suite("certificates");
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = seeded(seed);
        let k = 2 + seed as usize % 4;
        let m = rng.random_range(k..=8);
        let points = Array2::from_shape_fn((m, 2), |_| rng.random_range(-2.0..2.0));
        let classes: Vec<usize> = (0..m).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect();
        let labels: Vec<i64> = classes.iter().map(|&c| if k == 2 { 2 * c as i64 - 1 } else { c as i64 }).collect();
        let pi = FiniteDistribution::new(points, labels, vec![1.0 / m as f64; m], k).unwrap();
        let alpha = rng.random_range(0.01..1.0);
        let cert = ls_lower_bound_certificate(smoothed_outputs(&pi, alpha).view(), &pi, alpha, k).unwrap();
        worst = worst.max(cert.slack.abs());
    }
    let optimum = worst <= OPTIMUM_SLACK_TOL;
    Outcome::new(
        suite.ok && optimum,
        format!("{}; label-smoothing optimum |slack| <= {worst:.2e} over 50 distributions", suite.detail),
    )
}

fn boundary_separation() -> Outcome {
    // Canonical setting, then two scaled settings.
    let settings = [(5e-4, 0.1, 1.0), (5e-3, 0.25, 2.0), (5e-2, 0.5, 4.0)];
    let ratios = |m: Method, pick: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
        let mut cfg = SweepConfig::for_recipe(Recipe::Boundary2d, m);
        cfg.grid = settings.iter().map(pick).collect();
        cfg.seeds = DEFAULT_SEEDS[..3].to_vec();
        means(&sweep(&cfg), "norm_ratio")
    };
    let wd = ratios(Method::WeightDecay, |s| s.0);
    let ls = ratios(Method::LabelSmoothing, |s| s.1);
    let mix = ratios(Method::Mixup, |s| s.2);
    let canonical = ls[0] * BOUNDARY_RATIO_FACTOR <= wd[0] && mix[0] * BOUNDARY_RATIO_FACTOR <= wd[0];
    let gap = |other: &[f64]| -> Vec<f64> { wd.iter().zip(other).map(|(w, o)| w / o).collect() };
    let (gap_ls, gap_mix) = (gap(&ls), gap(&mix));
    let widening = |g: &[f64]| g.windows(2).all(|w| w[1] > w[0]);
    let widens = widening(&gap_ls) && widening(&gap_mix);
    Outcome::new(
        canonical && widens,
        format!(
            "|w1|/|w2| WD {} LS {} Mixup {}; WD/LS {} WD/Mixup {} (canonical <= 1/{BOUNDARY_RATIO_FACTOR}: {canonical}, widening: {widens})",
            fmt_list(&wd),
            fmt_list(&ls),
            fmt_list(&mix),
            fmt_list(&gap_ls),
            fmt_list(&gap_mix)
        ),
    )
}

const SPURIOUS_GRIDS: [(Method, [f64; 3]); 3] = [
    (Method::WeightDecay, [0.005, 0.05, 0.1]),
    (Method::LabelSmoothing, [0.1, 0.4, 0.75]),
    (Method::Mixup, [0.5, 2.0, 8.0]),
];

fn spurious_check(label: &str, tune: impl Fn(&mut SweepConfig)) -> Outcome {
    let mut results = Vec::new();
    for (m, grid) in SPURIOUS_GRIDS {
        let mut cfg = SweepConfig::for_recipe(Recipe::SpuriousBinary, m);
        cfg.grid = grid.to_vec();
        cfg.train.epochs = 50;
        tune(&mut cfg);
        let r = sweep(&cfg);
        results.push((means(&r, "norm_ratio"), means(&r, "test_error")));
    }
    let wd_ratio = results[0].0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let wd_err = results[0].1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let aug_ratio = results[1..].iter().flat_map(|r| r.0.iter().cloned()).fold(f64::INFINITY, f64::min);
    let aug_err = results[1..].iter().flat_map(|r| r.1.iter().cloned()).fold(f64::INFINITY, f64::min);
    let ratio_ok = aug_ratio > SPURIOUS_RATIO_FACTOR * wd_ratio;
    let err_ok = wd_err < aug_err;
    Outcome::new(
        ratio_ok && err_ok,
        format!(
            "{label}: ratio WD max {wd_ratio:.3e} vs LS/Mixup min {aug_ratio:.3e} (> {SPURIOUS_RATIO_FACTOR}x: {ratio_ok}); error WD max {wd_err:.4} vs LS/Mixup min {aug_err:.4} ({err_ok})"
        ),
    )
}

fn write_cifar_batch(dir: &Path, name: &str, cfg: &StandinConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, encode_cifar10_binary(&synthetic_image_standin(cfg).unwrap()).unwrap()).unwrap();
    path
}

fn spurious_dimension() -> Outcome {
    let standin = spurious_check("stand-in, n=10000, 2 seeds", |cfg| cfg.seeds = DEFAULT_SEEDS[..2].to_vec());
    // The file path reads batches written in the CIFAR-10 binary layout.
    let tmp = tempfile::tempdir().unwrap();
    let batch = StandinConfig { n_per_class: 2500, seed: 101, ..Default::default() };
    let files = CifarFiles {
        train: vec![
            write_cifar_batch(tmp.path(), "data_batch_1.bin", &batch),
            write_cifar_batch(tmp.path(), "data_batch_2.bin", &StandinConfig { seed: 102, ..batch.clone() }),
        ],
        test: vec![write_cifar_batch(tmp.path(), "test_batch.bin", &StandinConfig { n_per_class: 1000, seed: 103, ..batch.clone() })],
    };
    let binaries = spurious_check("CIFAR binary files, n=10000, 1 seed", |cfg| {
        cfg.seeds = vec![DEFAULT_SEEDS[0]];
        cfg.data.cifar = Some(files.clone());
    });
    Outcome::new(standin.ok && binaries.ok, format!("{}; {}", standin.detail, binaries.detail))
}

fn colored_multiclass() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    let files = MnistFiles::in_dir(&dir);
    if !files.train_images.exists() {
        return Outcome::new(false, format!("MNIST IDX files not found under {}", dir.display()));
    }
    let grids = [
        (Method::WeightDecay, vec![0.0005, 0.005, 0.05, 0.1, 0.2]),
        (Method::LabelSmoothing, vec![0.1, 0.25, 0.4, 0.55, 0.75]),
        (Method::Mixup, vec![1.0, 2.0, 4.0, 6.0, 8.0]),
    ];
    let mut errors = Vec::new();
    for (m, grid) in grids {
        let mut cfg = SweepConfig::for_recipe(Recipe::ColoredMulticlass, m);
        cfg.grid = grid;
        cfg.seeds = DEFAULT_SEEDS[..2].to_vec();
        cfg.train.epochs = 10;
        cfg.train.batch_size = 128;
        cfg.data.hidden = 512;
        cfg.data.mnist = Some(files.clone());
        errors.push(means(&sweep(&cfg), "test_error"));
    }
    let best_wd = errors[0].iter().cloned().fold(f64::INFINITY, f64::min);
    let worst_aug = errors[1..].iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let ok = worst_aug >= COLORED_ERROR_FACTOR * best_wd;
    Outcome::new(
        ok,
        format!(
            "test error WD {} LS {} Mixup {}; smallest LS/Mixup {worst_aug:.4} = {:.2}x best WD {best_wd:.4} (>= {COLORED_ERROR_FACTOR}x: {ok})",
            fmt_list(&errors[0]),
            fmt_list(&errors[1]),
            fmt_list(&errors[2]),
            worst_aug / best_wd
        ),
    )
}

fn every_truncation_rejected(bytes: &[u8], parse: impl Fn(&[u8]) -> bool) -> bool {
    (0..bytes.len()).all(|len| !parse(&bytes[..len]))
}

fn parsers() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |cond: bool, what: &str| {
        ok &= cond;
        if !cond {
            notes.push(what.to_string());
        }
    };

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-5k");
    match std::fs::read(dir.join("train-images-idx3-ubyte")) {
        Ok(bytes) => {
            let (n, rows, cols, _) = parse_idx_images(&bytes).unwrap();
            check((n, rows, cols) == (4000, 28, 28), "MNIST train header");
            let img = load_mnist_idx(dir.join("test-images-idx3-ubyte"), dir.join("test-labels-idx1-ubyte")).unwrap();
            check(img.n() == 1000 && img.k == 10, "MNIST test header");
        }
        Err(_) => check(false, "MNIST files missing"),
    }

    let mut rng = seeded(5);
    let pixels: Vec<u8> = (0..3 * 4 * 5).map(|_| rng.random()).collect();
    let labels: Vec<u8> = (0..3).map(|_| rng.random_range(0..10)).collect();
    let img_bytes = encode_idx_images(3, 4, 5, &pixels);
    check(parse_idx_images(&img_bytes).unwrap() == (3, 4, 5, pixels.clone()), "IDX image round trip");
    check(parse_idx_labels(&encode_idx_labels(&labels)).unwrap() == labels, "IDX label round trip");
    check(every_truncation_rejected(&img_bytes, |b| parse_idx_images(b).is_ok()), "IDX image truncations");
    check(every_truncation_rejected(&encode_idx_labels(&labels), |b| parse_idx_labels(b).is_ok()), "IDX label truncations");

    let cifar_pixels: Vec<u8> = (0..2 * 3072).map(|_| rng.random()).collect();
    let cifar = ImageDataset::new(cifar_pixels.clone(), vec![3, 9], 10, 32, 32, 3).unwrap();
    let cifar_bytes = encode_cifar10_binary(&cifar).unwrap();
    check(cifar_bytes.len() == 2 * CIFAR_RECORD_BYTES && cifar_bytes[0] == 3 && cifar_bytes[CIFAR_RECORD_BYTES] == 9, "CIFAR layout");
    check(parse_cifar10_binary(&cifar_bytes, "t").unwrap() == (vec![3, 9], cifar_pixels), "CIFAR round trip");
    check(
        (1..cifar_bytes.len()).filter(|l| l % CIFAR_RECORD_BYTES != 0).all(|l| parse_cifar10_binary(&cifar_bytes[..l], "t").is_err()),
        "CIFAR truncations",
    );

    let tmp = tempfile::tempdir().unwrap();
    let mut lossless = true;
    for seed in 0..20u64 {
        let mut rng = seeded(seed);
        let ds = if seed % 2 == 0 {
            sample_lowvar_highvar(&SyntheticConfig { n: 50, d: 6, seed, ..Default::default() }).unwrap()
        } else {
            let x = Array2::from_shape_fn((40, 3), |_| {
                let m: f64 = rng.random_range(-1.0..1.0);
                m * 10f64.powi(rng.random_range(-300..300))
            });
            let y: Vec<i64> = (0..40).map(|_| rng.random_range(0..4)).collect();
            Dataset::new(x, y, 4, vec![0], "random").unwrap()
        };
        let path = tmp.path().join(format!("{seed}.csv"));
        write_dataset_csv(&ds, &path).unwrap();
        let back = read_dataset_csv(&path, ds.low_var_dims.clone()).unwrap();
        lossless &= back.labels == ds.labels
            && back.k == ds.k
            && back.features.iter().zip(ds.features.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    check(lossless, "CSV round trip");
    Outcome::new(ok, if notes.is_empty() { "IDX, CIFAR and CSV round trips exact; all truncations rejected".to_string() } else { notes.join(", ") })
}

fn determinism() -> Outcome {
    let mut same = true;
    for m in Method::ALL {
        let mut cfg = SweepConfig::for_recipe(Recipe::DefC1, m);
        cfg.grid = cfg.grid.iter().step_by(4).cloned().collect();
        cfg.data.synthetic.n = 1000;
        cfg.train.epochs = 20;
        let one = run_sweep(&cfg, 1).unwrap();
        let eight = run_sweep(&cfg, 8).unwrap();
        same &= one.to_json().unwrap() == eight.to_json().unwrap() && raw_csv(&one) == raw_csv(&eight);
    }
    Outcome::new(same, format!("serialised results at 1 and 8 workers identical for all methods: {same}"))
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut failed = 0;
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !selected(name) {
            return;
        }
        let start = Instant::now();
        let o = f();
        println!("{} [{id:>2}] {name} ({:.1}s): {}", if o.ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64(), o.detail);
        if !o.ok {
            failed += 1;
        }
    };
    run(1, "gradient_correctness", &mut gradients);
    run(2, "degeneracy_identities", &mut degeneracy);
    run(3, "jensen_gap", &mut jensen);
    run(4, "high_variance_share", &mut low_variance_share);
    let mut base: Option<Vec<SweepResult>> = None;
    run(5, "def_c1_separation", &mut || {
        let sweeps = def_c1_sweeps((1.0, 100.0));
        let o = high_norm_separation(&sweeps);
        base = Some(sweeps);
        o
    });
    run(6, "variance_shrinkage_trend", &mut || {
        let ls = match &base {
            Some(s) => s[1].clone(),
            None => sweep(&SweepConfig::for_recipe(Recipe::DefC1, Method::LabelSmoothing)),
        };
        shrinkage_trend(&ls)
    });
    run(7, "lower_bound_certificates", &mut certificates);
    run(8, "boundary_separation", &mut boundary_separation);
    run(9, "spurious_dimension", &mut spurious_dimension);
    run(10, "colored_multiclass", &mut colored_multiclass);
    run(11, "parser_round_trips", &mut parsers);
    run(12, "sweep_determinism", &mut determinism);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
