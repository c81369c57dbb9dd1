mod config;
mod error;
mod output;
mod plot;
mod run;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunArgs;
use error::CliResult;

/// Label smoothing, Mixup and weight decay experiments on low-variance features.
#[derive(Debug, Parser)]
#[command(name = "labelaug", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or load datasets and write them as CSV.
    #[command(subcommand)]
    Data(DataCommand),
    /// Train one model and write it with its training history.
    Train(TrainArgs),
    /// Run a hyperparameter grid over several seeds.
    Sweep(SweepArgs),
    /// Run randomised checks of the analytic identities and bounds.
    Verify(VerifyArgs),
    /// Export a 2-D model's decision surface on a lattice.
    Boundary(BoundaryArgs),
    /// Render a CSV artifact as an SVG figure.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
enum DataCommand {
    /// Low/high-variance binary data: constant low dims, uniform high dims.
    Synthetic(SyntheticArgs),
    /// Two-dimensional variant with one high- and one low-variance dim.
    Boundary2d(Boundary2dArgs),
    /// Read MNIST IDX files, optionally with class-colored backgrounds.
    LoadMnist(MnistArgs),
    /// Read CIFAR-10 binary batches, optionally restricted to two classes.
    LoadCifar(CifarArgs),
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Magnitude of the constant low-variance coordinate.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    high_lo: f64,
    #[arg(long, default_value_t = 100.0)]
    high_hi: f64,
    /// Width of uniform noise added to the low-variance coordinate.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Boundary2dArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MnistArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Paint each background with its class color.
    #[arg(long)]
    colorize: bool,
    /// Use a shuffled class-to-color assignment (test-time colors).
    #[arg(long, requires = "colorize")]
    permute: bool,
    #[arg(long, default_value_t = 16)]
    max_intensity: u8,
    /// Seed of the palette and its permutation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CifarArgs {
    #[arg(long, required = true, num_args = 1..)]
    files: Vec<PathBuf>,
    /// Negative and positive class, e.g. `0,1`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    classes: Option<Vec<u8>>,
    /// Unused; accepted for a uniform interface.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Hyperparameter value of the chosen method.
    #[arg(long)]
    value: f64,
    /// Seed of the training data.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Epoch stride of the diagnostic samples.
    #[arg(long)]
    every: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Explicit grid, e.g. `0,0.1,0.2`; overrides --lo/--hi/--points.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Data seeds, e.g. `11,22,33`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads; 1 runs on the calling thread.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// jensen-gap, degeneracy, gradients, certificates, low-variance or all.
    #[arg(long, default_value = "all")]
    suite: String,
    /// Number of random cases; each suite has its own default.
    #[arg(long)]
    cases: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reports are written here and nowhere else.
    #[arg(long, default_value = "verify-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    /// Saved model; when absent a boundary2d model is trained first.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    /// Hyperparameter value when training.
    #[arg(long)]
    value: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    /// x_min,x_max,y_min,y_max
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [-1.0, 1.0, -1.0, 1.0], allow_negative_numbers = true)]
    region: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PlotKind {
    SweepCurve,
    BoundaryHeatmap,
    VarianceTimeseries,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Input CSV; several for overlaid series (sweep_curve) or runs to
    /// average (variance_timeseries).
    #[arg(long, required = true, num_args = 1..)]
    csv: Vec<PathBuf>,
    /// Column to plot: aggregate metric or diagnostics column.
    #[arg(long)]
    metric: Option<String>,
    /// Unused; plots are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn dispatch(command: Command) -> CliResult<Vec<PathBuf>> {
    match command {
        Command::Data(d) => run::data(d),
        Command::Train(t) => run::train(t),
        Command::Sweep(s) => run::sweep(s),
        Command::Verify(v) => run::verify(v),
        Command::Boundary(b) => run::boundary(b),
        Command::Plot(p) => run::plot(p),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
