mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "nlb",
    version,
    about = "Forward-sampled temporal graph learning"
)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file of default flag values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a link CSV into a binary cache plus id map.
    Ingest(IngestArgs),
    /// Write a seeded synthetic link stream as CSV.
    GenSynthetic(GenArgs),
    /// Monte-Carlo retention curve against the closed form.
    VerifySampling(VerifyArgs),
    /// Forward-table update cost vs backward-sampling query cost.
    BenchUpdate(BenchArgs),
    /// Self-supervised training, then evaluation.
    Train(TrainArgs),
    /// Evaluate a saved checkpoint.
    Eval(EvalArgs),
    /// Train and evaluate once per value of alpha or s.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Scheme {
    Edge,
    Node,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Task {
    Link,
    Node,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Poisson,
    RecencyTask,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Axis {
    Alpha,
    S,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Multiplier applied to timestamps before truncation to integers.
    #[arg(long)]
    scale: Option<f64>,
    /// Sources and destinations are separate id spaces.
    #[arg(long)]
    bipartite: bool,
    #[arg(long)]
    cache_out: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    nodes: Option<usize>,
    /// Events per time unit.
    #[arg(long)]
    lambda: Option<f64>,
    /// Time units to simulate.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    /// Edge scheme: total arrival intensity. Node scheme: intensity of
    /// every neighbor.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Comma-separated probe offsets.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Node scheme: neighbors competing with the probed one.
    #[arg(long)]
    competitors: Option<usize>,
    /// Simulated time per trial (default: twice the largest delta).
    #[arg(long)]
    horizon: Option<f64>,
    /// Exit with status 2 if any bin misses theory by more than this.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated stream lengths.
    #[arg(long, value_delimiter = ',')]
    lengths: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output; the table is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags shared by train, eval and sweep.
#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Link stream: a `.csv` file or a binary cache from `ingest`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    scheme: Option<Scheme>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Status, time and output width.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of time-encoding frequencies.
    #[arg(long)]
    d_time: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Ranking negatives per positive for MRR.
    #[arg(long)]
    eval_negatives: Option<usize>,
    /// Inductive node-masking probability.
    #[arg(long)]
    mask_prob: Option<f64>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    #[arg(long)]
    inductive: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Model checkpoint; the train/val boundary state goes to
    /// `<path>.boundary`.
    #[arg(long)]
    ckpt_out: PathBuf,
    /// Report CSV (default: `<ckpt-out>.report.csv`).
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated values of the swept knob.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
