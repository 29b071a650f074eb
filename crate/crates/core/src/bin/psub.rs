use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use principal_subspace::harness::{run_experiment, ExperimentSpec};

#[derive(Parser)]
#[command(name = "psub", version, about = "Teacher-student experiments on principal subspace recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment spec (TOML, or JSON with a .json extension). Defaults to the built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// First seed; the spec's seed count is kept.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: the spec's output_dir, else out/<name>].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent runs (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// First-layer SGD with weight decay.
    Train,
    /// Gradient descent on Monte-Carlo population gradients.
    Pgd,
    /// Neuron alignment on a 2-D tanh single-index teacher.
    Fig1,
    /// The same run without weight decay, paired with the decayed one.
    Nodecay,
    /// Log-log rate of the perpendicular metric over a grid of T or d.
    Sweep,
    /// Two-phase single-index learner.
    Learn,
    /// Risk change under rank-k truncation of the first layer.
    Compress,
    /// Sampled lower bound on the generalization gap over a second-layer ball.
    Gap,
    /// Oracle checks with a pass/fail table.
    Verify,
}

impl Command {
    fn label(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Pgd => "pgd",
            Command::Fig1 => "fig1",
            Command::Nodecay => "nodecay",
            Command::Sweep => "sweep",
            Command::Learn => "learn",
            Command::Compress => "compress",
            Command::Gap => "gap",
            Command::Verify => "verify",
        }
    }
}

fn run(cli: &Cli) -> principal_subspace::Result<bool> {
    let label = cli.command.label();
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::load(path)?,
        None => ExperimentSpec::preset(label)?,
    };
    if spec.kind.label() != label {
        return Err(principal_subspace::Error::Config(format!(
            "`{label}` needs a spec of that kind, the config has kind {}",
            spec.kind.label()
        )));
    }
    if let Some(seed) = cli.seed {
        spec.reseed(seed);
    }
    let out = cli
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&spec.name));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| principal_subspace::Error::Config(format!("thread pool: {e}")))?;
    let result = pool.install(|| run_experiment(&spec))?;
    result.write_artifacts(&spec, &out)?;

    for a in &result.assertions {
        println!("[{}] {}", if a.passed { "pass" } else { "FAIL" }, a.detail);
    }
    for (k, v) in &result.metrics {
        println!("{k} = {v}");
    }
    println!("artifacts in {}", out.display());
    eprintln!("wall clock {:.2}s", result.wall_clock_secs);
    Ok(result.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
