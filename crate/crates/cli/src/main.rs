mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smoothtest_core::{ExperimentMode, SplitCalibration};

use crate::commands::{launch, GenRun, LbCheckRun, McRun, ObserveRun, TestRun};
use crate::config::{resolve, Overrides};
use crate::error::{code, CliError, Result};

/// Goodness-of-fit testing for smoothness classes in the Gaussian sequence model.
#[derive(Debug, Parser)]
#[command(name = "smoothtest", version)]
struct Cli {
    /// Worker threads for Monte Carlo work. Defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Master seed. Overrides any seed in a config file.
    #[arg(long, global = true, env = "SMOOTHTEST_SEED")]
    seed: Option<u64>,

    /// Where to write the run manifest. Defaults to `<first output>.manifest.json`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a coefficient tree from a signal spec.
    Gen(GenArgs),
    /// Draw a noisy observation of a tree.
    Observe(ObserveArgs),
    /// Run the test on a tree or observation. Exit 0 accepts, 3 rejects.
    Test(TestArgs),
    /// Run a Monte Carlo experiment.
    Mc(McArgs),
    /// Run a rate sweep (an `mc` experiment forced into sweep mode).
    Sweep(McArgs),
    /// Compare the chi-square routes of the lower-bound construction.
    LbCheck(LbArgs),
    /// Print norms and distances of a tree, optionally checking predicates.
    Check(CheckArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    NullWorstCase,
    NullRandom,
    RademacherAlt,
    SeparatedAlt,
}

impl Kind {
    fn tag(self) -> &'static str {
        match self {
            Kind::NullWorstCase => "null_worst_case",
            Kind::NullRandom => "null_random",
            Kind::RademacherAlt => "rademacher_alt",
            Kind::SeparatedAlt => "separated_alt",
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Signal spec JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    upsilon: Option<f64>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    fill: Option<f64>,
    #[arg(long)]
    l_max: Option<u32>,
    #[arg(long = "J0")]
    j0: Option<u32>,
    #[arg(long)]
    z0: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ObserveArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    n: f64,
    /// Write two independent halves, each at noise level 2/n.
    #[arg(long)]
    split: bool,
    /// Tree of per-coefficient standard deviations.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ParamFlags {
    /// Test parameter JSON; flags below override its fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "J0")]
    j0: Option<u32>,
    #[arg(long)]
    z0: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Calibration {
    Analytic,
    Empirical,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Tree, observation, or a JSON array of two split observations.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    params: ParamFlags,
    /// Threshold policy for split inputs.
    #[arg(long, value_enum)]
    calibration: Option<Calibration>,
    /// Null simulations for the empirical calibration.
    #[arg(long, default_value_t = 2000)]
    calibration_trials: usize,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McArgs {
    /// Experiment spec JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated sample sizes for sweeps.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<f64>>,
    #[arg(long)]
    trials_per_probe: Option<usize>,
    #[arg(long)]
    bisection_steps: Option<u32>,
    /// CSV output.
    #[arg(short, long)]
    out: PathBuf,
    /// Full result as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LbArgs {
    /// JSON with any of `upsilons`, `levels`, `trials`, `seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    upsilons: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<u32>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    tree: PathBuf,
    /// Also report the norm at this smoothness.
    #[arg(long)]
    t: Option<f64>,
    /// Require membership in the ball of this smoothness and radius `--B`.
    #[arg(long)]
    member_of: Option<f64>,
    /// Require distance at least `--rho` from the ball of this smoothness.
    #[arg(long)]
    separated_from: Option<f64>,
    #[arg(long = "B")]
    b: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long = "from")]
    from: PathBuf,
    /// Write outputs here instead of the recorded paths.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn gen(a: GenArgs, seed: Option<u64>, manifest: Option<PathBuf>) -> Result<i32> {
    let mut o = Overrides::default();
    o.set("kind", a.kind.map(Kind::tag))
        .set("t", a.t)
        .set("s", a.s)
        .set("B", a.b)
        .set("rho", a.rho)
        .set("upsilon", a.upsilon)
        .set("n", a.n)
        .set("fill", a.fill)
        .set("l_max", a.l_max)
        .set("J0", a.j0)
        .set("z0", a.z0)
        .set("seed", seed);
    let signal = resolve(a.config.as_deref(), &o, "signal spec")?;
    launch(GenRun { signal, out: a.out }, manifest)
}

fn test(a: TestArgs, seed: Option<u64>, manifest: Option<PathBuf>) -> Result<i32> {
    let p = a.params;
    let mut o = Overrides::default();
    o.set("n", p.n).set("t", p.t).set("s", p.s).set("B", p.b).set("alpha", p.alpha).set("J0", p.j0).set("z0", p.z0);
    let params = resolve(p.params.as_deref(), &o, "test parameters")?;
    let split_calibration = a.calibration.map(|c| match c {
        Calibration::Analytic => SplitCalibration::AnalyticDefault,
        Calibration::Empirical => SplitCalibration::Empirical { trials: a.calibration_trials, seed: seed.unwrap_or(0) },
    });
    let run = TestRun { input: a.input, params, split_calibration, report: a.report, csv: a.csv };
    launch(run, manifest)
}

fn mc(a: McArgs, force_sweep: bool, seed: Option<u64>, manifest: Option<PathBuf>) -> Result<i32> {
    let mut o = Overrides::default();
    o.set("trials", a.trials)
        .set("params.n", a.n)
        .set("params.alpha", a.alpha)
        .set("sweep.n_grid", a.n_grid)
        .set("sweep.trials_per_probe", a.trials_per_probe)
        .set("sweep.bisection_steps", a.bisection_steps)
        .set("master_seed", seed)
        .set("mode", force_sweep.then_some(ExperimentMode::Sweep));
    let experiment = resolve(a.config.as_deref(), &o, "experiment spec")?;
    launch(McRun { experiment, out: a.out, json: a.json }, manifest)
}

fn lb_check(a: LbArgs, seed: Option<u64>, manifest: Option<PathBuf>) -> Result<i32> {
    let mut o = Overrides::default();
    o.set("upsilons", a.upsilons)
        .set("levels", a.levels)
        .set("trials", a.trials)
        .set("seed", seed)
        .set("out", Some(&a.out));
    let run: LbCheckRun = resolve(a.config.as_deref(), &o, "lower-bound grid")?;
    launch(run, manifest)
}

fn dispatch(cli: Cli) -> Result<i32> {
    let (seed, manifest) = (cli.seed, cli.manifest);
    match cli.command {
        Command::Gen(a) => gen(a, seed, manifest),
        Command::Observe(a) => {
            let run = ObserveRun { tree: a.tree, n: a.n, split: a.split, profile: a.profile, seed: seed.unwrap_or(0), out: a.out };
            launch(run, manifest)
        }
        Command::Test(a) => test(a, seed, manifest),
        Command::Mc(a) => mc(a, false, seed, manifest),
        Command::Sweep(a) => mc(a, true, seed, manifest),
        Command::LbCheck(a) => lb_check(a, seed, manifest),
        Command::Check(a) => commands::check(&a.tree, a.t, a.member_of, a.separated_from, a.b, a.rho),
        Command::Replay(a) => commands::replay(&a.from, a.out_dir.as_deref()),
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.jobs {
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
            pool.install(|| dispatch(cli))
        }
        None => dispatch(cli),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
