use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mttopt::bench::{run_bench, BenchOptions, Solver};
use mttopt::checks::{run_suite, CheckOptions, Suite};
use mttopt::ferro::{
    discretize, plan_csv, plan_report, solve_charge, summarize, summary_csv, summary_markdown, sweep, sweep_csv,
    Backend, FerroSpec,
};
use mttopt::gap::{format_gap, optimality_gap, Sense};
use mttopt::instances::{gen_jsp_set, gen_kp_set, load_set, save_set, InstanceSet};
use mttopt::jsp::DEFAULT_JSP_NODE_BUDGET;
use mttopt::mtt::{
    init_model, jsp_demos, kp_demos, load_checkpoint, save_checkpoint, train_imitation, MttConfig, MttModel,
    TrainOptions,
};

/// Environment variable naming the default model checkpoint.
const CHECKPOINT_ENV: &str = "MTTOPT_CHECKPOINT";

#[derive(Parser)]
#[command(name = "mttopt", version, about = "Knapsack and job-shop solvers, benchmarks and furnace charging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance set.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Compare a candidate solver with an exact oracle over an instance set.
    Bench(BenchArgs),
    /// Plan a furnace charge, or sweep inventory sizes and seeds.
    Ferro(FerroArgs),
    /// Run a self-check suite.
    Check(CheckArgs),
    /// Train a policy by imitating exact solutions and save a checkpoint.
    Train(TrainArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Knapsack instances with weights and values drawn from 1..=scale
    Kp {
        /// Items per instance
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        capacity: u64,
        #[arg(long, default_value_t = 1000)]
        scale: u64,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Job-shop instances; each job visits every machine once, durations 1..=99
    Jsp {
        #[arg(long)]
        jobs: usize,
        #[arg(long)]
        machines: usize,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Instance set written by `gen`.
    instances: PathBuf,
    #[arg(long, default_value = "dp")]
    oracle: String,
    #[arg(long, default_value = "greedy")]
    candidate: String,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Add wall-time columns, which differ from run to run.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = DEFAULT_JSP_NODE_BUDGET)]
    jsp_node_budget: u64,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Args)]
struct ModelArg {
    /// Model checkpoint for the mtt solver.
    #[arg(long, env = CHECKPOINT_ENV)]
    checkpoint: Option<PathBuf>,
}

impl ModelArg {
    fn load_if(&self, needed: bool) -> anyhow::Result<Option<MttModel>> {
        match (&self.checkpoint, needed) {
            (Some(path), true) => Ok(Some(
                load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?,
            )),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Dp,
    Bb,
    Mtt,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Dp => Backend::Dp,
            BackendArg::Bb => Backend::Bb,
            BackendArg::Mtt => Backend::Mtt,
        }
    }
}

#[derive(Args)]
struct FerroArgs {
    /// Spec JSON; the built-in 14-material spec when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 90)]
    n_items: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dp")]
    backend: BackendArg,
    /// Sweep sizes 50, 60, ..., 100 over `--seeds` seeds starting at `--seed`.
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    /// Plan CSV (or per-scenario CSV with `--sweep`); stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-size summary CSV for `--sweep`.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write the built-in spec as JSON and exit.
    #[arg(long)]
    write_spec: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Gradients,
    Oracles,
    Masks,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 15)]
    kp_n: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Knapsack,
    JobShop,
    Unified,
}

#[derive(Args)]
struct TrainArgs {
    /// Training instance set written by `gen`.
    instances: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Defaults to the architecture matching the instance kind.
    #[arg(long, value_enum)]
    arch: Option<ArchArg>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    step_size: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Exit code for argument errors.
const EXIT_USAGE: u8 = 2;
/// Exit code for furnace-charging failures.
const EXIT_FERRO: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let is_ferro = matches!(cli.command, Command::Ferro(_));
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<mttopt::Error>(), Some(mttopt::Error::InvalidArgument(_))));
            ExitCode::from(if is_ferro {
                EXIT_FERRO
            } else if invalid {
                EXIT_USAGE
            } else {
                1
            })
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Gen(g) => gen(g),
        Command::Bench(b) => bench(b),
        Command::Ferro(f) => ferro(f),
        Command::Check(c) => check(c),
        Command::Train(t) => train(t),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn write_or_print(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(cmd: GenCommand) -> anyhow::Result<()> {
    let (set, out) = match cmd {
        GenCommand::Kp { n, count, capacity, scale, seed, out } => (gen_kp_set(n, count, capacity, scale, seed)?, out),
        GenCommand::Jsp { jobs, machines, count, seed, out } => (gen_jsp_set(jobs, machines, count, seed)?, out),
    };
    save_set(&set, &out)?;
    eprintln!("wrote {} {} instances to {}", set.len(), set.kind().as_str(), out.display());
    Ok(())
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let set = load_set(&args.instances)?;
    let oracle: Solver = args.oracle.parse()?;
    let candidate: Solver = args.candidate.parse()?;
    let model = args.model.load_if(candidate == Solver::Mtt)?;
    let opts = BenchOptions {
        model: model.as_ref(),
        jsp_node_budget: args.jsp_node_budget,
    };
    let result = run_bench(&set, oracle, candidate, &opts)?;
    if result.aggregate.excluded > 0 {
        eprintln!(
            "warning: {} of {} instances have an uncertified or zero oracle objective and are excluded from the mean",
            result.aggregate.excluded,
            result.rows.len()
        );
    }
    write_or_print(args.csv.as_deref(), &result.to_csv(args.timing))?;
    if let Some(md) = &args.markdown {
        write_or_print(Some(md), &result.to_markdown(args.timing))?;
    }
    Ok(())
}

const SWEEP_SIZES: [usize; 6] = [50, 60, 70, 80, 90, 100];

fn ferro(args: FerroArgs) -> anyhow::Result<()> {
    if let Some(path) = &args.write_spec {
        return write_or_print(Some(path), &FerroSpec::reconstructed().to_json());
    }
    let spec = match &args.spec {
        Some(p) => FerroSpec::load(p).with_context(|| format!("spec {}", p.display()))?,
        None => FerroSpec::reconstructed(),
    };
    let backend = Backend::from(args.backend);
    let model = args.model.load_if(backend == Backend::Mtt)?;
    if args.sweep {
        let rows = sweep(&spec, &SWEEP_SIZES, args.seed..args.seed + args.seeds, backend, model.as_ref())?;
        write_or_print(args.csv.as_deref(), &sweep_csv(&spec, &rows)?)?;
        let summary = summarize(&spec, &rows)?;
        match &args.summary {
            Some(p) => write_or_print(Some(p), &summary_csv(&summary))?,
            None => eprint!("{}", summary_markdown(&summary, backend)),
        }
        return Ok(());
    }
    let batches = discretize(&spec, args.n_items, args.seed)?;
    let plan = solve_charge(&spec, &batches, backend, model.as_ref())?;
    let oracle = solve_charge(&spec, &batches, Backend::Dp, None)?;
    write_or_print(args.csv.as_deref(), &plan_csv(&spec, &plan))?;
    eprint!("{}", plan_report(&spec, &plan));
    if oracle.savings_cents == 0 {
        bail!("the inventory offers no savings");
    }
    let gap = optimality_gap(oracle.savings_cents as i64, plan.savings_cents as i64, Sense::Maximize)?;
    eprintln!(
        "gap vs dp: n={} seed={} dp={:.2} {}={:.2} gap={}",
        args.n_items,
        args.seed,
        oracle.savings_cents as f64 / 100.0,
        backend.as_str(),
        plan.savings_cents as f64 / 100.0,
        format_gap(gap.gap, 4)
    );
    Ok(())
}

fn check(args: CheckArgs) -> anyhow::Result<()> {
    let suite = match args.suite {
        SuiteArg::Gradients => Suite::Gradients,
        SuiteArg::Oracles => Suite::Oracles,
        SuiteArg::Masks => Suite::Masks,
    };
    let opts = CheckOptions {
        kp_n: args.kp_n,
        trials: args.trials,
        episodes: args.episodes,
        seed: args.seed,
    };
    let lines = run_suite(suite, &opts)?;
    for l in &lines {
        println!("{l}");
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    if failed > 0 {
        bail!("{failed} of {} checks failed", lines.len());
    }
    Ok(())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let set = load_set(&args.instances)?;
    let arch = args.arch.unwrap_or(match set {
        InstanceSet::Kp { .. } => ArchArg::Knapsack,
        InstanceSet::Jsp { .. } => ArchArg::JobShop,
    });
    let config = match arch {
        ArchArg::Knapsack => MttConfig::knapsack(args.seed),
        ArchArg::JobShop => MttConfig::job_shop(args.seed),
        ArchArg::Unified => MttConfig::unified(args.seed),
    };
    let demos = match &set {
        InstanceSet::Kp { instances, .. } => kp_demos(instances)?,
        InstanceSet::Jsp { instances, .. } => jsp_demos(instances)?,
    };
    let mut model = init_model(config)?;
    let opts = TrainOptions {
        epochs: args.epochs,
        step_size: args.step_size,
        batch_size: args.batch_size,
        seed: args.seed,
        ..TrainOptions::default()
    };
    let report = train_imitation(&mut model, &demos, &opts)?;
    save_checkpoint(&model, &args.out)?;
    println!("epoch,loss");
    for (e, l) in report.loss_curve.iter().enumerate() {
        println!("{e},{l:.6}");
    }
    eprintln!("saved {} parameters to {}", model.param_count(), args.out.display());
    Ok(())
}
