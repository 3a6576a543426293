//! Command implementations behind the `rigid-witness` binary.
//!
//! Every subcommand is a plain function over parsed arguments so it can be
//! driven from tests without spawning a process.

mod algo;
mod bench;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rigid_witness::data::{generate_instance, load_cloud, save_cloud, CloudFormat, InstanceSpec, Source};
use rigid_witness::report::{RunReport, TruthRecord};
use rigid_witness::CostSpec;

pub use algo::{permutation_recovery, run, Algo, Problem, RunOptions, Truth};
pub use bench::{cmd_benchmark, parse_seeds, AggregateRow, BenchmarkArgs, Seeds};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rigid_witness::Error),
}

impl CliError {
    /// 2 for bad usage, 3 for I/O, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        use rigid_witness::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(
                E::InvalidArgument(_) | E::Unsupported(_) | E::SizeMismatch { .. } | E::DimensionMismatch { .. },
            ) => 2,
            CliError::Core(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rigid-witness", version, about = "Rigid point-cloud alignment and registration")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark instance: P.csv, Q.csv and truth.json.
    Generate(GenerateArgs),
    /// Align P onto Q under known correspondence.
    Align(AlignArgs),
    /// Register P onto Q with unknown correspondence.
    Register(RegisterArgs),
    /// Seeded sweep over sizes, noise levels, algorithms and cost functions.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["synthetic", "model"])))]
pub struct GenerateArgs {
    /// Sample Q uniformly from the cube [-0.5, 0.5]^d.
    #[arg(long)]
    pub synthetic: bool,
    /// Sample Q from the vertices of a CSV or ASCII PLY model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dimension (default 3, or the model's dimension).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma2: f64,
    #[arg(long)]
    pub shuffle: bool,
    /// Fraction of points receiving outlier noise.
    #[arg(long, default_value_t = 0.0)]
    pub outliers: f64,
    #[arg(long, default_value_t = 1.0)]
    pub outlier_sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub translation_bound: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Where P and Q come from.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Directory written by `generate`; truth.json is used when present.
    #[arg(long, conflicts_with_all = ["p", "q"])]
    pub instance: Option<PathBuf>,
    #[arg(long, requires = "q")]
    pub p: Option<PathBuf>,
    #[arg(long, requires = "p")]
    pub q: Option<PathBuf>,
    /// Ground-truth record for --p/--q input.
    #[arg(long, conflicts_with = "instance")]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// exhaustive | sampled:BETA | prob:R | kabsch
    #[arg(long, default_value = "exhaustive")]
    pub algo: Algo,
    #[arg(long, default_value = "z=2,loss=power:2,agg=sum")]
    pub cost: CostSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RegisterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// icp | approx-match[:BETA] | p-icp-refined[:BETA]
    #[arg(long, default_value = "icp")]
    pub algo: Algo,
    #[arg(long, default_value = "z=2,loss=power:2,agg=sum")]
    pub cost: CostSpec,
    /// Restrict matchings to permutations.
    #[arg(long)]
    pub bijective: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(args) => {
            let dir = args.out_dir.clone();
            cmd_generate(&args)?;
            println!("wrote {}", dir.display());
        }
        Command::Align(args) => emit(&cmd_align(&args)?, args.out.as_deref())?,
        Command::Register(args) => emit(&cmd_register(&args)?, args.out.as_deref())?,
        Command::Benchmark(args) => {
            let rows = cmd_benchmark(&args)?;
            println!("wrote {} aggregate rows to {}", rows.len(), args.out_dir.join("aggregate.csv").display());
        }
    }
    Ok(())
}

fn emit(report: &RunReport, out: Option<&Path>) -> CliResult<()> {
    let text = match out {
        Some(path) => {
            report.save_json(path)?;
            format!("cost {} written to {}", report.cost, path.display())
        }
        None => report_json(report)?,
    };
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Core(rigid_witness::Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        })),
        _ => Ok(()),
    }
}

fn report_json(report: &RunReport) -> CliResult<String> {
    serde_json::to_string_pretty(report).map_err(|e| CliError::Core(e.into()))
}

/// Builds the instance description shared by `generate` and `benchmark`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn instance_spec(
    model: Option<&Path>,
    d: Option<usize>,
    n: usize,
    sigma2: f64,
    shuffle: bool,
    outliers: f64,
    outlier_sigma2: f64,
    translation_bound: f64,
    seed: u64,
) -> CliResult<InstanceSpec> {
    let (source, d) = match model {
        Some(path) => {
            let d = match d {
                Some(d) => d,
                None => load_cloud(path, CloudFormat::from_path(path))?.dim(),
            };
            (Source::File(path.to_path_buf()), d)
        }
        None => (Source::UniformCube, d.unwrap_or(3)),
    };
    let spec = InstanceSpec {
        source,
        n,
        d,
        sigma2,
        translation_bound,
        shuffle,
        outlier_fraction: outliers,
        outlier_sigma2,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<InstanceSpec> {
    let spec = instance_spec(
        args.model.as_deref(),
        args.d,
        args.n,
        args.sigma2,
        args.shuffle,
        args.outliers,
        args.outlier_sigma2,
        args.translation_bound,
        args.seed,
    )?;
    let inst = generate_instance(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| rigid_witness::Error::Io {
        path: args.out_dir.clone(),
        source: e,
    })?;
    save_cloud(&inst.p, &args.out_dir.join("P.csv"), CloudFormat::Csv)?;
    save_cloud(&inst.q, &args.out_dir.join("Q.csv"), CloudFormat::Csv)?;
    TruthRecord::new(&spec, &inst).save_json(&args.out_dir.join("truth.json"))?;
    Ok(spec)
}

/// Loads P, Q and the optional ground truth.
pub fn load_problem(input: &InputArgs) -> CliResult<Problem> {
    let (p_path, q_path, truth_path) = match (&input.instance, &input.p, &input.q) {
        (Some(dir), _, _) => {
            let truth = dir.join("truth.json");
            (dir.join("P.csv"), dir.join("Q.csv"), truth.exists().then_some(truth))
        }
        (None, Some(p), Some(q)) => (p.clone(), q.clone(), input.truth.clone()),
        _ => return Err(CliError::Usage("give either --instance DIR or both --p and --q".into())),
    };
    let p = load_cloud(&p_path, CloudFormat::from_path(&p_path))?;
    let q = load_cloud(&q_path, CloudFormat::from_path(&q_path))?;
    let truth = truth_path
        .map(|path| TruthRecord::load_json(&path))
        .transpose()?
        .map(|t| Truth {
            instance: Some(t.instance),
            matching: t.true_matching,
            outliers: t.outlier_indices,
        });
    Ok(Problem { p, q, truth })
}

pub fn cmd_align(args: &AlignArgs) -> CliResult<RunReport> {
    if !args.algo.is_alignment() {
        return Err(CliError::Usage(format!(
            "{} is a registration algorithm; use the register subcommand",
            args.algo
        )));
    }
    let problem = load_problem(&args.input)?;
    run(&problem, args.algo, &args.cost, RunOptions { seed: args.seed, bijective: false })
}

pub fn cmd_register(args: &RegisterArgs) -> CliResult<RunReport> {
    if args.algo.is_alignment() {
        return Err(CliError::Usage(format!(
            "{} is an alignment algorithm; use the align subcommand",
            args.algo
        )));
    }
    let problem = load_problem(&args.input)?;
    run(
        &problem,
        args.algo,
        &args.cost,
        RunOptions {
            seed: args.seed,
            bijective: args.bijective,
        },
    )
}
