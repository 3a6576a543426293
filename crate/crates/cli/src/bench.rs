//! Seeded benchmark sweeps: one JSON report per run plus an aggregate CSV.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use rigid_witness::data::generate_instance;
use rigid_witness::report::RunReport;
use rigid_witness::CostSpec;

use crate::algo::{run, Algo, Problem, RunOptions, Truth};
use crate::{instance_spec, CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated algorithms, e.g. `sampled:40,kabsch,icp,p-icp-refined:3000`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub algos: Vec<Algo>,
    /// Cost function; repeat the flag for several.
    #[arg(long = "cost", default_value = "z=2,loss=power:2,agg=sum")]
    pub costs: Vec<CostSpec>,
    /// Seeds: `A..B` (half-open), a comma list, or a single value.
    #[arg(long, alias = "seed", value_parser = parse_seeds)]
    pub seeds: Seeds,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub sigma2: Vec<f64>,
    /// Outlier fractions.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub outliers: Vec<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub shuffle: bool,
    #[arg(long, default_value_t = 1.0)]
    pub outlier_sigma2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub translation_bound: f64,
    /// Restrict registration matchings to permutations.
    #[arg(long)]
    pub bijective: bool,
    /// Receives `reports/*.json` and `aggregate.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Explicit benchmark seeds; there is deliberately no default.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| format!("bad seed {t:?}"));
    let seeds = if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect::<Vec<_>>()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list {s:?} is empty"));
    }
    Ok(Seeds(seeds))
}

/// One line of `aggregate.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub algo: String,
    pub cost_spec: String,
    pub n: usize,
    pub sigma2: f64,
    pub outlier_frac: f64,
    pub beta: Option<usize>,
    pub mean_cost: f64,
    /// Sample variance; 0 for a single run.
    pub var_cost: f64,
    /// Mean over the runs that have a ratio.
    pub mean_ratio: Option<f64>,
    pub mean_wall_s: f64,
    pub runs: usize,
}

const HEADER: [&str; 11] = [
    "algo",
    "cost_spec",
    "n",
    "sigma2",
    "outlier_frac",
    "beta",
    "mean_cost",
    "var_cost",
    "mean_ratio",
    "mean_wall_s",
    "runs",
];

impl AggregateRow {
    fn record(&self) -> [String; 11] {
        let opt = |v: Option<String>| v.unwrap_or_default();
        [
            self.algo.clone(),
            self.cost_spec.clone(),
            self.n.to_string(),
            self.sigma2.to_string(),
            self.outlier_frac.to_string(),
            opt(self.beta.map(|b| b.to_string())),
            self.mean_cost.to_string(),
            self.var_cost.to_string(),
            opt(self.mean_ratio.map(|r| r.to_string())),
            self.mean_wall_s.to_string(),
            self.runs.to_string(),
        ]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn aggregate(reports: &[RunReport], algo: Algo, spec: &CostSpec, n: usize, sigma2: f64, frac: f64) -> AggregateRow {
    let costs: Vec<f64> = reports.iter().map(|r| r.cost).collect();
    let m = mean(&costs);
    let var_cost = if costs.len() > 1 {
        costs.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (costs.len() - 1) as f64
    } else {
        0.0
    };
    let ratios: Vec<f64> = reports.iter().filter_map(|r| r.ratio).collect();
    let walls: Vec<f64> = reports.iter().map(|r| r.wall_time_seconds).collect();
    AggregateRow {
        algo: algo.to_string(),
        cost_spec: spec.to_string(),
        n,
        sigma2,
        outlier_frac: frac,
        beta: algo.beta(),
        mean_cost: m,
        var_cost,
        mean_ratio: (!ratios.is_empty()).then(|| mean(&ratios)),
        mean_wall_s: mean(&walls),
        runs: reports.len(),
    }
}

fn io_error(path: PathBuf, source: std::io::Error) -> CliError {
    CliError::Core(rigid_witness::Error::Io { path, source })
}

/// Runs every (n, σ², outlier fraction) cell for every seed, algorithm and
/// cost function. Each seed generates one instance shared by all algorithms
/// and seeds their randomness.
pub fn cmd_benchmark(args: &BenchmarkArgs) -> CliResult<Vec<AggregateRow>> {
    if args.seeds.0.is_empty() {
        return Err(CliError::Usage("benchmark needs a nonempty --seeds list".into()));
    }
    if args.bijective && !args.algos.iter().any(|a| matches!(a, Algo::ApproxMatch(_) | Algo::PIcpRefined(_))) {
        return Err(CliError::Usage("--bijective needs approx-match or p-icp-refined".into()));
    }
    let report_dir = args.out_dir.join("reports");
    fs::create_dir_all(&report_dir).map_err(|e| io_error(report_dir.clone(), e))?;
    let mut rows = Vec::new();
    for &n in &args.n {
        for (si, &sigma2) in args.sigma2.iter().enumerate() {
            for (oi, &frac) in args.outliers.iter().enumerate() {
                let cells = args.algos.len() * args.costs.len();
                let mut per_cell: Vec<Vec<RunReport>> = vec![Vec::new(); cells];
                for &seed in &args.seeds.0 {
                    let spec = instance_spec(
                        args.model.as_deref(),
                        args.d,
                        n,
                        sigma2,
                        args.shuffle,
                        frac,
                        args.outlier_sigma2,
                        args.translation_bound,
                        seed,
                    )?;
                    let inst = generate_instance(&spec)?;
                    let problem = Problem {
                        truth: Some(Truth {
                            instance: Some(spec),
                            matching: inst.true_matching.as_slice().to_vec(),
                            outliers: inst.outlier_indices,
                        }),
                        p: inst.p,
                        q: inst.q,
                    };
                    for (ai, &algo) in args.algos.iter().enumerate() {
                        let bijective = args.bijective && matches!(algo, Algo::ApproxMatch(_) | Algo::PIcpRefined(_));
                        for (ci, cost) in args.costs.iter().enumerate() {
                            let report = run(&problem, algo, cost, RunOptions { seed, bijective })?;
                            let name = format!("{}_c{ci}_n{n}_s{si}_o{oi}_seed{seed}.json", algo.slug());
                            report.save_json(&report_dir.join(name))?;
                            per_cell[ai * args.costs.len() + ci].push(report);
                        }
                    }
                }
                for (ai, &algo) in args.algos.iter().enumerate() {
                    for (ci, cost) in args.costs.iter().enumerate() {
                        let reports = &per_cell[ai * args.costs.len() + ci];
                        rows.push(aggregate(reports, algo, cost, n, sigma2, frac));
                    }
                }
            }
        }
    }
    let csv_path = args.out_dir.join("aggregate.csv");
    let write = || -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(&csv_path)?;
        w.write_record(HEADER)?;
        for row in &rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| {
        let source = match e.into_kind() {
            csv::ErrorKind::Io(io) => io,
            other => std::io::Error::other(format!("{other:?}")),
        };
        io_error(csv_path.clone(), source)
    })?;
    Ok(rows)
}
