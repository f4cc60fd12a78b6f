use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use tree_kernels::bench::{self, BenchConfig, HyperOverrides, Method, ResultRow, TargetKind};
use tree_kernels::model_io::{format_sig17, ModelDocument};
use tree_kernels::rng::{derive_seed, stream_rng};
use tree_kernels::simgen::{self, SimSetup};
use tree_kernels::tabular::{CsvTable, TabularDataset};
use tree_kernels::{ensemble_kernel, fit_gbt, fit_rf, Dataset, GbtParams, RfParams, Task};

#[derive(Parser)]
#[command(name = "treekernel", version, about = "Tree-ensemble kernels, kernel ridge regression and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Monte-Carlo Bayes error rate of a binary synthetic setup.
    BayesError(BayesErrorArgs),
    /// Fit a forest or booster on a CSV file and save it as JSON.
    Fit(FitArgs),
    /// Evaluate a fitted model's kernel matrix on CSV rows.
    Kernel(KernelArgs),
    /// Run the repeated-split comparison.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    setup: SimSetup,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value = "continuous")]
    target: TargetKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the noiseless response as an `f` column.
    #[arg(long)]
    with_f: bool,
    /// Monte-Carlo draws for the binarization median.
    #[arg(long, default_value_t = simgen::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
}

#[derive(Args)]
struct BayesErrorArgs {
    #[arg(long)]
    setup: SimSetup,
    #[arg(long, default_value_t = simgen::DEFAULT_MC_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature count for the draws; defaults to the setup's minimum.
    #[arg(long)]
    p: Option<usize>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelFamily {
    Rf,
    Gbt,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    model: ModelFamily,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target_col: String,
    #[arg(long)]
    task: Task,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sensitivity: bool,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Column points; defaults to `--data` (square Gram matrix).
    #[arg(long)]
    data2: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Simulated data from one or all generative setups.
    Sim(BenchSimArgs),
    /// A user-supplied CSV dataset.
    Real(BenchRealArgs),
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sensitivity: bool,
    /// 200 repetitions, 500 trees, 100 boosting rounds.
    #[arg(long = "paper-scale")]
    full_scale: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of rf,rf_kernel,gbt,gbt_kernel.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON path; defaults to the output path with `.summary.json`.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct BenchSimArgs {
    /// Setup name or `all`.
    #[arg(long)]
    setup: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    target: TargetKind,
    #[command(flatten)]
    scale: ScaleArgs,
}

#[derive(Args)]
struct BenchRealArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target_col: String,
    #[arg(long)]
    task: Task,
    #[command(flatten)]
    scale: ScaleArgs,
}

fn read_overrides(path: Option<&Path>) -> Result<HyperOverrides> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            HyperOverrides::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(HyperOverrides::default()),
    }
}

fn bench_config(scale: &ScaleArgs) -> Result<BenchConfig> {
    let mut config = if scale.full_scale { BenchConfig::full_scale() } else { BenchConfig::desk() };
    if let Some(r) = scale.reps {
        config.reps = r;
    }
    if let Some(m) = &scale.methods {
        config.methods = m.clone();
    }
    config.seed = scale.seed;
    config.sensitivity = scale.sensitivity;
    config.overrides = read_overrides(scale.config.as_deref())?;
    Ok(config)
}

fn summary_path(scale: &ScaleArgs) -> PathBuf {
    scale.summary.clone().unwrap_or_else(|| scale.out.with_extension("summary.json"))
}

fn write_results(scale: &ScaleArgs, rows: &[ResultRow]) -> Result<()> {
    fs::write(&scale.out, bench::rows_to_csv(rows)).with_context(|| format!("writing {}", scale.out.display()))?;
    let summary = bench::summarize(rows);
    let path = summary_path(scale);
    fs::write(&path, serde_json::to_string_pretty(&summary)?).with_context(|| format!("writing {}", path.display()))?;
    for s in &summary {
        println!("{:<14} {:<11} {:<9} mean {:<12} sd {}", s.setup, s.method, s.metric, s.mean, s.sd);
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut rng = stream_rng(args.seed, 0);
    let sample = match args.target {
        TargetKind::Continuous => simgen::gen_continuous(args.setup, args.n, args.p, &mut rng)?,
        TargetKind::Binary => {
            let median = simgen::estimate_median(args.setup, args.p, args.mc_samples, derive_seed(args.seed, 1))?;
            simgen::gen_binary(args.setup, args.n, args.p, &mut rng, median)?
        }
    };
    let y = sample.binary_target.as_ref().unwrap_or(&sample.continuous_target);
    let mut out = std::io::BufWriter::new(fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    let mut header: Vec<String> = (1..=args.p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if args.with_f {
        header.push("f".into());
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, row) in sample.features.outer_iter().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        cells.push(y[i].to_string());
        if args.with_f {
            cells.push(sample.f_values[i].to_string());
        }
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn bayes_error(args: &BayesErrorArgs) -> Result<()> {
    let p = args.p.unwrap_or(args.setup.min_p());
    let err = simgen::bayes_error(args.setup, p, args.samples, args.seed)?;
    println!("{err:.4}");
    Ok(())
}

fn fit(args: &FitArgs) -> Result<()> {
    let table = CsvTable::from_path(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let data = TabularDataset::from_table("data", &table, &args.target_col)?;
    let dataset = Dataset::new(data.features.clone(), data.target.clone(), args.task)?;
    let config = BenchConfig {
        num_trees: RfParams::DEFAULT_TREES,
        rounds: GbtParams::<f64>::DEFAULT_ROUNDS,
        sensitivity: args.sensitivity,
        overrides: read_overrides(args.config.as_deref())?,
        ..BenchConfig::desk()
    };
    let ensemble = match args.model {
        ModelFamily::Rf => fit_rf(&dataset, &config.rf_params(args.task), args.seed)?,
        ModelFamily::Gbt => fit_gbt(&dataset, &config.gbt_params(args.task), args.seed)?,
    };
    let doc = ModelDocument { feature_names: data.feature_names, target_name: data.target_name, task: args.task, ensemble };
    fs::write(&args.out, doc.to_json()?).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn read_points(path: &Path, names: &[String]) -> Result<Array2<f64>> {
    let table = CsvTable::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(table.numeric_columns(names)?)
}

fn kernel(args: &KernelArgs) -> Result<()> {
    let text = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let doc = ModelDocument::from_json(&text)?;
    let a = read_points(&args.data, &doc.feature_names)?;
    let b = match &args.data2 {
        Some(p) => read_points(p, &doc.feature_names)?,
        None => a.clone(),
    };
    let k = ensemble_kernel(&doc.ensemble, a.view(), b.view())?;
    let mut out = std::io::BufWriter::new(fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    for row in k.values().outer_iter() {
        let cells: Vec<String> = row.iter().map(|&v| format_sig17(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn bench_sim(args: &BenchSimArgs) -> Result<()> {
    let config = bench_config(&args.scale)?;
    let setups: Vec<SimSetup> = if args.setup == "all" {
        SimSetup::ALL.to_vec()
    } else {
        vec![args.setup.parse()?]
    };
    let mut rows = Vec::new();
    for setup in setups {
        if args.p < setup.min_p() {
            bail!("{setup} needs --p >= {}", setup.min_p());
        }
        rows.extend(bench::run_simulation(setup, args.n, args.p, args.target, &config)?);
    }
    write_results(&args.scale, &rows)
}

fn bench_real(args: &BenchRealArgs) -> Result<()> {
    let config = bench_config(&args.scale)?;
    let data = TabularDataset::from_path(&args.data, &args.target_col)
        .with_context(|| format!("loading {}", args.data.display()))?;
    let rows = bench::run_real(&data, args.task, &config)?;
    write_results(&args.scale, &rows)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::BayesError(a) => bayes_error(a),
        Command::Fit(a) => fit(a),
        Command::Kernel(a) => kernel(a),
        Command::Bench(BenchCommand::Sim(a)) => bench_sim(a),
        Command::Bench(BenchCommand::Real(a)) => bench_real(a),
    }
}
