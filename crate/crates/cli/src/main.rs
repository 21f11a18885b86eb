//! `plci`: profile likelihood confidence intervals from the command line.
//!
//! Exit codes: 0 success, 1 usage or input schema error, 2 I/O or numeric
//! failure.

mod ci;
mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use plci::baselines::{MethodKind, MethodSettings};
use plci::benchmark::{
    aggregate, parse_runs, run_benchmark, write_report, write_runs, BenchmarkConfig, BenchmarkSpec, Family,
};
use plci::SingularVariant;

use config::FileConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<plci::Error> for CliError {
    fn from(e: plci::Error) -> Self {
        match e {
            plci::Error::Config(_) | plci::Error::Parse { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "plci", version, about = "Profile likelihood confidence intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Confidence intervals for a demo model or a logistic data set.
    Ci(CiArgs),
    /// Run the simulated benchmark and write run and report CSVs.
    Benchmark(BenchmarkArgs),
    /// Aggregate run CSVs from earlier benchmarks into a report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Freeze linearly dependent nuisance parameters.
    Hold,
    /// Moore-Penrose pseudo-inverse.
    Mpi,
}

#[derive(Args)]
struct Common {
    /// Benchmark family: transformed3, transformed11 or glm11.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated methods (rvm, vm, wald, grid, bisection, binary, penalty).
    #[arg(long, visible_alias = "method", value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated parameter indices; all when omitted.
    #[arg(long, value_delimiter = ',')]
    params: Option<Vec<usize>>,
    /// Significance level; intervals have confidence 1 - alpha.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file with flag values and solver knobs.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    singular_policy: Option<PolicyArg>,
}

#[derive(Args)]
struct CiArgs {
    #[command(flatten)]
    common: Common,
    /// Use a built-in model instead of logistic data.
    #[arg(long, value_enum)]
    demo: Option<ci::Demo>,
    /// Simulated data set size.
    #[arg(long)]
    n: Option<usize>,
    /// Replicate index of the simulated data set.
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Data set CSV with header x,c1,...,ck instead of simulated data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Write the data set used as CSV.
    #[arg(long)]
    dump_data: Option<PathBuf>,
    /// Write JSON-lines records here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print every RVM trial step to standard error.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated data set sizes.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Replicates per size (default 50; 200 matches the full study).
    #[arg(long)]
    replicates: Option<usize>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for runs.csv and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run CSVs written by `benchmark`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Everything resolved from defaults, the config file and the flags, in
/// that order of precedence.
pub struct Resolved {
    pub family: Family,
    pub methods: Vec<MethodKind>,
    pub params: Option<Vec<usize>>,
    pub seed: u64,
    pub settings: MethodSettings,
    pub spec: BenchmarkSpec,
    pub file: config::FlagValues,
}

fn parse_methods(items: &[String]) -> Result<Vec<MethodKind>, CliError> {
    let mut out = Vec::new();
    for item in items.iter().flat_map(|s| s.split(',')) {
        let m: MethodKind = item.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    Ok(out)
}

fn resolve(common: &Common, default_methods: &[MethodKind]) -> Result<Resolved, CliError> {
    let mut file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut settings = file.overlay(&MethodSettings::default())?;
    let spec_knobs = file.overlay(&BenchmarkSpec::default())?;
    let flags = std::mem::take(&mut file.flags);
    file.finish()?;

    let family = match common.family.as_ref().or(flags.family.as_ref()) {
        Some(f) => f.parse::<Family>()?,
        None => Family::Transformed3,
    };
    let methods = match (&common.methods, &flags.methods) {
        (Some(m), _) => parse_methods(m)?,
        (None, Some(m)) => parse_methods(&m.clone().into_vec())?,
        (None, None) => default_methods.to_vec(),
    };
    let params = common.params.clone().or_else(|| flags.params.clone().map(|p| p.into_vec()));
    if let Some(alpha) = common.alpha.or(flags.alpha) {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::Usage(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        settings.rvm.confidence = 1.0 - alpha;
    }
    let policy = match (common.singular_policy, flags.singular_policy.as_deref()) {
        (Some(p), _) => Some(p),
        (None, Some("hold")) => Some(PolicyArg::Hold),
        (None, Some("mpi")) => Some(PolicyArg::Mpi),
        (None, Some(other)) => return Err(CliError::Usage(format!("unknown singular policy `{other}`"))),
        (None, None) => None,
    };
    if let Some(p) = policy {
        settings.rvm.singular.variant = match p {
            PolicyArg::Hold => SingularVariant::HoldDependent,
            PolicyArg::Mpi => SingularVariant::MoorePenrose,
        };
    }
    settings.rvm.validate()?;
    settings.baseline.validate()?;
    let seed = common.seed.or(flags.seed).unwrap_or(1);
    Ok(Resolved {
        family,
        methods,
        params,
        seed,
        settings,
        spec: BenchmarkSpec {
            family,
            seed,
            ..spec_knobs
        },
        file: flags,
    })
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))
}

fn benchmark(args: BenchmarkArgs) -> Result<(), CliError> {
    let r = resolve(&args.common, &MethodKind::ALL)?;
    let sizes = args
        .n
        .or_else(|| r.file.n.clone().map(|n| n.into_vec()))
        .unwrap_or_else(|| vec![1000]);
    let cfg = BenchmarkConfig {
        spec: BenchmarkSpec {
            n: sizes.first().copied().unwrap_or(1000),
            ..r.spec
        },
        sizes,
        replicates: args.replicates.or(r.file.replicates).unwrap_or(50),
        methods: r.methods,
        parameters: r.params,
        settings: r.settings,
        jobs: args.jobs.or(r.file.jobs),
    };
    cfg.validate()?;
    let dir = args.out.or(r.file.out).unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;

    let outcomes = run_benchmark(&cfg)?;
    let discarded = outcomes.iter().filter(|o| !o.mle_converged).count();
    if discarded > 0 {
        eprintln!("{discarded} replicate(s) discarded: MLE did not converge");
    }
    let rows: Vec<_> = outcomes.into_iter().flat_map(|o| o.rows).collect();
    let report = write_report(&aggregate(&rows));
    write_file(&dir.join("runs.csv"), &write_runs(&rows))?;
    write_file(&dir.join("report.csv"), &report)?;
    print!("{report}");
    Ok(())
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Failure(format!("cannot read {}: {e}", path.display())))?;
        let parsed = parse_runs(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        rows.extend(parsed);
    }
    let report = write_report(&aggregate(&rows));
    if let Some(out) = &args.out {
        write_file(out, &report)?;
    }
    print!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Ci(args) => ci::run(args),
        Command::Benchmark(args) => benchmark(args),
        Command::Report(args) => report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
