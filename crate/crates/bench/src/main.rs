use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ublr::reconstruction::{write_container, Method, TaggingConfig};
use ublr::tagging::TagDistribution;
use ublr_bench::{
    aspect_study, run_compress, run_sweep, write_aspect_csv, write_sweep_csv, AspectGrid, BenchError, OperatorKind,
    ProblemSpec, Result, RunConfig, SweepGrid, DEFAULT_K, DEFAULT_P, EXIT_NUMERICAL,
};

#[derive(Parser, Debug)]
#[command(name = "ublr", version, about = "Matrix-free uniform BLR compression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress one operator and write a JSON report.
    Compress(CompressArgs),
    /// Run a grid of compressions and write one CSV row per run.
    Sweep(SweepArgs),
    /// Tabulate tagging aspect ratios per block as CSV.
    AspectRatios(AspectArgs),
}

/// Comma-separated list; an empty string is an empty list.
#[derive(Clone, Debug)]
struct List<T>(Vec<T>);

fn parse_list<T: FromStr>(s: &str) -> std::result::Result<List<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<T>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

#[derive(Args, Debug)]
struct OperatorArgs {
    /// Operator to compress.
    #[arg(long)]
    op: OperatorKind,
    /// Spatial dimension of the geometry.
    #[arg(long)]
    d: Option<usize>,
    /// Number of boxes; defaults to the balanced suggestion for N and k.
    #[arg(long)]
    b: Option<usize>,
    /// Far-field rank of the synthetic operator (defaults to --k).
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    /// Helmholtz shift of the slab operator.
    #[arg(long)]
    kappa: Option<f64>,
}

impl OperatorArgs {
    fn spec(&self, n: Option<usize>) -> ProblemSpec {
        ProblemSpec {
            op: self.op,
            n,
            d: self.d,
            b: self.b,
            rank: self.rank,
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            kappa: self.kappa,
        }
    }
}

#[derive(Args, Debug)]
struct CompressArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    /// Problem size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_P)]
    p: usize,
    /// A1, A2, A3, B1, or B2.
    #[arg(long)]
    method: Method,
    #[arg(long, env = "UBLR_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "gaussian")]
    distribution: TagDistribution,
    #[arg(long, default_value_t = 0)]
    extra_cols: usize,
    /// Optimize null vectors over the extra tag columns.
    #[arg(long)]
    optimize: bool,
    /// Sketch with the whole null basis instead of one vector.
    #[arg(long)]
    extra_samples: bool,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Binary container path for the compressed operator.
    #[arg(long)]
    save: Option<PathBuf>,
    /// Exit with status 1 when the relative error exceeds this value.
    #[arg(long)]
    max_rel_error: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    operator: OperatorArgs,
    /// Problem sizes.
    #[arg(long, value_parser = parse_list::<usize>)]
    n: Option<List<usize>>,
    #[arg(long, value_parser = parse_list::<usize>)]
    k: Option<List<usize>>,
    #[arg(long, default_value_t = DEFAULT_P)]
    p: usize,
    /// Methods; all five when absent.
    #[arg(long, value_parser = parse_list::<Method>)]
    method: Option<List<Method>>,
    #[arg(long, env = "UBLR_SEED", value_parser = parse_list::<u64>)]
    seed: Option<List<u64>>,
    #[arg(long, value_parser = parse_list::<TagDistribution>)]
    distribution: Option<List<TagDistribution>>,
    #[arg(long, value_parser = parse_list::<usize>)]
    extra_cols: Option<List<usize>>,
    #[arg(long)]
    optimize: bool,
    #[arg(long)]
    extra_samples: bool,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of runs executed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    max_rel_error: Option<f64>,
}

#[derive(Args, Debug)]
struct AspectArgs {
    /// Box counts, each a d-th power.
    #[arg(long, value_parser = parse_list::<usize>)]
    b: List<usize>,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value = "gaussian", value_parser = parse_list::<TagDistribution>)]
    distribution: List<TagDistribution>,
    #[arg(long, default_value = "0", value_parser = parse_list::<usize>)]
    extra_cols: List<usize>,
    #[arg(long, env = "UBLR_SEED", default_value = "0", value_parser = parse_list::<u64>)]
    seed: List<u64>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn check_tolerance(err: Option<f64>, max: Option<f64>) -> Result<()> {
    match (err, max) {
        (Some(e), Some(m)) if e.is_nan() || e > m => {
            Err(BenchError::Numerical(format!("relative error {e:.3e} exceeds {m:.3e}")))
        }
        _ => Ok(()),
    }
}

fn compress(args: CompressArgs) -> Result<()> {
    let cfg = RunConfig {
        problem: args.operator.spec(args.n),
        method: args.method,
        k: args.k,
        p: args.p,
        seed: args.seed,
        tagging: TaggingConfig {
            distribution: args.distribution,
            extra_cols: args.extra_cols,
            optimize: args.optimize,
            extra_samples: args.extra_samples,
        },
        rank_for_b: None,
    };
    let out = run_compress(&cfg)?;
    let mut w = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &out.report)?;
    writeln!(w)?;
    w.flush()?;
    if let Some(path) = &args.save {
        let mut f = BufWriter::new(File::create(path)?);
        write_container(&out.rep, &mut f)?;
        f.flush()?;
    }
    for warning in &out.report.warnings {
        eprintln!("warning: {warning}");
    }
    check_tolerance(out.report.relative_error, args.max_rel_error)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let grid = SweepGrid {
        base: args.operator.spec(None),
        ns: args.n.map(|l| l.0),
        ks: args.k.map_or(vec![DEFAULT_K], |l| l.0),
        methods: args.method.map_or(Method::ALL.to_vec(), |l| l.0),
        seeds: args.seed.map_or(vec![0], |l| l.0),
        distributions: args.distribution.map_or(vec![TagDistribution::Gaussian], |l| l.0),
        extra_cols: args.extra_cols.map_or(vec![0], |l| l.0),
        p: args.p,
        optimize: args.optimize,
        extra_samples: args.extra_samples,
    };
    let rows = run_sweep(&grid, args.jobs)?;
    write_sweep_csv(&rows, output(args.out.as_deref())?)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(BenchError::Numerical(format!("{failed} of {} runs failed", rows.len())));
    }
    rows.iter().try_for_each(|r| check_tolerance(r.rel_error, args.max_rel_error))
}

fn aspect_ratios(args: AspectArgs) -> Result<()> {
    let grid = AspectGrid {
        bs: args.b.0,
        d: args.d,
        distributions: args.distribution.0,
        extra_cols: args.extra_cols.0,
        seeds: args.seed.0,
    };
    let rows = aspect_study(&grid)?;
    write_aspect_csv(&rows, output(args.out.as_deref())?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compress(a) => compress(a),
        Command::Sweep(a) => sweep(a),
        Command::AspectRatios(a) => aspect_ratios(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(EXIT_NUMERICAL as u8))
        }
    }
}
