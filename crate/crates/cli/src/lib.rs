//! The `nscrit` command line: field norms, ensemble estimates, counterexample
//! trends, solver runs and dyadic partition exports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nscrit_core::grid::{dyadic_partition, make_grid, write_mask_csv};
use nscrit_core::harness::{self, run_solve, symbol_by_name, Ensemble};
use nscrit_core::io;
use nscrit_core::norms::{self, NormParams};
use nscrit_core::{
    CaseId, EstimateReport, ExperimentConfig, Grid, GridPreset, NormConfig, NormSpace, SolveConfig, TimeSpacing,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNCERTIFIED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nscrit", version, about = "Critical-space numerics for the Navier-Stokes equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Picard solve described by a JSON config.
    Solve(SolveArgs),
    /// Evaluate a norm of an NSF1 field.
    Norm(NormArgs),
    /// Ensemble statistics of an operator estimate.
    Estimate(EstimateArgs),
    /// Run a counterexample trend experiment.
    Cx(CxArgs),
    /// Export the dyadic partition of a grid.
    Partition(PartitionArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    /// Solution file (defaults to `<config>.solution.nsf` next to the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the trace JSON here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Exit with status 3 unless the run is certified.
    #[arg(long)]
    require_certified: bool,
}

#[derive(Debug, Args)]
struct NormArgs {
    #[arg(long, value_parser = parse_space)]
    space: NormSpace,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = NormConfig::default().centers_per_axis)]
    centers: usize,
    /// Ladder for `bmo-1` when the input is a spatial field.
    #[command(flatten)]
    ladder: LadderArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Spacing {
    Uniform,
    Geometric,
}

impl From<Spacing> for TimeSpacing {
    fn from(s: Spacing) -> Self {
        match s {
            Spacing::Uniform => TimeSpacing::Uniform,
            Spacing::Geometric => TimeSpacing::Geometric,
        }
    }
}

#[derive(Debug, Args)]
struct LadderArgs {
    #[arg(long, default_value_t = 1e-3)]
    t_min: f64,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    #[arg(long, default_value_t = 32)]
    n_time: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Geometric)]
    spacing: Spacing,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long = "length", default_value_t = 2.0 * std::f64::consts::PI)]
    length: f64,
    #[arg(long, default_value_t = 16)]
    n_space: usize,
    #[command(flatten)]
    ladder: LadderArgs,
}

impl GridArgs {
    fn grid(&self) -> nscrit_core::Result<Grid> {
        let l = &self.ladder;
        make_grid(self.dim, self.length, self.n_space, l.t_min, l.t_max, l.n_time, l.spacing.into())
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EstimateKind {
    KernelDomination,
    KtSplit,
    FeffermanPhong,
    DyadicBand,
    Embedding,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long, value_enum)]
    kind: EstimateKind,
    #[command(flatten)]
    grid: GridArgs,
    /// `abs`, `xi<j>` or `leray<i><j><k>`.
    #[arg(long, default_value = "abs")]
    symbol: String,
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Cylinder time for `kt-split` (a ladder time; defaults to the middle one).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = NormConfig::default().centers_per_axis)]
    centers: usize,
}

#[derive(Debug, Args)]
struct CxArgs {
    #[arg(long, value_parser = parse_case)]
    case: CaseId,
    /// Comma-separated sweep (n, R, δ or ε depending on the case).
    #[arg(long, visible_aliases = ["deltas", "ns", "radii", "eps"], value_delimiter = ',')]
    sweep: Vec<f64>,
    #[arg(long, value_parser = parse_preset, default_value = "desk")]
    preset: GridPreset,
    /// Two-column CSV export of the trend.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    /// Take the grid from an NSF1 file instead of the grid flags.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    /// Directory receiving one CSV mask per cell.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

fn parse_space(s: &str) -> Result<NormSpace, String> {
    s.parse().map_err(|e: nscrit_core::Error| e.to_string())
}

fn parse_case(s: &str) -> Result<CaseId, String> {
    s.parse().map_err(|e: nscrit_core::Error| e.to_string())
}

fn parse_preset(s: &str) -> Result<GridPreset, String> {
    s.parse().map_err(|e: nscrit_core::Error| e.to_string())
}

/// A failure with the exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<nscrit_core::Error> for Failure {
    fn from(e: nscrit_core::Error) -> Self {
        use nscrit_core::Error as E;
        let code = match e {
            E::NonFinite(_) => EXIT_FAILURE,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn emit(out: &mut dyn Write, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(nscrit_core::Error::from)?;
    writeln!(out, "{text}").map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: format!("stdout: {e}"),
    })
}

fn run_solve_cmd(args: &SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| config_error(format!("{}: {e}", args.config.display())))?;
    let mut config: SolveConfig = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    config.preset.rebase(base);
    let outcome = run_solve(&config)?;
    let target = args.output.clone().unwrap_or_else(|| {
        let stem = args.config.file_stem().and_then(|s| s.to_str()).unwrap_or("solve");
        base.join(format!("{stem}.solution.nsf"))
    });
    if let Some(u) = &outcome.trace.solution {
        io::save_field(&target, u)?;
    }
    if let Some(path) = &args.trace {
        let json = serde_json::to_string_pretty(&outcome).map_err(nscrit_core::Error::from)?;
        fs::write(path, json).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    }
    emit(out, &outcome)?;
    if args.require_certified && !outcome.trace.certified {
        return Ok(EXIT_UNCERTIFIED);
    }
    Ok(EXIT_OK)
}

fn run_norm(args: &NormArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let config = NormConfig {
        centers_per_axis: args.centers,
    };
    let header = io::read_header(&args.input)?;
    let spatial = header.n_time == 1 && header.t_max == 0.0;
    let report = if spatial {
        if args.space != NormSpace::BmoNeg1 {
            return Err(config_error(format!(
                "{} holds a spatial field; only bmo-1 accepts spatial input",
                args.input.display()
            )));
        }
        let u0 = io::load_spatial(&args.input)?;
        let l = &args.ladder;
        let space = u0.space();
        let grid = make_grid(space.dim, space.length, space.n, l.t_min, l.t_max, l.n_time, l.spacing.into())?;
        norms::norm_bmo_neg1(&u0, &grid, &config)?
    } else {
        let u = io::load_field(&args.input)?;
        let params = NormParams {
            p: args.p,
            lambda: args.lambda,
            q: args.q,
        };
        norms::norm_by_space(&u, args.space, &params, &config)?
    };
    emit(out, &report)?;
    Ok(EXIT_OK)
}

fn run_estimate(args: &EstimateArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let grid = args.grid.grid()?;
    let config = NormConfig {
        centers_per_axis: args.centers,
    };
    let ensemble = Ensemble {
        size: args.size,
        seed: args.seed,
    };
    let symbol = || symbol_by_name(&args.symbol, grid.dim());
    let reports: Vec<EstimateReport> = match args.kind {
        EstimateKind::KernelDomination => vec![harness::kernel_domination_sweep(&symbol()?, &grid, &ensemble)?],
        EstimateKind::KtSplit => harness::kt_split_sweep(&symbol()?, &grid, args.t, &ensemble, &config)?,
        EstimateKind::FeffermanPhong => {
            vec![harness::fefferman_phong_sweep(&grid, args.beta, args.p, &ensemble, &config)?]
        }
        EstimateKind::DyadicBand => vec![harness::band_sweep(&grid, args.q, &ensemble, &config)?],
        EstimateKind::Embedding => harness::embedding_sweep(&grid, args.q, &ensemble, &config)?.to_vec(),
    };
    emit(out, &reports)?;
    Ok(EXIT_OK)
}

fn run_cx(args: &CxArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let config = ExperimentConfig {
        case: args.case,
        sweep: args.sweep.clone(),
        preset: args.preset,
        output: args.csv.clone(),
    };
    let report = config.run()?;
    emit(out, &report)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CellSummary {
    j: i32,
    k: Vec<i64>,
    samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
}

fn run_partition(args: &PartitionArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let grid = match &args.input {
        Some(path) => io::load_field(path)?.grid().clone(),
        None => args.grid.grid()?,
    };
    if let Some(dir) = &args.csv_dir {
        fs::create_dir_all(dir).map_err(|e| config_error(format!("{}: {e}", dir.display())))?;
    }
    let dim = grid.dim();
    let mut cells = Vec::new();
    for (cell, mask) in dyadic_partition(&grid) {
        let k = cell.k[..dim].to_vec();
        let csv = match &args.csv_dir {
            Some(dir) => {
                let name = k.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("_");
                let path = dir.join(format!("cell_j{}_k{name}.csv", cell.j));
                let file = fs::File::create(&path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                write_mask_csv(std::io::BufWriter::new(file), &grid, &mask)
                    .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
                Some(path)
            }
            None => None,
        };
        cells.push(CellSummary {
            j: cell.j,
            k,
            samples: mask.len(),
            csv,
        });
    }
    emit(out, &serde_json::json!({ "samples": grid.len(), "cells": cells }))?;
    Ok(EXIT_OK)
}

/// Runs the CLI on `argv` (including the program name), printing reports to
/// stdout and diagnostics to stderr. Returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Solve(a) => run_solve_cmd(a, &mut out),
        Command::Norm(a) => run_norm(a, &mut out),
        Command::Estimate(a) => run_estimate(a, &mut out),
        Command::Cx(a) => run_cx(a, &mut out),
        Command::Partition(a) => run_partition(a, &mut out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("nscrit: {}", f.message);
            f.code
        }
    }
}
