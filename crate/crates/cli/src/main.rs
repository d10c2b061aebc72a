// SPDX-License-Identifier: Apache-2.0

//! `redmule`: run GEMMs on the simulated accelerator, sweep geometries,
//! benchmark the autoencoder training step and evaluate single FMAs.
//!
//! Exit codes: 0 success, 1 verification or simulation failure, 2 usage or
//! configuration error.

mod settings;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use redmule::cost::{sweep, SweepRow};
use redmule::fp16::{fma, F16};
use redmule::golden::{gemm_padded, GemmProblem};
use redmule::matrix::{MatF16, ValueMix};
use redmule::perf::{analyze, OperatingPoint, PerfReport};
use redmule::tiler::{run_gemm, RunOptions};
use redmule::trace::TraceLevel;
use redmule::workloads::{bench, default_autoencoder, BenchOptions};
use redmule::{Error, Geometry, Result};
use serde::Serialize;

use settings::{FileConfig, Format, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "redmule",
    version,
    about = "Cycle-level FP16 GEMM accelerator simulator"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML file with run settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// FMA units per row.
    #[arg(long = "H", global = true, allow_negative_numbers = true)]
    h: Option<i64>,
    /// Rows of FMA units.
    #[arg(long = "L", global = true, allow_negative_numbers = true)]
    l: Option<i64>,
    /// Pipeline registers per FMA.
    #[arg(long = "P", global = true, allow_negative_numbers = true)]
    p: Option<i64>,
    /// Clock frequency in Hz.
    #[arg(long, global = true)]
    freq: Option<f64>,
    /// Cluster power in mW at that frequency.
    #[arg(long, global = true)]
    power: Option<f64>,
    /// off, summary or per_cycle.
    #[arg(long, global = true)]
    trace: Option<String>,
    /// Where the event trace CSV goes (default trace.csv with per_cycle).
    #[arg(long, global = true)]
    trace_out: Option<PathBuf>,
    /// Port transactions as cycle,kind,index.
    #[arg(long, global = true)]
    port_out: Option<PathBuf>,
    /// json or csv.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// x_stationary or w_stationary.
    #[arg(long, global = true)]
    stationarity: Option<String>,
    /// Write the report here instead of stdout. For `bench`, a path prefix.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one GEMM and report performance.
    Run(RunArgs),
    /// Area and port table over a range of geometries.
    Sweep(SweepArgs),
    /// Autoencoder training step at batch size B.
    Bench { batch: usize },
    /// Half-precision helpers.
    Fp16 {
        #[command(subcommand)]
        op: Fp16Cmd,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    m: Option<usize>,
    n: Option<usize>,
    k: Option<usize>,
    /// X operand (RMAT or CSV); random data when absent.
    #[arg(long)]
    x: Option<PathBuf>,
    /// W operand (RMAT or CSV).
    #[arg(long)]
    w: Option<PathBuf>,
    /// Save the simulated Z (RMAT, or CSV for a .csv path).
    #[arg(long)]
    z_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Values of H: `a..b` (inclusive) or a comma list.
    #[arg(long = "h-range", default_value = "4")]
    h_range: String,
    /// Values of L: `a..b` (inclusive) or a comma list.
    #[arg(long = "l-range", default_value = "8")]
    l_range: String,
    /// Also measure utilization on an `M,N,K` GEMM at every point.
    #[arg(long)]
    probe: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Fp16Cmd {
    /// Prints fma(a, b, c) as a bit pattern and a decimal value.
    Eval {
        #[arg(allow_hyphen_values = true)]
        a: String,
        #[arg(allow_hyphen_values = true)]
        b: String,
        #[arg(allow_hyphen_values = true)]
        c: String,
    },
}

enum Failure {
    Usage(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Mismatch(_) | Error::Simulation(_) => Failure::Verify(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> std::result::Result<(), Failure> {
    let g = &cli.global;
    if let Command::Fp16 {
        op: Fp16Cmd::Eval { a, b, c },
    } = &cli.cmd
    {
        return fp16_eval(a, b, c);
    }
    let file = match &g.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let cfg = RunConfig::resolve(
        file,
        Overrides {
            h: g.h,
            l: g.l,
            p: g.p,
            frequency_hz: g.freq,
            power_mw: g.power,
            stationarity: g.stationarity.clone(),
            seed: g.seed,
            trace: g.trace.clone(),
            format: g.format.clone(),
        },
    )?;
    match &cli.cmd {
        Command::Run(args) => cmd_run(args, &cfg, g),
        Command::Sweep(args) => cmd_sweep(args, &cfg, g),
        Command::Bench { batch } => cmd_bench(*batch, &cfg, g),
        Command::Fp16 { .. } => unreachable!(),
    }
}

/// Creates `path`, making any missing parent directories first.
fn create(path: impl AsRef<Path>) -> io::Result<File> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn fp16_eval(a: &str, b: &str, c: &str) -> std::result::Result<(), Failure> {
    let parse = |s: &str| F16::parse_literal(s).map_err(Failure::from);
    let r = fma(parse(a)?, parse(b)?, parse(c)?);
    println!("0x{:04X} {:?}", r.to_bits(), r.to_f64());
    Ok(())
}

fn problem(args: &RunArgs, cfg: &RunConfig) -> Result<GemmProblem> {
    let dims = (args.m, args.n, args.k);
    match (&args.x, &args.w) {
        (Some(xp), Some(wp)) => {
            let p = GemmProblem::new(MatF16::load(xp)?, MatF16::load(wp)?)?;
            if let (Some(m), Some(n), Some(k)) = dims {
                if (m, n, k) != (p.m(), p.n(), p.k()) {
                    return Err(Error::Dimension(format!(
                        "files hold a {}x{}x{} problem, arguments say {m}x{n}x{k}",
                        p.m(),
                        p.n(),
                        p.k()
                    )));
                }
            }
            Ok(p)
        }
        (None, None) => {
            let (Some(m), Some(n), Some(k)) = dims else {
                return Err(Error::Dimension("run needs M N K or --x and --w".into()));
            };
            if m == 0 || n == 0 || k == 0 {
                return Err(Error::Dimension(format!(
                    "GEMM dimensions must be positive, got {m}x{n}x{k}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let x = MatF16::random(m, n, ValueMix::Moderate, &mut rng);
            let w = MatF16::random(n, k, ValueMix::Moderate, &mut rng);
            GemmProblem::new(x, w)
        }
        _ => Err(Error::Dimension("--x and --w go together".into())),
    }
}

fn cmd_run(args: &RunArgs, cfg: &RunConfig, g: &Global) -> std::result::Result<(), Failure> {
    let p = problem(args, cfg)?;
    let geo = &cfg.geometry;
    let run = run_gemm(
        &p,
        geo,
        &RunOptions {
            stationarity: cfg.stationarity,
            trace: cfg.trace,
        },
    )?;
    let report = analyze(
        &run.trace,
        geo,
        cfg.frequency_hz,
        cfg.power_mw,
        &cfg.baseline,
    )?;

    let trace_out = match (&g.trace_out, cfg.trace) {
        (Some(p), _) => Some(p.clone()),
        (None, TraceLevel::PerCycle) => Some(PathBuf::from("trace.csv")),
        _ => None,
    };
    if let Some(path) = trace_out {
        run.trace.write_csv(BufWriter::new(create(path)?))?;
    }
    if let Some(path) = &g.port_out {
        run.trace.write_port_csv(BufWriter::new(create(path)?))?;
    }
    if let Some(path) = &args.z_out {
        run.z.save(path)?;
    }

    let mut w = output(g.out.as_deref())?;
    match cfg.format.unwrap_or(Format::Json) {
        Format::Json => writeln!(w, "{}", to_json(&report))?,
        Format::Csv => {
            writeln!(w, "{}", PerfReport::CSV_HEADER)?;
            writeln!(w, "{}", report.csv_row())?;
        }
    }
    w.flush()?;

    let diff = run.z.bit_diff(&gemm_padded(&p, geo)?);
    if let Some(&(r, c)) = diff.first() {
        return Err(Failure::Verify(format!(
            "simulated Z differs from the reference in {} of {} elements, first at ({r}, {c}): {:#06x} vs {:#06x}",
            diff.len(),
            p.m() * p.k(),
            run.z.get(r, c).to_bits(),
            gemm_padded(&p, geo)?.get(r, c).to_bits()
        )));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

fn parse_values(text: &str, what: &'static str) -> Result<Vec<usize>> {
    let bad = || Error::Config(format!("{what} range '{text}'"));
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::EmptyRange(what));
    }
    if let Some((a, b)) = t.split_once("..") {
        let inclusive = b.strip_prefix('=').unwrap_or(b);
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = inclusive.trim().parse().map_err(|_| bad())?;
        return Ok((a..=b).collect());
    }
    t.split(',')
        .map(|v| v.trim().parse().map_err(|_| bad()))
        .collect()
}

#[derive(Serialize)]
struct ProbedRow {
    #[serde(flatten)]
    row: SweepRow,
    probe_utilization: f64,
}

fn cmd_sweep(args: &SweepArgs, cfg: &RunConfig, g: &Global) -> std::result::Result<(), Failure> {
    let hs = parse_values(&args.h_range, "H")?;
    let ls = parse_values(&args.l_range, "L")?;
    let rows = sweep(&hs, &ls, cfg.geometry.p, &cfg.area)?;
    let probe = args
        .probe
        .as_deref()
        .map(|s| {
            let v = parse_values(s, "probe")?;
            match v[..] {
                [m, n, k] if m > 0 && n > 0 && k > 0 => Ok((m, n, k)),
                _ => Err(Error::Config(format!("probe '{s}' needs M,N,K"))),
            }
        })
        .transpose()?;

    let utils: Option<Vec<f64>> = match probe {
        Some((m, n, k)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let x = MatF16::random(m, n, ValueMix::Moderate, &mut rng);
            let w = MatF16::random(n, k, ValueMix::Moderate, &mut rng);
            let p = GemmProblem::new(x, w)?;
            let opts = RunOptions {
                stationarity: cfg.stationarity,
                trace: TraceLevel::Off,
            };
            let u = rows
                .par_iter()
                .map(|r| {
                    let geo = Geometry::new(r.h, r.l, cfg.geometry.p)?;
                    let run = run_gemm(&p, &geo, &opts)?;
                    let rep = analyze(
                        &run.trace,
                        &geo,
                        cfg.frequency_hz,
                        cfg.power_mw,
                        &cfg.baseline,
                    )?;
                    Ok(rep.utilization)
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(u)
        }
        None => None,
    };

    let mut w = output(g.out.as_deref())?;
    match (cfg.format.unwrap_or(Format::Csv), &utils) {
        (Format::Csv, None) => {
            writeln!(w, "{}", SweepRow::CSV_HEADER)?;
            for r in &rows {
                writeln!(w, "{}", r.csv_row())?;
            }
        }
        (Format::Csv, Some(u)) => {
            writeln!(w, "{},probe_utilization", SweepRow::CSV_HEADER)?;
            for (r, u) in rows.iter().zip(u) {
                writeln!(w, "{},{u:.6}", r.csv_row())?;
            }
        }
        (Format::Json, None) => writeln!(w, "{}", to_json(&rows))?,
        (Format::Json, Some(u)) => {
            let probed: Vec<ProbedRow> = rows
                .iter()
                .zip(u)
                .map(|(r, &u)| ProbedRow {
                    row: *r,
                    probe_utilization: u,
                })
                .collect();
            writeln!(w, "{}", to_json(&probed))?
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_bench(batch: usize, cfg: &RunConfig, g: &Global) -> std::result::Result<(), Failure> {
    let opts = BenchOptions {
        geometry: cfg.geometry,
        baseline: cfg.baseline,
        point: OperatingPoint {
            freq_hz: cfg.frequency_hz,
            power_mw: cfg.power_mw,
        },
        stationarity: cfg.stationarity,
        seed: cfg.seed,
    };
    let report = bench(batch, &default_autoencoder(), &opts)?;
    match &g.out {
        Some(prefix) => {
            let with = |ext: &str| {
                let mut s = prefix.clone().into_os_string();
                s.push(ext);
                PathBuf::from(s)
            };
            let mut csv = BufWriter::new(create(with(".csv"))?);
            report.write_csv(&mut csv)?;
            csv.flush()?;
            let mut json = BufWriter::new(create(with(".json"))?);
            writeln!(json, "{}", to_json(&report))?;
            json.flush()?;
        }
        None => {
            let mut w = output(None)?;
            report.write_csv(&mut w)?;
            writeln!(w)?;
            writeln!(w, "{}", to_json(&report))?;
            w.flush()?;
        }
    }
    Ok(())
}
