//! Command-line front end: single-point susceptibility and bound evaluation,
//! config-driven sweeps, verification suites, and correlation-length fits.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 inequality violation,
//! 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lqts::bounds::{XiProvider, DEFAULT_LOCALITY_THRESHOLD, INEQUALITY_TOL};
use lqts::harness::{
    self, HarnessError, RPolicy, SweepConfig, ROW_OK, ROW_VIOLATION,
};
use lqts::lattice::{LatticeModel, SiteId};
use lqts::thermometry::{self, ThermalContext};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_VIOLATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lqts",
    version,
    about = "Local quantum thermal susceptibility of lattice spin subsystems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Susceptibility F(β) of one subsystem, with the canonical baseline.
    Qfi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beta: f64,
        /// Half-open site range i..j
        #[arg(long, value_parser = parse_range)]
        subsystem: SiteRange,
    },
    /// One fully evaluated bound point.
    Bound {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_parser = parse_range)]
        subsystem: SiteRange,
        /// ising | fit | a positive number
        #[arg(long, value_parser = parse_xi, default_value = "ising")]
        xi: XiChoice,
        /// Fixed layer width; omit to optimize
        #[arg(long = "R")]
        r: Option<usize>,
        /// Upper end of the layer-width scan
        #[arg(long = "R-max")]
        r_max: Option<usize>,
        #[arg(long, default_value_t = INEQUALITY_TOL, allow_negative_numbers = true)]
        tolerance: f64,
    },
    /// Config-driven sweep over (β, subsystem) grids.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Override the artifact path from the config
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
    /// Run every inequality as an assertion over the config's grid.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Fit an empirical correlation length from exact correlators.
    FitXi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        max_distance: Option<usize>,
    },
}

#[derive(Clone)]
struct SiteRange {
    start: usize,
    end: usize,
}

impl SiteRange {
    fn sites(&self) -> Vec<SiteId> {
        (self.start..self.end).collect()
    }
}

fn parse_range(s: &str) -> Result<SiteRange, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected i..j, got {s:?}"))?;
    let start: usize = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let end: usize = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if start >= end {
        return Err(format!("empty range {s:?}"));
    }
    Ok(SiteRange { start, end })
}

#[derive(Clone)]
enum XiChoice {
    Ising,
    Fit,
    Value(f64),
}

fn parse_xi(s: &str) -> Result<XiChoice, String> {
    match s {
        "ising" => Ok(XiChoice::Ising),
        "fit" => Ok(XiChoice::Fit),
        other => {
            let v: f64 = other
                .parse()
                .map_err(|_| format!("expected ising, fit, or a number, got {other:?}"))?;
            if v <= 0.0 {
                return Err(format!("correlation length must be positive, got {v}"));
            }
            Ok(XiChoice::Value(v))
        }
    }
}

fn classify(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Json(_) => EXIT_USAGE,
        HarnessError::Lattice(_) => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(classify(&e))
}

fn resolve_xi(choice: &XiChoice, model: &LatticeModel, beta: f64) -> Result<XiProvider, HarnessError> {
    Ok(match choice {
        XiChoice::Ising => {
            let g = model.geometry_constants()?;
            XiProvider::ClosedFormIsing { j: g.j }
        }
        XiChoice::Fit => {
            let xi = harness::fit_xi_empirical(
                model,
                beta,
                &harness::default_fit_observable(),
                model.diameter().max(1),
            )?;
            XiProvider::EmpiricalFit { xi }
        }
        XiChoice::Value(v) => XiProvider::UserConstant { xi: *v },
    })
}

fn run_qfi(model: PathBuf, beta: f64, subsystem: SiteRange) -> Result<ExitCode, HarnessError> {
    let m = LatticeModel::from_path(&model)?;
    let sites = subsystem.sites();
    let ctx = ThermalContext::new(&m, beta)?;
    let f = ctx.local_qfi(&sites)?;
    let canonical = thermometry::canonical_qfi(&m, &sites, beta).ok();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "beta": beta,
            "subsystem": sites,
            "F": f,
            "canonical_variance": canonical,
            "cramer_rao_floor": thermometry::cramer_rao_precision(f),
        }))?
    );
    Ok(ExitCode::from(EXIT_OK))
}

#[allow(clippy::too_many_arguments)]
fn run_bound(
    model: PathBuf,
    beta: f64,
    subsystem: SiteRange,
    xi: XiChoice,
    r: Option<usize>,
    r_max: Option<usize>,
    tolerance: f64,
) -> Result<ExitCode, HarnessError> {
    let m = LatticeModel::from_path(&model)?;
    let provider = resolve_xi(&xi, &m, beta)?;
    let policy = match r {
        Some(r) => RPolicy::Fixed { r },
        None => RPolicy::Optimize { r_max },
    };
    let ctx = ThermalContext::new(&m, beta)?;
    let report = harness::evaluate_point(
        &ctx,
        &subsystem.sites(),
        &provider,
        &policy,
        DEFAULT_LOCALITY_THRESHOLD,
        tolerance,
    )?;
    let satisfied = report.satisfied;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::from(if satisfied { EXIT_OK } else { EXIT_VIOLATION }))
}

fn run_sweep(config: PathBuf, out: Option<PathBuf>, format: OutFormat) -> Result<ExitCode, HarnessError> {
    let mut cfg = SweepConfig::from_path(&config)?;
    if let Some(path) = out {
        match format {
            OutFormat::Csv => cfg.out_csv = Some(path),
            OutFormat::Json => cfg.out_json = Some(path),
        }
    }
    let record = harness::run_sweep(&cfg)?;
    let (mut ok, mut violated, mut failed) = (0usize, 0usize, 0usize);
    for row in &record.rows {
        match row.error_code {
            ROW_OK => ok += 1,
            ROW_VIOLATION => violated += 1,
            _ => failed += 1,
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "rows": record.rows.len(),
            "ok": ok,
            "violated": violated,
            "failed": failed,
            "config_hash": record.config_hash,
        }))?
    );
    let code = match record.worst_error_code() {
        ROW_OK => EXIT_OK,
        ROW_VIOLATION => EXIT_VIOLATION,
        _ => EXIT_NUMERICAL,
    };
    Ok(ExitCode::from(code))
}

fn run_verify(config: PathBuf, tolerance: Option<f64>) -> Result<ExitCode, HarnessError> {
    let mut cfg = SweepConfig::from_path(&config)?;
    if let Some(t) = tolerance {
        cfg.tolerance = t;
    }
    let report = harness::verify_suite(&cfg, 1.0)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::from(if report.violations == 0 { EXIT_OK } else { EXIT_VIOLATION }))
}

fn run_fit_xi(model: PathBuf, beta: f64, max_distance: Option<usize>) -> Result<ExitCode, HarnessError> {
    let m = LatticeModel::from_path(&model)?;
    let d = max_distance.unwrap_or_else(|| m.diameter().max(1));
    let xi = harness::fit_xi_empirical(&m, beta, &harness::default_fit_observable(), d)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({ "beta": beta, "xi_empirical": xi, "max_distance": d }))?
    );
    Ok(ExitCode::from(EXIT_OK))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // help/version requests are successes, everything else is usage
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if benign { EXIT_OK } else { EXIT_USAGE });
        }
    };
    let outcome = match cli.cmd {
        Cmd::Qfi { model, beta, subsystem } => run_qfi(model, beta, subsystem),
        Cmd::Bound { model, beta, subsystem, xi, r, r_max, tolerance } => {
            run_bound(model, beta, subsystem, xi, r, r_max, tolerance)
        }
        Cmd::Sweep { config, out, format } => run_sweep(config, out, format),
        Cmd::Verify { config, tolerance } => run_verify(config, tolerance),
        Cmd::FitXi { model, beta, max_distance } => run_fit_xi(model, beta, max_distance),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}
