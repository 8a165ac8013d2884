//! `cgqf` command-line front end.
//!
//! Subcommands: `reduce` (spectral report of a quadratic form), `dist`
//! (PDF/CDF table), `outage` and `ber` (MRC link-performance sweeps with
//! optional Monte-Carlo columns), and `validate` (internal invariant
//! suite).
//!
//! Exit codes: 0 success, 2 parse/input error, 3 numeric failure,
//! 4 validation failure.

mod report;
mod scenario;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cgqf_core::confluent::{build_pole_zero, select_m};
use cgqf_core::distribution::ClosedFormDistribution;
use cgqf_core::montecarlo::{sample_q, simulate_mrc_ber, SimConfig};
use cgqf_core::mrc::CovarianceConvention;
use cgqf_core::reduction::reduce;
use cgqf_core::residues::{rationalize, residues_recursive, DEFAULT_MAX_DENOMINATOR};
use cgqf_core::{Error as CoreError, MrcAnalysis, SpectralForm};

use report::{num, Report};
use scenario::{db_to_linear, parse_grid, resolve, Resolved, ScenarioFile};

#[derive(Debug)]
pub enum CliError {
    /// Malformed input: exit code 2.
    Parse(String),
    /// Numeric failure (precision, convergence, unreachable target): 3.
    Numeric(String),
}

impl CliError {
    /// Structural input problems map to parse errors; anything numeric maps
    /// to a numeric failure with a remediation hint.
    fn from_structural(e: CoreError) -> CliError {
        match e {
            CoreError::InvalidInput(_)
            | CoreError::InvalidK { .. }
            | CoreError::UnsupportedM(_)
            | CoreError::NotPositiveDefinite { .. } => CliError::Parse(e.to_string()),
            other => CliError::from(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let hint = match &e {
            CoreError::PrecisionLoss { .. } => "; raise --precision-bits",
            CoreError::TargetUnreachable { .. } => "; relax --mse-target or raise m",
            CoreError::NoConvergence { .. } => "; the input is numerically pathological",
            _ => "",
        };
        CliError::Numeric(format!("{e}{hint}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "cgqf",
    version,
    about = "Distribution of complex Gaussian quadratic forms and MRC link performance over correlated Rician fading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shape parameter override.
    #[arg(long)]
    m: Option<u32>,
    /// Normalized-MSE target for automatic shape selection.
    #[arg(long)]
    mse_target: Option<f64>,
    /// Coefficient precision in bits.
    #[arg(long)]
    precision_bits: Option<usize>,
    /// Random seed override (Monte-Carlo columns).
    #[arg(long)]
    seed: Option<u64>,
    /// Channel covariance convention.
    #[arg(long, value_parser = parse_covariance, default_value = "unit-power")]
    covariance: CovarianceConvention,
}

fn parse_covariance(s: &str) -> Result<CovarianceConvention, String> {
    match s {
        "unit-power" => Ok(CovarianceConvention::UnitPower),
        "paper-literal" => Ok(CovarianceConvention::PaperLiteral),
        other => Err(format!("unknown covariance '{other}' (unit-power | paper-literal)")),
    }
}

fn covariance_name(c: CovarianceConvention) -> &'static str {
    match c {
        CovarianceConvention::UnitPower => "unit-power",
        CovarianceConvention::PaperLiteral => "paper-literal",
    }
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a quadratic form to its spectral form and report identities.
    Reduce(CommonArgs),
    /// Tabulate the confluent PDF and CDF on a grid.
    Dist {
        #[command(flatten)]
        common: CommonArgs,
        /// Evaluation grid lo:hi:npts (defaults to the numerical support).
        #[arg(long)]
        grid: Option<String>,
    },
    /// Outage probability across the scenario SNR grid.
    Outage {
        #[command(flatten)]
        common: CommonArgs,
        /// Append a Monte-Carlo column with this many trials per point.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Average M-QAM bit error rate across the scenario SNR grid.
    Ber {
        #[command(flatten)]
        common: CommonArgs,
        /// Append a symbol-level Monte-Carlo column with this many trials.
        #[arg(long)]
        mc: Option<usize>,
    },
    /// Run the internal invariant suite.
    Validate {
        /// Reduced sample counts, completes in well under a minute.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Corrupt one residue table and require the checks to catch it.
        #[arg(long)]
        inject_fault: bool,
    },
}

fn shape_manifest(r: &Resolved) -> (String, String) {
    match r.shape {
        cgqf_core::mrc::ShapeSelection::Fixed(m) => ("m".into(), m.to_string()),
        cgqf_core::mrc::ShapeSelection::Auto { target_nmse, .. } => {
            ("mse_target".into(), format!("{target_nmse:e}"))
        }
    }
}

/// Spectral form of whatever the scenario describes (raw form or MRC
/// channel power).
fn spectral_of(file: &ScenarioFile, resolved: &Resolved) -> CliResult<SpectralForm> {
    if let Some(form) = &file.form {
        let qf = form.build()?;
        Ok(reduce(&qf)?)
    } else {
        let spec = file.mrc.as_ref().expect("validated");
        let sc = spec.build(resolved)?;
        let qf = sc.build_channel().map_err(CliError::from_structural)?;
        Ok(reduce(&qf)?)
    }
}

fn resolve_shape(sf: &SpectralForm, resolved: &Resolved) -> CliResult<u32> {
    match resolved.shape {
        cgqf_core::mrc::ShapeSelection::Fixed(m) => Ok(m),
        cgqf_core::mrc::ShapeSelection::Auto { target_nmse, m_max } => {
            Ok(select_m(sf, target_nmse, m_max)?)
        }
    }
}

fn cmd_reduce(args: &CommonArgs) -> CliResult<()> {
    let file = scenario::load(&args.input)?;
    let resolved = resolve(
        &file,
        args.m,
        args.mse_target,
        args.precision_bits,
        args.seed,
        args.covariance,
    )?;
    let sf = spectral_of(&file, &resolved)?;
    let mut rep = Report::new("reduce")
        .setting("input", args.input.display())
        .setting("covariance", covariance_name(resolved.covariance))
        .columns(&["i", "lambda", "mu"]);
    let sum_l: f64 = sf.lambda.iter().sum();
    let sum_lm: f64 = sf.lambda.iter().zip(&sf.mu).map(|(l, m)| l * m).sum();
    rep.comment(format!("sum_lambda = {} (trace identity)", num(sum_l)));
    rep.comment(format!("sum_lambda_mu = {} (mean-vector identity)", num(sum_lm)));
    rep.comment(format!("mean = {}", num(sf.mean())));
    rep.comment(format!("second_moment = {}", num(sf.second_moment())));
    for i in 0..sf.dim() {
        rep.row(vec![i.to_string(), num(sf.lambda[i]), num(sf.mu[i])]);
    }
    rep.emit(args.out.as_deref())
}

fn cmd_dist(args: &CommonArgs, grid: Option<&str>) -> CliResult<()> {
    let file = scenario::load(&args.input)?;
    let resolved = resolve(
        &file,
        args.m,
        args.mse_target,
        args.precision_bits,
        args.seed,
        args.covariance,
    )?;
    let sf = spectral_of(&file, &resolved)?;
    let m = resolve_shape(&sf, &resolved)?;
    let pz = build_pole_zero(&sf, m)?;
    let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR)?;
    let dist = ClosedFormDistribution::from_residues(
        &residues_recursive(&rpz),
        resolved.precision_bits,
    );
    let xs = match grid {
        Some(spec) => parse_grid(spec)?,
        None => {
            let lo = dist.support_lo();
            let hi = dist.support_hi();
            (0..201).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect()
        }
    };
    let (shape_key, shape_val) = shape_manifest(&resolved);
    let mut rep = Report::new("dist")
        .setting("input", args.input.display())
        .setting(&shape_key, shape_val)
        .setting("m_resolved", m)
        .setting("precision_bits", resolved.precision_bits)
        .setting("grid", grid.unwrap_or("auto"))
        .columns(&["x", "pdf", "cdf"]);
    for &x in &xs {
        rep.row(vec![num(x), num(dist.pdf(x)?), num(dist.cdf(x)?)]);
    }
    rep.emit(args.out.as_deref())
}

enum Sweep {
    Outage,
    Ber,
}

fn cmd_sweep(args: &CommonArgs, mc: Option<usize>, which: Sweep) -> CliResult<()> {
    let file = scenario::load(&args.input)?;
    let resolved = resolve(
        &file,
        args.m,
        args.mse_target,
        args.precision_bits,
        args.seed,
        args.covariance,
    )?;
    let spec = file.mrc.as_ref().ok_or_else(|| {
        CliError::Parse("outage/ber need an 'mrc' scenario".into())
    })?;
    let sc = spec.build(&resolved)?;
    let analysis = MrcAnalysis::new(sc.clone())?;
    let grid_db = spec.grid_db()?;

    let (name, value_col) = match which {
        Sweep::Outage => ("outage", "outage"),
        Sweep::Ber => ("ber", "ber"),
    };
    let (shape_key, shape_val) = shape_manifest(&resolved);
    let mut columns = vec!["gamma_bar_db", value_col];
    if mc.is_some() {
        columns.push("mc");
        columns.push("mc_se");
    }
    let mut rep = Report::new(name)
        .setting("input", args.input.display())
        .setting(&shape_key, shape_val)
        .setting("m_resolved", analysis.m)
        .setting("precision_bits", resolved.precision_bits)
        .setting("seed", resolved.seed)
        .setting("mc", mc.map_or("0".into(), |n| n.to_string()))
        .setting("covariance", covariance_name(resolved.covariance))
        .setting("gamma_th_db", format!("{}", spec.gamma_th_db))
        .columns(&columns);

    for (idx, &gb_db) in grid_db.iter().enumerate() {
        let gb = db_to_linear(gb_db);
        let analytic = match which {
            Sweep::Outage => analysis.outage(gb)?,
            Sweep::Ber => analysis.ber(gb)?,
        };
        let mut cells = vec![num(gb_db), num(analytic)];
        if let Some(n) = mc {
            let cfg = SimConfig::new(resolved.seed, idx as u64, n);
            match which {
                Sweep::Outage => {
                    let qf = sc.build_channel().map_err(CliError::from_structural)?;
                    let samples = sample_q(&qf, &cfg)?;
                    let hits = samples.iter().filter(|&&q| gb * q < sc.gamma_th).count();
                    let p = hits as f64 / n as f64;
                    let se = (p * (1.0 - p) / n as f64).sqrt();
                    cells.push(num(p));
                    cells.push(num(se));
                }
                Sweep::Ber => {
                    let est = simulate_mrc_ber(&sc, gb, &cfg)?;
                    cells.push(num(est.ber));
                    cells.push(num(est.std_error));
                }
            }
        }
        rep.row(cells);
    }
    rep.emit(args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reduce(args) => cmd_reduce(args),
        Command::Dist { common, grid } => cmd_dist(common, grid.as_deref()),
        Command::Outage { common, mc } => cmd_sweep(common, *mc, Sweep::Outage),
        Command::Ber { common, mc } => cmd_sweep(common, *mc, Sweep::Ber),
        Command::Validate { quick, seed, inject_fault } => {
            let outcome = validate::run(*quick, *seed, *inject_fault);
            return if outcome.failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
