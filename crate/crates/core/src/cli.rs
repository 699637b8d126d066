//! Command-line layer: argument parsing, input resolution, and
//! provenance-stamped output.
//!
//! Every subcommand echoes its full configuration (seed included) as a
//! `# key = value` header in CSV/text output or a `"provenance"` object in
//! JSON, and no command ever consults the wall clock, so identical
//! invocations produce byte-identical files.

use std::env;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::{self, ColumnMap};
use crate::error::{Error, Result};
use crate::mc::{self, SimulationSpec};
use crate::pi0;
use crate::power::{self, CenteringRule};
use crate::pvalue::{self, EquivProblem};
use crate::series::{CurveSeries, SeriesMeta};

/// Fixed default seed (the bundled snapshot's date, 2020-05-12) used
/// whenever `--seed` is omitted, so stochastic commands are reproducible
/// out of the box.
pub const DEFAULT_SEED: u64 = 20200512;

/// Environment variable naming the default data directory; explicit flags
/// always override it.
pub const DATA_DIR_ENV: &str = "RANDEQ_DATA_DIR";

/// File name of the bundled regional snapshot inside the data directory.
pub const DEFAULT_REGIONS_FILE: &str = "us_regions_2020-05-12.csv";

/// Bundled reference intervals for the study table, ordered by increasing
/// width.
pub const DEFAULT_PAIRS: [(f64, f64); 10] = [
    (0.4791, 0.5413),
    (0.4509, 0.5681),
    (0.4444, 0.5946),
    (0.4066, 0.6800),
    (0.3389, 0.7219),
    (0.3188, 0.7478),
    (0.3076, 0.7566),
    (0.2963, 0.9029),
    (0.2725, 0.9319),
    (0.2456, 0.9399),
];

// ===== grids =====

/// Inclusive linear grid written as `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl GridSpec {
    /// Materializes the grid; the final point is exactly `end`.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        let mut out: Vec<f64> = (0..self.count)
            .map(|i| self.start + i as f64 * step)
            .collect();
        out[self.count - 1] = self.end;
        out
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, count] = parts.as_slice() else {
            return Err(Error::config(format!(
                "grid '{s}' must be start:end:count"
            )));
        };
        let parse = |field: &str| -> Result<f64> {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("grid '{s}' has non-numeric part '{field}'")))
        };
        let (start, end) = (parse(start)?, parse(end)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("grid '{s}' has invalid count '{count}'")))?;
        if count == 0 || !start.is_finite() || !end.is_finite() {
            return Err(Error::config(format!("grid '{s}' is empty or non-finite")));
        }
        if count == 1 && start != end {
            return Err(Error::config(format!(
                "grid '{s}' has one point but distinct endpoints"
            )));
        }
        if count > 1 && start >= end {
            return Err(Error::config(format!(
                "grid '{s}' needs start < end for multiple points"
            )));
        }
        Ok(GridSpec { start, end, count })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.count)
    }
}

// ===== output plumbing =====

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SeriesFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

/// Destination and format of a tabular (series/table) output.
#[derive(Debug, Args)]
struct SeriesSink {
    /// Output format.
    #[arg(long, value_enum, default_value_t = SeriesFormat::Csv)]
    format: SeriesFormat,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Destination and format of a scalar-report output.
#[derive(Debug, Args)]
struct ReportSink {
    /// Output format.
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn emit_series(series: &CurveSeries, sink: &SeriesSink) -> Result<()> {
    let mut w = open_sink(sink.out.as_deref())?;
    match sink.format {
        SeriesFormat::Csv => series.write_csv(&mut w)?,
        SeriesFormat::Json => series.write_json(&mut w)?,
    }
    w.flush()?;
    Ok(())
}

// Scalar report: text is the provenance header plus `key = value` lines;
// JSON is one object with the provenance block and the same payload.
fn emit_report(
    meta: &SeriesMeta,
    lines: &[(&str, String)],
    payload: serde_json::Map<String, serde_json::Value>,
    sink: &ReportSink,
) -> Result<()> {
    let mut w = open_sink(sink.out.as_deref())?;
    match sink.format {
        ReportFormat::Text => {
            meta.write_header(&mut w)?;
            for (key, value) in lines {
                writeln!(w, "{key} = {value}")?;
            }
        }
        ReportFormat::Json => {
            let mut doc = payload;
            doc.insert("provenance".into(), meta.json_params());
            serde_json::to_writer_pretty(&mut w, &serde_json::Value::Object(doc))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

// ===== input resolution =====

// Resolution order: explicit flag, then $RANDEQ_DATA_DIR, then ./data.
fn resolve_regions(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(path) => path.to_path_buf(),
        None => env::var_os(DATA_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("data"))
            .join(DEFAULT_REGIONS_FILE),
    }
}

fn parse_pvalue_lines<R: BufRead>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| {
            Error::config(format!("line {}: '{trimmed}' is not a p-value", i + 1))
        })?;
        out.push(value);
    }
    Ok(out)
}

fn read_pvalue_file(path: &Path) -> Result<Vec<f64>> {
    parse_pvalue_lines(BufReader::new(File::open(path)?))
}

// Interval bounds, one `theta1,theta2` pair per line; a leading header
// line and `#` comments are skipped.
fn parse_pair_lines<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut first_data_line = true;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let pair = match fields.as_slice() {
            [a, b] => match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => Some((x, y)),
                _ => None,
            },
            _ => None,
        };
        match pair {
            Some(p) => out.push(p),
            None if first_data_line => {} // header row
            None => {
                return Err(Error::config(format!(
                    "line {}: '{trimmed}' is not a theta1,theta2 pair",
                    i + 1
                )))
            }
        }
        first_data_line = false;
    }
    if out.is_empty() {
        return Err(Error::Empty {
            what: "interval pair list",
        });
    }
    Ok(out)
}

fn read_pairs_file(path: &Path) -> Result<Vec<(f64, f64)>> {
    parse_pair_lines(BufReader::new(File::open(path)?))
}

// ===== command definitions =====

/// Randomized p-values and operating characteristics for binomial
/// equivalence testing.
#[derive(Debug, Parser)]
#[command(
    name = "randeq",
    version,
    about = "Randomized p-values, exact operating characteristics, and \
             multiplicity tools for binomial equivalence testing"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// All p-values for one observed count.
    Pvalue(PvalueArgs),
    /// Analytic p-value CDFs over a threshold grid.
    Cdf(CdfArgs),
    /// Power of both methods across sample sizes.
    PowerVsN(PowerVsNArgs),
    /// Grid search for the power-maximizing parameter.
    MaxPower(MaxPowerArgs),
    /// Power of both methods across interval widths.
    PowerVsDelta(PowerVsDeltaArgs),
    /// True-null count estimate from a p-value file or a simulated family.
    EstimatePi0(EstimatePi0Args),
    /// Reproduce the recovery-rate study table on a regions snapshot.
    SimulateTable(SimulateTableArgs),
    /// Monte Carlo family-wise error of the adaptive pipeline.
    Fwer(FwerArgs),
    /// Cross-validate the analytic CDFs against enumeration oracles.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
struct PvalueArgs {
    /// Number of trials.
    #[arg(long)]
    n: u64,
    /// Observed success count.
    #[arg(long)]
    s: u64,
    /// Lower equivalence bound.
    #[arg(long)]
    theta1: f64,
    /// Upper equivalence bound.
    #[arg(long)]
    theta2: f64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Seed for drawing the randomization pair (incompatible with explicit
    /// uniforms).
    #[arg(long, conflicts_with_all = ["u", "u_tilde"])]
    seed: Option<u64>,
    /// Explicit first-stage uniform.
    #[arg(long, requires = "u_tilde")]
    u: Option<f64>,
    /// Explicit second-stage uniform.
    #[arg(long, requires = "u")]
    u_tilde: Option<f64>,
    #[command(flatten)]
    sink: ReportSink,
}

#[derive(Debug, Args)]
struct CdfArgs {
    /// Number of trials.
    #[arg(long)]
    n: u64,
    /// Lower equivalence bound.
    #[arg(long)]
    theta1: f64,
    /// Upper equivalence bound.
    #[arg(long)]
    theta2: f64,
    /// Parameter the law is evaluated under.
    #[arg(long)]
    theta: f64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Threshold grid.
    #[arg(long, value_parser = GridSpec::from_str, default_value = "0:1:101")]
    t_grid: GridSpec,
    #[command(flatten)]
    sink: SeriesSink,
}

#[derive(Debug, Args)]
struct PowerVsNArgs {
    /// Lower equivalence bound.
    #[arg(long)]
    theta1: f64,
    /// Upper equivalence bound.
    #[arg(long)]
    theta2: f64,
    /// Alternative the power is evaluated at.
    #[arg(long)]
    theta: f64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Rejection threshold.
    #[arg(long, default_value_t = 0.05)]
    level_t: f64,
    /// Smallest sample size.
    #[arg(long, default_value_t = 20)]
    n_lo: u64,
    /// Largest sample size.
    #[arg(long, default_value_t = 300)]
    n_hi: u64,
    #[command(flatten)]
    sink: SeriesSink,
}

#[derive(Debug, Args)]
struct MaxPowerArgs {
    /// Number of trials.
    #[arg(long)]
    n: u64,
    /// Lower equivalence bound.
    #[arg(long)]
    theta1: f64,
    /// Upper equivalence bound.
    #[arg(long)]
    theta2: f64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Rejection threshold.
    #[arg(long, default_value_t = 0.05)]
    level_t: f64,
    /// Search grid resolution inside (theta1, theta2).
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    #[command(flatten)]
    sink: ReportSink,
}

#[derive(Debug, Args)]
struct PowerVsDeltaArgs {
    /// Number of trials.
    #[arg(long)]
    n: u64,
    /// Alternative the power is evaluated at.
    #[arg(long)]
    theta: f64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Rejection threshold.
    #[arg(long, default_value_t = 0.05)]
    level_t: f64,
    /// Interval width grid.
    #[arg(long, value_parser = GridSpec::from_str)]
    delta_grid: GridSpec,
    /// How bounds are derived from each width: symmetric or pivot.
    #[arg(long, value_parser = CenteringRule::from_str, default_value = "symmetric")]
    centering: CenteringRule,
    #[command(flatten)]
    sink: SeriesSink,
}

#[derive(Debug, Args)]
struct EstimatePi0Args {
    /// File of p-values, one per line (`#` comments allowed).
    #[arg(long, conflicts_with_all = ["regions", "theta1", "theta2", "rep"])]
    pvalues: Option<PathBuf>,
    /// Regions CSV for the simulated mode (default: bundled snapshot).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Lower equivalence bound (simulated mode).
    #[arg(long, required_unless_present = "pvalues")]
    theta1: Option<f64>,
    /// Upper equivalence bound (simulated mode).
    #[arg(long, required_unless_present = "pvalues")]
    theta2: Option<f64>,
    /// Estimator tuning point.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Cap the estimate at the family size.
    #[arg(long)]
    cap: bool,
    /// Second-stage constant (simulated mode).
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Seed (simulated mode).
    #[arg(long)]
    seed: Option<u64>,
    /// Replicate index to draw (simulated mode).
    #[arg(long, default_value_t = 0)]
    rep: u64,
    /// Column-name overrides for the regions CSV.
    #[arg(long, value_parser = ColumnMap::from_str, default_value = "")]
    columns: ColumnMap,
    #[command(flatten)]
    sink: ReportSink,
}

#[derive(Debug, Args)]
struct SimulateTableArgs {
    /// Regions CSV (default: bundled snapshot via the data directory).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// CSV of interval bounds, one theta1,theta2 pair per line (default:
    /// the bundled reference intervals).
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Replicates per interval.
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Estimator tuning point.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Family-wise level echoed into the configuration.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Column-name overrides for the regions CSV.
    #[arg(long, value_parser = ColumnMap::from_str, default_value = "")]
    columns: ColumnMap,
    #[command(flatten)]
    sink: SeriesSink,
}

#[derive(Debug, Args)]
struct FwerArgs {
    /// Regions CSV (default: bundled snapshot via the data directory).
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Lower equivalence bound.
    #[arg(long)]
    theta1: f64,
    /// Upper equivalence bound.
    #[arg(long)]
    theta2: f64,
    /// Replicates.
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Second-stage constant.
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Estimator tuning point.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Family-wise level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Column-name overrides for the regions CSV.
    #[arg(long, value_parser = ColumnMap::from_str, default_value = "")]
    columns: ColumnMap,
    #[command(flatten)]
    sink: ReportSink,
}

#[derive(Debug, Args)]
struct OracleCheckArgs {
    /// Largest sample size in the sweep.
    #[arg(long, default_value_t = 12)]
    max_n: u64,
    /// Largest acceptable deviation; exceeding it fails the run.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    sink: ReportSink,
}

// ===== dispatch =====

/// Parses `argv` and runs the selected subcommand.
///
/// Exit status: 0 on success (a broken stdout pipe counts as success), 1 on
/// runtime errors, 2 on usage errors (reported by the parser directly).
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Pvalue(a) => run_pvalue(a),
        Command::Cdf(a) => run_cdf(a),
        Command::PowerVsN(a) => run_power_vs_n(a),
        Command::MaxPower(a) => run_max_power(a),
        Command::PowerVsDelta(a) => run_power_vs_delta(a),
        Command::EstimatePi0(a) => run_estimate_pi0(a),
        Command::SimulateTable(a) => run_simulate_table(a),
        Command::Fwer(a) => run_fwer(a),
        Command::OracleCheck(a) => run_oracle_check(a),
    }
}

fn run_pvalue(a: PvalueArgs) -> Result<()> {
    let problem = EquivProblem::new(a.n, a.theta1, a.theta2)?;
    let mut meta = SeriesMeta::new("pvalue");
    meta.push("n", a.n);
    meta.push("s", a.s);
    meta.push("theta1", a.theta1);
    meta.push("theta2", a.theta2);
    meta.push("c", a.c);
    let (u, u_tilde) = match (a.u, a.u_tilde) {
        (Some(u), Some(u_tilde)) => (u, u_tilde),
        _ => {
            let seed = a.seed.unwrap_or(DEFAULT_SEED);
            meta.push("seed", seed);
            let mut stream = mc::rng_stream(seed, 0, 0);
            (stream.next_uniform(), stream.next_uniform())
        }
    };
    meta.push("u", u);
    meta.push("u_tilde", u_tilde);
    let draw = pvalue::draw_pvalues(&problem, a.s, u, u_tilde, a.c)?;
    let lines = [
        ("p_lower", f6(draw.p_lower)),
        ("p_upper", f6(draw.p_upper)),
        ("p_ump", f6(draw.p_ump)),
        ("p_rand2", f6(draw.p_rand2)),
    ];
    let mut payload = serde_json::Map::new();
    payload.insert("draw".into(), serde_json::to_value(draw)?);
    emit_report(&meta, &lines, payload, &a.sink)
}

fn run_cdf(a: CdfArgs) -> Result<()> {
    let problem = EquivProblem::new(a.n, a.theta1, a.theta2)?;
    let mut series = power::cdf_curve(&problem, a.theta, a.c, &a.t_grid.points())?;
    series.meta.push("t_grid", a.t_grid);
    emit_series(&series, &a.sink)
}

fn run_power_vs_n(a: PowerVsNArgs) -> Result<()> {
    let mut series =
        power::power_vs_n(a.theta1, a.theta2, a.theta, a.c, a.level_t, a.n_lo, a.n_hi)?;
    let drops = power::detect_nonmonotone(&series);
    series.meta.push("nonmonotone_ump", drops.ump.len());
    series.meta.push("nonmonotone_rand2", drops.rand2.len());
    emit_series(&series, &a.sink)
}

fn run_max_power(a: MaxPowerArgs) -> Result<()> {
    let problem = EquivProblem::new(a.n, a.theta1, a.theta2)?;
    let (ump, rand2) = power::argmax_power_theta(&problem, a.c, a.level_t, a.grid_step)?;
    let mut meta = SeriesMeta::new("max-power");
    meta.push("n", a.n);
    meta.push("theta1", a.theta1);
    meta.push("theta2", a.theta2);
    meta.push("c", a.c);
    meta.push("level_t", a.level_t);
    meta.push("grid_step", a.grid_step);
    let lines = [
        ("ump_argmax_theta", f6(ump.argmax_theta)),
        ("ump_max_power", f6(ump.max_power)),
        ("rand2_argmax_theta", f6(rand2.argmax_theta)),
        ("rand2_max_power", f6(rand2.max_power)),
    ];
    let mut payload = serde_json::Map::new();
    payload.insert("ump".into(), serde_json::to_value(ump)?);
    payload.insert("rand2".into(), serde_json::to_value(rand2)?);
    emit_report(&meta, &lines, payload, &a.sink)
}

fn run_power_vs_delta(a: PowerVsDeltaArgs) -> Result<()> {
    let mut series = power::power_vs_delta(
        a.n,
        a.theta,
        a.c,
        a.level_t,
        &a.delta_grid.points(),
        a.centering,
    )?;
    series.meta.push("delta_grid", a.delta_grid);
    emit_series(&series, &a.sink)
}

fn run_estimate_pi0(a: EstimatePi0Args) -> Result<()> {
    let mut meta = SeriesMeta::new("estimate-pi0");
    meta.push("lambda", a.lambda);
    meta.push("cap", a.cap);
    if let Some(path) = &a.pvalues {
        let ps = read_pvalue_file(path)?;
        let estimate = pi0::schweder_k0(&ps, a.lambda, a.cap)?;
        meta.push("source", path.display());
        meta.push("k", estimate.k);
        let lines = [
            ("k", estimate.k.to_string()),
            ("k0_hat", f6(estimate.k0_hat)),
            ("pi0_hat", f6(estimate.pi0_hat)),
            ("intercept", f6(estimate.intercept)),
            ("ecdf_at_lambda", f6(estimate.ecdf_at_lambda)),
            ("capped", estimate.capped.to_string()),
        ];
        let mut payload = serde_json::Map::new();
        payload.insert("estimate".into(), serde_json::to_value(estimate)?);
        return emit_report(&meta, &lines, payload, &a.sink);
    }

    let (theta1, theta2) = (
        a.theta1.expect("enforced by the parser"),
        a.theta2.expect("enforced by the parser"),
    );
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let regions = resolve_regions(a.regions.as_deref());
    let report = data::load_regions_path(&regions, &a.columns)?;
    let family = data::build_family(&report.kept, theta1, theta2)?;
    let spec = SimulationSpec::new(seed, a.rep + 1, a.c, a.lambda, 0.0)?;
    let draws = mc::simulate_family(&family, &spec, a.rep)?;
    let ump = pi0::schweder_k0(&draws.ump, a.lambda, a.cap)?;
    let rand2 = pi0::schweder_k0(&draws.rand2, a.lambda, a.cap)?;
    meta.push("source", regions.display());
    meta.push("theta1", theta1);
    meta.push("theta2", theta2);
    meta.push("c", a.c);
    meta.push("seed", seed);
    meta.push("rep", a.rep);
    meta.push("k", family.k());
    meta.push("k0_true", family.k0());
    let lines = [
        ("ump_k0_hat", f6(ump.k0_hat)),
        ("ump_pi0_hat", f6(ump.pi0_hat)),
        ("rand2_k0_hat", f6(rand2.k0_hat)),
        ("rand2_pi0_hat", f6(rand2.pi0_hat)),
    ];
    let mut payload = serde_json::Map::new();
    payload.insert("ump".into(), serde_json::to_value(ump)?);
    payload.insert("rand2".into(), serde_json::to_value(rand2)?);
    emit_report(&meta, &lines, payload, &a.sink)
}

fn run_simulate_table(a: SimulateTableArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let spec = SimulationSpec::new(seed, a.reps, a.c, a.lambda, a.alpha)?;
    let regions = resolve_regions(a.regions.as_deref());
    let report = data::load_regions_path(&regions, &a.columns)?;
    let pairs = match &a.pairs {
        Some(path) => read_pairs_file(path)?,
        None => DEFAULT_PAIRS.to_vec(),
    };
    let rows = pairs
        .iter()
        .map(|&(theta1, theta2)| mc::algorithm1_run(&report.kept, theta1, theta2, &spec))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = SeriesMeta::new("study-table");
    meta.push("seed", seed);
    meta.push("reps", a.reps);
    meta.push("c", a.c);
    meta.push("lambda", a.lambda);
    meta.push("alpha", a.alpha);
    meta.push("regions", regions.display());
    meta.push("k", report.kept.len());
    meta.push("rows_dropped", report.dropped.len());
    let mut w = open_sink(a.sink.out.as_deref())?;
    match a.sink.format {
        SeriesFormat::Csv => mc::write_table_csv(&rows, &meta, &mut w)?,
        SeriesFormat::Json => mc::write_table_json(&rows, &meta, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

fn run_fwer(a: FwerArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let spec = SimulationSpec::new(seed, a.reps, a.c, a.lambda, a.alpha)?;
    let regions = resolve_regions(a.regions.as_deref());
    let report = data::load_regions_path(&regions, &a.columns)?;
    let family = data::build_family(&report.kept, a.theta1, a.theta2)?;
    let estimate = mc::fwer_estimate(&family, &spec)?;
    let mut meta = SeriesMeta::new("fwer");
    meta.push("seed", seed);
    meta.push("reps", a.reps);
    meta.push("c", a.c);
    meta.push("lambda", a.lambda);
    meta.push("alpha", a.alpha);
    meta.push("theta1", a.theta1);
    meta.push("theta2", a.theta2);
    meta.push("regions", regions.display());
    meta.push("k", family.k());
    meta.push("k0_true", family.k0());
    let lines = [
        ("fwer_ump", f6(estimate.fwer_ump)),
        ("stderr_ump", f6(estimate.stderr_ump)),
        ("fwer_rand2", f6(estimate.fwer_rand2)),
        ("stderr_rand2", f6(estimate.stderr_rand2)),
    ];
    let mut payload = serde_json::Map::new();
    payload.insert("estimate".into(), serde_json::to_value(estimate)?);
    emit_report(&meta, &lines, payload, &a.sink)
}

fn run_oracle_check(a: OracleCheckArgs) -> Result<()> {
    let sweep = mc::oracle_deviation_sweep(a.max_n)?;
    let worst = sweep.max_ump_deviation.max(sweep.max_rand2_deviation);
    let passed = worst <= a.tol;
    let mut meta = SeriesMeta::new("oracle-check");
    meta.push("max_n", a.max_n);
    meta.push("tol", a.tol);
    let lines = [
        ("cases", sweep.cases.to_string()),
        ("max_ump_deviation", format!("{}", sweep.max_ump_deviation)),
        (
            "max_rand2_deviation",
            format!("{}", sweep.max_rand2_deviation),
        ),
        ("status", if passed { "ok" } else { "FAIL" }.to_string()),
    ];
    let mut payload = serde_json::Map::new();
    payload.insert("sweep".into(), serde_json::to_value(sweep)?);
    payload.insert("passed".into(), serde_json::Value::Bool(passed));
    emit_report(&meta, &lines, payload, &a.sink)?;
    if !passed {
        return Err(Error::config(format!(
            "oracle deviation {worst} exceeds tolerance {}",
            a.tol
        )));
    }
    Ok(())
}
