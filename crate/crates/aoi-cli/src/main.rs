//! `aoi`: age-of-information analysis for K-of-N multicast status updating.
//!
//! Five subcommands: `analyze` (closed form), `simulate` (Monte Carlo),
//! `sweep` (batch evaluation along one axis), `optimize` (deadline search),
//! and `validate` (self-check against the quadrature oracle).
//!
//! Exit codes are part of the interface:
//!   0  success (for validate: every check passed)
//!   1  validation failure, precision loss, or I/O error
//!   2  invalid flags, file, or configuration
//!   3  divergent age (the system can never deliver an update)
//!   4  simulation produced no completed renewal cycle
//!
//! A downstream reader closing stdout early (`aoi ... | head`) is not an
//! error: broken-pipe writes exit 0 quietly.
//!
//! Runs are deterministic given the flags. Outputs embed a manifest echoing
//! the invocation; set SOURCE_DATE_EPOCH to stamp it with a build time.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use aoi_core::{
    optimize_deadline, simulate, sweep, AoiReport, DeadlinePolicy, Objective, OptimizeSpec,
    PolicyKind, ServiceModel, SimConfig, SimResult, SweepRow, SystemConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

mod manifest;
mod output;
mod sweepfile;
mod validate;

use manifest::RunManifest;
use output::{fmt as num, fmt_opt, policy_columns, write_csv, write_json};
use validate::{GridKind, InjectKind};

/// Anything a subcommand can fail with, mapped onto the exit codes above.
enum Failure {
    Core(aoi_core::Error),
    Usage(String),
    Io(std::io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e {
                aoi_core::Error::Domain(_) | aoi_core::Error::Capacity(_) => 2,
                aoi_core::Error::Divergent(_) | aoi_core::Error::ImpossibleEvent(_) => 3,
                aoi_core::Error::NoCycles(_) => 4,
                aoi_core::Error::Precision { .. } => 1,
            },
            Failure::Usage(_) => 2,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(msg) => write!(f, "{msg}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<aoi_core::Error> for Failure {
    fn from(e: aoi_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

#[derive(Parser)]
#[command(
    name = "aoi",
    version,
    about = "Age-of-information analysis for K-of-N multicast status updating"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact age report for one configuration.
    Analyze(AnalyzeArgs),
    /// Monte Carlo age estimate with batch-means confidence intervals.
    Simulate(SimulateArgs),
    /// Evaluate many configurations along one swept axis, CSV out.
    Sweep(SweepArgs),
    /// Search for the deadline parameter minimizing an age objective.
    Optimize(OptimizeArgs),
    /// Compare the closed forms against quadrature and simulation.
    Validate(ValidateArgs),
}

/// Deadline policy as spelled on the command line.
#[derive(Clone, Debug)]
enum DeadlineSpec {
    None,
    Fixed(f64),
    Exp(f64),
}

fn parse_deadline(text: &str) -> Result<DeadlineSpec, String> {
    if text == "none" {
        return Ok(DeadlineSpec::None);
    }
    if let Some(v) = text.strip_prefix("fixed:") {
        return v
            .parse()
            .map(DeadlineSpec::Fixed)
            .map_err(|_| format!("bad horizon {v:?}"));
    }
    if let Some(v) = text.strip_prefix("exp:") {
        return v
            .parse()
            .map(DeadlineSpec::Exp)
            .map_err(|_| format!("bad mean {v:?}"));
    }
    Err(format!(
        "expected none, fixed:<horizon>, or exp:<mean>, got {text:?}"
    ))
}

impl DeadlineSpec {
    fn policy(&self, service_shift: f64) -> aoi_core::Result<DeadlinePolicy> {
        match *self {
            DeadlineSpec::None => Ok(DeadlinePolicy::Infinite),
            DeadlineSpec::Fixed(horizon) => Ok(DeadlinePolicy::Fixed { horizon }),
            DeadlineSpec::Exp(mean) => {
                DeadlinePolicy::shifted_exponential_with_mean(mean, service_shift)
            }
        }
    }

    fn render(&self) -> String {
        match *self {
            DeadlineSpec::None => "none".into(),
            DeadlineSpec::Fixed(h) => format!("fixed:{}", num(h)),
            DeadlineSpec::Exp(m) => format!("exp:{}", num(m)),
        }
    }
}

#[derive(Args)]
struct SystemArgs {
    /// Number of devices N.
    #[arg(long)]
    n: u32,
    /// Reception threshold K: the round ends at the K-th completion.
    #[arg(long)]
    k: u32,
    /// Exponential service rate of each device.
    #[arg(long)]
    service_rate: f64,
    /// Deterministic minimum service time.
    #[arg(long, default_value_t = 0.0)]
    service_shift: f64,
    /// Deadline policy: none, fixed:<horizon>, or exp:<mean>.
    #[arg(long, value_parser = parse_deadline, default_value = "none")]
    deadline: DeadlineSpec,
}

impl SystemArgs {
    fn config(&self) -> Result<SystemConfig, Failure> {
        let service = ServiceModel::new(self.service_rate, self.service_shift)?;
        let deadline = self.deadline.policy(self.service_shift)?;
        Ok(SystemConfig::new(self.n, self.k, service, deadline)?)
    }

    fn parameters(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "k": self.k,
            "service_rate": self.service_rate,
            "service_shift": self.service_shift,
            "deadline": self.deadline.render(),
        })
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Update rounds per replication.
    #[arg(long, default_value_t = 100_000)]
    updates: u64,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Batches for the batch-means confidence intervals.
    #[arg(long, default_value_t = 20)]
    batches: u32,
    /// Independent replications merged into the estimate.
    #[arg(long, default_value_t = 1)]
    replications: u32,
    /// 1-based index of the tracked device.
    #[arg(long, default_value_t = 1)]
    tracked: u32,
    /// Output encoding.
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description file (`key = value` lines; see the README).
    #[arg(long)]
    file: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    /// Fixed horizon; the searched parameter is the horizon.
    Fixed,
    /// Random shifted-exponential deadline; the parameter is its mean.
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Time-average age.
    Average,
    /// Average peak age.
    Peak,
}

fn parse_bracket(text: &str) -> Result<(f64, f64), String> {
    let Some((low, high)) = text.split_once(':') else {
        return Err(format!("expected low:high, got {text:?}"));
    };
    let low = low
        .parse()
        .map_err(|_| format!("bad bracket end {low:?}"))?;
    let high = high
        .parse()
        .map_err(|_| format!("bad bracket end {high:?}"))?;
    Ok((low, high))
}

#[derive(Args)]
struct OptimizeArgs {
    /// Number of devices N.
    #[arg(long)]
    n: u32,
    /// Reception threshold K.
    #[arg(long)]
    k: u32,
    /// Exponential service rate of each device.
    #[arg(long)]
    service_rate: f64,
    /// Deterministic minimum service time.
    #[arg(long, default_value_t = 0.0)]
    service_shift: f64,
    /// Deadline family to search over.
    #[arg(long, value_enum)]
    policy: PolicyArg,
    /// Quantity to minimize.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Average)]
    objective: ObjectiveArg,
    /// Search interval for the deadline parameter, as low:high.
    #[arg(long, value_parser = parse_bracket)]
    bracket: (f64, f64),
    /// Final bracket width.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// Prescan grid density used to localize the minimum.
    #[arg(long, default_value_t = 64)]
    prescan: u32,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Small,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum InjectArg {
    /// Failure split with the denominator sum added instead of subtracted.
    PlusDenominator,
    /// Completion moments carrying spurious device-count factors.
    RescaledCompletion,
    /// Service expectation missing the success normalization.
    UnnormalizedService,
    /// Fixed-deadline decay missing the shift correction.
    UnshiftedDecay,
}

#[derive(Args)]
struct ValidateArgs {
    /// Configuration grid to check.
    #[arg(long, value_enum, default_value_t = GridArg::Small)]
    grid: GridArg,
    /// Maximum tolerated relative discrepancy per quantity.
    #[arg(long, default_value_t = 1e-8)]
    threshold: f64,
    /// Splice a known-bad closed form into the report; the run must fail
    /// naming the fed quantity, proving the comparison has teeth.
    #[arg(long, value_enum)]
    inject: Option<InjectArg>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Optimize(args) => cmd_optimize(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Leading columns identifying the configuration, shared by every CSV.
fn config_cells(config: &SystemConfig) -> Vec<String> {
    let (policy, deadline_param) = policy_columns(config);
    vec![
        policy,
        config.num_devices().to_string(),
        config.threshold().to_string(),
        num(config.service().rate()),
        num(config.service().shift()),
        fmt_opt(deadline_param),
    ]
}

const REPORT_HEADER: &[&str] = &[
    "policy",
    "n",
    "k",
    "service_rate",
    "service_shift",
    "deadline_param",
    "average_aoi",
    "average_peak_aoi",
    "p_success",
    "p_f1",
    "p_f2",
    "p_s1",
    "p_s2",
    "e_xf",
    "e_xf2",
    "e_xs",
    "e_xs2",
    "e_w",
    "e_w2",
    "e_m",
    "e_that",
];

fn report_cells(report: &AoiReport) -> Vec<String> {
    let mut cells = config_cells(&report.config);
    cells.extend(
        [
            report.average_aoi,
            report.average_peak_aoi,
            report.cases.p_success,
            report.cases.p_f1,
            report.cases.p_f2,
            report.cases.p_s1,
            report.cases.p_s2,
            report.moments.e_xf,
            report.moments.e_xf2,
            report.moments.e_xs,
            report.moments.e_xs2,
            report.moments.e_w,
            report.moments.e_w2,
            report.moments.e_m,
            report.moments.e_that,
        ]
        .map(num),
    );
    cells
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, Failure> {
    let config = args.system.config()?;
    let report = aoi_core::average_aoi(&config)?;
    let manifest = RunManifest::new("analyze", args.format.name(), args.system.parameters());
    let mut out = open_output(&args.output)?;
    match args.format {
        Format::Json => write_json(&mut out, &manifest, &report)?,
        Format::Csv => write_csv(&mut out, &manifest, REPORT_HEADER, &[report_cells(&report)])?,
    }
    Ok(0)
}

const SIM_HEADER: &[&str] = &[
    "policy",
    "n",
    "k",
    "service_rate",
    "service_shift",
    "deadline_param",
    "updates",
    "seed",
    "batches",
    "replications",
    "tracked_device",
    "average_aoi",
    "average_peak_aoi",
    "ci_halfwidth_aoi",
    "ci_halfwidth_peak",
    "success_fraction",
    "cycles",
];

fn sim_cells(result: &SimResult) -> Vec<String> {
    let mut cells = config_cells(&result.config);
    cells.extend([
        result.sim.num_updates.to_string(),
        result.sim.seed.to_string(),
        result.sim.num_batches.to_string(),
        result.sim.replications.to_string(),
        result.sim.tracked_device.to_string(),
        num(result.average_aoi),
        num(result.average_peak_aoi),
        num(result.ci_halfwidth_aoi),
        num(result.ci_halfwidth_peak),
        num(result.success_fraction),
        result.cycles.to_string(),
    ]);
    cells
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, Failure> {
    let config = args.system.config()?;
    let sim = SimConfig {
        num_updates: args.updates,
        seed: args.seed,
        tracked_device: args.tracked,
        num_batches: args.batches,
        replications: args.replications,
    };
    let result = simulate(&config, &sim)?;
    let mut parameters = args.system.parameters();
    if let serde_json::Value::Object(map) = &mut parameters {
        map.insert("updates".into(), args.updates.into());
        map.insert("seed".into(), args.seed.into());
        map.insert("batches".into(), args.batches.into());
        map.insert("replications".into(), args.replications.into());
        map.insert("tracked".into(), args.tracked.into());
    }
    let manifest = RunManifest::new("simulate", args.format.name(), parameters);
    let mut out = open_output(&args.output)?;
    match args.format {
        Format::Json => write_json(&mut out, &manifest, &result)?,
        Format::Csv => write_csv(&mut out, &manifest, SIM_HEADER, &[sim_cells(&result)])?,
    }
    Ok(0)
}

const SWEEP_HEADER: &[&str] = &[
    "policy",
    "n",
    "k",
    "service_rate",
    "service_shift",
    "deadline_param",
    "engine",
    "average_aoi",
    "peak_aoi",
    "p_success",
    "e_w",
    "e_xs",
    "e_that",
    "ci_aoi",
    "error",
];

fn sweep_cells(row: &SweepRow) -> Vec<String> {
    vec![
        row.policy.clone(),
        row.num_devices.to_string(),
        row.threshold.to_string(),
        num(row.service_rate),
        num(row.service_shift),
        fmt_opt(row.deadline_param),
        row.engine.clone(),
        fmt_opt(row.average_aoi),
        fmt_opt(row.average_peak_aoi),
        fmt_opt(row.p_success),
        fmt_opt(row.e_w),
        fmt_opt(row.e_xs),
        fmt_opt(row.e_that),
        fmt_opt(row.ci_halfwidth_aoi),
        row.error.clone().unwrap_or_default(),
    ]
}

fn cmd_sweep(args: SweepArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&args.file).map_err(|e| {
        Failure::Usage(format!(
            "cannot read sweep file {}: {e}",
            args.file.display()
        ))
    })?;
    let plan = sweepfile::parse_sweep_file(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.file.display())))?;
    let rows = sweep(&plan.template, plan.axis, &plan.values, &plan.engines)?;
    let manifest = RunManifest::new(
        "sweep",
        "csv",
        serde_json::json!({
            "file": args.file.display().to_string(),
            "rows": rows.len(),
        }),
    );
    let cells: Vec<Vec<String>> = rows.iter().map(sweep_cells).collect();
    let mut out = open_output(&args.output)?;
    write_csv(&mut out, &manifest, SWEEP_HEADER, &cells)?;
    Ok(0)
}

fn cmd_optimize(args: OptimizeArgs) -> Result<u8, Failure> {
    let service = ServiceModel::new(args.service_rate, args.service_shift)?;
    let template = SystemConfig::new(args.n, args.k, service, DeadlinePolicy::Infinite)?;
    let objective = match args.objective {
        ObjectiveArg::Average => Objective::AverageAoi,
        ObjectiveArg::Peak => Objective::AveragePeakAoi,
    };
    let policy_kind = match args.policy {
        PolicyArg::Fixed => PolicyKind::Fixed,
        PolicyArg::Random => PolicyKind::RandomMean,
    };
    let spec = OptimizeSpec {
        objective,
        policy_kind,
        bracket: args.bracket,
        tolerance: args.tol,
        grid_prescan_points: args.prescan,
    };
    let result = optimize_deadline(&template, &spec)?;
    let manifest = RunManifest::new(
        "optimize",
        "json",
        serde_json::json!({
            "n": args.n,
            "k": args.k,
            "service_rate": args.service_rate,
            "service_shift": args.service_shift,
            "policy": match args.policy { PolicyArg::Fixed => "fixed", PolicyArg::Random => "random" },
            "objective": match args.objective { ObjectiveArg::Average => "average", ObjectiveArg::Peak => "peak" },
            "bracket": format!("{}:{}", num(args.bracket.0), num(args.bracket.1)),
            "tol": args.tol,
            "prescan": args.prescan,
        }),
    );
    let mut out = open_output(&args.output)?;
    write_json(&mut out, &manifest, &result)?;
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, Failure> {
    let grid = match args.grid {
        GridArg::Small => GridKind::Small,
        GridArg::Full => GridKind::Full,
    };
    let inject_name = args.inject.map(|kind| {
        match kind {
            InjectArg::PlusDenominator => InjectKind::PlusDenominator,
            InjectArg::RescaledCompletion => InjectKind::RescaledCompletion,
            InjectArg::UnnormalizedService => InjectKind::UnnormalizedService,
            InjectArg::UnshiftedDecay => InjectKind::UnshiftedDecay,
        }
        .name()
    });
    let manifest = RunManifest::new(
        "validate",
        "json",
        serde_json::json!({
            "grid": grid.name(),
            "threshold": args.threshold,
            "inject": inject_name,
        }),
    );
    let mut out = open_output(&args.output)?;

    if let Some(kind) = args.inject {
        let kind = match kind {
            InjectArg::PlusDenominator => InjectKind::PlusDenominator,
            InjectArg::RescaledCompletion => InjectKind::RescaledCompletion,
            InjectArg::UnnormalizedService => InjectKind::UnnormalizedService,
            InjectArg::UnshiftedDecay => InjectKind::UnshiftedDecay,
        };
        let outcome = validate::run_injection(kind, args.threshold)?;
        write_json(&mut out, &manifest, &outcome)?;
        return if outcome.comparison.pass {
            eprintln!(
                "injected {} was NOT caught at threshold {}",
                outcome.kind, args.threshold
            );
            Ok(0)
        } else {
            eprintln!(
                "validation failed on {} (delta {:.3e}), as the injected {} fault should",
                outcome.comparison.worst_quantity, outcome.comparison.worst_delta, outcome.kind
            );
            Ok(1)
        };
    }

    let report = validate::run_validation(grid, args.threshold)?;
    write_json(&mut out, &manifest, &report)?;
    if report.pass {
        Ok(0)
    } else {
        eprintln!(
            "validation failed: worst quantity {} at delta {:.3e} (threshold {})",
            report.worst_quantity, report.worst_delta, report.threshold
        );
        Ok(1)
    }
}
