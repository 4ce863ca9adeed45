//! Cross-checks behind `aoi validate`: closed forms against the quadrature
//! oracle over a configuration grid, simulation against the closed forms,
//! and fault injection that proves the checks have teeth.

use aoi_core::{
    average_aoi, compare_reports, completion_moments_random_rescaled,
    conditional_deadline_moments_failure, conditional_deadline_moments_success,
    failure_split_plus_denominator, oracle_aoi, service_expectation_fixed_unshifted_decay,
    service_expectation_random_unnormalized, simulate, AoiReport, DeadlinePolicy,
    DiscrepancyReport, QuadratureSpec, Result, ServiceModel, SimConfig, SystemConfig,
};
use serde::Serialize;

use crate::output::policy_columns;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// A handful of configurations for a quick smoke check.
    Small,
    /// The release grid: every dimension the closed forms branch on.
    Full,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Small => "small",
            GridKind::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectKind {
    /// Failure split with the denominator sum added instead of subtracted.
    PlusDenominator,
    /// Completion moments with spurious device-count factors.
    RescaledCompletion,
    /// Delivered-service expectation missing the 1/N success normalization.
    UnnormalizedService,
    /// Fixed-deadline service decay missing the shift correction.
    UnshiftedDecay,
}

impl InjectKind {
    pub fn name(self) -> &'static str {
        match self {
            InjectKind::PlusDenominator => "plus-denominator",
            InjectKind::RescaledCompletion => "rescaled-completion",
            InjectKind::UnnormalizedService => "unnormalized-service",
            InjectKind::UnshiftedDecay => "unshifted-decay",
        }
    }
}

/// Flat configuration echo used in validation rows.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigSummary {
    pub policy: String,
    pub n: u32,
    pub k: u32,
    pub service_rate: f64,
    pub service_shift: f64,
    pub deadline_param: Option<f64>,
}

impl ConfigSummary {
    fn new(config: &SystemConfig) -> Self {
        let (policy, deadline_param) = policy_columns(config);
        ConfigSummary {
            policy,
            n: config.num_devices(),
            k: config.threshold(),
            service_rate: config.service().rate(),
            service_shift: config.service().shift(),
            deadline_param,
        }
    }
}

/// One closed-form-versus-oracle comparison. Per-quantity deltas are kept
/// only for failures; passing rows record just the worst offender.
#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub config: ConfigSummary,
    pub worst_quantity: String,
    pub worst_delta: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<DiscrepancyReport>,
}

/// One simulated quantity against its analytic value, tolerance three
/// standard errors.
#[derive(Debug, Clone, Serialize)]
pub struct SimCheck {
    pub config: ConfigSummary,
    pub quantity: String,
    pub simulated: f64,
    pub analytic: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub grid: String,
    pub threshold: f64,
    pub configs_checked: usize,
    pub analytic_oracle: Vec<OracleCheck>,
    pub simulation: Vec<SimCheck>,
    pub worst_quantity: String,
    pub worst_delta: f64,
    pub pass: bool,
}

/// Outcome of one deliberate-fault run: the report with the uncorrected
/// form spliced in, compared against the oracle.
#[derive(Debug, Clone, Serialize)]
pub struct InjectionOutcome {
    pub kind: String,
    pub config: ConfigSummary,
    pub expected_quantities: Vec<String>,
    pub comparison: DiscrepancyReport,
    /// True when the comparison failed on one of the expected quantities.
    pub detected: bool,
}

fn fixed_config(n: u32, k: u32, rate: f64, shift: f64, horizon: f64) -> Result<SystemConfig> {
    SystemConfig::new(
        n,
        k,
        ServiceModel::new(rate, shift)?,
        DeadlinePolicy::Fixed { horizon },
    )
}

fn random_config(n: u32, k: u32, rate: f64, shift: f64, mean: f64) -> Result<SystemConfig> {
    SystemConfig::new(
        n,
        k,
        ServiceModel::new(rate, shift)?,
        DeadlinePolicy::shifted_exponential_with_mean(mean, shift)?,
    )
}

/// (N, K) pairs exercising the threshold extremes and an interior point.
fn dim_pairs(grid: GridKind) -> Vec<(u32, u32)> {
    match grid {
        GridKind::Small => vec![(1, 1), (5, 3)],
        GridKind::Full => vec![
            (1, 1),
            (2, 1),
            (2, 2),
            (5, 1),
            (5, 3),
            (5, 5),
            (10, 1),
            (10, 5),
            (10, 10),
        ],
    }
}

fn grid_configs(grid: GridKind) -> Result<Vec<SystemConfig>> {
    let (rates, shifts): (Vec<f64>, Vec<f64>) = match grid {
        GridKind::Small => (vec![0.5], vec![0.1]),
        GridKind::Full => (vec![1.0 / 3.0, 0.5, 1.0], vec![0.0, 0.1]),
    };
    let mut configs = Vec::new();
    for &(n, k) in &dim_pairs(grid) {
        for &rate in &rates {
            for &shift in &shifts {
                let horizons: Vec<f64> = match grid {
                    GridKind::Small => vec![1.0],
                    GridKind::Full => vec![shift + 0.1, 1.0, 3.0, 10.0],
                };
                for horizon in horizons {
                    configs.push(fixed_config(n, k, rate, shift, horizon)?);
                }
                let means: Vec<f64> = match grid {
                    GridKind::Small => vec![3.0],
                    GridKind::Full => vec![1.0, 3.0, 10.0],
                };
                for mean in means {
                    configs.push(random_config(n, k, rate, shift, mean)?);
                }
            }
        }
    }
    if grid == GridKind::Small {
        // Long horizons are where quadrature truncation is largest (~1e-10
        // here); this keeps even the small grid honest about thresholds no
        // numerical oracle can certify.
        configs.push(fixed_config(5, 3, 1.0, 0.1, 10.0)?);
    }
    Ok(configs)
}

/// Configurations re-simulated per run, with the update budget per grid.
fn sim_configs(grid: GridKind) -> Result<Vec<(SystemConfig, SimConfig)>> {
    let (pairs, updates): (Vec<(u32, u32)>, u64) = match grid {
        GridKind::Small => (vec![(5, 3), (10, 7)], 20_000),
        GridKind::Full => (vec![(1, 1), (2, 2), (5, 3), (10, 7)], 50_000),
    };
    let sim = SimConfig {
        num_updates: updates,
        ..SimConfig::default()
    };
    let mut out = Vec::new();
    for &(n, k) in &pairs {
        out.push((fixed_config(n, k, 0.5, 0.1, 1.0)?, sim));
        out.push((random_config(n, k, 0.5, 0.1, 3.0)?, sim));
    }
    Ok(out)
}

pub fn run_validation(grid: GridKind, threshold: f64) -> Result<ValidationReport> {
    let spec = QuadratureSpec::default();
    let mut oracle_checks = Vec::new();
    let mut worst_delta = 0.0f64;
    let mut worst_quantity = String::from("none");
    let configs = grid_configs(grid)?;
    for config in &configs {
        let closed = average_aoi(config)?;
        let oracle = oracle_aoi(config, &spec)?;
        let cmp = compare_reports(&closed, &oracle, threshold)?;
        if cmp.worst_delta > worst_delta {
            worst_delta = cmp.worst_delta;
            worst_quantity = cmp.worst_quantity.clone();
        }
        oracle_checks.push(OracleCheck {
            config: ConfigSummary::new(config),
            worst_quantity: cmp.worst_quantity.clone(),
            worst_delta: cmp.worst_delta,
            pass: cmp.pass,
            detail: (!cmp.pass).then_some(cmp),
        });
    }

    let mut sim_checks = Vec::new();
    for (config, sim) in sim_configs(grid)? {
        let analytic = average_aoi(&config)?;
        let result = simulate(&config, &sim)?;
        let summary = ConfigSummary::new(&config);
        let total_updates = (sim.num_updates * u64::from(sim.replications)) as f64;
        let p = analytic.cases.p_success;
        // Binomial standard error for the delivered fraction; the age and
        // peak tolerances come from the run's batch-means errors.
        let frac_tol = 3.0 * (p * (1.0 - p) / total_updates).sqrt() + 1e-12;
        let checks = [
            (
                "average_aoi",
                result.average_aoi,
                analytic.average_aoi,
                3.0 * result.se_aoi(),
            ),
            (
                "average_peak_aoi",
                result.average_peak_aoi,
                analytic.average_peak_aoi,
                3.0 * result.se_peak(),
            ),
            ("success_fraction", result.success_fraction, p, frac_tol),
        ];
        for (quantity, simulated, analytic_value, tolerance) in checks {
            sim_checks.push(SimCheck {
                config: summary.clone(),
                quantity: quantity.into(),
                simulated,
                analytic: analytic_value,
                tolerance,
                pass: (simulated - analytic_value).abs() <= tolerance,
            });
        }
    }

    let pass = oracle_checks.iter().all(|c| c.pass) && sim_checks.iter().all(|c| c.pass);
    Ok(ValidationReport {
        grid: grid.name().into(),
        threshold,
        configs_checked: configs.len(),
        analytic_oracle: oracle_checks,
        simulation: sim_checks,
        worst_quantity,
        worst_delta,
        pass,
    })
}

/// Splices one deliberately uncorrected closed form into an otherwise
/// correct report and compares against the oracle. A healthy validator
/// fails the comparison on exactly the quantities the fault feeds.
pub fn run_injection(kind: InjectKind, threshold: f64) -> Result<InjectionOutcome> {
    let (config, expected): (SystemConfig, Vec<&str>) = match kind {
        InjectKind::PlusDenominator => (fixed_config(10, 7, 0.5, 0.1, 1.0)?, vec!["p_f1", "p_f2"]),
        InjectKind::RescaledCompletion => (
            random_config(10, 7, 0.5, 0.1, 3.0)?,
            vec!["e_xf", "e_xf2", "e_xs", "e_xs2"],
        ),
        InjectKind::UnnormalizedService => (random_config(10, 7, 0.5, 0.1, 3.0)?, vec!["e_that"]),
        InjectKind::UnshiftedDecay => (fixed_config(10, 7, 0.5, 0.1, 1.0)?, vec!["e_that"]),
    };

    let mut injected: AoiReport = average_aoi(&config)?;
    match kind {
        InjectKind::PlusDenominator => {
            let (p_f1, p_f2) = failure_split_plus_denominator(&config)?;
            injected.cases.p_f1 = p_f1;
            injected.cases.p_f2 = p_f2;
        }
        InjectKind::RescaledCompletion => {
            // The faulty completion moments propagate into both gap
            // mixtures, exactly as they would inside the engine.
            let (b1, b2) = completion_moments_random_rescaled(&config)?;
            let (df1, df2) = conditional_deadline_moments_failure(&config)?;
            let (ds1, ds2) = conditional_deadline_moments_success(&config)?;
            let c = injected.cases;
            injected.moments.e_xf = c.p_f1 * b1 + c.p_f2 * df1;
            injected.moments.e_xf2 = c.p_f1 * b2 + c.p_f2 * df2;
            injected.moments.e_xs = c.p_s1 * b1 + c.p_s2 * ds1;
            injected.moments.e_xs2 = c.p_s1 * b2 + c.p_s2 * ds2;
        }
        InjectKind::UnnormalizedService => {
            injected.moments.e_that = service_expectation_random_unnormalized(&config)?;
        }
        InjectKind::UnshiftedDecay => {
            injected.moments.e_that = service_expectation_fixed_unshifted_decay(&config)?;
        }
    }

    let oracle = oracle_aoi(&config, &QuadratureSpec::default())?;
    let comparison = compare_reports(&injected, &oracle, threshold)?;
    let detected = !comparison.pass && expected.contains(&comparison.worst_quantity.as_str());
    Ok(InjectionOutcome {
        kind: kind.name().into(),
        config: ConfigSummary::new(&config),
        expected_quantities: expected.into_iter().map(String::from).collect(),
        comparison,
        detected,
    })
}
