//! Deadline optimization and parameter sweeps over the analytic engines.
//!
//! The age is not convex in the deadline but is unimodal on the brackets of
//! interest (steeply falling as failed rounds stop blocking regeneration,
//! then slowly rising toward the no-deadline limit), so a coarse grid
//! prescan followed by ternary refinement around the best grid cell finds
//! the minimizer without derivative information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeadlinePolicy, SystemConfig};
use crate::report::AoiReport;
use crate::sim::{simulate, SimConfig};

/// Which scalar of the age report to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    AverageAoi,
    AveragePeakAoi,
}

impl Objective {
    fn extract(self, report: &AoiReport) -> f64 {
        match self {
            Objective::AverageAoi => report.average_aoi,
            Objective::AveragePeakAoi => report.average_peak_aoi,
        }
    }
}

/// Which deadline family the decision variable parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// The variable is the fixed per-round horizon.
    Fixed,
    /// The variable is the mean of the random per-round deadline.
    RandomMean,
}

/// Search parameters for [`optimize_deadline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSpec {
    pub objective: Objective,
    pub policy_kind: PolicyKind,
    /// Inclusive search interval for the deadline parameter; both ends must
    /// exceed the service shift.
    pub bracket: (f64, f64),
    /// Final bracket width; the answer is within this of a local minimizer.
    pub tolerance: f64,
    /// Uniform prescan grid size used to localize the minimum.
    pub grid_prescan_points: u32,
}

impl OptimizeSpec {
    /// Search for the deadline parameter minimizing `objective` over
    /// `bracket` with the default tolerance and prescan density.
    pub fn new(objective: Objective, policy_kind: PolicyKind, bracket: (f64, f64)) -> Self {
        OptimizeSpec {
            objective,
            policy_kind,
            bracket,
            tolerance: 1e-4,
            grid_prescan_points: 64,
        }
    }
}

/// Outcome of a deadline search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    /// Minimizing deadline parameter (horizon or mean per the policy kind).
    pub best_deadline: f64,
    /// Objective value at `best_deadline`.
    pub best_value: f64,
    /// Number of objective evaluations spent.
    pub evaluations: u64,
    /// Best prescan grid point as (deadline, value); the refined result is
    /// never worse.
    pub prescan_minimum: (f64, f64),
}

struct ObjectiveFn<'a> {
    template: &'a SystemConfig,
    spec: &'a OptimizeSpec,
    evaluations: u64,
}

impl ObjectiveFn<'_> {
    fn eval(&mut self, deadline: f64) -> Result<f64> {
        self.evaluations += 1;
        let shift = self.template.service().shift();
        let policy = match self.spec.policy_kind {
            PolicyKind::Fixed => DeadlinePolicy::Fixed { horizon: deadline },
            PolicyKind::RandomMean => {
                DeadlinePolicy::shifted_exponential_with_mean(deadline, shift)?
            }
        };
        let config = self.template.with_deadline(policy)?;
        let report = crate::average_aoi(&config)?;
        let value = self.spec.objective.extract(&report);
        if !value.is_finite() {
            return Err(Error::Divergent(format!(
                "objective is not finite at deadline parameter {deadline}"
            )));
        }
        Ok(value)
    }
}

/// Minimize the average (or peak) age over a deadline-parameter bracket.
///
/// Errors: a malformed bracket, tolerance, or prescan size is a domain
/// error; a divergent objective anywhere the search evaluates is surfaced
/// with the offending deadline parameter.
pub fn optimize_deadline(config: &SystemConfig, spec: &OptimizeSpec) -> Result<OptimizeResult> {
    let (low, high) = spec.bracket;
    let shift = config.service().shift();
    if !(low.is_finite() && high.is_finite()) || low > high {
        return Err(Error::Domain(format!(
            "bracket [{low}, {high}] must be finite with low <= high"
        )));
    }
    if low <= shift {
        return Err(Error::Domain(format!(
            "bracket low end {low} must exceed the service shift {shift}"
        )));
    }
    if !(spec.tolerance.is_finite() && spec.tolerance > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive, got {}",
            spec.tolerance
        )));
    }
    if spec.grid_prescan_points < 2 {
        return Err(Error::Domain(format!(
            "prescan needs at least 2 grid points, got {}",
            spec.grid_prescan_points
        )));
    }

    let mut f = ObjectiveFn {
        template: config,
        spec,
        evaluations: 0,
    };

    if low == high {
        let value = f.eval(low).map_err(|e| at_deadline(e, low))?;
        return Ok(OptimizeResult {
            best_deadline: low,
            best_value: value,
            evaluations: f.evaluations,
            prescan_minimum: (low, value),
        });
    }

    let points = spec.grid_prescan_points as usize;
    let step = (high - low) / (points - 1) as f64;
    let mut grid = Vec::with_capacity(points);
    for i in 0..points {
        let d = if i == points - 1 {
            high
        } else {
            low + step * i as f64
        };
        let value = f.eval(d).map_err(|e| at_deadline(e, d))?;
        grid.push((d, value));
    }
    let best_index = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("prescan grid is non-empty");
    let prescan_minimum = grid[best_index];

    // Ternary refinement inside the grid cells adjacent to the best point.
    let mut a = grid[best_index.saturating_sub(1)].0;
    let mut b = grid[(best_index + 1).min(points - 1)].0;
    while b - a > spec.tolerance {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        let v1 = f.eval(m1).map_err(|e| at_deadline(e, m1))?;
        let v2 = f.eval(m2).map_err(|e| at_deadline(e, m2))?;
        if v1 < v2 {
            b = m2;
        } else {
            a = m1;
        }
    }
    let center = 0.5 * (a + b);
    let center_value = f.eval(center).map_err(|e| at_deadline(e, center))?;

    // The prescan minimum is kept whenever refinement cannot beat it, so the
    // reported optimum never regresses below what the grid already found.
    let (best_deadline, best_value) = if center_value <= prescan_minimum.1 {
        (center, center_value)
    } else {
        prescan_minimum
    };
    Ok(OptimizeResult {
        best_deadline,
        best_value,
        evaluations: f.evaluations,
        prescan_minimum,
    })
}

fn at_deadline(error: Error, deadline: f64) -> Error {
    match error {
        Error::Divergent(message) => {
            Error::Divergent(format!("deadline parameter {deadline}: {message}"))
        }
        other => other,
    }
}

/// Which template parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Deadline parameter of the template's policy family; the value
    /// `+inf` selects the no-deadline policy.
    Deadline,
    /// Completion threshold K.
    ThresholdK,
    /// Number of devices N.
    NumDevicesN,
}

/// Which engines produce rows for each swept value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSelection {
    /// Emit a closed-form row per value.
    pub analytic: bool,
    /// Emit a simulation row per value with these parameters.
    pub simulation: Option<SimConfig>,
}

impl Default for EngineSelection {
    fn default() -> Self {
        EngineSelection {
            analytic: true,
            simulation: None,
        }
    }
}

/// One sweep observation: the configuration coordinates, which engine
/// produced it, and the headline quantities. A value that cannot be
/// analyzed yields a row with `error` set instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Deadline family: "infinite", "fixed", or "random".
    pub policy: String,
    pub num_devices: u32,
    pub threshold: u32,
    pub service_rate: f64,
    pub service_shift: f64,
    /// Horizon or mean deadline; absent for the no-deadline policy.
    pub deadline_param: Option<f64>,
    /// "analytic" or "simulation".
    pub engine: String,
    pub average_aoi: Option<f64>,
    pub average_peak_aoi: Option<f64>,
    pub p_success: Option<f64>,
    pub e_w: Option<f64>,
    pub e_xs: Option<f64>,
    pub e_that: Option<f64>,
    /// 95% halfwidth on `average_aoi`; simulation rows only.
    pub ci_halfwidth_aoi: Option<f64>,
    /// Why this row has no numbers, when analysis failed.
    pub error: Option<String>,
}

impl SweepRow {
    fn skeleton(config: &SystemConfig, engine: &str) -> SweepRow {
        let (policy, deadline_param) = match config.deadline() {
            DeadlinePolicy::Infinite => ("infinite", None),
            DeadlinePolicy::Fixed { horizon } => ("fixed", Some(horizon)),
            p @ DeadlinePolicy::ShiftedExponential { .. } => ("random", Some(p.mean())),
        };
        SweepRow {
            policy: policy.into(),
            num_devices: config.num_devices(),
            threshold: config.threshold(),
            service_rate: config.service().rate(),
            service_shift: config.service().shift(),
            deadline_param,
            engine: engine.into(),
            average_aoi: None,
            average_peak_aoi: None,
            p_success: None,
            e_w: None,
            e_xs: None,
            e_that: None,
            ci_halfwidth_aoi: None,
            error: None,
        }
    }

    fn failed(template: &SystemConfig, engine: &str, message: String) -> SweepRow {
        let mut row = SweepRow::skeleton(template, engine);
        row.error = Some(message);
        row
    }
}

fn integer_value(value: f64, what: &str) -> Result<u32> {
    if !value.is_finite() || value.fract() != 0.0 || !(1.0..=f64::from(u32::MAX)).contains(&value) {
        return Err(Error::Domain(format!(
            "{what} must be a positive integer, got {value}"
        )));
    }
    Ok(value as u32)
}

fn apply_axis(template: &SystemConfig, axis: SweepAxis, value: f64) -> Result<SystemConfig> {
    match axis {
        SweepAxis::Deadline => {
            let policy = if value == f64::INFINITY {
                DeadlinePolicy::Infinite
            } else {
                match template.deadline() {
                    DeadlinePolicy::Infinite => {
                        return Err(Error::Domain(
                            "deadline sweep needs a fixed or random base policy to vary".into(),
                        ))
                    }
                    DeadlinePolicy::Fixed { .. } => DeadlinePolicy::Fixed { horizon: value },
                    DeadlinePolicy::ShiftedExponential { shift, .. } => {
                        DeadlinePolicy::shifted_exponential_with_mean(value, shift)?
                    }
                }
            };
            template.with_deadline(policy)
        }
        SweepAxis::ThresholdK => {
            let k = integer_value(value, "threshold")?;
            template.with_dimensions(template.num_devices(), k)
        }
        SweepAxis::NumDevicesN => {
            let n = integer_value(value, "device count")?;
            template.with_dimensions(n, template.threshold())
        }
    }
}

fn analytic_row(config: &SystemConfig) -> SweepRow {
    let mut row = SweepRow::skeleton(config, "analytic");
    match crate::average_aoi(config) {
        Ok(report) => {
            row.average_aoi = Some(report.average_aoi);
            row.average_peak_aoi = Some(report.average_peak_aoi);
            row.p_success = Some(report.cases.p_success);
            row.e_w = Some(report.moments.e_w);
            row.e_xs = Some(report.moments.e_xs);
            row.e_that = Some(report.moments.e_that);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

fn simulation_row(config: &SystemConfig, sim: &SimConfig) -> SweepRow {
    let mut row = SweepRow::skeleton(config, "simulation");
    match simulate(config, sim) {
        Ok(result) => {
            row.average_aoi = Some(result.average_aoi);
            row.average_peak_aoi = Some(result.average_peak_aoi);
            row.p_success = Some(result.success_fraction);
            row.ci_halfwidth_aoi = Some(result.ci_halfwidth_aoi);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Evaluate the selected engines at each value of the swept axis.
///
/// Rows come back in value order, analytic before simulation per value.
/// Per-value failures (non-integer K, deadline at or below the shift, a
/// simulation with no cycles, ...) become error rows; the sweep continues.
pub fn sweep(
    template: &SystemConfig,
    axis: SweepAxis,
    values: &[f64],
    engines: &EngineSelection,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Domain("sweep needs at least one value".into()));
    }
    if !engines.analytic && engines.simulation.is_none() {
        return Err(Error::Domain("sweep needs at least one engine".into()));
    }
    let mut rows = Vec::new();
    for &value in values {
        match apply_axis(template, axis, value) {
            Ok(config) => {
                if engines.analytic {
                    rows.push(analytic_row(&config));
                }
                if let Some(sim) = &engines.simulation {
                    rows.push(simulation_row(&config, sim));
                }
            }
            Err(e) => {
                if engines.analytic {
                    rows.push(SweepRow::failed(template, "analytic", e.to_string()));
                }
                if engines.simulation.is_some() {
                    rows.push(SweepRow::failed(template, "simulation", e.to_string()));
                }
            }
        }
    }
    Ok(rows)
}
