//! Closed-form analysis, numerical cross-validation, and discrete-event
//! simulation of information freshness in deadline-limited K-of-N multicast.
//!
//! An access point transmits timestamped status updates to N devices over
//! independent shifted-exponential channels. A round ends when K devices
//! have the update or when a deadline (none, fixed, or randomly drawn per
//! round) expires, whichever comes first; then the next update is generated.
//! The crate computes the long-run average age of information and average
//! peak age at a tracked device three independent ways:
//!
//! - exact closed forms built from order-statistic expansions
//!   ([`average_aoi_fixed`], [`average_aoi_random`]),
//! - adaptive quadrature over the defining integrals ([`oracle_aoi`]),
//! - a seeded renewal-cycle simulator ([`simulate`]).
//!
//! The three agree to tight tolerances on a standard configuration grid;
//! [`compare_reports`] and the CLI's validate command automate the check.
//! [`optimize_deadline`] and [`sweep`] drive the engines for design studies.

mod baselines;
mod coefficients;
mod error;
mod fixed;
mod model;
mod numeric;
mod optimize;
mod oracle;
mod orderstat;
mod random;
mod report;
mod sim;

pub use baselines::{
    completion_moments_random_rescaled, failure_split_plus_denominator,
    service_expectation_fixed_unshifted_decay, service_expectation_random_unnormalized,
};
pub use coefficients::{
    coefficient_table, rank_success_probabilities, CoefficientTable, RankSuccessVector,
};
pub use error::{Error, Result};
pub use fixed::{
    average_aoi_fixed, case_probabilities_fixed, conditional_tnk_moments_fixed,
    intergen_failure_moments_fixed, intergen_success_moments_fixed,
    successful_service_expectation_fixed,
};
pub use model::{DeadlinePolicy, ServiceModel, SystemConfig, MAX_DEVICES};
pub use optimize::{
    optimize_deadline, sweep, EngineSelection, Objective, OptimizeResult, OptimizeSpec, PolicyKind,
    SweepAxis, SweepRow,
};
pub use oracle::{
    compare_reports, oracle_aoi, oracle_conditional_moment, oracle_probability, CaseEvent,
    DiscrepancyReport, MomentQuantity, QuadratureSpec, QuantityDelta,
};
pub use orderstat::{order_stat_cdf, order_stat_pdf, service_cdf, service_pdf};
pub use random::{
    average_aoi_random, case_probabilities_random, conditional_deadline_moments_failure,
    conditional_deadline_moments_success, conditional_tnk_moments_random, intergen_moments_random,
    successful_service_expectation_random,
};
pub use report::{
    assemble_report, wait_moments, AoiReport, CaseProbabilities, MomentSet, WaitMoments,
};
pub use sim::{
    batch_confidence, empirical_renewal_samples, simulate, RenewalSample, SimConfig, SimResult,
};

/// Closed-form age report for any deadline policy, dispatching to the
/// matching engine.
pub fn average_aoi(config: &SystemConfig) -> Result<AoiReport> {
    if config.deadline().is_random() {
        average_aoi_random(config)
    } else {
        average_aoi_fixed(config)
    }
}
