//! Quadrature oracle: every probability and moment of the closed-form
//! engines recomputed from the defining integrals, sharing no algebra with
//! them.
//!
//! The closed forms expand order statistics into alternating coefficient
//! sums; the oracle instead integrates densities built from binomial tails
//! of the service CDF, so an algebra slip on either side surfaces as a
//! numerical disagreement. Exchangeability supplies the two joint cases:
//! given the multiset of service times, the tracked device is equally
//! likely to hold any rank, so
//!
//!   P(completion-terminated, tracked missed) = (N-K)/N * P(T_N(K) <= D),
//!   P(completion-terminated, tracked got it) =    K/N  * P(T_N(K) <= D).
//!
//! Deadline-terminated joints condition on the deadline value instead:
//! P(tracked missed, fewer than K done at D) integrates
//! (1 - F) * BinTail(N-1, K-1, F) against the deadline law.

mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeadlinePolicy, ServiceModel, SystemConfig};
use crate::numeric::binomial;
use crate::orderstat::{binomial_tail_le, order_stat_pdf, service_cdf, service_pdf};
use crate::report::{assemble_report, AoiReport, CaseProbabilities, MomentSet};

use quadrature::integrate;
pub use quadrature::QuadratureSpec;

/// Conditioning masses below this are treated as impossible events: the
/// default quadrature tolerances cannot resolve a meaningful conditional.
const EVENT_FLOOR: f64 = 1e-12;

/// Below this a case's weight is numerically zero and its conditional
/// moment branch is skipped rather than evaluated.
const WEIGHT_FLOOR: f64 = 1e-14;

/// A round-outcome event whose probability the oracle can compute.
///
/// The first five mirror the closed-form case analysis; the two rank events
/// expose the per-rank race between the h-th completion and the deadline.
/// Conditional events (`FailureCompletionTerminated` and friends) return
/// probabilities conditioned on failure resp. success of the tracked device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseEvent {
    /// The tracked device receives the update.
    Success,
    /// Given failure: the round ended because K other devices finished.
    FailureCompletionTerminated,
    /// Given failure: the round ended because the deadline fired.
    FailureDeadlineTerminated,
    /// Given success: the round ended because K devices finished.
    SuccessCompletionTerminated,
    /// Given success: the round ended because the deadline fired.
    SuccessDeadlineTerminated,
    /// The deadline fires before the h-th completion.
    DeadlineBeforeRank(u32),
    /// The h-th completion beats the deadline.
    RankBeforeDeadline(u32),
}

/// A conditional first or second moment the oracle can compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentQuantity {
    /// Round-termination time given failure by completion (C_F1).
    CompletionGivenFailureCompletionTerminated,
    /// Round-termination time given success by completion (C_S1).
    CompletionGivenSuccessCompletionTerminated,
    /// Deadline value given failure by deadline (C_F2).
    DeadlineGivenFailureDeadlineTerminated,
    /// Deadline value given success by deadline (C_S2).
    DeadlineGivenSuccessDeadlineTerminated,
    /// The tracked device's own service time given success.
    ServiceGivenSuccess,
}

struct Ctx {
    config: SystemConfig,
    service: ServiceModel,
    n: u32,
    k: u32,
    shift: f64,
    spec: QuadratureSpec,
    /// Truncation point for all semi-infinite integrals.
    cutoff: f64,
}

impl Ctx {
    fn new(config: &SystemConfig, spec: &QuadratureSpec) -> Result<Ctx> {
        spec.validate()?;
        let service = config.service();
        let shift = service.shift();
        let min_rate = match config.deadline() {
            DeadlinePolicy::ShiftedExponential { rate, .. } => service.rate().min(rate),
            _ => service.rate(),
        };
        let cutoff = match spec.tail_cutoff {
            Some(c) => {
                if !(c.is_finite() && c > shift) {
                    return Err(Error::Domain(
                        "quadrature tail cutoff must be finite and exceed the service shift".into(),
                    ));
                }
                c
            }
            None => shift + 80.0 / min_rate,
        };
        Ok(Ctx {
            config: *config,
            service,
            n: config.num_devices(),
            k: config.threshold(),
            shift,
            spec: *spec,
            cutoff,
        })
    }

    fn cdf(&self, t: f64) -> f64 {
        service_cdf(t, &self.service)
    }

    fn pdf(&self, t: f64) -> f64 {
        service_pdf(t, &self.service)
    }

    /// Exact survival 1 - F(t); kept separate so binomial tails get a
    /// precise complement near F = 1.
    fn survival(&self, t: f64) -> f64 {
        if t <= self.shift {
            1.0
        } else {
            (-self.service.rate() * (t - self.shift)).exp()
        }
    }

    /// P(deadline >= t): the weight that keeps a round alive at time t.
    fn deadline_survival(&self, t: f64) -> f64 {
        match self.config.deadline() {
            DeadlinePolicy::Infinite => 1.0,
            DeadlinePolicy::Fixed { horizon } => {
                if t <= horizon {
                    1.0
                } else {
                    0.0
                }
            }
            DeadlinePolicy::ShiftedExponential { rate, shift } => {
                if t <= shift {
                    1.0
                } else {
                    (-rate * (t - shift)).exp()
                }
            }
        }
    }

    /// Density of the random deadline; only defined for that policy.
    fn deadline_density(&self, x: f64) -> f64 {
        match self.config.deadline() {
            DeadlinePolicy::ShiftedExponential { rate, shift } => {
                if x <= shift {
                    0.0
                } else {
                    rate * (-rate * (x - shift)).exp()
                }
            }
            _ => 0.0,
        }
    }

    /// Upper integration limit for integrands carrying deadline survival.
    fn live_upper(&self) -> f64 {
        match self.config.deadline() {
            DeadlinePolicy::Fixed { horizon } => horizon.min(self.cutoff),
            _ => self.cutoff,
        }
    }

    /// P(Binomial(m, F(t)) <= j), with j allowed negative (probability 0).
    fn others_done_at_most(&self, m: u32, j: i64, t: f64) -> f64 {
        binomial_tail_le(m, j, self.cdf(t), self.survival(t))
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: &F, lo: f64, hi: f64) -> Result<f64> {
        integrate(f, lo, hi, &self.spec)
    }

    /// P(tracked device receives the update): its service time beats both
    /// the deadline and the K-th-of-the-others cutoff.
    fn p_tracked_success(&self) -> Result<f64> {
        let f = |t: f64| {
            self.pdf(t)
                * self.others_done_at_most(self.n - 1, i64::from(self.k) - 1, t)
                * self.deadline_survival(t)
        };
        self.integrate(&f, self.shift, self.live_upper())
    }

    /// P(T_N(h) <= D) via the order-statistic density.
    fn p_rank_before_deadline(&self, h: u32) -> Result<f64> {
        let f = |t: f64| {
            order_stat_pdf(t, h, &self.config).expect("rank validated by caller")
                * self.deadline_survival(t)
        };
        self.integrate(&f, self.shift, self.live_upper())
    }

    /// P(D < T_N(h)) by conditioning on the deadline value.
    fn p_deadline_before_rank(&self, h: u32) -> Result<f64> {
        match self.config.deadline() {
            DeadlinePolicy::Infinite => Ok(0.0),
            DeadlinePolicy::Fixed { horizon } => Ok(binomial_tail_le(
                self.n,
                i64::from(h) - 1,
                self.cdf(horizon),
                self.survival(horizon),
            )),
            DeadlinePolicy::ShiftedExponential { .. } => {
                let f = |x: f64| {
                    self.deadline_density(x)
                        * binomial_tail_le(self.n, i64::from(h) - 1, self.cdf(x), self.survival(x))
                };
                self.integrate(&f, self.shift, self.cutoff)
            }
        }
    }

    /// P(round completion-terminated AND tracked missed): exchangeability.
    fn joint_failure_completion(&self) -> Result<f64> {
        let spare = f64::from(self.n - self.k) / f64::from(self.n);
        Ok(spare * self.p_rank_before_deadline(self.k)?)
    }

    /// P(round deadline-terminated AND tracked missed).
    fn joint_failure_deadline(&self) -> Result<f64> {
        match self.config.deadline() {
            DeadlinePolicy::Infinite => Ok(0.0),
            DeadlinePolicy::Fixed { horizon } => Ok(self.survival(horizon)
                * self.others_done_at_most(self.n - 1, i64::from(self.k) - 1, horizon)),
            DeadlinePolicy::ShiftedExponential { .. } => {
                let f = |x: f64| {
                    self.deadline_density(x)
                        * self.survival(x)
                        * self.others_done_at_most(self.n - 1, i64::from(self.k) - 1, x)
                };
                self.integrate(&f, self.shift, self.cutoff)
            }
        }
    }

    /// P(round completion-terminated AND tracked got it).
    fn joint_success_completion(&self) -> Result<f64> {
        let own = f64::from(self.k) / f64::from(self.n);
        Ok(own * self.p_rank_before_deadline(self.k)?)
    }

    /// P(round deadline-terminated AND tracked got it): the tracked device
    /// finished but fewer than K devices overall did.
    fn joint_success_deadline(&self) -> Result<f64> {
        if self.k == 1 {
            // Tracked finishing IS the first completion; a round it
            // completes can never be deadline-terminated.
            return Ok(0.0);
        }
        match self.config.deadline() {
            DeadlinePolicy::Infinite => Ok(0.0),
            DeadlinePolicy::Fixed { horizon } => Ok(self.cdf(horizon)
                * self.others_done_at_most(self.n - 1, i64::from(self.k) - 2, horizon)),
            DeadlinePolicy::ShiftedExponential { .. } => {
                let f = |x: f64| {
                    self.deadline_density(x)
                        * self.cdf(x)
                        * self.others_done_at_most(self.n - 1, i64::from(self.k) - 2, x)
                };
                self.integrate(&f, self.shift, self.cutoff)
            }
        }
    }

    /// Unnormalized density of the round-termination time on C_F1: the K-th
    /// completion happens at t, the tracked device is slower, the deadline
    /// has not fired.
    fn failure_completion_density(&self, t: f64) -> f64 {
        let coeff = (f64::from(self.n) - 1.0) * binomial(self.n - 2, self.k - 1) as f64;
        coeff
            * self.cdf(t).powi(self.k as i32 - 1)
            * self.survival(t).powi((self.n - self.k) as i32)
            * self.pdf(t)
            * self.deadline_survival(t)
    }

    /// Unnormalized density of the round-termination time on C_S1: the K-th
    /// completion happens at t with the tracked device among the first K.
    fn success_completion_density(&self, t: f64) -> f64 {
        let mut coeff = binomial(self.n - 1, self.k - 1) as f64;
        if self.k >= 2 {
            coeff += (f64::from(self.n) - 1.0) * binomial(self.n - 2, self.k - 2) as f64;
        }
        coeff
            * self.cdf(t).powi(self.k as i32 - 1)
            * self.survival(t).powi((self.n - self.k) as i32)
            * self.pdf(t)
            * self.deadline_survival(t)
    }

    /// First and second moments of a distribution given by an unnormalized
    /// density on [lo, hi].
    fn density_moments<F: Fn(f64) -> f64>(&self, dens: &F, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let mass = self.integrate(dens, lo, hi)?;
        if mass < EVENT_FLOOR {
            return Err(Error::ImpossibleEvent(format!(
                "conditioning mass {mass:.3e} is below the oracle's resolution"
            )));
        }
        let m1 = self.integrate(&|t| t * dens(t), lo, hi)? / mass;
        let m2 = self.integrate(&|t| t * t * dens(t), lo, hi)? / mass;
        Ok((m1, m2))
    }

    /// Moments of T_N(K) restricted to rounds it terminates (both failure
    /// and success shapes are proportional to this).
    fn completion_moments(&self) -> Result<(f64, f64)> {
        let dens = |t: f64| {
            order_stat_pdf(t, self.k, &self.config).expect("rank K is always valid")
                * self.deadline_survival(t)
        };
        self.density_moments(&dens, self.shift, self.live_upper())
    }

    /// Moments of the deadline on C_F2 (tracked missed, deadline fired).
    fn deadline_failure_moments(&self) -> Result<(f64, f64)> {
        match self.config.deadline() {
            DeadlinePolicy::Infinite => Err(Error::ImpossibleEvent(
                "no deadline ever fires under the infinite policy".into(),
            )),
            DeadlinePolicy::Fixed { horizon } => {
                if self.joint_failure_deadline()? < EVENT_FLOOR {
                    return Err(Error::ImpossibleEvent(
                        "deadline-terminated failures have negligible probability".into(),
                    ));
                }
                Ok((horizon, horizon * horizon))
            }
            DeadlinePolicy::ShiftedExponential { .. } => {
                let dens = |x: f64| {
                    self.deadline_density(x)
                        * self.survival(x)
                        * self.others_done_at_most(self.n - 1, i64::from(self.k) - 1, x)
                };
                self.density_moments(&dens, self.shift, self.cutoff)
            }
        }
    }

    /// Moments of the deadline on C_S2 (tracked got it, deadline fired).
    fn deadline_success_moments(&self) -> Result<(f64, f64)> {
        if self.k == 1 {
            return Err(Error::ImpossibleEvent(
                "with threshold 1 a delivered update always ends the round by \
                 completion, never by deadline"
                    .into(),
            ));
        }
        match self.config.deadline() {
            DeadlinePolicy::Infinite => Err(Error::ImpossibleEvent(
                "no deadline ever fires under the infinite policy".into(),
            )),
            DeadlinePolicy::Fixed { horizon } => {
                if self.joint_success_deadline()? < EVENT_FLOOR {
                    return Err(Error::ImpossibleEvent(
                        "deadline-terminated successes have negligible probability".into(),
                    ));
                }
                Ok((horizon, horizon * horizon))
            }
            DeadlinePolicy::ShiftedExponential { .. } => {
                let dens = |x: f64| {
                    self.deadline_density(x)
                        * self.cdf(x)
                        * self.others_done_at_most(self.n - 1, i64::from(self.k) - 2, x)
                };
                self.density_moments(&dens, self.shift, self.cutoff)
            }
        }
    }

    /// Moments of the tracked device's service time given it succeeded.
    fn service_success_moments(&self) -> Result<(f64, f64)> {
        let dens = |t: f64| {
            self.pdf(t)
                * self.others_done_at_most(self.n - 1, i64::from(self.k) - 1, t)
                * self.deadline_survival(t)
        };
        self.density_moments(&dens, self.shift, self.live_upper())
    }

    fn check_rank(&self, h: u32) -> Result<()> {
        if h == 0 || h > self.n {
            return Err(Error::Domain(format!("rank {h} outside 1..={}", self.n)));
        }
        Ok(())
    }
}

/// Normalize a pair of joint masses into conditional probabilities, smaller
/// member computed directly and the larger as its exact complement.
fn conditional_pair(a: f64, b: f64) -> Result<(f64, f64)> {
    let sum = a + b;
    if sum < EVENT_FLOOR {
        return Err(Error::ImpossibleEvent(format!(
            "conditioning mass {sum:.3e} is below the oracle's resolution"
        )));
    }
    Ok(if a <= b {
        let pa = (a / sum).clamp(0.0, 1.0);
        (pa, 1.0 - pa)
    } else {
        let pb = (b / sum).clamp(0.0, 1.0);
        (1.0 - pb, pb)
    })
}

/// Probability of `event` by adaptive quadrature on the defining integrals.
pub fn oracle_probability(
    event: CaseEvent,
    config: &SystemConfig,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let ctx = Ctx::new(config, spec)?;
    match event {
        CaseEvent::Success => ctx.p_tracked_success(),
        CaseEvent::FailureCompletionTerminated => {
            let pair = conditional_pair(
                ctx.joint_failure_completion()?,
                ctx.joint_failure_deadline()?,
            )?;
            Ok(pair.0)
        }
        CaseEvent::FailureDeadlineTerminated => {
            let pair = conditional_pair(
                ctx.joint_failure_completion()?,
                ctx.joint_failure_deadline()?,
            )?;
            Ok(pair.1)
        }
        CaseEvent::SuccessCompletionTerminated => {
            let pair = conditional_pair(
                ctx.joint_success_completion()?,
                ctx.joint_success_deadline()?,
            )?;
            Ok(pair.0)
        }
        CaseEvent::SuccessDeadlineTerminated => {
            let pair = conditional_pair(
                ctx.joint_success_completion()?,
                ctx.joint_success_deadline()?,
            )?;
            Ok(pair.1)
        }
        CaseEvent::DeadlineBeforeRank(h) => {
            ctx.check_rank(h)?;
            ctx.p_deadline_before_rank(h)
        }
        CaseEvent::RankBeforeDeadline(h) => {
            ctx.check_rank(h)?;
            ctx.p_rank_before_deadline(h)
        }
    }
}

/// Conditional moment of `quantity` (order 1 or 2) by adaptive quadrature.
pub fn oracle_conditional_moment(
    quantity: MomentQuantity,
    order: u32,
    config: &SystemConfig,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if order != 1 && order != 2 {
        return Err(Error::Domain(format!(
            "moment order {order} unsupported; only 1 and 2 are defined"
        )));
    }
    let ctx = Ctx::new(config, spec)?;
    let (m1, m2) = match quantity {
        MomentQuantity::CompletionGivenFailureCompletionTerminated => {
            if ctx.k == ctx.n {
                return Err(Error::ImpossibleEvent(
                    "with K = N there is no spare device to finish first".into(),
                ));
            }
            let dens = |t: f64| ctx.failure_completion_density(t);
            ctx.density_moments(&dens, ctx.shift, ctx.live_upper())?
        }
        MomentQuantity::CompletionGivenSuccessCompletionTerminated => {
            let dens = |t: f64| ctx.success_completion_density(t);
            ctx.density_moments(&dens, ctx.shift, ctx.live_upper())?
        }
        MomentQuantity::DeadlineGivenFailureDeadlineTerminated => ctx.deadline_failure_moments()?,
        MomentQuantity::DeadlineGivenSuccessDeadlineTerminated => ctx.deadline_success_moments()?,
        MomentQuantity::ServiceGivenSuccess => ctx.service_success_moments()?,
    };
    Ok(if order == 1 { m1 } else { m2 })
}

/// Full report assembled from quadrature quantities alone.
///
/// Every probability and moment is integrated independently; only the final
/// renewal-reward assembly is shared with the closed-form engines.
pub fn oracle_aoi(config: &SystemConfig, spec: &QuadratureSpec) -> Result<AoiReport> {
    let ctx = Ctx::new(config, spec)?;
    let p_cs = ctx.p_tracked_success()?;
    if p_cs <= WEIGHT_FLOOR {
        return Err(Error::Divergent(
            "success probability is zero; the age diverges".into(),
        ));
    }
    let jf1 = ctx.joint_failure_completion()?;
    let jf2 = ctx.joint_failure_deadline()?;
    let p_cf = jf1 + jf2;
    let js1 = ctx.joint_success_completion()?;
    let js2 = ctx.joint_success_deadline()?;

    let (p_f1, p_f2) = if p_cf < WEIGHT_FLOOR {
        // Failure is numerically impossible; keep the no-deadline
        // convention so reports stay comparable.
        (1.0, 0.0)
    } else {
        conditional_pair(jf1, jf2)?
    };
    let (p_s1, p_s2) = if js1 + js2 < WEIGHT_FLOOR {
        (1.0, 0.0)
    } else {
        conditional_pair(js1, js2)?
    };

    // Completion-terminated rounds have the same termination-time shape for
    // the failure and success cases; both branches reuse these moments.
    let (e_xf, e_xf2) = if p_cf < WEIGHT_FLOOR {
        ctx.completion_moments()?
    } else {
        // Branches are dropped by the same absolute-mass floor the
        // conditional routes enforce, so a branch is never integrated on
        // an event the route would reject as impossible.
        let w1 = jf1 / p_cf;
        let w2 = jf2 / p_cf;
        let (c1, c2) = if jf1 > EVENT_FLOOR {
            ctx.completion_moments()?
        } else {
            (0.0, 0.0)
        };
        let (d1, d2) = if jf2 > EVENT_FLOOR {
            ctx.deadline_failure_moments()?
        } else {
            (0.0, 0.0)
        };
        (w1 * c1 + w2 * d1, w1 * c2 + w2 * d2)
    };
    let (e_xs, e_xs2) = {
        let sum = js1 + js2;
        let w1 = js1 / sum;
        let w2 = js2 / sum;
        let (c1, c2) = if js1 > EVENT_FLOOR {
            ctx.completion_moments()?
        } else {
            (0.0, 0.0)
        };
        let (d1, d2) = if js2 > EVENT_FLOOR {
            ctx.deadline_success_moments()?
        } else {
            (0.0, 0.0)
        };
        (w1 * c1 + w2 * d1, w1 * c2 + w2 * d2)
    };
    let (e_that, _) = ctx.service_success_moments()?;

    // Waiting time from the geometric round count, using the directly
    // integrated failure mass (never 1 - p, which would cancel).
    let extra_rounds = p_cf / p_cs;
    let e_m = 1.0 + extra_rounds;
    let var_m = extra_rounds * e_m;
    let e_w = extra_rounds * e_xf;
    let var_xf = (e_xf2 - e_xf * e_xf).max(0.0);
    let var_w = e_xf * e_xf * var_m + var_xf * extra_rounds;
    let e_w2 = e_w * e_w + var_w;

    let cases = CaseProbabilities {
        p_success: p_cs,
        p_f1,
        p_f2,
        p_s1,
        p_s2,
    };
    let moments = MomentSet {
        e_xf,
        e_xf2,
        e_xs,
        e_xs2,
        e_w,
        e_w2,
        e_m,
        e_that,
    };
    Ok(assemble_report(*config, cases, moments))
}

/// One quantity's values in the two compared reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityDelta {
    pub name: String,
    pub closed_form_value: f64,
    pub oracle_value: f64,
    /// Relative difference, or absolute when either value is ~0.
    pub relative_delta: f64,
}

/// Field-by-field comparison of two reports for the same configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub quantities: Vec<QuantityDelta>,
    pub worst_delta: f64,
    pub worst_quantity: String,
    pub threshold: f64,
    pub pass: bool,
}

/// Symmetric relative difference, falling back to absolute when either
/// value is smaller than the probe scale 1e-12.
fn delta(a: f64, b: f64) -> f64 {
    let diff = (a - b).abs();
    if a.abs().min(b.abs()) < 1e-12 {
        diff
    } else {
        diff / a.abs().max(b.abs())
    }
}

/// Compare every field of two reports, pass/fail against `threshold`.
///
/// The reports must describe the same configuration; comparing different
/// systems is a caller bug surfaced as a domain error.
pub fn compare_reports(
    closed_form: &AoiReport,
    oracle: &AoiReport,
    threshold: f64,
) -> Result<DiscrepancyReport> {
    if closed_form.config != oracle.config {
        return Err(Error::Domain(
            "cannot compare reports for different configurations".into(),
        ));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Domain(
            "comparison threshold must be positive".into(),
        ));
    }
    let fields: [(&str, f64, f64); 15] = [
        ("average_aoi", closed_form.average_aoi, oracle.average_aoi),
        (
            "average_peak_aoi",
            closed_form.average_peak_aoi,
            oracle.average_peak_aoi,
        ),
        (
            "p_success",
            closed_form.cases.p_success,
            oracle.cases.p_success,
        ),
        ("p_f1", closed_form.cases.p_f1, oracle.cases.p_f1),
        ("p_f2", closed_form.cases.p_f2, oracle.cases.p_f2),
        ("p_s1", closed_form.cases.p_s1, oracle.cases.p_s1),
        ("p_s2", closed_form.cases.p_s2, oracle.cases.p_s2),
        ("e_xf", closed_form.moments.e_xf, oracle.moments.e_xf),
        ("e_xf2", closed_form.moments.e_xf2, oracle.moments.e_xf2),
        ("e_xs", closed_form.moments.e_xs, oracle.moments.e_xs),
        ("e_xs2", closed_form.moments.e_xs2, oracle.moments.e_xs2),
        ("e_w", closed_form.moments.e_w, oracle.moments.e_w),
        ("e_w2", closed_form.moments.e_w2, oracle.moments.e_w2),
        ("e_m", closed_form.moments.e_m, oracle.moments.e_m),
        ("e_that", closed_form.moments.e_that, oracle.moments.e_that),
    ];
    let mut quantities = Vec::with_capacity(fields.len());
    let mut worst_delta = 0.0f64;
    let mut worst_quantity = String::new();
    for (name, a, b) in fields {
        let d = delta(a, b);
        if d > worst_delta || worst_quantity.is_empty() {
            worst_delta = d;
            worst_quantity = name.to_string();
        }
        quantities.push(QuantityDelta {
            name: name.to_string(),
            closed_form_value: a,
            oracle_value: b,
            relative_delta: d,
        });
    }
    Ok(DiscrepancyReport {
        quantities,
        worst_delta,
        worst_quantity,
        threshold,
        pass: worst_delta <= threshold,
    })
}
