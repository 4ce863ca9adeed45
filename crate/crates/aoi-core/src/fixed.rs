//! Closed-form average and peak age for the fixed-deadline policy and its
//! no-deadline limit.
//!
//! Every quantity reduces to weighted sums over the coefficient table. With
//! window d = horizon - shift and decay l(u) = rate_s * u, the recurring
//! per-term brackets are
//!
//!   G1(h,j) = 1 + shift*l(U) - (1 + horizon*l(U)) * V[h][j],
//!   G2(h,j) = (1 + shift*l(U))^2 + 1 - ((1 + horizon*l(U))^2 + 1) * V[h][j],
//!
//! which are the first and second truncated moments of the h-th completion
//! time against its expansion term. The no-deadline policy is the V = 0,
//! horizon-to-infinity limit and shares all code paths.

use crate::coefficients::{
    coefficient_table, rank_success_from_table, success_split, CoefficientTable, RankSuccessVector,
};
use crate::error::{Error, Result};
use crate::model::{DeadlinePolicy, SystemConfig};
use crate::numeric::dd::Dd;
use crate::report::{
    assemble_report, complementary_pair, wait_moments_dd, AoiReport, CaseProbabilities, MomentSet,
};

struct Engine {
    config: SystemConfig,
    n: u32,
    k: u32,
    rate: f64,
    shift: f64,
    /// None for the no-deadline policy.
    horizon: Option<f64>,
    table: CoefficientTable,
    ranks: RankSuccessVector,
}

impl Engine {
    fn new(config: &SystemConfig) -> Result<Engine> {
        let horizon = match config.deadline() {
            DeadlinePolicy::Infinite => None,
            DeadlinePolicy::Fixed { horizon } => Some(horizon),
            DeadlinePolicy::ShiftedExponential { .. } => {
                return Err(Error::Domain(
                    "random deadline policy passed to the fixed-deadline engine".into(),
                ))
            }
        };
        let table = coefficient_table(config)?;
        let ranks = rank_success_from_table(config, &table)?;
        Ok(Engine {
            config: *config,
            n: config.num_devices(),
            k: config.threshold(),
            rate: config.service().rate(),
            shift: config.service().shift(),
            horizon,
            table,
            ranks,
        })
    }

    /// rate_s * U[h][j] in extended precision.
    fn decay(&self, h: u32, j: u32) -> Dd {
        Dd::from_f64(self.rate).mul_f64(self.table.u(h, j))
    }

    /// First-moment bracket G1(h,j); see the module doc.
    fn bracket_first(&self, h: u32, j: u32) -> Dd {
        let lu = self.decay(h, j);
        let head = lu.mul_f64(self.shift).add_f64(1.0);
        match self.horizon {
            None => head,
            Some(td) => head.sub(lu.mul_f64(td).add_f64(1.0).mul(self.table.v_dd(h, j))),
        }
    }

    /// Second-moment bracket G2(h,j); see the module doc.
    fn bracket_second(&self, h: u32, j: u32) -> Dd {
        let lu = self.decay(h, j);
        let head = lu.mul_f64(self.shift).add_f64(1.0);
        let head = head.mul(head).add_f64(1.0);
        match self.horizon {
            None => head,
            Some(td) => {
                let tail = lu.mul_f64(td).add_f64(1.0);
                head.sub(tail.mul(tail).add_f64(1.0).mul(self.table.v_dd(h, j)))
            }
        }
    }

    /// B[h][j] * G1(h,j) / (rate_s * U^2): one term of a first moment.
    fn moment_term_first(&self, h: u32, j: u32) -> Dd {
        let lu = self.decay(h, j);
        self.table
            .b_dd(h, j)
            .mul(self.bracket_first(h, j))
            .div(lu.mul_f64(self.table.u(h, j)))
    }

    /// B[h][j] * G2(h,j) / (rate_s^2 * U^3): one term of a second moment.
    fn moment_term_second(&self, h: u32, j: u32) -> Dd {
        let lu = self.decay(h, j);
        let lu2 = lu.mul(lu);
        self.table
            .b_dd(h, j)
            .mul(self.bracket_second(h, j))
            .div(lu2.mul_f64(self.table.u(h, j)))
    }

    /// Moments of the K-th completion time conditioned on beating the
    /// deadline, in extended precision.
    fn completion_moments(&self) -> Result<(Dd, Dd)> {
        let sk = self.ranks.success_dd(self.k);
        if sk.to_f64() <= 0.0 {
            return Err(Error::Domain(
                "the K-th completion never beats the deadline; conditioning is empty".into(),
            ));
        }
        let mut first = Dd::ZERO;
        let mut second = Dd::ZERO;
        for j in 0..self.k {
            first = first.add(self.moment_term_first(self.k, j));
            second = second.add(self.moment_term_second(self.k, j));
        }
        Ok((first.div(sk), second.div(sk)))
    }

    /// (p_f1, p_f2): the failure event split by round terminator.
    ///
    /// With no deadline, failed rounds can only end by other devices
    /// completing, so the split is the (1, 0) convention even when failure
    /// itself is impossible (K = N).
    fn failure_split(&self) -> (Dd, Dd) {
        let td = match self.horizon {
            None => return (Dd::ONE, Dd::ZERO),
            Some(td) => td,
        };
        if self.k == self.n {
            // No spare devices: a failed round is always deadline-terminated.
            return (Dd::ZERO, Dd::ONE);
        }
        let mut z_low = Dd::ZERO;
        for h in 1..=self.k {
            z_low = z_low.add(self.ranks.exceed_dd(h));
        }
        let mut z_high = Dd::ZERO;
        for h in self.k + 1..=self.n {
            z_high = z_high.add(self.ranks.exceed_dd(h));
        }
        let spare = f64::from(self.n - self.k);
        let num = self.ranks.exceed_dd(self.k).mul_f64(spare).add(z_low);
        // Denominator N e^{-rate_s (horizon - shift)} + (N-K) - sum_{h>K} Z_h,
        // which equals N * P(failure); the difference den - num collapses to
        // (N-K) * success[K], so p_f1 comes out without cancellation.
        let survival = Dd::from_f64(-self.rate * (td - self.shift)).exp();
        let den = survival
            .mul_f64(f64::from(self.n))
            .add_f64(spare)
            .sub(z_high);
        (den.sub(num).div(den), num.div(den))
    }

    fn sum_success(&self) -> Dd {
        let mut acc = Dd::ZERO;
        for h in 1..=self.k {
            acc = acc.add(self.ranks.success_dd(h));
        }
        acc
    }

    fn case_probabilities(&self) -> CaseProbabilities {
        let split = success_split(&self.ranks, self.k);
        let p_success = split
            .sum_success
            .div_f64(f64::from(self.n))
            .to_f64()
            .clamp(0.0, 1.0);
        let (f1, f2) = self.failure_split();
        let (p_f1, p_f2) = complementary_pair(f1, f2);
        let (p_s1, p_s2) = complementary_pair(split.p_s1, split.p_s2);
        CaseProbabilities {
            p_success,
            p_f1,
            p_f2,
            p_s1,
            p_s2,
        }
    }

    /// E[gap | failed round] and its second moment: the completion moments
    /// mixed with the degenerate deadline value.
    fn failure_gap_moments(&self) -> Result<(Dd, Dd)> {
        let (m1, m2) = self.completion_moments()?;
        match self.horizon {
            None => Ok((m1, m2)),
            Some(td) => {
                let (f1, f2) = self.failure_split();
                Ok((
                    f1.mul(m1).add(f2.mul_f64(td)),
                    f1.mul(m2).add(f2.mul_f64(td * td)),
                ))
            }
        }
    }

    /// E[gap | successful round] and its second moment.
    fn success_gap_moments(&self) -> Result<(Dd, Dd)> {
        let (m1, m2) = self.completion_moments()?;
        match self.horizon {
            None => Ok((m1, m2)),
            Some(td) => {
                let split = success_split(&self.ranks, self.k);
                Ok((
                    split.p_s1.mul(m1).add(split.p_s2.mul_f64(td)),
                    split.p_s1.mul(m2).add(split.p_s2.mul_f64(td * td)),
                ))
            }
        }
    }

    /// E[delivered service time | success], in extended precision.
    fn delivered_service_expectation(&self) -> Result<Dd> {
        let sum_s = self.sum_success();
        if sum_s.to_f64() <= 0.0 {
            return Err(Error::Divergent(
                "success probability is zero; no service time is ever delivered".into(),
            ));
        }
        let mut acc = Dd::ZERO;
        for h in 1..=self.k {
            for j in 0..h {
                acc = acc.add(self.moment_term_first(h, j));
            }
        }
        Ok(acc.div(sum_s))
    }

    fn report(&self) -> Result<AoiReport> {
        let cases = self.case_probabilities();
        let sum_s = self.sum_success();
        let n = f64::from(self.n);
        let p_success = sum_s.div_f64(n);
        if p_success.to_f64() <= 0.0 {
            return Err(Error::Divergent(
                "success probability is zero; the age diverges".into(),
            ));
        }
        let p_fail = Dd::from_f64(n).sub(sum_s).div_f64(n);
        let (e_xf, e_xf2) = self.failure_gap_moments()?;
        let (e_xs, e_xs2) = self.success_gap_moments()?;
        let e_that = self.delivered_service_expectation()?;
        let (e_w, e_w2, e_m) = wait_moments_dd(p_fail, p_success, e_xf, e_xf2);
        let moments = MomentSet {
            e_xf: e_xf.to_f64(),
            e_xf2: e_xf2.to_f64(),
            e_xs: e_xs.to_f64(),
            e_xs2: e_xs2.to_f64(),
            e_w: e_w.to_f64(),
            e_w2: e_w2.to_f64(),
            e_m: e_m.to_f64(),
            e_that: e_that.to_f64(),
        };
        Ok(assemble_report(self.config, cases, moments))
    }
}

/// Round-outcome probabilities for a fixed (or absent) deadline.
pub fn case_probabilities_fixed(config: &SystemConfig) -> Result<CaseProbabilities> {
    Ok(Engine::new(config)?.case_probabilities())
}

/// First and second moments of the K-th completion time given that it beat
/// the deadline. With no deadline these are the unconditional moments.
pub fn conditional_tnk_moments_fixed(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.completion_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// Moments of the inter-generation gap after a round the tracked device
/// missed: a mixture of the conditional completion moments and the deadline.
pub fn intergen_failure_moments_fixed(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.failure_gap_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// Moments of the inter-generation gap after a round the tracked device
/// completed, mixing on what terminated the round.
pub fn intergen_success_moments_fixed(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.success_gap_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// Expected service time of a delivered update.
pub fn successful_service_expectation_fixed(config: &SystemConfig) -> Result<f64> {
    Ok(Engine::new(config)?
        .delivered_service_expectation()?
        .to_f64())
}

/// Full closed-form report: average age, average peak age, and every
/// intermediate probability and moment.
pub fn average_aoi_fixed(config: &SystemConfig) -> Result<AoiReport> {
    Engine::new(config)?.report()
}
