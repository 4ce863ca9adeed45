//! Closed-form average and peak age for the random (shifted-exponential)
//! deadline policy.
//!
//! With combined decay H[h][j] = rate_s * U + rate_d and shift c, every
//! quantity reduces to sums over the coefficient table of two families:
//!
//!   completion terms  B * rate_s * P_m(H) / H^(m+1),
//!   deadline terms    B * rate_d * P_m(H) / (U * H^(m+1)),
//!
//! where P_1(H) = c H + 1 and P_2(H) = (c H + 1)^2 + 1 are the first and
//! second shifted-exponential moment polynomials. The denominators chosen
//! here make every conditional density integrate to exactly one, which is
//! the normalization the quadrature oracle cross-checks.

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
    rate_s: f64,
    rate_d: f64,
    shift: f64,
    table: CoefficientTable,
    ranks: RankSuccessVector,
}

impl Engine {
    fn new(config: &SystemConfig) -> Result<Engine> {
        let rate_d = match config.deadline() {
            DeadlinePolicy::ShiftedExponential { rate, .. } => rate,
            _ => {
                return Err(Error::Domain(
                    "non-random deadline policy passed to the random-deadline engine".into(),
                ))
            }
        };
        let table = coefficient_table(config)?;
        let ranks = rank_success_from_table(config, &table)?;
        Ok(Engine {
            config: *config,
            n: config.num_devices(),
            k: config.threshold(),
            rate_s: config.service().rate(),
            rate_d,
            shift: config.service().shift(),
            table,
            ranks,
        })
    }

    /// Moment polynomial P_m(H) for m in {1, 2}.
    fn poly(&self, h: u32, j: u32, order: u32) -> Dd {
        let ch1 = self.table.h_dd(h, j).mul_f64(self.shift).add_f64(1.0);
        match order {
            1 => ch1,
            _ => ch1.mul(ch1).add_f64(1.0),
        }
    }

    /// Completion-family term B * rate_s * P_m(H) / H^(m+1).
    fn completion_term(&self, h: u32, j: u32, order: u32) -> Dd {
        let hh = self.table.h_dd(h, j);
        let mut den = hh.mul(hh);
        if order == 2 {
            den = den.mul(hh);
        }
        self.table
            .b_dd(h, j)
            .mul_f64(self.rate_s)
            .mul(self.poly(h, j, order))
            .div(den)
    }

    /// Deadline-family term B * rate_d * P_m(H) / (U * H^(m+1)).
    fn deadline_term(&self, h: u32, j: u32, order: u32) -> Dd {
        let hh = self.table.h_dd(h, j);
        let mut den = hh.mul(hh).mul_f64(self.table.u(h, j));
        if order == 2 {
            den = den.mul(hh);
        }
        self.table
            .b_dd(h, j)
            .mul_f64(self.rate_d)
            .mul(self.poly(h, j, order))
            .div(den)
    }

    fn completion_row(&self, h: u32, order: u32) -> Dd {
        let mut acc = Dd::ZERO;
        for j in 0..h {
            acc = acc.add(self.completion_term(h, j, order));
        }
        acc
    }

    fn deadline_row(&self, h: u32, order: u32) -> Dd {
        let mut acc = Dd::ZERO;
        for j in 0..h {
            acc = acc.add(self.deadline_term(h, j, order));
        }
        acc
    }

    /// Moments of the K-th completion time given it beat the random deadline.
    fn completion_moments(&self) -> Result<(Dd, Dd)> {
        let sk = self.ranks.success_dd(self.k);
        if sk.to_f64() <= 0.0 {
            return Err(Error::Domain(
                "the K-th completion never beats the deadline; conditioning is empty".into(),
            ));
        }
        Ok((
            self.completion_row(self.k, 1).div(sk),
            self.completion_row(self.k, 2).div(sk),
        ))
    }

    /// Moments of the deadline given it terminated a round the device missed.
    fn deadline_failure_moments(&self) -> Result<(Dd, Dd)> {
        let spare = f64::from(self.n - self.k);
        let mut den = self.ranks.exceed_dd(self.k).mul_f64(spare);
        for h in 1..=self.k {
            den = den.add(self.ranks.exceed_dd(h));
        }
        if den.to_f64() <= 0.0 {
            return Err(Error::Domain(
                "deadline-terminated failures have probability zero".into(),
            ));
        }
        let mut num1 = self.deadline_row(self.k, 1).mul_f64(spare);
        let mut num2 = self.deadline_row(self.k, 2).mul_f64(spare);
        for h in 1..=self.k {
            num1 = num1.add(self.deadline_row(h, 1));
            num2 = num2.add(self.deadline_row(h, 2));
        }
        Ok((num1.div(den), num2.div(den)))
    }

    /// Moments of the deadline given it terminated a round the device
    /// completed. Impossible at K = 1: the device being done IS the first
    /// completion, so the deadline cannot fire before rank 1 completes.
    fn deadline_success_moments(&self) -> Result<(Dd, Dd)> {
        if self.k == 1 {
            return Err(Error::ImpossibleEvent(
                "with threshold 1 a delivered update always ends the round by \
                 completion, never by deadline"
                    .into(),
            ));
        }
        let kf = f64::from(self.k);
        let mut den = self.ranks.exceed_dd(self.k).mul_f64(kf);
        let mut num1 = self.deadline_row(self.k, 1).mul_f64(kf);
        let mut num2 = self.deadline_row(self.k, 2).mul_f64(kf);
        for h in 1..=self.k {
            den = den.sub(self.ranks.exceed_dd(h));
            num1 = num1.sub(self.deadline_row(h, 1));
            num2 = num2.sub(self.deadline_row(h, 2));
        }
        if den.to_f64() <= 0.0 {
            return Err(Error::ImpossibleEvent(
                "deadline-terminated successes have probability zero".into(),
            ));
        }
        Ok((num1.div(den), num2.div(den)))
    }

    /// (p_f1, p_f2): failure split by round terminator.
    fn failure_split(&self) -> (Dd, Dd) {
        if self.k == self.n {
            // No spare devices: a failed round is always deadline-terminated.
            return (Dd::ZERO, Dd::ONE);
        }
        let rates = self.rate_s + self.rate_d;
        let spare = f64::from(self.n - self.k);
        let mut e_low = Dd::ZERO;
        for h in 1..=self.k {
            e_low = e_low.add(self.ranks.exceed_dd(h));
        }
        let mut e_high = Dd::ZERO;
        for h in self.k + 1..=self.n {
            e_high = e_high.add(self.ranks.exceed_dd(h));
        }
        let num = self
            .ranks
            .exceed_dd(self.k)
            .mul_f64(spare)
            .add(e_low)
            .mul_f64(rates);
        // den - num collapses to (rate_s + rate_d)(N - K) success[K], so the
        // complement comes out without catastrophic cancellation.
        let den = Dd::from_f64(spare)
            .sub(e_high)
            .mul_f64(rates)
            .add_f64(f64::from(self.n) * self.rate_d);
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

    /// All four inter-generation gap moments as case mixtures.
    fn gap_moments(&self) -> Result<(Dd, Dd, Dd, Dd)> {
        let (t1, t2) = self.completion_moments()?;
        let (f1, f2) = self.failure_split();
        let (df1, df2) = self.deadline_failure_moments()?;
        let e_xf = f1.mul(t1).add(f2.mul(df1));
        let e_xf2 = f1.mul(t2).add(f2.mul(df2));
        let split = success_split(&self.ranks, self.k);
        let (e_xs, e_xs2) = if self.k == 1 {
            // Deadline-terminated success is impossible; the mixture is the
            // pure completion branch.
            (t1, t2)
        } else {
            let (ds1, ds2) = self.deadline_success_moments()?;
            (
                split.p_s1.mul(t1).add(split.p_s2.mul(ds1)),
                split.p_s1.mul(t2).add(split.p_s2.mul(ds2)),
            )
        };
        Ok((e_xf, e_xf2, e_xs, e_xs2))
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
            acc = acc.add(self.completion_row(h, 1));
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
        let (e_xf, e_xf2, e_xs, e_xs2) = self.gap_moments()?;
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

/// Round-outcome probabilities under a random deadline.
pub fn case_probabilities_random(config: &SystemConfig) -> Result<CaseProbabilities> {
    Ok(Engine::new(config)?.case_probabilities())
}

/// First and second moments of the K-th completion time given that it beat
/// the random deadline.
pub fn conditional_tnk_moments_random(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.completion_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// Moments of the deadline draw given it terminated a round the tracked
/// device missed.
pub fn conditional_deadline_moments_failure(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.deadline_failure_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// Moments of the deadline draw given it terminated a round the tracked
/// device completed. Errors with an impossible-event for K = 1.
pub fn conditional_deadline_moments_success(config: &SystemConfig) -> Result<(f64, f64)> {
    let (m1, m2) = Engine::new(config)?.deadline_success_moments()?;
    Ok((m1.to_f64(), m2.to_f64()))
}

/// All four inter-generation gap moments (e_xf, e_xf2, e_xs, e_xs2).
pub fn intergen_moments_random(config: &SystemConfig) -> Result<(f64, f64, f64, f64)> {
    let (a, b, c, d) = Engine::new(config)?.gap_moments()?;
    Ok((a.to_f64(), b.to_f64(), c.to_f64(), d.to_f64()))
}

/// Expected service time of a delivered update under the random deadline.
pub fn successful_service_expectation_random(config: &SystemConfig) -> Result<f64> {
    Ok(Engine::new(config)?
        .delivered_service_expectation()?
        .to_f64())
}

/// Full closed-form report for the random-deadline policy.
pub fn average_aoi_random(config: &SystemConfig) -> Result<AoiReport> {
    Engine::new(config)?.report()
}
