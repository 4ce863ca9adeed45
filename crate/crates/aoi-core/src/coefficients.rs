//! Expansion coefficients of the order-statistic integrals and the per-rank
//! deadline-race probabilities built from them.
//!
//! For rank h out of N devices the density of the h-th completion expands
//! into h terms with integer weights
//!
//!   B[h][j] = h * C(N, h) * C(h-1, j) * (-1)^j,   j = 0 .. h-1,
//!
//! paired with integer decay multipliers U[h][j] = N - h + 1 + j. Every
//! closed form downstream is a weighted sum over (B, U) with one of two
//! policy-dependent factors:
//!
//!   V[h][j] = exp(-rate_s * U * (horizon - shift))   (fixed deadline),
//!   H[h][j] = rate_s * U + rate_d                    (random deadline).
//!
//! The alternating B terms reach ~6e13 while their sums can fall below
//! 1e-10, so all sums are accumulated in double-double precision.

use crate::error::Result;
use crate::model::{DeadlinePolicy, SystemConfig};
use crate::numeric::binomial;
use crate::numeric::dd::Dd;

/// Expansion coefficients for one system configuration.
///
/// Rows are indexed by rank `h` (1-based); within a row, `j` runs from 0 to
/// `h - 1`. `V` is present for the fixed policy (all zero for the no-deadline
/// policy, its horizon-to-infinity limit); `H` is present for the random
/// policy.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    num_devices: u32,
    b: Vec<Vec<Dd>>,
    u: Vec<Vec<f64>>,
    v: Option<Vec<Vec<Dd>>>,
    h: Option<Vec<Vec<Dd>>>,
}

impl CoefficientTable {
    /// Number of ranks (rows), equal to the device count.
    pub fn num_ranks(&self) -> u32 {
        self.num_devices
    }

    /// Number of terms in row `h`, which is `h` itself.
    pub fn terms(&self, h: u32) -> u32 {
        self.check_row(h);
        h
    }

    fn check_row(&self, h: u32) {
        assert!(
            h >= 1 && h <= self.num_devices,
            "rank {h} out of 1..={}",
            self.num_devices
        );
    }

    /// Alternating integer weight B[h][j].
    pub fn b(&self, h: u32, j: u32) -> f64 {
        self.b_dd(h, j).to_f64()
    }

    /// Decay multiplier U[h][j] = N - h + 1 + j.
    pub fn u(&self, h: u32, j: u32) -> f64 {
        self.check_row(h);
        self.u[(h - 1) as usize][j as usize]
    }

    /// Fixed-deadline survival factor V[h][j]. Panics for the random policy.
    pub fn v(&self, h: u32, j: u32) -> f64 {
        self.v_dd(h, j).to_f64()
    }

    /// Combined decay rate H[h][j]. Panics unless the policy is random.
    pub fn h(&self, h: u32, j: u32) -> f64 {
        self.h_dd(h, j).to_f64()
    }

    pub(crate) fn b_dd(&self, h: u32, j: u32) -> Dd {
        self.check_row(h);
        self.b[(h - 1) as usize][j as usize]
    }

    pub(crate) fn v_dd(&self, h: u32, j: u32) -> Dd {
        self.check_row(h);
        self.v
            .as_ref()
            .expect("V is defined for fixed or no deadline")[(h - 1) as usize][j as usize]
    }

    pub(crate) fn h_dd(&self, h: u32, j: u32) -> Dd {
        self.check_row(h);
        self.h.as_ref().expect("H is defined for random deadlines")[(h - 1) as usize][j as usize]
    }
}

/// Builds the full coefficient table for `config`.
pub fn coefficient_table(config: &SystemConfig) -> Result<CoefficientTable> {
    let n = config.num_devices();
    let rate_s = config.service().rate();
    let shift = config.service().shift();

    let mut b = Vec::with_capacity(n as usize);
    let mut u = Vec::with_capacity(n as usize);
    for h in 1..=n {
        let lead = u128::from(h) * binomial(n, h);
        let mut row_b = Vec::with_capacity(h as usize);
        let mut row_u = Vec::with_capacity(h as usize);
        for j in 0..h {
            let magnitude = Dd::from_u128(lead * binomial(h - 1, j));
            row_b.push(if j % 2 == 0 {
                magnitude
            } else {
                magnitude.neg()
            });
            row_u.push(f64::from(n - h + 1 + j));
        }
        b.push(row_b);
        u.push(row_u);
    }

    let (v, h_coef) = match config.deadline() {
        DeadlinePolicy::Infinite => {
            let v = u
                .iter()
                .map(|row| row.iter().map(|_| Dd::ZERO).collect())
                .collect();
            (Some(v), None)
        }
        DeadlinePolicy::Fixed { horizon } => {
            let window = horizon - shift;
            let v = u
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&uu| Dd::from_f64(-rate_s * window).mul_f64(uu).exp())
                        .collect()
                })
                .collect();
            (Some(v), None)
        }
        DeadlinePolicy::ShiftedExponential { rate, .. } => {
            let h_coef = u
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&uu| Dd::from_f64(rate_s).mul_f64(uu).add_f64(rate))
                        .collect()
                })
                .collect();
            (None, Some(h_coef))
        }
    };

    Ok(CoefficientTable {
        num_devices: n,
        b,
        u,
        v,
        h: h_coef,
    })
}

/// Per-rank outcome probabilities of the race between the h-th service
/// completion and the deadline.
///
/// `exceed_prob(h)` is the probability the deadline fires first;
/// `success_prob(h)` is the probability the h-th completion happens first.
/// The f64 views are exact complements by construction: the smaller of the
/// pair is rounded from the extended-precision sum and the larger is defined
/// as one minus it.
#[derive(Debug, Clone)]
pub struct RankSuccessVector {
    exceed: Vec<f64>,
    success: Vec<f64>,
    exceed_dd: Vec<Dd>,
    success_dd: Vec<Dd>,
}

impl RankSuccessVector {
    /// Number of ranks covered (the device count).
    pub fn num_ranks(&self) -> u32 {
        self.exceed.len() as u32
    }

    /// P(deadline fires before the h-th completion).
    pub fn exceed_prob(&self, h: u32) -> f64 {
        self.exceed[(h - 1) as usize]
    }

    /// P(h-th completion beats the deadline).
    pub fn success_prob(&self, h: u32) -> f64 {
        self.success[(h - 1) as usize]
    }

    pub(crate) fn exceed_dd(&self, h: u32) -> Dd {
        self.exceed_dd[(h - 1) as usize]
    }

    pub(crate) fn success_dd(&self, h: u32) -> Dd {
        self.success_dd[(h - 1) as usize]
    }
}

/// Computes the per-rank race probabilities for every rank 1..=N.
pub fn rank_success_probabilities(config: &SystemConfig) -> Result<RankSuccessVector> {
    let table = coefficient_table(config)?;
    rank_success_from_table(config, &table)
}

pub(crate) fn rank_success_from_table(
    config: &SystemConfig,
    table: &CoefficientTable,
) -> Result<RankSuccessVector> {
    let n = config.num_devices();
    let random = config.deadline().is_random();
    let rate_d = match config.deadline() {
        DeadlinePolicy::ShiftedExponential { rate, .. } => rate,
        _ => 0.0,
    };

    let mut exceed_dd = Vec::with_capacity(n as usize);
    for h in 1..=n {
        let mut acc = Dd::ZERO;
        for j in 0..h {
            let term = if random {
                // B * rate_d / (U * H): the positive-product form of
                // B * (1/U - rate_s / H).
                table
                    .b_dd(h, j)
                    .mul_f64(rate_d)
                    .div(table.h_dd(h, j).mul_f64(table.u(h, j)))
            } else {
                table
                    .b_dd(h, j)
                    .mul(table.v_dd(h, j))
                    .div_f64(table.u(h, j))
            };
            acc = acc.add(term);
        }
        exceed_dd.push(acc);
    }

    let success_dd: Vec<Dd> = exceed_dd.iter().map(|&e| Dd::ONE.sub(e)).collect();
    let mut exceed = Vec::with_capacity(n as usize);
    let mut success = Vec::with_capacity(n as usize);
    for h in 0..n as usize {
        let e = exceed_dd[h].to_f64().clamp(0.0, 1.0);
        if e <= 0.5 {
            exceed.push(e);
            success.push(1.0 - e);
        } else {
            let s = success_dd[h].to_f64().clamp(0.0, 1.0);
            success.push(s);
            exceed.push(1.0 - s);
        }
    }

    Ok(RankSuccessVector {
        exceed,
        success,
        exceed_dd,
        success_dd,
    })
}

/// Split of the success event by what terminated the round, carried in
/// extended precision for the engines.
pub(crate) struct SuccessSplit {
    /// Sum of success_prob over ranks 1..=K; equals N * P(success).
    pub(crate) sum_success: Dd,
    /// P(round ended by the K-th completion | success).
    pub(crate) p_s1: Dd,
    /// P(round ended by the deadline | success).
    pub(crate) p_s2: Dd,
}

/// Conditional split P(s1) = K * success[K] / sum_{h<=K} success[h], with the
/// complement accumulated from exceed-probability differences so it stays
/// relatively accurate when every success probability is close to one.
pub(crate) fn success_split(ranks: &RankSuccessVector, threshold: u32) -> SuccessSplit {
    let mut sum_success = Dd::ZERO;
    let mut s2_num = Dd::ZERO;
    let exceed_k = ranks.exceed_dd(threshold);
    for h in 1..=threshold {
        sum_success = sum_success.add(ranks.success_dd(h));
        // success[h] - success[K] = exceed[K] - exceed[h], free of the
        // cancellation against 1 that the success form would suffer.
        s2_num = s2_num.add(exceed_k.sub(ranks.exceed_dd(h)));
    }
    let p_s2 = s2_num.div(sum_success);
    SuccessSplit {
        sum_success,
        p_s1: Dd::ONE.sub(p_s2),
        p_s2,
    }
}
