//! Deliberately incorrect closed-form variants kept as regression baselines.
//!
//! Each function here differs from its production counterpart by one
//! plausible-looking algebraic slip. They exist so the validation suite can
//! demonstrate the slips are load-bearing: every variant must FAIL the
//! quadrature-oracle comparison at 1e-6 on configurations where the
//! production forms agree to 1e-8. Nothing outside tests and the
//! fault-injection path of the validate command may call these.

use crate::coefficients::{coefficient_table, rank_success_from_table};
use crate::error::{Error, Result};
use crate::model::{DeadlinePolicy, SystemConfig};
use crate::numeric::dd::Dd;

/// Failure split for the fixed-deadline policy with the denominator's
/// rank-exceedance sum ADDED instead of subtracted.
///
/// The giveaway: as the horizon approaches the service shift every failure
/// is deadline-terminated, so p_f2 must approach 1; this form approaches
/// N / (3N - 2K) instead.
pub fn failure_split_plus_denominator(config: &SystemConfig) -> Result<(f64, f64)> {
    let horizon = match config.deadline() {
        DeadlinePolicy::Fixed { horizon } => horizon,
        _ => {
            return Err(Error::Domain(
                "the sign-variant failure split is defined only for fixed deadlines".into(),
            ))
        }
    };
    let table = coefficient_table(config)?;
    let ranks = rank_success_from_table(config, &table)?;
    let n = config.num_devices();
    let k = config.threshold();
    let rate = config.service().rate();
    let shift = config.service().shift();
    let mut z_low = Dd::ZERO;
    for h in 1..=k {
        z_low = z_low.add(ranks.exceed_dd(h));
    }
    let mut z_high = Dd::ZERO;
    for h in k + 1..=n {
        z_high = z_high.add(ranks.exceed_dd(h));
    }
    let spare = f64::from(n - k);
    let num = ranks.exceed_dd(k).mul_f64(spare).add(z_low);
    let survival = Dd::from_f64(-rate * (horizon - shift)).exp();
    let den = survival.mul_f64(f64::from(n)).add_f64(spare).add(z_high);
    let p_f2 = num.div(den);
    Ok((Dd::ONE.sub(p_f2).to_f64(), p_f2.to_f64()))
}

/// Conditional K-th completion moments for the random deadline with spurious
/// device-count factors: N multiplying the shift term of each moment
/// polynomial and an extra (N - K) in the denominator.
///
/// Undefined at K = N (the spurious factor divides by zero).
pub fn completion_moments_random_rescaled(config: &SystemConfig) -> Result<(f64, f64)> {
    match config.deadline() {
        DeadlinePolicy::ShiftedExponential { .. } => {}
        _ => {
            return Err(Error::Domain(
                "the rescaled completion moments are defined only for random deadlines".into(),
            ))
        }
    }
    let n = config.num_devices();
    let k = config.threshold();
    if k == n {
        return Err(Error::Domain(
            "the rescaled variant divides by N - K and is undefined at K = N".into(),
        ));
    }
    let table = coefficient_table(config)?;
    let ranks = rank_success_from_table(config, &table)?;
    let sk = ranks.success_dd(k);
    if sk.to_f64() <= 0.0 {
        return Err(Error::Domain(
            "the K-th completion never beats the deadline; conditioning is empty".into(),
        ));
    }
    let rate_s = config.service().rate();
    let shift = config.service().shift();
    let nf = f64::from(n);
    let mut first = Dd::ZERO;
    let mut second = Dd::ZERO;
    for j in 0..k {
        let hh = table.h_dd(k, j);
        let b = table.b_dd(k, j).mul_f64(rate_s);
        let ch = hh.mul_f64(shift);
        let h2 = hh.mul(hh);
        // P1 = c N H + 1; P2 = c^2 N H^2 + 2 c H + 2.
        let p1 = ch.mul_f64(nf).add_f64(1.0);
        let p2 = ch.mul(ch).mul_f64(nf).add(ch.mul_f64(2.0)).add_f64(2.0);
        first = first.add(b.mul(p1).div(h2));
        second = second.add(b.mul(p2).div(h2.mul(hh)));
    }
    let scale = sk.mul_f64(f64::from(n - k));
    Ok((first.div(scale).to_f64(), second.div(scale).to_f64()))
}

/// Delivered-service expectation for the random deadline without the 1/N
/// normalization of the success probability: exactly N times the production
/// value.
pub fn service_expectation_random_unnormalized(config: &SystemConfig) -> Result<f64> {
    match config.deadline() {
        DeadlinePolicy::ShiftedExponential { .. } => {}
        _ => {
            return Err(Error::Domain(
                "the unnormalized service expectation is defined only for random deadlines".into(),
            ))
        }
    }
    let table = coefficient_table(config)?;
    let ranks = rank_success_from_table(config, &table)?;
    let k = config.threshold();
    let rate_s = config.service().rate();
    let shift = config.service().shift();
    let mut sum_s = Dd::ZERO;
    for h in 1..=k {
        sum_s = sum_s.add(ranks.success_dd(h));
    }
    if sum_s.to_f64() <= 0.0 {
        return Err(Error::Divergent(
            "success probability is zero; no service time is ever delivered".into(),
        ));
    }
    let mut acc = Dd::ZERO;
    for h in 1..=k {
        for j in 0..h {
            let hh = table.h_dd(h, j);
            let p1 = hh.mul_f64(shift).add_f64(1.0);
            acc = acc.add(table.b_dd(h, j).mul_f64(rate_s).mul(p1).div(hh.mul(hh)));
        }
    }
    // Dividing by P(success) = sum_s / N instead of by sum_s.
    Ok(acc
        .div(sum_s.div_f64(f64::from(config.num_devices())))
        .to_f64())
}

/// Delivered-service expectation for the fixed deadline with the decay
/// factor exp(-rate U (horizon - shift)) replaced by exp(-rate U horizon):
/// the shift correction dropped from the exponent.
///
/// Coincides with the production value exactly when the shift is zero.
pub fn service_expectation_fixed_unshifted_decay(config: &SystemConfig) -> Result<f64> {
    let horizon = match config.deadline() {
        DeadlinePolicy::Fixed { horizon } => horizon,
        _ => {
            return Err(Error::Domain(
                "the unshifted-decay service expectation is defined only for fixed deadlines"
                    .into(),
            ))
        }
    };
    let table = coefficient_table(config)?;
    let ranks = rank_success_from_table(config, &table)?;
    let k = config.threshold();
    let rate = config.service().rate();
    let shift = config.service().shift();
    let mut sum_s = Dd::ZERO;
    for h in 1..=k {
        sum_s = sum_s.add(ranks.success_dd(h));
    }
    if sum_s.to_f64() <= 0.0 {
        return Err(Error::Divergent(
            "success probability is zero; no service time is ever delivered".into(),
        ));
    }
    let mut acc = Dd::ZERO;
    for h in 1..=k {
        for j in 0..h {
            let u = table.u(h, j);
            let lu = Dd::from_f64(rate).mul_f64(u);
            let head = lu.mul_f64(shift).add_f64(1.0);
            let decay = Dd::from_f64(-rate * horizon).mul_f64(u).exp();
            let bracket = head.sub(lu.mul_f64(horizon).add_f64(1.0).mul(decay));
            acc = acc.add(table.b_dd(h, j).mul(bracket).div(lu.mul_f64(u)));
        }
    }
    Ok(acc.div(sum_s).to_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::{case_probabilities_fixed, successful_service_expectation_fixed};
    use crate::model::ServiceModel;
    use crate::random::{conditional_tnk_moments_random, successful_service_expectation_random};
    use approx::assert_relative_eq;

    fn fixed_config(n: u32, k: u32, rate: f64, shift: f64, horizon: f64) -> SystemConfig {
        SystemConfig::new(
            n,
            k,
            ServiceModel::new(rate, shift).unwrap(),
            DeadlinePolicy::Fixed { horizon },
        )
        .unwrap()
    }

    fn random_config(n: u32, k: u32, rate: f64, shift: f64, rate_d: f64) -> SystemConfig {
        SystemConfig::new(
            n,
            k,
            ServiceModel::new(rate, shift).unwrap(),
            DeadlinePolicy::ShiftedExponential {
                rate: rate_d,
                shift,
            },
        )
        .unwrap()
    }

    #[test]
    fn plus_denominator_breaks_the_tight_horizon_limit() {
        let c = fixed_config(10, 7, 0.5, 0.1, 0.1 + 1e-9);
        let (_, variant_pf2) = failure_split_plus_denominator(&c).unwrap();
        let good = case_probabilities_fixed(&c).unwrap();
        assert!(good.p_f2 > 1.0 - 1e-6);
        // N / (3N - 2K) = 10/16 for this config.
        assert!((variant_pf2 - 0.625).abs() < 1e-6);
        assert!((variant_pf2 - good.p_f2).abs() > 0.1);
    }

    #[test]
    fn plus_denominator_diverges_from_production_at_moderate_horizons() {
        let c = fixed_config(10, 7, 0.5, 0.1, 1.0);
        let (_, variant_pf2) = failure_split_plus_denominator(&c).unwrap();
        let good = case_probabilities_fixed(&c).unwrap();
        assert!((variant_pf2 - good.p_f2).abs() > 1e-3);
    }

    #[test]
    fn rescaled_moments_reject_full_threshold() {
        let c = random_config(5, 5, 1.0, 0.0, 1.0);
        assert!(matches!(
            completion_moments_random_rescaled(&c),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rescaled_moments_diverge_from_production() {
        let c = random_config(10, 7, 0.5, 0.1, 1.0);
        let (v1, v2) = completion_moments_random_rescaled(&c).unwrap();
        let (g1, g2) = conditional_tnk_moments_random(&c).unwrap();
        assert!((v1 - g1).abs() / g1 > 1e-3);
        assert!((v2 - g2).abs() / g2 > 1e-3);
    }

    #[test]
    fn unnormalized_service_expectation_is_n_times_production() {
        let c = random_config(10, 7, 0.5, 0.1, 1.0);
        let variant = service_expectation_random_unnormalized(&c).unwrap();
        let good = successful_service_expectation_random(&c).unwrap();
        assert_relative_eq!(variant, 10.0 * good, max_relative = 1e-12);
    }

    #[test]
    fn unshifted_decay_matches_production_exactly_at_zero_shift() {
        let c = fixed_config(10, 7, 0.5, 0.0, 1.0);
        let variant = service_expectation_fixed_unshifted_decay(&c).unwrap();
        let good = successful_service_expectation_fixed(&c).unwrap();
        assert_eq!(variant, good);
    }

    #[test]
    fn unshifted_decay_diverges_from_production_at_positive_shift() {
        let c = fixed_config(10, 7, 0.5, 0.1, 1.0);
        let variant = service_expectation_fixed_unshifted_decay(&c).unwrap();
        let good = successful_service_expectation_fixed(&c).unwrap();
        assert!((variant - good).abs() / good > 1e-4);
    }
}
