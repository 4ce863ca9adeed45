//! Shifted-exponential service distribution and order statistics of i.i.d.
//! per-device service times.

use crate::error::{Error, Result};
use crate::model::{ServiceModel, SystemConfig};
use crate::numeric::binomial;

/// P(service time <= t). Zero at or below the shift.
pub fn service_cdf(t: f64, model: &ServiceModel) -> f64 {
    if t <= model.shift() {
        return 0.0;
    }
    -(-model.rate() * (t - model.shift())).exp_m1()
}

/// Service-time density. Zero at or below the shift.
pub fn service_pdf(t: f64, model: &ServiceModel) -> f64 {
    if t <= model.shift() {
        return 0.0;
    }
    model.rate() * (-model.rate() * (t - model.shift())).exp()
}

fn check_rank(rank: u32, config: &SystemConfig) -> Result<()> {
    if rank == 0 || rank > config.num_devices() {
        return Err(Error::Domain(format!(
            "rank {rank} must lie in 1..={}",
            config.num_devices()
        )));
    }
    Ok(())
}

/// Density of the time at which the `rank`-th of the `num_devices` service
/// times completes. Zero at or below the shift.
pub fn order_stat_pdf(t: f64, rank: u32, config: &SystemConfig) -> Result<f64> {
    check_rank(rank, config)?;
    let model = config.service();
    if t <= model.shift() {
        return Ok(0.0);
    }
    let n = config.num_devices();
    let x = model.rate() * (t - model.shift());
    let sf = (-x).exp();
    let cdf = -(-x).exp_m1();
    // rank * C(n, rank) service-time orderings place the rank-th completion
    // at t; the product stays within f64 range for n <= 30.
    let coeff = (u128::from(rank) * binomial(n, rank)) as f64;
    Ok(coeff * cdf.powi(rank as i32 - 1) * sf.powi((n - rank) as i32 + 1) * model.rate())
}

/// P(`rank`-th completion <= t): the upper binomial tail of per-device
/// completion events. Zero at or below the shift.
pub fn order_stat_cdf(t: f64, rank: u32, config: &SystemConfig) -> Result<f64> {
    check_rank(rank, config)?;
    let model = config.service();
    if t <= model.shift() {
        return Ok(0.0);
    }
    let n = config.num_devices();
    let x = model.rate() * (t - model.shift());
    let sf = (-x).exp();
    let cdf = -(-x).exp_m1();
    let mut total = 0.0;
    for i in rank..=n {
        total += binomial(n, i) as f64 * cdf.powi(i as i32) * sf.powi((n - i) as i32);
    }
    Ok(total.min(1.0))
}

/// Lower binomial tail P(Binom(n, p) <= k) evaluated from the success and
/// failure probabilities separately, so callers can supply both to full
/// relative accuracy. A negative `k` yields 0; `k >= n` yields 1.
pub(crate) fn binomial_tail_le(n: u32, k: i64, p: f64, q: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if k >= i64::from(n) {
        return 1.0;
    }
    let mut total = 0.0;
    for i in 0..=(k as u32) {
        total += binomial(n, i) as f64 * p.powi(i as i32) * q.powi((n - i) as i32);
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DeadlinePolicy;
    use approx::assert_relative_eq;

    fn config(n: u32, k: u32, rate: f64, shift: f64) -> SystemConfig {
        SystemConfig::new(
            n,
            k,
            ServiceModel::new(rate, shift).unwrap(),
            DeadlinePolicy::Infinite,
        )
        .unwrap()
    }

    #[test]
    fn service_cdf_known_values() {
        let m = ServiceModel::new(2.0, 0.5).unwrap();
        assert_eq!(service_cdf(0.4, &m), 0.0);
        assert_eq!(service_cdf(0.5, &m), 0.0);
        // One mean above the shift: 1 - 1/e.
        assert_relative_eq!(service_cdf(1.0, &m), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);

        let m = ServiceModel::new(1.0 / 3.0, 0.1).unwrap();
        assert_relative_eq!(
            service_cdf(1.1, &m),
            1.0 - (-1.0f64 / 3.0).exp(),
            epsilon = 1e-15
        );
        assert!((service_cdf(1.1, &m) - 0.283469).abs() < 1e-6);
    }

    #[test]
    fn single_device_order_stat_is_the_service_density() {
        let c = config(1, 1, 0.7, 0.3);
        for &t in &[0.31, 0.5, 1.0, 4.0] {
            assert_relative_eq!(
                order_stat_pdf(t, 1, &c).unwrap(),
                service_pdf(t, &c.service()),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn order_stat_pdf_two_device_minimum() {
        // Minimum of two unit exponentials at t = 0.5: 2 e^{-1}.
        let c = config(2, 1, 1.0, 0.0);
        assert_relative_eq!(
            order_stat_pdf(0.5, 1, &c).unwrap(),
            2.0 * (-1.0f64).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn order_stat_cdf_two_device_maximum() {
        // Maximum of two unit exponentials at t = ln 2: (1/2)^2.
        let c = config(2, 2, 1.0, 0.0);
        assert_relative_eq!(
            order_stat_cdf(std::f64::consts::LN_2, 2, &c).unwrap(),
            0.25,
            epsilon = 1e-14
        );
        assert_eq!(order_stat_cdf(0.0, 2, &c).unwrap(), 0.0);
        assert_eq!(order_stat_cdf(-1.0, 1, &c).unwrap(), 0.0);
    }

    #[test]
    fn rank_out_of_range_is_a_domain_error() {
        let c = config(5, 3, 1.0, 0.0);
        assert!(order_stat_pdf(1.0, 0, &c).is_err());
        assert!(order_stat_pdf(1.0, 6, &c).is_err());
        assert!(order_stat_cdf(1.0, 0, &c).is_err());
        assert!(order_stat_cdf(1.0, 6, &c).is_err());
    }

    #[test]
    fn order_stat_cdf_monotone_in_t_and_rank() {
        let c = config(10, 7, 0.5, 0.1);
        let mut prev = 0.0;
        for i in 1..40 {
            let t = 0.1 + 0.2 * f64::from(i);
            let v = order_stat_cdf(t, 7, &c).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        for h in 1..10 {
            let lo = order_stat_cdf(2.0, h + 1, &c).unwrap();
            let hi = order_stat_cdf(2.0, h, &c).unwrap();
            assert!(hi >= lo);
        }
    }

    #[test]
    fn binomial_tail_le_edge_cases() {
        assert_eq!(binomial_tail_le(5, -1, 0.3, 0.7), 0.0);
        assert_eq!(binomial_tail_le(5, 5, 0.3, 0.7), 1.0);
        assert_eq!(binomial_tail_le(5, 9, 0.3, 0.7), 1.0);
        // P(Binom(2, 1/2) <= 1) = 3/4.
        assert_relative_eq!(binomial_tail_le(2, 1, 0.5, 0.5), 0.75, epsilon = 1e-15);
    }
}
