//! Report types shared by the analytic engines, the quadrature oracle, and
//! the CLI, plus the renewal-reward pieces (waiting moments and the final
//! age assembly) that are identical for every deadline policy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::numeric::dd::Dd;

/// Outcome probabilities of one transmission round for the tracked device.
///
/// `p_success` is the unconditional probability the device receives the
/// update. The pair (`p_f1`, `p_f2`) splits the failure event by what ended
/// the round: enough other devices finished, or the deadline fired. The pair
/// (`p_s1`, `p_s2`) splits the success event the same way. Each pair sums to
/// one exactly: the smaller member is computed directly and the larger is
/// its constructed complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseProbabilities {
    pub p_success: f64,
    pub p_f1: f64,
    pub p_f2: f64,
    pub p_s1: f64,
    pub p_s2: f64,
}

/// First and second moments of the renewal-cycle building blocks: the
/// inter-generation gap after a failed round (`e_xf`, `e_xf2`), after a
/// successful round (`e_xs`, `e_xs2`), the waiting time between successes
/// (`e_w`, `e_w2`), the geometric round count per cycle (`e_m`), and the
/// delivered service time (`e_that`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub e_xf: f64,
    pub e_xf2: f64,
    pub e_xs: f64,
    pub e_xs2: f64,
    pub e_w: f64,
    pub e_w2: f64,
    pub e_m: f64,
    pub e_that: f64,
}

/// Full analytic output for one configuration: the two age averages plus
/// every intermediate quantity, so tests can assert piecewise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiReport {
    pub config: SystemConfig,
    pub average_aoi: f64,
    pub average_peak_aoi: f64,
    pub cases: CaseProbabilities,
    pub moments: MomentSet,
}

/// Moments of the waiting time W between consecutive successful receptions,
/// and of the geometric number of rounds M per renewal cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitMoments {
    pub e_w: f64,
    pub e_w2: f64,
    pub e_m: f64,
}

/// Waiting-time moments from the per-round success probability and the
/// failed-round gap moments.
///
/// M is geometric with success probability `p_success`, so E[M] = 1/p and
/// Var[M] = (1-p)/p². W is the sum of the M-1 failed gaps:
/// E[W] = (E[M]-1) E[X^F] and Var[W] = E[X^F]² Var[M] + Var[X^F] (E[M]-1).
pub fn wait_moments(p_success: f64, e_xf: f64, e_xf2: f64) -> Result<WaitMoments> {
    if !p_success.is_finite() || p_success > 1.0 {
        return Err(Error::Domain(format!(
            "success probability {p_success} must lie in (0, 1]"
        )));
    }
    if p_success <= 0.0 {
        return Err(Error::Divergent(
            "per-round success probability is zero, so the device never \
             receives an update and its age grows without bound"
                .into(),
        ));
    }
    if p_success == 1.0 {
        return Ok(WaitMoments {
            e_w: 0.0,
            e_w2: 0.0,
            e_m: 1.0,
        });
    }
    if e_xf < 0.0 || e_xf2 < e_xf * e_xf * (1.0 - 1e-9) {
        return Err(Error::Domain(format!(
            "inconsistent failed-gap moments: e_xf = {e_xf}, e_xf2 = {e_xf2}"
        )));
    }
    let e_m = 1.0 / p_success;
    let var_m = (1.0 - p_success) / (p_success * p_success);
    // Rounding can leave a microscopic negative variance for a degenerate
    // gap; clamp instead of propagating it into the square root of nothing.
    let var_xf = (e_xf2 - e_xf * e_xf).max(0.0);
    let e_w = (e_m - 1.0) * e_xf;
    let var_w = e_xf * e_xf * var_m + var_xf * (e_m - 1.0);
    Ok(WaitMoments {
        e_w,
        e_w2: e_w * e_w + var_w,
        e_m,
    })
}

/// Rounds a complementary probability pair to f64 so that the two values sum
/// to one exactly: the smaller member keeps its extended-precision rounding
/// and the larger is defined as its complement.
pub(crate) fn complementary_pair(first: Dd, second: Dd) -> (f64, f64) {
    let a = first.to_f64().clamp(0.0, 1.0);
    let b = second.to_f64().clamp(0.0, 1.0);
    if a <= b {
        (a, 1.0 - a)
    } else {
        (1.0 - b, b)
    }
}

/// Extended-precision waiting moments used inside the analytic engines, so
/// small waits near certain success keep their relative accuracy. Takes the
/// failure probability separately to avoid computing 1 - p at f64 precision.
pub(crate) fn wait_moments_dd(p_fail: Dd, p_success: Dd, e_xf: Dd, e_xf2: Dd) -> (Dd, Dd, Dd) {
    let extra_rounds = p_fail.div(p_success); // E[M] - 1
    let e_m = Dd::ONE.add(extra_rounds);
    let var_m = extra_rounds.mul(e_m);
    let e_w = extra_rounds.mul(e_xf);
    let mut var_xf = e_xf2.sub(e_xf.mul(e_xf));
    if var_xf.to_f64() < 0.0 {
        var_xf = Dd::ZERO;
    }
    let var_w = e_xf.mul(e_xf).mul(var_m).add(var_xf.mul(extra_rounds));
    let e_w2 = e_w.mul(e_w).add(var_w);
    (e_w, e_w2, e_m)
}

/// Renewal-reward assembly of the final report from the case probabilities
/// and the complete moment set.
///
/// The average age is the expected sawtooth area over a renewal cycle
/// divided by the expected cycle length W + X^S:
///
///   avg = (E[W²] + 2(E[T̂] + E[X^S]) E[W] + 2 E[X^S] E[T̂] + E[(X^S)²])
///         / (2 E[W] + 2 E[X^S]),
///
/// and the average peak age is E[X^S] + E[W] + E[T̂].
pub fn assemble_report(
    config: SystemConfig,
    cases: CaseProbabilities,
    moments: MomentSet,
) -> AoiReport {
    let m = &moments;
    let average_aoi =
        (m.e_w2 + 2.0 * (m.e_that + m.e_xs) * m.e_w + 2.0 * m.e_xs * m.e_that + m.e_xs2)
            / (2.0 * (m.e_w + m.e_xs));
    let average_peak_aoi = m.e_xs + m.e_w + m.e_that;
    AoiReport {
        config,
        average_aoi,
        average_peak_aoi,
        cases,
        moments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn certain_success_means_no_waiting() {
        let w = wait_moments(1.0, 123.0, 20000.0).unwrap();
        assert_eq!(w.e_w, 0.0);
        assert_eq!(w.e_w2, 0.0);
        assert_eq!(w.e_m, 1.0);
    }

    #[test]
    fn half_success_unit_gap() {
        // p = 1/2: E[M] = 2, Var[M] = 2; degenerate unit gap:
        // E[W] = 1, Var[W] = 1*2 + 0*1 = 2, E[W^2] = 3.
        let w = wait_moments(0.5, 1.0, 1.0).unwrap();
        assert_relative_eq!(w.e_m, 2.0, epsilon = 1e-15);
        assert_relative_eq!(w.e_w, 1.0, epsilon = 1e-15);
        assert_relative_eq!(w.e_w2, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn third_success_spread_gap() {
        // p = 1/3: E[M] = 3, Var[M] = 6; gap with mean 2, second moment 5:
        // E[W] = 4, Var[W] = 4*6 + 1*2 = 26, E[W^2] = 16 + 26 = 42.
        let w = wait_moments(1.0 / 3.0, 2.0, 5.0).unwrap();
        assert_relative_eq!(w.e_m, 3.0, epsilon = 1e-15);
        assert_relative_eq!(w.e_w, 4.0, epsilon = 1e-15);
        assert_relative_eq!(w.e_w2, 42.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_success_is_divergent() {
        assert!(matches!(
            wait_moments(0.0, 1.0, 2.0),
            Err(Error::Divergent(_))
        ));
        assert!(matches!(
            wait_moments(-0.1, 1.0, 2.0),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn invalid_inputs_are_domain_errors() {
        assert!(matches!(wait_moments(1.5, 1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(
            wait_moments(f64::NAN, 1.0, 2.0),
            Err(Error::Domain(_))
        ));
        // Second moment far below the squared mean is impossible.
        assert!(matches!(wait_moments(0.5, 2.0, 1.0), Err(Error::Domain(_))));
    }
}
