//! Adaptive Gauss-Kronrod quadrature over finite intervals.
//!
//! A 21-point Kronrod rule (10-point Gauss embedded) scores each panel; the
//! panel with the largest error estimate is bisected until the summed
//! estimate meets the requested tolerance. Node and weight tables are the
//! classic QUADPACK constants.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and limits for the quadrature oracle.
///
/// `tail_cutoff` truncates the semi-infinite integrals; `None` picks
/// shift + 80 / min(rate) per configuration, far below the tolerances for
/// every exponential-family integrand here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub tail_cutoff: Option<f64>,
    pub max_subdivisions: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            tail_cutoff: None,
            max_subdivisions: 256,
        }
    }
}

impl QuadratureSpec {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0)
            || !(self.rel_tol.is_finite() && self.rel_tol > 0.0)
        {
            return Err(Error::Domain(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Domain(
                "quadrature needs at least one subdivision".into(),
            ));
        }
        Ok(())
    }
}

/// Kronrod abscissae (positive half) for the 21-point rule; the final entry
/// is the center. Odd indices are the embedded 10-point Gauss nodes. All
/// three tables keep their published 33-digit forms for checkability.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

/// Gauss weights for the embedded 10-point rule.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Kronrod weights matching XGK.
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// One 21-point panel evaluation: (integral, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK[10];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for (j, &w_gauss) in WG.iter().enumerate() {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += w_gauss * (f1 + f2);
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtw = 2 * j;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }

    let mean = res_kronrod * 0.5;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let raw_err = ((res_kronrod - res_gauss) * half).abs();
    res_asc *= half.abs();
    res_abs *= half.abs();

    // QUADPACK error rescaling: damp the raw Gauss/Kronrod difference toward
    // the scale of the integrand's variation, floored by roundoff on |f|.
    let mut err = raw_err;
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    (res_kronrod * half, err)
}

struct Panel {
    a: f64,
    b: f64,
    integral: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over [a, b] to the tolerances in `spec`.
///
/// Returns a precision error when `max_subdivisions` bisections cannot push
/// the summed panel-error estimate below max(abs_tol, rel_tol * |integral|).
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("quadrature bounds must be finite".into()));
    }
    if b <= a {
        return Ok(0.0);
    }
    let (integral, error) = gk21(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        integral,
        error,
    });
    let mut total = integral;
    let mut total_err = error;
    for _ in 0..spec.max_subdivisions {
        if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
            return Ok(total);
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel narrower than f64 spacing; cannot split further.
            heap.push(worst);
            break;
        }
        let (li, le) = gk21(f, worst.a, mid);
        let (ri, re) = gk21(f, mid, worst.b);
        total += li + ri - worst.integral;
        total_err += le + re - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            integral: li,
            error: le,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            integral: ri,
            error: re,
        });
    }
    if total_err <= spec.abs_tol.max(spec.rel_tol * total.abs()) {
        return Ok(total);
    }
    Err(Error::Precision {
        message: format!("integral over [{a}, {b}] did not converge"),
        achieved: total_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_a_polynomial_exactly() {
        // Degree 7 is inside the 10-point Gauss exactness range.
        let spec = QuadratureSpec::default();
        let v = integrate(&|x: f64| x.powi(7) - 3.0 * x * x + 1.0, 0.0, 2.0, &spec).unwrap();
        assert!((v - (256.0 / 8.0 - 8.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn integrates_a_decaying_exponential_over_a_long_range() {
        let spec = QuadratureSpec::default();
        let v = integrate(&|x: f64| (-x).exp(), 0.0, 700.0, &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "value {v}");
    }

    #[test]
    fn handles_a_kink_by_subdividing() {
        let spec = QuadratureSpec::default();
        let v = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, &spec).unwrap();
        // Exact: 0.3^2/2 + 0.7^2/2.
        assert!((v - 0.29).abs() < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        let spec = QuadratureSpec::default();
        assert_eq!(integrate(&|_| 1.0, 2.0, 2.0, &spec).unwrap(), 0.0);
        assert_eq!(integrate(&|_| 1.0, 3.0, 2.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn reports_precision_failure_on_pathological_oscillation() {
        let spec = QuadratureSpec {
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_subdivisions: 4,
            tail_cutoff: None,
        };
        let r = integrate(&|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Precision { .. })));
    }

    #[test]
    fn rejects_non_finite_bounds() {
        let spec = QuadratureSpec::default();
        assert!(matches!(
            integrate(&|_| 1.0, 0.0, f64::INFINITY, &spec),
            Err(Error::Domain(_))
        ));
    }
}
