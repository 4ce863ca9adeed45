//! Double-double arithmetic for the alternating coefficient sums.
//!
//! The closed-form expressions in this crate expand into sums whose terms
//! alternate in sign and grow combinatorially with the number of devices
//! (beyond 1e17 at the capacity cap), while the sums themselves can shrink
//! below 1e-10. Plain f64 accumulation, even Kahan-compensated, leaves an
//! absolute noise floor near 1e-13, which destroys the relative accuracy the
//! crate promises for small probabilities. A double-double value carries
//! about 106 significand bits and pushes that floor to roughly 1e-30, so
//! every coefficient sum is accumulated here and rounded once at the end.

/// Unevaluated sum of two f64 values with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Dd {
    pub(crate) hi: f64,
    pub(crate) lo: f64,
}

/// Error-free sum: returns (fl(a+b), exact residual).
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free sum assuming |a| >= |b|.
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

/// Error-free product via fused multiply-add.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    /// ln(2) to double-double precision: the f64 constant plus its residual.
    const LN2: Dd = Dd {
        hi: std::f64::consts::LN_2,
        lo: 2.319_046_813_846_299_6e-17,
    };

    #[inline]
    pub(crate) fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    /// Exact conversion of an unsigned integer below 2^106.
    pub(crate) fn from_u128(x: u128) -> Dd {
        debug_assert!(x < (1u128 << 106), "integer too wide for double-double");
        let hi = ((x >> 53) as f64) * 9_007_199_254_740_992.0;
        let lo = (x & ((1u128 << 53) - 1)) as f64;
        let (s, e) = two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub(crate) fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub(crate) fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub(crate) fn add_f64(self, rhs: f64) -> Dd {
        self.add(Dd::from_f64(rhs))
    }

    pub(crate) fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    #[inline]
    pub(crate) fn mul_f64(self, rhs: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs);
        let p2 = p2 + self.lo * rhs;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }

    /// Long division with two Newton correction steps.
    pub(crate) fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let mut r = self.sub(rhs.mul_f64(q1));
        let q2 = r.hi / rhs.hi;
        r = r.sub(rhs.mul_f64(q2));
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd { hi: s, lo: e }.add_f64(q3)
    }

    #[inline]
    pub(crate) fn div_f64(self, rhs: f64) -> Dd {
        self.div(Dd::from_f64(rhs))
    }

    /// Exponential. Arguments below -700 round to exactly zero; this crate
    /// only exponentiates non-positive arguments where such terms are
    /// negligible against sums of order one.
    pub(crate) fn exp(self) -> Dd {
        if self.hi < -700.0 {
            return Dd::ZERO;
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        // Argument reduction: x = k ln2 + r with |r| <= ln2/2, then a further
        // exact scaling by 2^-9 so the Taylor series converges in few terms.
        let k = (self.hi / std::f64::consts::LN_2).round();
        let r = self.sub(Dd::LN2.mul_f64(k));
        let rs = r.mul_f64(1.0 / 512.0);
        let mut sum = Dd::ONE.add(rs);
        let mut term = rs;
        for n in 2..=11u32 {
            term = term.mul(rs).div_f64(f64::from(n));
            sum = sum.add(term);
        }
        // Undo the 2^-9 scaling by nine squarings, then the 2^k factor.
        for _ in 0..9 {
            sum = sum.mul(sum);
        }
        let scale = 2.0f64.powi(k as i32);
        Dd {
            hi: sum.hi * scale,
            lo: sum.lo * scale,
        }
    }

    #[cfg(test)]
    pub(crate) fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            self.neg()
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_u128_is_exact_beyond_f64() {
        // 2^53 + 1 is not representable in f64; the residual must survive.
        let x = Dd::from_u128((1u128 << 53) + 1);
        assert_eq!(x.hi, 9_007_199_254_740_992.0);
        assert_eq!(x.lo, 1.0);

        // A 70-bit integer round-trips through hi/lo decomposition.
        let big = (1u128 << 69) + 987_654_321;
        let d = Dd::from_u128(big);
        let back = (d.hi as i128) + (d.lo as i128);
        assert_eq!(back, big as i128);
    }

    #[test]
    fn division_carries_extended_precision() {
        let third = Dd::ONE.div_f64(3.0);
        let residual = third.mul_f64(3.0).sub(Dd::ONE);
        assert!(residual.abs().to_f64() < 1e-31);
    }

    #[test]
    fn exp_matches_std_to_f64_precision() {
        for &x in &[-50.0, -3.6, -1.0, -0.9, -0.314159, -1e-3, 0.0, 0.5, 1.0] {
            let got = Dd::from_f64(x).exp().to_f64();
            let want = x.exp();
            assert!(
                (got - want).abs() <= 4.0 * f64::EPSILON * want.abs().max(1e-300),
                "exp({x}): got {got}, want {want}"
            );
        }
    }

    #[test]
    fn exp_of_one_has_correct_residual() {
        // e = 2.718281828459045235360287...; the hi part rounds to the f64
        // below, leaving this residual in lo.
        let e = Dd::ONE.exp();
        assert_eq!(e.hi, std::f64::consts::E);
        assert!((e.lo - 1.445_646_891_729_250_2e-16).abs() < 1e-28);
    }

    #[test]
    fn exp_is_multiplicative_to_double_double_accuracy() {
        let a = Dd::from_f64(-1.234_567);
        let b = Dd::from_f64(-2.345_678);
        let lhs = a.add(b).exp();
        let rhs = a.exp().mul(b.exp());
        // A few hundred double-double ulps (~1.2e-32 each) accumulate through
        // the argument reduction and squaring ladder.
        let rel = (lhs.sub(rhs).abs().to_f64() / lhs.to_f64()).abs();
        assert!(rel < 1e-28, "relative residual {rel}");
    }

    #[test]
    fn exp_underflows_to_zero_for_very_negative_arguments() {
        let z = Dd::from_f64(-800.0).exp();
        assert_eq!(z.hi, 0.0);
        assert_eq!(z.lo, 0.0);
    }
}
