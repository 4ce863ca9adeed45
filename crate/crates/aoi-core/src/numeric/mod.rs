//! Internal numerical utilities: exact binomial coefficients, compensated
//! f64 summation, and double-double arithmetic.

pub(crate) mod dd;

/// Exact binomial coefficient as a wide integer.
///
/// The multiplicative form keeps every intermediate product divisible by the
/// running index, so no rounding occurs. With `n` capped at 30 by the device
/// limit, results stay far below the u128 range.
pub(crate) fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=u128::from(k) {
        acc = acc * (u128::from(n) - u128::from(k) + i) / i;
    }
    acc
}

/// Neumaier-compensated f64 accumulator for long simulation sums.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
