//! Batch-means confidence intervals for autocorrelated simulation output.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::numeric::Neumaier;

/// Two-sided 95% Student-t critical value with `dof` degrees of freedom.
pub(crate) fn t_critical(dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof)
        .expect("dof >= 1 by construction")
        .inverse_cdf(0.975)
}

/// Split `len` items into `batches` contiguous runs whose sizes differ by at
/// most one; returns the half-open index ranges.
pub(crate) fn batch_ranges(len: usize, batches: usize) -> Vec<(usize, usize)> {
    let base = len / batches;
    let extra = len % batches;
    let mut ranges = Vec::with_capacity(batches);
    let mut start = 0;
    for b in 0..batches {
        let size = base + usize::from(b < extra);
        ranges.push((start, start + size));
        start += size;
    }
    ranges
}

/// Sample mean and 95% batch-means halfwidth.
///
/// The sequence is split into `num_batches` contiguous batches; the
/// halfwidth is the Student-t interval on the batch means, which stays
/// honest when consecutive values are correlated (renewal-cycle outputs
/// are, mildly, through the shared trajectory).
pub fn batch_confidence(values: &[f64], num_batches: u32) -> Result<(f64, f64)> {
    if num_batches < 2 {
        return Err(Error::Domain(
            "batch-means confidence needs at least 2 batches".into(),
        ));
    }
    let batches = num_batches as usize;
    if values.len() < batches {
        return Err(Error::Domain(format!(
            "{} values cannot fill {} batches",
            values.len(),
            batches
        )));
    }
    let mut total = Neumaier::default();
    for &v in values {
        total.add(v);
    }
    let mean = total.total() / values.len() as f64;

    let mut batch_means = Vec::with_capacity(batches);
    for (lo, hi) in batch_ranges(values.len(), batches) {
        let mut sum = Neumaier::default();
        for &v in &values[lo..hi] {
            sum.add(v);
        }
        batch_means.push(sum.total() / (hi - lo) as f64);
    }
    let center: f64 = batch_means.iter().sum::<f64>() / batches as f64;
    let var: f64 = batch_means
        .iter()
        .map(|m| (m - center) * (m - center))
        .sum::<f64>()
        / (batches - 1) as f64;
    let halfwidth = t_critical((batches - 1) as f64) * (var / batches as f64).sqrt();
    Ok((mean, halfwidth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn constant_sequence_has_zero_halfwidth() {
        let v = vec![3.25; 100];
        let (mean, hw) = batch_confidence(&v, 10).unwrap();
        assert_eq!(mean, 3.25);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn balanced_alternating_sequence_has_zero_halfwidth() {
        let v: Vec<f64> = (0..100).map(|i| f64::from(i % 2)).collect();
        let (mean, hw) = batch_confidence(&v, 2).unwrap();
        assert_eq!(mean, 0.5);
        assert_eq!(hw, 0.0);
    }

    #[test]
    fn standard_normal_sample_has_textbook_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let v: Vec<f64> = (0..10_000)
            .map(|_| normal.inverse_cdf(rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12)))
            .collect();
        let (mean, hw) = batch_confidence(&v, 20).unwrap();
        // SE of the mean is 0.01, so the halfwidth is ~2.09 * 0.01.
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((0.005..0.1).contains(&hw), "halfwidth {hw}");
    }

    #[test]
    fn too_few_values_or_batches_is_rejected() {
        assert!(matches!(
            batch_confidence(&[1.0, 2.0], 3),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            batch_confidence(&[1.0, 2.0, 3.0], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ranges_partition_with_near_equal_sizes() {
        let r = batch_ranges(103, 10);
        assert_eq!(r.len(), 10);
        assert_eq!(r[0], (0, 11));
        assert_eq!(r[9].1, 103);
        let sizes: Vec<usize> = r.iter().map(|(a, b)| b - a).collect();
        assert!(sizes.iter().all(|&s| s == 10 || s == 11));
    }
}
