//! Discrete-event simulator for the multicast age process.
//!
//! Each update round draws one deadline and one service time per device;
//! the round ends at the earlier of the K-th completion and the deadline,
//! and the next update is generated immediately. The tracked device's age
//! is integrated exactly over renewal cycles (reception to reception), so
//! the long-run averages need no time discretization.
//!
//! Determinism contract: the RNG stream is indexed by (seed, replication,
//! update, draw slot). Every update consumes exactly `N + 1` draws (slot 0
//! is the deadline, slots 1..=N the devices) under every policy, and each
//! replication owns a ChaCha stream, so results are bitwise reproducible
//! for a given `SimConfig` regardless of thread count.

mod batch;

pub use batch::batch_confidence;
use batch::{batch_ranges, t_critical};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DeadlinePolicy, SystemConfig};
use crate::numeric::Neumaier;

/// Simulation horizon, seeding, and output-analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Number of update rounds per replication.
    pub num_updates: u64,
    /// Base RNG seed; replications use per-replication streams of it.
    pub seed: u64,
    /// 1-based index of the device whose age is tracked.
    pub tracked_device: u32,
    /// Contiguous batches for the batch-means confidence intervals.
    pub num_batches: u32,
    /// Independent replications, merged in index order.
    pub replications: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_updates: 100_000,
            seed: 0,
            tracked_device: 1,
            num_batches: 20,
            replications: 1,
        }
    }
}

/// One renewal cycle of the tracked device's age process: the interval
/// between two consecutive receptions, spanning `num_intervals` update
/// rounds of which only the last delivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalSample {
    /// Update rounds in the cycle (failed rounds plus the delivering one).
    pub num_intervals: u64,
    /// Total duration of the failed rounds before the delivering one.
    pub wait: f64,
    /// Full duration of the delivering round.
    pub success_intergen: f64,
    /// Tracked device's service time in the delivering round.
    pub service: f64,
    /// Integral of the age over the cycle.
    pub area: f64,
    /// Cycle length: `wait + success_intergen`.
    pub span: f64,
}

/// Point estimates and batch-means confidence halfwidths from one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Time-average age: total area over total cycle length.
    pub average_aoi: f64,
    /// Mean of the per-cycle age peaks.
    pub average_peak_aoi: f64,
    /// 95% halfwidth for `average_aoi` from batched cycle ratios.
    pub ci_halfwidth_aoi: f64,
    /// 95% halfwidth for `average_peak_aoi`.
    pub ci_halfwidth_peak: f64,
    /// Fraction of all update rounds the tracked device received.
    pub success_fraction: f64,
    /// Completed renewal cycles across all replications.
    pub cycles: u64,
    /// System the run simulated.
    pub config: SystemConfig,
    /// Simulation parameters the run used.
    pub sim: SimConfig,
}

impl SimResult {
    /// Standard error of the age estimate (halfwidth with the Student-t
    /// factor divided back out).
    pub fn se_aoi(&self) -> f64 {
        self.ci_halfwidth_aoi / t_critical(f64::from(self.sim.num_batches - 1))
    }

    /// Standard error of the peak-age estimate.
    pub fn se_peak(&self) -> f64 {
        self.ci_halfwidth_peak / t_critical(f64::from(self.sim.num_batches - 1))
    }
}

/// Map a raw 64-bit draw to the open-closed unit interval (0, 1].
/// The +1 keeps `ln` finite; u = 1 maps to a zero exponential part.
fn unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

struct RepOutcome {
    samples: Vec<RenewalSample>,
    peaks: Vec<f64>,
    delivered: u64,
}

fn run_replication(config: &SystemConfig, sim: &SimConfig, replication: u32) -> RepOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    rng.set_stream(u64::from(replication));

    let n = config.num_devices() as usize;
    let k = config.threshold() as usize;
    let rate = config.service().rate();
    let shift = config.service().shift();
    let tracked = (sim.tracked_device - 1) as usize;
    let policy = config.deadline();

    let mut times = vec![0.0f64; n];
    let mut order = vec![0.0f64; n];
    let mut samples = Vec::new();
    let mut peaks = Vec::new();
    let mut delivered: u64 = 0;

    // Cycle accounting opens at the first reception: `age_origin` is the
    // full duration of the round that delivered (the age at its end).
    let mut opened = false;
    let mut age_origin = 0.0f64;
    let mut wait = 0.0f64;
    let mut failed_rounds: u64 = 0;

    for _ in 0..sim.num_updates {
        // Slot 0: deadline. Drawn under every policy to keep the device
        // slots aligned, so one seed yields one set of service times.
        let deadline_draw = unit(rng.next_u64());
        let deadline = match policy {
            DeadlinePolicy::Infinite => f64::INFINITY,
            DeadlinePolicy::Fixed { horizon } => horizon,
            DeadlinePolicy::ShiftedExponential { rate, shift } => shift - deadline_draw.ln() / rate,
        };
        for slot in times.iter_mut() {
            *slot = shift - unit(rng.next_u64()).ln() / rate;
        }
        order.copy_from_slice(&times);
        let (_, kth, _) = order.select_nth_unstable_by(k - 1, f64::total_cmp);
        let term = kth.min(deadline);
        let own = times[tracked];
        let received = own <= term;
        if received {
            delivered += 1;
        }
        if !opened {
            if received {
                opened = true;
                age_origin = term;
            }
            continue;
        }
        if received {
            let gap = term;
            let rise = wait + own;
            peaks.push(age_origin + rise);
            samples.push(RenewalSample {
                num_intervals: failed_rounds + 1,
                wait,
                success_intergen: gap,
                service: own,
                area: (age_origin + wait) * own
                    + (age_origin + 0.5 * wait) * wait
                    + 0.5 * gap * gap,
                span: wait + gap,
            });
            age_origin = gap;
            wait = 0.0;
            failed_rounds = 0;
        } else {
            wait += term;
            failed_rounds += 1;
        }
    }

    RepOutcome {
        samples,
        peaks,
        delivered,
    }
}

fn validate(config: &SystemConfig, sim: &SimConfig) -> Result<()> {
    if sim.num_batches < 2 {
        return Err(Error::Domain(
            "simulation needs at least 2 batches for confidence intervals".into(),
        ));
    }
    if sim.num_updates < u64::from(sim.num_batches) {
        return Err(Error::Domain(format!(
            "{} updates cannot fill {} batches",
            sim.num_updates, sim.num_batches
        )));
    }
    if sim.tracked_device == 0 || sim.tracked_device > config.num_devices() {
        return Err(Error::Domain(format!(
            "tracked device {} is outside 1..={}",
            sim.tracked_device,
            config.num_devices()
        )));
    }
    if sim.replications == 0 {
        return Err(Error::Domain("at least one replication is required".into()));
    }
    Ok(())
}

fn run_sim(config: &SystemConfig, sim: &SimConfig) -> Result<(SimResult, Vec<RenewalSample>)> {
    validate(config, sim)?;

    let outcomes: Vec<RepOutcome> = (0..sim.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, sim, rep))
        .collect();

    let mut samples = Vec::new();
    let mut peaks = Vec::new();
    let mut delivered: u64 = 0;
    for outcome in outcomes {
        samples.extend(outcome.samples);
        peaks.extend(outcome.peaks);
        delivered += outcome.delivered;
    }

    let cycles = samples.len() as u64;
    if cycles == 0 {
        return Err(Error::NoCycles(format!(
            "no renewal cycle completed in {} updates x {} replications \
             (N = {}, K = {}, service rate {}, shift {}, deadline mean {})",
            sim.num_updates,
            sim.replications,
            config.num_devices(),
            config.threshold(),
            config.service().rate(),
            config.service().shift(),
            config.deadline().mean(),
        )));
    }
    let batches = sim.num_batches as usize;
    if (cycles as usize) < batches {
        return Err(Error::Domain(format!(
            "{cycles} renewal cycles cannot fill {batches} batches; \
             lengthen the run or reduce num_batches"
        )));
    }

    let mut total_area = Neumaier::default();
    let mut total_span = Neumaier::default();
    for s in &samples {
        total_area.add(s.area);
        total_span.add(s.span);
    }
    let average_aoi = total_area.total() / total_span.total();

    // Ratio-estimator CI: one area/span ratio per contiguous batch.
    let mut ratios = Vec::with_capacity(batches);
    for (lo, hi) in batch_ranges(samples.len(), batches) {
        let mut area = Neumaier::default();
        let mut span = Neumaier::default();
        for s in &samples[lo..hi] {
            area.add(s.area);
            span.add(s.span);
        }
        ratios.push(area.total() / span.total());
    }
    let center: f64 = ratios.iter().sum::<f64>() / batches as f64;
    let var: f64 = ratios
        .iter()
        .map(|r| (r - center) * (r - center))
        .sum::<f64>()
        / (batches - 1) as f64;
    let ci_halfwidth_aoi = t_critical((batches - 1) as f64) * (var / batches as f64).sqrt();

    let (average_peak_aoi, ci_halfwidth_peak) = batch_confidence(&peaks, sim.num_batches)?;

    let result = SimResult {
        average_aoi,
        average_peak_aoi,
        ci_halfwidth_aoi,
        ci_halfwidth_peak,
        success_fraction: delivered as f64 / (sim.num_updates as f64 * f64::from(sim.replications)),
        cycles,
        config: *config,
        sim: *sim,
    };
    Ok((result, samples))
}

/// Simulate the age process and return point estimates with batch-means
/// confidence halfwidths.
pub fn simulate(config: &SystemConfig, sim: &SimConfig) -> Result<SimResult> {
    run_sim(config, sim).map(|(result, _)| result)
}

/// Simulate and return the raw renewal cycles, replications concatenated
/// in index order.
pub fn empirical_renewal_samples(
    config: &SystemConfig,
    sim: &SimConfig,
) -> Result<Vec<RenewalSample>> {
    run_sim(config, sim).map(|(_, samples)| samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed::average_aoi_fixed;
    use crate::model::ServiceModel;
    use crate::random::average_aoi_random;

    fn config(n: u32, k: u32, rate: f64, shift: f64, deadline: DeadlinePolicy) -> SystemConfig {
        SystemConfig::new(n, k, ServiceModel::new(rate, shift).unwrap(), deadline).unwrap()
    }

    fn sim(num_updates: u64, seed: u64) -> SimConfig {
        SimConfig {
            num_updates,
            seed,
            ..SimConfig::default()
        }
    }

    /// Sample mean and its plain standard error.
    fn mean_se(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn unicast_without_deadline_matches_the_exact_age() {
        let cfg = config(1, 1, 1.0, 0.0, DeadlinePolicy::Infinite);
        let result = simulate(&cfg, &sim(100_000, 11)).unwrap();
        assert!((result.average_aoi - 2.0).abs() <= 3.0 * result.se_aoi());
        assert!((result.average_peak_aoi - 2.0).abs() <= 3.0 * result.se_peak());
        assert!((result.success_fraction - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unicast_cycles_are_single_interval_with_zero_wait() {
        let cfg = config(1, 1, 1.0, 0.0, DeadlinePolicy::Infinite);
        let samples = empirical_renewal_samples(&cfg, &sim(5_000, 3)).unwrap();
        for s in &samples {
            assert_eq!(s.num_intervals, 1);
            assert_eq!(s.wait, 0.0);
            assert_eq!(s.success_intergen, s.service);
            assert_eq!(s.span, s.success_intergen);
        }
    }

    #[test]
    fn deadline_below_the_service_shift_yields_no_cycles() {
        let cfg = config(
            5,
            3,
            1.0,
            0.1,
            DeadlinePolicy::Fixed {
                horizon: 0.1 + 1e-9,
            },
        );
        // Every service time exceeds the shift, so nothing is ever delivered.
        match simulate(&cfg, &sim(2_000, 0)) {
            Err(Error::NoCycles(message)) => assert!(message.contains("N = 5")),
            other => panic!("expected NoCycles, got {other:?}"),
        }
    }

    #[test]
    fn cycle_statistics_match_the_analytic_moments() {
        let cfg = config(10, 7, 0.5, 0.1, DeadlinePolicy::Fixed { horizon: 1.0 });
        let report = average_aoi_fixed(&cfg).unwrap();
        let samples = empirical_renewal_samples(&cfg, &sim(100_000, 5)).unwrap();

        let m: Vec<f64> = samples.iter().map(|s| s.num_intervals as f64).collect();
        let (m_mean, m_se) = mean_se(&m);
        assert!(
            (m_mean - report.moments.e_m).abs() <= 3.0 * m_se,
            "rounds per cycle {m_mean} vs {}",
            report.moments.e_m
        );

        let that: Vec<f64> = samples.iter().map(|s| s.service).collect();
        let (t_mean, t_se) = mean_se(&that);
        assert!(
            (t_mean - report.moments.e_that).abs() <= 3.0 * t_se,
            "delivered service {t_mean} vs {}",
            report.moments.e_that
        );

        let wait: Vec<f64> = samples.iter().map(|s| s.wait).collect();
        let (w_mean, w_se) = mean_se(&wait);
        assert!(
            (w_mean - report.moments.e_w).abs() <= 3.0 * w_se,
            "wait {w_mean} vs {}",
            report.moments.e_w
        );
    }

    #[test]
    fn success_fraction_matches_the_delivery_probability() {
        let cfg = config(10, 7, 0.5, 0.1, DeadlinePolicy::Fixed { horizon: 1.0 });
        let report = average_aoi_fixed(&cfg).unwrap();
        let result = simulate(&cfg, &sim(100_000, 5)).unwrap();
        let p = report.cases.p_success;
        let se = (p * (1.0 - p) / 100_000.0).sqrt();
        assert!(
            (result.success_fraction - p).abs() <= 3.0 * se,
            "success fraction {} vs {p}",
            result.success_fraction
        );
    }

    #[test]
    fn random_deadline_run_matches_the_analytic_age() {
        let cfg = config(
            8,
            5,
            0.5,
            0.1,
            DeadlinePolicy::shifted_exponential_with_mean(3.0, 0.1).unwrap(),
        );
        let report = average_aoi_random(&cfg).unwrap();
        let result = simulate(&cfg, &sim(100_000, 2)).unwrap();
        assert!(
            (result.average_aoi - report.average_aoi).abs() <= 3.0 * result.se_aoi(),
            "aoi {} vs {}",
            result.average_aoi,
            report.average_aoi
        );
        assert!(
            (result.average_peak_aoi - report.average_peak_aoi).abs() <= 3.0 * result.se_peak(),
            "peak {} vs {}",
            result.average_peak_aoi,
            report.average_peak_aoi
        );
    }

    #[test]
    fn cycle_areas_reproduce_a_direct_age_integration() {
        // Re-walk the trajectory and integrate the sawtooth segment by
        // segment, snapshotting at each reception; the last snapshot covers
        // exactly the union of the renewal cycles.
        let cfg = config(6, 4, 1.0, 0.1, DeadlinePolicy::Fixed { horizon: 1.5 });
        let sim_cfg = sim(20_000, 9);
        let (result, samples) = run_sim(&cfg, &sim_cfg).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(sim_cfg.seed);
        rng.set_stream(0);
        let n = cfg.num_devices() as usize;
        let k = cfg.threshold() as usize;
        let rate = cfg.service().rate();
        let shift = cfg.service().shift();
        let horizon = match cfg.deadline() {
            DeadlinePolicy::Fixed { horizon } => horizon,
            _ => unreachable!(),
        };

        let mut age = 0.0f64;
        let mut opened = false;
        let mut area = Neumaier::default();
        let mut elapsed = Neumaier::default();
        let mut area_at_reception = 0.0;
        let mut elapsed_at_reception = 0.0;
        let mut times = vec![0.0f64; n];
        for _ in 0..sim_cfg.num_updates {
            let _deadline_draw = rng.next_u64();
            for slot in times.iter_mut() {
                *slot = shift - unit(rng.next_u64()).ln() / rate;
            }
            let mut order = times.clone();
            let (_, kth, _) = order.select_nth_unstable_by(k - 1, f64::total_cmp);
            let term = kth.min(horizon);
            let own = times[0];
            let received = own <= term;
            if !opened {
                if received {
                    opened = true;
                    age = term;
                }
                continue;
            }
            if received {
                area.add(age * own + 0.5 * own * own);
                let rest = term - own;
                area.add(own * rest + 0.5 * rest * rest);
                age = term;
            } else {
                area.add(age * term + 0.5 * term * term);
                age += term;
            }
            elapsed.add(term);
            if received {
                area_at_reception = area.total();
                elapsed_at_reception = elapsed.total();
            }
        }

        let total_area: f64 = samples.iter().map(|s| s.area).sum();
        let total_span: f64 = samples.iter().map(|s| s.span).sum();
        assert!(
            (total_area - area_at_reception).abs() / area_at_reception < 1e-9,
            "area {total_area} vs {area_at_reception}"
        );
        assert!(
            (total_span - elapsed_at_reception).abs() / elapsed_at_reception < 1e-9,
            "span {total_span} vs {elapsed_at_reception}"
        );
        assert!(
            (result.average_aoi - total_area / total_span).abs() < 1e-9,
            "ratio mismatch"
        );
    }

    #[test]
    fn every_cycle_closes_with_one_reception() {
        let cfg = config(10, 7, 0.5, 0.1, DeadlinePolicy::Fixed { horizon: 1.0 });
        let sim_cfg = SimConfig {
            num_updates: 20_000,
            seed: 4,
            replications: 3,
            ..SimConfig::default()
        };
        let (result, samples) = run_sim(&cfg, &sim_cfg).unwrap();
        // The first reception of each replication opens accounting without
        // closing a cycle; every later one closes exactly one.
        let deliveries = result.success_fraction * (sim_cfg.num_updates as f64 * 3.0);
        assert_eq!(samples.len() as u64, result.cycles);
        assert_eq!(deliveries.round() as u64 - 3, result.cycles);
    }

    #[test]
    fn reruns_are_bitwise_identical_and_seeds_differ() {
        let cfg = config(5, 3, 1.0, 0.1, DeadlinePolicy::Fixed { horizon: 2.0 });
        let a = simulate(&cfg, &sim(10_000, 1)).unwrap();
        let b = simulate(&cfg, &sim(10_000, 1)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&cfg, &sim(10_000, 2)).unwrap();
        assert_ne!(a.average_aoi, c.average_aoi);
    }

    #[test]
    fn thread_count_does_not_change_the_result() {
        let cfg = config(5, 3, 1.0, 0.1, DeadlinePolicy::Fixed { horizon: 2.0 });
        let sim_cfg = SimConfig {
            num_updates: 10_000,
            seed: 8,
            replications: 4,
            ..SimConfig::default()
        };
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&cfg, &sim_cfg))
            .unwrap();
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| simulate(&cfg, &sim_cfg))
            .unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn replications_multiply_the_cycle_count() {
        let cfg = config(5, 3, 1.0, 0.1, DeadlinePolicy::Fixed { horizon: 2.0 });
        let one = simulate(&cfg, &sim(10_000, 1)).unwrap();
        let sim_cfg = SimConfig {
            num_updates: 10_000,
            seed: 1,
            replications: 3,
            ..SimConfig::default()
        };
        let three = simulate(&cfg, &sim_cfg).unwrap();
        assert!(three.cycles > 2 * one.cycles && three.cycles < 4 * one.cycles);
        assert_eq!(
            simulate(&cfg, &sim_cfg).unwrap().average_aoi,
            three.average_aoi
        );
    }

    #[test]
    fn invalid_simulation_parameters_are_rejected() {
        let cfg = config(5, 3, 1.0, 0.0, DeadlinePolicy::Infinite);
        let bad_batches = SimConfig {
            num_batches: 1,
            ..SimConfig::default()
        };
        assert!(matches!(
            simulate(&cfg, &bad_batches),
            Err(Error::Domain(_))
        ));
        let bad_tracked = SimConfig {
            tracked_device: 6,
            ..SimConfig::default()
        };
        assert!(matches!(
            simulate(&cfg, &bad_tracked),
            Err(Error::Domain(_))
        ));
        let short = SimConfig {
            num_updates: 5,
            num_batches: 20,
            ..SimConfig::default()
        };
        assert!(matches!(simulate(&cfg, &short), Err(Error::Domain(_))));
        let no_reps = SimConfig {
            replications: 0,
            ..SimConfig::default()
        };
        assert!(matches!(simulate(&cfg, &no_reps), Err(Error::Domain(_))));
    }
}
