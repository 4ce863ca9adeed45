//! System description: service-time distribution, deadline policy, and the
//! validated multicast configuration shared by every engine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of receiver devices. The closed forms expand into
/// integer coefficients that stay exactly representable (and fast) up to this
/// size; larger systems would need a different evaluation strategy.
pub const MAX_DEVICES: u32 = 30;

/// Shifted-exponential service time: an update reaches a given device
/// `shift + Exp(rate)` after its generation instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceModel {
    rate: f64,
    shift: f64,
}

impl ServiceModel {
    /// Validates `rate > 0` and `shift >= 0`, both finite.
    pub fn new(rate: f64, shift: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::Domain(format!(
                "service rate must be positive and finite, got {rate}"
            )));
        }
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::Domain(format!(
                "service shift must be non-negative and finite, got {shift}"
            )));
        }
        Ok(ServiceModel { rate, shift })
    }

    /// Exponential tail rate.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Deterministic minimum service time.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Mean service time `shift + 1/rate`.
    pub fn mean(&self) -> f64 {
        self.shift + 1.0 / self.rate
    }
}

/// When a transmission round is cut short after an update's generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeadlinePolicy {
    /// No deadline: every round runs until enough devices have the update.
    Infinite,
    /// Every round is terminated exactly `horizon` after generation.
    Fixed { horizon: f64 },
    /// Each round draws an independent deadline `shift + Exp(rate)`.
    ShiftedExponential { rate: f64, shift: f64 },
}

impl DeadlinePolicy {
    /// Random deadline with the given mean, sharing the service shift.
    /// The mean must exceed the shift so the exponential part is proper.
    pub fn shifted_exponential_with_mean(mean: f64, shift: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= shift {
            return Err(Error::Divergent(format!(
                "mean deadline {mean} must be finite and exceed the service shift {shift}"
            )));
        }
        Ok(DeadlinePolicy::ShiftedExponential {
            rate: 1.0 / (mean - shift),
            shift,
        })
    }

    /// True for the random (shifted-exponential) policy.
    pub fn is_random(&self) -> bool {
        matches!(self, DeadlinePolicy::ShiftedExponential { .. })
    }

    /// Mean deadline; infinity for the no-deadline policy.
    pub fn mean(&self) -> f64 {
        match *self {
            DeadlinePolicy::Infinite => f64::INFINITY,
            DeadlinePolicy::Fixed { horizon } => horizon,
            DeadlinePolicy::ShiftedExponential { rate, shift } => shift + 1.0 / rate,
        }
    }
}

/// Validated description of one multicast system: `num_devices` receivers,
/// a round ends once `threshold` of them hold the update (or the deadline
/// fires first), with i.i.d. shifted-exponential per-device service times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    num_devices: u32,
    threshold: u32,
    service: ServiceModel,
    deadline: DeadlinePolicy,
}

impl SystemConfig {
    /// Validates the cross-field invariants:
    /// `1 <= threshold <= num_devices <= MAX_DEVICES`, a fixed deadline must
    /// exceed the service shift (otherwise no update is ever delivered), and
    /// a random deadline must share the service shift.
    pub fn new(
        num_devices: u32,
        threshold: u32,
        service: ServiceModel,
        deadline: DeadlinePolicy,
    ) -> Result<Self> {
        if num_devices == 0 {
            return Err(Error::Domain("need at least one device".into()));
        }
        if num_devices > MAX_DEVICES {
            return Err(Error::Capacity(format!(
                "{num_devices} devices exceeds the supported maximum of {MAX_DEVICES}"
            )));
        }
        if threshold == 0 || threshold > num_devices {
            return Err(Error::Domain(format!(
                "threshold {threshold} must lie in 1..={num_devices}"
            )));
        }
        match deadline {
            DeadlinePolicy::Infinite => {}
            DeadlinePolicy::Fixed { horizon } => {
                if !horizon.is_finite() || horizon <= service.shift() {
                    return Err(Error::Divergent(format!(
                        "fixed deadline {horizon} must be finite and exceed the \
                         service shift {}; otherwise no update is ever delivered",
                        service.shift()
                    )));
                }
            }
            DeadlinePolicy::ShiftedExponential { rate, shift } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::Domain(format!(
                        "deadline rate must be positive and finite, got {rate}"
                    )));
                }
                if shift != service.shift() {
                    return Err(Error::Domain(format!(
                        "random deadline shift {shift} must equal the service shift {}",
                        service.shift()
                    )));
                }
            }
        }
        Ok(SystemConfig {
            num_devices,
            threshold,
            service,
            deadline,
        })
    }

    /// Number of receiver devices (N).
    pub fn num_devices(&self) -> u32 {
        self.num_devices
    }

    /// Completions that end a round (K).
    pub fn threshold(&self) -> u32 {
        self.threshold
    }

    /// Per-device service model.
    pub fn service(&self) -> ServiceModel {
        self.service
    }

    /// Round-termination policy.
    pub fn deadline(&self) -> DeadlinePolicy {
        self.deadline
    }

    /// Same system with a different deadline policy, revalidated.
    pub fn with_deadline(&self, deadline: DeadlinePolicy) -> Result<Self> {
        SystemConfig::new(self.num_devices, self.threshold, self.service, deadline)
    }

    /// Same system with different dimensions, revalidated.
    pub fn with_dimensions(&self, num_devices: u32, threshold: u32) -> Result<Self> {
        SystemConfig::new(num_devices, threshold, self.service, self.deadline)
    }
}
