//! Parser for sweep description files.
//!
//! The format is line-oriented `key = value`, with `#` comments and blank
//! lines ignored. Parse errors name the offending line so a typo in a long
//! file is findable.
//!
//! ```text
//! # threshold scan at a fixed horizon
//! axis = threshold_k
//! values = 1:10:1
//! n = 10
//! k = 5
//! service_rate = 0.5
//! service_shift = 0.1
//! policy = fixed:3
//! engines = analytic
//! ```

use std::collections::HashMap;

use aoi_core::{DeadlinePolicy, EngineSelection, ServiceModel, SimConfig, SweepAxis, SystemConfig};

/// Everything `cmd_sweep` needs: the template config, the axis, the value
/// list, and which engines to run.
#[derive(Debug)]
pub struct SweepPlan {
    pub template: SystemConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub engines: EngineSelection,
}

struct Entry {
    line: usize,
    value: String,
}

const KNOWN_KEYS: &[&str] = &[
    "axis",
    "values",
    "n",
    "k",
    "service_rate",
    "service_shift",
    "policy",
    "engines",
    "updates",
    "seed",
    "batches",
    "replications",
    "tracked",
];

const SIM_KEYS: &[&str] = &["updates", "seed", "batches", "replications", "tracked"];

pub fn parse_sweep_file(text: &str) -> Result<SweepPlan, String> {
    let entries = collect_entries(text)?;

    let axis = match required(&entries, "axis")?.value.as_str() {
        "deadline" => SweepAxis::Deadline,
        "threshold_k" => SweepAxis::ThresholdK,
        "num_devices_n" => SweepAxis::NumDevicesN,
        other => {
            return Err(format!(
                "line {}: unknown axis {other:?}, expected deadline, threshold_k, or num_devices_n",
                entries["axis"].line
            ));
        }
    };

    let values_entry = required(&entries, "values")?;
    let values = parse_values(&values_entry.value, values_entry.line)?;

    let n = parse_num::<u32>(&entries, "n")?;
    let k = parse_num::<u32>(&entries, "k")?;
    let service_rate = parse_num::<f64>(&entries, "service_rate")?;
    let service_shift = match entries.get("service_shift") {
        Some(_) => parse_num::<f64>(&entries, "service_shift")?,
        None => 0.0,
    };

    let deadline = parse_policy(&entries, axis, service_shift)?;
    let service = ServiceModel::new(service_rate, service_shift)
        .map_err(|e| format!("invalid sweep template: {e}"))?;
    let template = SystemConfig::new(n, k, service, deadline)
        .map_err(|e| format!("invalid sweep template: {e}"))?;

    let engines = parse_engines(&entries)?;

    Ok(SweepPlan {
        template,
        axis,
        values,
        engines,
    })
}

fn collect_entries(text: &str) -> Result<HashMap<String, Entry>, String> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(format!(
                "line {line}: expected `key = value`, got {trimmed:?}"
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(format!("line {line}: unknown key {key:?}"));
        }
        if let Some(previous) = entries.get(&key) {
            return Err(format!(
                "line {line}: duplicate key {key:?} (first set on line {})",
                previous.line
            ));
        }
        entries.insert(key, Entry { line, value });
    }
    Ok(entries)
}

fn required<'a>(entries: &'a HashMap<String, Entry>, key: &str) -> Result<&'a Entry, String> {
    entries
        .get(key)
        .ok_or_else(|| format!("missing required key {key:?}"))
}

fn parse_num<T: std::str::FromStr>(
    entries: &HashMap<String, Entry>,
    key: &str,
) -> Result<T, String> {
    let entry = required(entries, key)?;
    entry.value.parse().map_err(|_| {
        format!(
            "line {}: {key} must be a number, got {:?}",
            entry.line, entry.value
        )
    })
}

/// Values are either a comma list (`0.5, 1, inf`) or an inclusive
/// `start:stop:step` range.
fn parse_values(text: &str, line: usize) -> Result<Vec<f64>, String> {
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!(
                "line {line}: ranges take the form start:stop:step, got {text:?}"
            ));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {line}: bad number {:?} in range", p.trim()))
            })
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !start.is_finite() || !stop.is_finite() || !(step.is_finite() && step > 0.0) {
            return Err(format!(
                "line {line}: range needs finite start/stop and a positive step"
            ));
        }
        if stop < start {
            return Err(format!(
                "line {line}: range stop {stop} is below start {start}"
            ));
        }
        let mut values = Vec::new();
        let mut i = 0u32;
        loop {
            // Rebuilt from the index each pass so step rounding cannot drift.
            let v = start + f64::from(i) * step;
            if v > stop + step * 1e-9 {
                break;
            }
            values.push(v);
            i += 1;
        }
        Ok(values)
    } else {
        text.split(',')
            .map(|token| {
                let token = token.trim();
                if token == "inf" {
                    Ok(f64::INFINITY)
                } else {
                    token
                        .parse::<f64>()
                        .map_err(|_| format!("line {line}: bad value {token:?}"))
                }
            })
            .collect()
    }
}

/// The `policy` key sets the deadline family. On the deadline axis a bare
/// family name (`fixed`, `exp`) is enough since the swept values supply the
/// parameter; a placeholder keeps the template valid. On other axes the
/// parameter is part of the template and must be spelled out.
fn parse_policy(
    entries: &HashMap<String, Entry>,
    axis: SweepAxis,
    service_shift: f64,
) -> Result<DeadlinePolicy, String> {
    let placeholder = service_shift + 1.0;
    let Some(entry) = entries.get("policy") else {
        return match axis {
            SweepAxis::Deadline => Ok(DeadlinePolicy::Fixed {
                horizon: placeholder,
            }),
            _ => Err("missing required key \"policy\"".into()),
        };
    };
    let line = entry.line;
    let text = entry.value.as_str();
    let bare_allowed = matches!(axis, SweepAxis::Deadline);
    match text {
        "none" => Ok(DeadlinePolicy::Infinite),
        "fixed" if bare_allowed => Ok(DeadlinePolicy::Fixed {
            horizon: placeholder,
        }),
        "exp" if bare_allowed => {
            DeadlinePolicy::shifted_exponential_with_mean(placeholder, service_shift)
                .map_err(|e| format!("line {line}: {e}"))
        }
        "fixed" | "exp" => Err(format!(
            "line {line}: policy {text:?} needs a parameter (fixed:<horizon> or exp:<mean>) \
             when the deadline is not the swept axis"
        )),
        _ => {
            if let Some(v) = text.strip_prefix("fixed:") {
                let horizon = v
                    .parse::<f64>()
                    .map_err(|_| format!("line {line}: bad horizon {v:?}"))?;
                Ok(DeadlinePolicy::Fixed { horizon })
            } else if let Some(v) = text.strip_prefix("exp:") {
                let mean = v
                    .parse::<f64>()
                    .map_err(|_| format!("line {line}: bad mean {v:?}"))?;
                DeadlinePolicy::shifted_exponential_with_mean(mean, service_shift)
                    .map_err(|e| format!("line {line}: {e}"))
            } else {
                Err(format!(
                    "line {line}: unknown policy {text:?}, expected none, fixed:<horizon>, \
                     or exp:<mean>"
                ))
            }
        }
    }
}

fn parse_engines(entries: &HashMap<String, Entry>) -> Result<EngineSelection, String> {
    let Some(entry) = entries.get("engines") else {
        for key in SIM_KEYS {
            if let Some(e) = entries.get(*key) {
                return Err(format!(
                    "line {}: {key} requires `engines = simulation`",
                    e.line
                ));
            }
        }
        return Ok(EngineSelection::default());
    };
    let mut selection = EngineSelection {
        analytic: false,
        simulation: None,
    };
    for token in entry.value.split(',') {
        match token.trim() {
            "analytic" => selection.analytic = true,
            "simulation" => {
                let mut sim = SimConfig::default();
                if entries.contains_key("updates") {
                    sim.num_updates = parse_num(entries, "updates")?;
                }
                if entries.contains_key("seed") {
                    sim.seed = parse_num(entries, "seed")?;
                }
                if entries.contains_key("batches") {
                    sim.num_batches = parse_num(entries, "batches")?;
                }
                if entries.contains_key("replications") {
                    sim.replications = parse_num(entries, "replications")?;
                }
                if entries.contains_key("tracked") {
                    sim.tracked_device = parse_num(entries, "tracked")?;
                }
                selection.simulation = Some(sim);
            }
            other => {
                return Err(format!(
                    "line {}: unknown engine {other:?}, expected analytic or simulation",
                    entry.line
                ));
            }
        }
    }
    if selection.simulation.is_none() {
        for key in SIM_KEYS {
            if let Some(e) = entries.get(*key) {
                return Err(format!(
                    "line {}: {key} requires `engines = simulation`",
                    e.line
                ));
            }
        }
    }
    Ok(selection)
}
