//! Output encoding: JSON envelopes and manifest-commented CSV.

use std::io::Write;

use aoi_core::{DeadlinePolicy, SystemConfig};
use serde::Serialize;

use crate::manifest::RunManifest;

/// JSON outputs pair the payload with its manifest in one object.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    report: &'a T,
}

pub fn write_json<T: Serialize>(
    out: &mut dyn Write,
    manifest: &RunManifest,
    report: &T,
) -> std::io::Result<()> {
    let envelope = Envelope { manifest, report };
    let text = serde_json::to_string_pretty(&envelope).expect("reports always serialize");
    writeln!(out, "{text}")
}

/// Writes `#` manifest comments, then a CSV header and rows.
///
/// Comment lines go to the raw writer: the csv crate itself has no comment
/// support, and readers are expected to skip `#` lines before parsing.
pub fn write_csv(
    out: &mut dyn Write,
    manifest: &RunManifest,
    header: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    for line in manifest.comment_lines() {
        writeln!(out, "{line}")?;
    }
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writer.write_record(row)?;
    }
    writer.flush()
}

/// Shortest round-trip decimal rendering; infinities print as `inf`.
pub fn fmt(value: f64) -> String {
    format!("{value}")
}

pub fn fmt_opt(value: Option<f64>) -> String {
    value.map(fmt).unwrap_or_default()
}

/// (policy name, deadline parameter) columns for a config row. The infinite
/// policy has no finite parameter, so its cell is left empty.
pub fn policy_columns(config: &SystemConfig) -> (String, Option<f64>) {
    match config.deadline() {
        DeadlinePolicy::Infinite => ("infinite".into(), None),
        DeadlinePolicy::Fixed { horizon } => ("fixed".into(), Some(horizon)),
        DeadlinePolicy::ShiftedExponential { rate, shift } => {
            ("random".into(), Some(shift + 1.0 / rate))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aoi_core::ServiceModel;

    #[test]
    fn floats_render_shortest_and_round_trip() {
        assert_eq!(fmt(2.0), "2");
        assert_eq!(fmt(0.1), "0.1");
        assert_eq!(fmt(f64::INFINITY), "inf");
        let v = 2.7772127877345f64;
        assert_eq!(fmt(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn random_policy_reports_its_mean() {
        let config = SystemConfig::new(
            8,
            5,
            ServiceModel::new(0.5, 0.1).unwrap(),
            DeadlinePolicy::shifted_exponential_with_mean(3.0, 0.1).unwrap(),
        )
        .unwrap();
        let (name, param) = policy_columns(&config);
        assert_eq!(name, "random");
        assert!((param.unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn csv_output_puts_comments_before_the_header() {
        let manifest = RunManifest::new("sweep", "csv", serde_json::json!({"axis": "deadline"}));
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &manifest,
            &["a", "b"],
            &[vec!["1".into(), "2".into()]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# subcommand: sweep"));
        let first_data = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(first_data, "a,b");
        assert!(text.lines().last().unwrap().starts_with("1,2"));
    }
}
