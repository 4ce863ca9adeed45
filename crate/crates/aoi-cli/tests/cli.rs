//! End-to-end tests of the `aoi` binary: exit codes, output formats,
//! schema conformance, and consistency across subcommands.

use std::path::PathBuf;
use std::process::{Command, Output};

use aoi_core::{average_aoi, AoiReport, DeadlinePolicy, ServiceModel, SystemConfig};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_aoi");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "exit {:?}, stderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn load_schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schema")
        .join(name);
    serde_json::from_str(&std::fs::read_to_string(&path).unwrap())
        .unwrap_or_else(|e| panic!("{} is not valid JSON: {e}", path.display()))
}

/// Structural JSON-schema checker covering the subset the schema files
/// use: type, required, properties, items, enum, minItems, maxItems, and
/// $ref into #/definitions.
fn check(value: &Value, node: &Value, root: &Value, path: String, errors: &mut Vec<String>) {
    if let Some(reference) = node.get("$ref").and_then(Value::as_str) {
        let name = reference
            .strip_prefix("#/definitions/")
            .expect("only local definition refs are supported");
        let target = &root["definitions"][name];
        assert!(!target.is_null(), "unresolved $ref {reference}");
        check(value, target, root, path, errors);
        return;
    }
    if let Some(allowed) = node.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            errors.push(format!("{path}: {value} not one of {allowed:?}"));
        }
    }
    if let Some(type_spec) = node.get("type") {
        let names: Vec<&str> = match type_spec {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let matched = names.iter().any(|n| match *n {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "number" => value.is_number(),
            "integer" => value.is_i64() || value.is_u64(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            other => panic!("unsupported schema type {other}"),
        });
        if !matched {
            errors.push(format!("{path}: expected type {names:?}, got {value}"));
            return;
        }
    }
    if let Some(required) = node.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if value.get(key).is_none() {
                errors.push(format!("{path}: missing required key {key:?}"));
            }
        }
    }
    if let Some(properties) = node.get("properties").and_then(Value::as_object) {
        for (key, sub) in properties {
            if let Some(child) = value.get(key) {
                check(child, sub, root, format!("{path}.{key}"), errors);
            }
        }
    }
    if let Some(items) = node.get("items") {
        if let Some(array) = value.as_array() {
            if let Some(min) = node.get("minItems").and_then(Value::as_u64) {
                if (array.len() as u64) < min {
                    errors.push(format!("{path}: fewer than {min} items"));
                }
            }
            if let Some(max) = node.get("maxItems").and_then(Value::as_u64) {
                if (array.len() as u64) > max {
                    errors.push(format!("{path}: more than {max} items"));
                }
            }
            for (index, element) in array.iter().enumerate() {
                check(element, items, root, format!("{path}[{index}]"), errors);
            }
        }
    }
}

fn assert_schema(value: &Value, schema_name: &str) {
    let root = load_schema(schema_name);
    let mut errors = Vec::new();
    check(value, &root, &root, "$".into(), &mut errors);
    assert!(
        errors.is_empty(),
        "{schema_name} violations:\n{}",
        errors.join("\n")
    );
}

/// Splits CSV output into `#` comment lines and data records. Fields here
/// never contain quoted commas (numeric columns and bare identifiers), so
/// a plain split is exact.
fn split_csv(stdout: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let text = String::from_utf8(stdout.to_vec()).expect("csv output is utf-8");
    let mut comments = Vec::new();
    let mut records = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') {
            comments.push(line.to_string());
        } else if !line.is_empty() {
            records.push(line.split(',').map(str::to_string).collect());
        }
    }
    (comments, records)
}

fn write_temp(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("aoi_cli_test_{}_{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn analyze_unicast_reports_the_exact_age() {
    let output = run(&["analyze", "--n", "1", "--k", "1", "--service-rate", "1"]);
    let envelope = stdout_json(&output);
    assert_schema(&envelope, "analyze.schema.json");
    let report = &envelope["report"];
    assert!((report["average_aoi"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    assert!((report["average_peak_aoi"].as_f64().unwrap() - 2.0).abs() <= 1e-12);
    assert_eq!(envelope["manifest"]["subcommand"], "analyze");
}

#[test]
fn analyze_json_round_trips_into_the_same_report() {
    let output = run(&[
        "analyze",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--deadline",
        "exp:3",
    ]);
    let envelope = stdout_json(&output);
    assert_schema(&envelope, "analyze.schema.json");
    let parsed: AoiReport = serde_json::from_value(envelope["report"].clone()).unwrap();
    let config = SystemConfig::new(
        5,
        3,
        ServiceModel::new(0.5, 0.1).unwrap(),
        DeadlinePolicy::shifted_exponential_with_mean(3.0, 0.1).unwrap(),
    )
    .unwrap();
    let direct = average_aoi(&config).unwrap();
    assert_eq!(parsed, direct);
}

#[test]
fn analyze_csv_has_the_documented_columns() {
    let output = run(&[
        "analyze",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "0.5",
        "--deadline",
        "fixed:1",
        "--format",
        "csv",
    ]);
    assert!(output.status.success());
    let (comments, records) = split_csv(&output.stdout);
    assert!(comments.iter().any(|c| c == "# subcommand: analyze"));
    assert_eq!(records.len(), 2);
    assert_eq!(
        records[0].join(","),
        "policy,n,k,service_rate,service_shift,deadline_param,average_aoi,average_peak_aoi,\
         p_success,p_f1,p_f2,p_s1,p_s2,e_xf,e_xf2,e_xs,e_xs2,e_w,e_w2,e_m,e_that"
    );
    assert_eq!(records[1][0], "fixed");
    assert_eq!(records[1][5], "1");
    let aoi: f64 = records[1][6].parse().unwrap();
    assert!(aoi.is_finite() && aoi > 0.0);
}

#[test]
fn analyze_rejects_a_horizon_below_the_shift() {
    let output = run(&[
        "analyze",
        "--n",
        "2",
        "--k",
        "1",
        "--service-rate",
        "1",
        "--service-shift",
        "0.1",
        "--deadline",
        "fixed:0.05",
    ]);
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn invalid_flags_exit_two() {
    let threshold_above_fleet = run(&["analyze", "--n", "5", "--k", "7", "--service-rate", "1"]);
    assert_eq!(threshold_above_fleet.status.code(), Some(2));

    let malformed_deadline = run(&[
        "analyze",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "1",
        "--deadline",
        "sometimes",
    ]);
    assert_eq!(malformed_deadline.status.code(), Some(2));

    let missing_flag = run(&["analyze", "--n", "5", "--k", "3"]);
    assert_eq!(missing_flag.status.code(), Some(2));
}

const SIM_ARGS: &[&str] = &[
    "simulate",
    "--n",
    "5",
    "--k",
    "3",
    "--service-rate",
    "0.5",
    "--service-shift",
    "0.1",
    "--deadline",
    "fixed:1",
    "--updates",
    "20000",
];

#[test]
fn simulate_reruns_are_byte_identical_and_seeds_matter() {
    let first = run(SIM_ARGS);
    let second = run(SIM_ARGS);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let envelope = stdout_json(&first);
    assert_schema(&envelope, "simulate.schema.json");

    let mut reseeded_args = SIM_ARGS.to_vec();
    reseeded_args.extend(["--seed", "1"]);
    let reseeded = stdout_json(&run(&reseeded_args));
    assert_ne!(
        envelope["report"]["average_aoi"],
        reseeded["report"]["average_aoi"]
    );
}

#[test]
fn simulate_agrees_with_analyze() {
    let sim = stdout_json(&run(SIM_ARGS));
    let analyze = stdout_json(&run(&[
        "analyze",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--deadline",
        "fixed:1",
    ]));
    let observed = sim["report"]["average_aoi"].as_f64().unwrap();
    let halfwidth = sim["report"]["ci_halfwidth_aoi"].as_f64().unwrap();
    let exact = analyze["report"]["average_aoi"].as_f64().unwrap();
    // Three standard errors is 1.43 halfwidths at 20 batches; 1.5 leaves
    // margin and the seeded run makes the check deterministic.
    assert!(
        (observed - exact).abs() <= 1.5 * halfwidth,
        "sim {observed} vs exact {exact}, halfwidth {halfwidth}"
    );
}

#[test]
fn simulate_with_no_possible_delivery_exits_four() {
    let output = run(&[
        "simulate",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--deadline",
        "fixed:0.10001",
        "--updates",
        "2000",
    ]);
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("cycle") || stderr.contains("reception"),
        "{stderr}"
    );
}

#[test]
fn sweep_single_value_matches_analyze() {
    let file = write_temp(
        "single",
        "axis = deadline\nvalues = 1\nn = 5\nk = 3\nservice_rate = 0.5\n\
         service_shift = 0.1\npolicy = fixed\nengines = analytic\n",
    );
    let sweep_out = run(&["sweep", "--file", file.to_str().unwrap()]);
    assert!(sweep_out.status.success());
    let (_, records) = split_csv(&sweep_out.stdout);
    assert_eq!(records.len(), 2);

    let analyze_out = run(&[
        "analyze",
        "--n",
        "5",
        "--k",
        "3",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--deadline",
        "fixed:1",
        "--format",
        "csv",
    ]);
    let (_, analyze_records) = split_csv(&analyze_out.stdout);
    // Same engine, same config: the shortest-round-trip decimal strings
    // must match exactly.
    let sweep_aoi = &records[1][7];
    let analyze_aoi = &analyze_records[1][6];
    assert_eq!(sweep_aoi, analyze_aoi);
}

#[test]
fn sweep_malformed_file_exits_two_naming_the_line() {
    let file = write_temp(
        "malformed",
        "axis = deadline\nvalues = 1,2\nn = 5\nhorizon = oops\nk = 3\n\
         service_rate = 0.5\nengines = analytic\n",
    );
    let output = run(&["sweep", "--file", file.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn sweep_threshold_scan_bottoms_at_three() {
    let file = write_temp(
        "threshold",
        "axis = threshold_k\nvalues = 1:10:1\nn = 10\nk = 5\nservice_rate = 0.5\n\
         service_shift = 0.1\npolicy = fixed:3\nengines = analytic\n",
    );
    let output = run(&["sweep", "--file", file.to_str().unwrap()]);
    assert!(output.status.success());
    let (_, records) = split_csv(&output.stdout);
    assert_eq!(records.len(), 11);
    let best = records[1..]
        .iter()
        .min_by(|a, b| {
            let aoi_a: f64 = a[7].parse().unwrap();
            let aoi_b: f64 = b[7].parse().unwrap();
            aoi_a.total_cmp(&aoi_b)
        })
        .unwrap();
    assert_eq!(best[2], "3", "threshold column of the minimal row");
}

#[test]
fn sweep_can_add_simulation_rows() {
    let file = write_temp(
        "engines",
        "axis = deadline\nvalues = 1, 2\nn = 5\nk = 3\nservice_rate = 0.5\n\
         service_shift = 0.1\npolicy = fixed\nengines = analytic, simulation\n\
         updates = 2000\nbatches = 10\n",
    );
    let output = run(&["sweep", "--file", file.to_str().unwrap()]);
    assert!(output.status.success());
    let (_, records) = split_csv(&output.stdout);
    assert_eq!(records.len(), 5);
    let engines: Vec<&str> = records[1..].iter().map(|r| r[6].as_str()).collect();
    assert_eq!(
        engines,
        ["analytic", "simulation", "analytic", "simulation"]
    );
    let sim_row = &records[2];
    assert!(!sim_row[13].is_empty(), "simulation rows carry a halfwidth");
    let analytic_row = &records[1];
    assert!(
        analytic_row[13].is_empty(),
        "analytic rows have no halfwidth"
    );
}

#[test]
fn optimize_degenerate_bracket_is_a_single_evaluation() {
    let output = run(&[
        "optimize",
        "--n",
        "10",
        "--k",
        "7",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--policy",
        "fixed",
        "--bracket",
        "1:1",
    ]);
    let envelope = stdout_json(&output);
    assert_schema(&envelope, "optimize.schema.json");
    assert_eq!(envelope["report"]["evaluations"], 1);
    assert_eq!(envelope["report"]["best_deadline"], 1.0);
}

#[test]
fn optimize_bracket_below_the_shift_exits_two() {
    let output = run(&[
        "optimize",
        "--n",
        "10",
        "--k",
        "7",
        "--service-rate",
        "0.5",
        "--service-shift",
        "0.1",
        "--policy",
        "fixed",
        "--bracket",
        "0.05:2",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn validate_small_grid_passes() {
    let output = run(&["validate"]);
    let envelope = stdout_json(&output);
    assert_schema(&envelope, "validate.schema.json");
    assert_eq!(envelope["report"]["pass"], true);
    assert_eq!(envelope["manifest"]["parameters"]["grid"], "small");
}

#[test]
fn validate_unachievable_threshold_fails() {
    let output = run(&["validate", "--threshold", "1e-15"]);
    assert_eq!(output.status.code(), Some(1));
    let envelope: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_schema(&envelope, "validate.schema.json");
    assert_eq!(envelope["report"]["pass"], false);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("worst quantity"), "{stderr}");
}

#[test]
fn validate_injected_fault_is_named() {
    let output = run(&[
        "validate",
        "--inject",
        "unshifted-decay",
        "--threshold",
        "1e-6",
    ]);
    assert_eq!(output.status.code(), Some(1));
    let envelope: Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_schema(&envelope, "inject.schema.json");
    assert_eq!(envelope["report"]["detected"], true);
    assert_eq!(envelope["report"]["comparison"]["worst_quantity"], "e_that");
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("e_that"), "{stderr}");
}

#[test]
fn a_closed_output_pipe_is_not_an_error() {
    // 1980 rows is far beyond the 64KB pipe buffer, so the child is
    // guaranteed to hit the closed pipe rather than finish into the buffer.
    let file = write_temp(
        "widepipe",
        "axis = deadline\nvalues = 0.2:20.0:0.01\nn = 5\nk = 3\nservice_rate = 0.5\n\
         service_shift = 0.1\npolicy = fixed\nengines = analytic\n",
    );
    let mut child = Command::new(BIN)
        .args(["sweep", "--file", file.to_str().unwrap()])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdout.take());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
    let mut stderr = String::new();
    std::io::Read::read_to_string(child.stderr.as_mut().unwrap(), &mut stderr).unwrap();
    assert!(stderr.is_empty(), "{stderr}");
}

#[test]
fn help_lists_every_subcommand() {
    let output = run(&["--help"]);
    assert!(output.status.success());
    let text = String::from_utf8_lossy(&output.stdout);
    for name in ["analyze", "simulate", "sweep", "optimize", "validate"] {
        assert!(text.contains(name), "help is missing {name}");
    }
}
