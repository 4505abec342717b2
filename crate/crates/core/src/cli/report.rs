//! Report normalization and schema validation.

use serde_json::{Map, Value};
use thiserror::Error;

/// Significant digits kept for every float in a report.
pub const REPORT_DIGITS: usize = 12;

pub(crate) const COMMANDS: [&str; 9] = [
    "certify",
    "refute",
    "dominate",
    "normalize",
    "bounded",
    "unitcert",
    "gns",
    "eval",
    "export-sdpa",
];

/// Round every float to [`REPORT_DIGITS`] significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r: f64 = format!("{:.*e}", REPORT_DIGITS - 1, x)
                .parse()
                .expect("formatted float parses");
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("report violates the schema at: {}", .paths.join(", "))]
pub struct SchemaViolation {
    pub paths: Vec<String>,
}

/// Status values each command may report, with the exit code they map to and
/// the payload key they require.
fn status_rules(command: &str) -> &'static [(&'static str, i64, Option<&'static str>)] {
    match command {
        "certify" => &[
            ("certificate", 0, Some("certificate")),
            ("witness", 1, Some("witness")),
            ("indeterminate", 2, Some("reason")),
        ],
        "refute" => &[
            ("no-refutation", 0, None),
            ("witness", 1, Some("witness")),
            ("indeterminate", 2, Some("reason")),
        ],
        "dominate" => &[
            ("dominates", 0, Some("certificate")),
            ("witness", 1, Some("witness")),
            ("indeterminate", 2, Some("reason")),
        ],
        "normalize" => &[("pencil", 0, Some("pencil")), ("not-concave", 1, Some("reason"))],
        "bounded" => &[
            ("bounded", 0, None),
            ("unbounded", 1, Some("direction")),
            ("indeterminate", 2, Some("reason")),
        ],
        "unitcert" => &[("exists", 0, Some("certificate")), ("nonexistent", 1, Some("evidence"))],
        "gns" => &[("witness", 0, Some("witness")), ("singular", 2, Some("reason"))],
        "eval" => &[
            ("nonnegative", 0, None),
            ("not-falsified", 0, None),
            ("negative", 1, None),
            ("falsified", 1, Some("witness")),
        ],
        "export-sdpa" => &[("written", 0, Some("path"))],
        _ => &[],
    }
}

fn check_witness(w: &Value, path: &str, bad: &mut Vec<String>) {
    let Some(obj) = w.as_object() else {
        bad.push(path.to_string());
        return;
    };
    if !obj.get("n").is_some_and(Value::is_u64) {
        bad.push(format!("{path}.n"));
    }
    if !obj.get("X").is_some_and(Value::is_array) {
        bad.push(format!("{path}.X"));
    }
    if !obj.get("gamma").is_some_and(Value::is_array) {
        bad.push(format!("{path}.gamma"));
    }
    if !obj.get("value").is_some_and(|v| v.is_number() || v.is_null()) {
        bad.push(format!("{path}.value"));
    }
    if !obj.get("residuals").is_some_and(Value::is_object) {
        bad.push(format!("{path}.residuals"));
    }
}

fn check_certificate(c: &Value, path: &str, bad: &mut Vec<String>) {
    let Some(obj) = c.as_object() else {
        bad.push(path.to_string());
        return;
    };
    if let Some(sos) = obj.get("sos") {
        if !sos.is_array() {
            bad.push(format!("{path}.sos"));
        }
        if !obj.get("weighted").is_some_and(Value::is_object) {
            bad.push(format!("{path}.weighted"));
        }
    } else if !(obj.contains_key("S") && obj.contains_key("V")) && !obj.contains_key("W") {
        bad.push(format!("{path}.sos"));
    }
}

/// Validate a report: `command`, `status`, `exit_code` consistent with each
/// other, a `residuals` object of numbers (or null), and the status payload.
pub fn report_schema_validate(report: &Value) -> Result<(), SchemaViolation> {
    let mut bad = Vec::new();
    let Some(obj) = report.as_object() else {
        return Err(SchemaViolation {
            paths: vec!["$".into()],
        });
    };
    let command = obj.get("command").and_then(Value::as_str).unwrap_or("");
    if !COMMANDS.contains(&command) {
        bad.push("$.command".into());
    }
    let status = obj.get("status").and_then(Value::as_str);
    const INDETERMINATE: (&str, i64, Option<&str>) = ("indeterminate", 2, Some("reason"));
    let rule = status.and_then(|s| {
        status_rules(command)
            .iter()
            .find(|r| r.0 == s)
            .or((s == INDETERMINATE.0).then_some(&INDETERMINATE))
    });
    match rule {
        None => bad.push("$.status".into()),
        Some(&(_, code, payload)) => {
            if obj.get("exit_code").and_then(Value::as_i64) != Some(code) {
                bad.push("$.exit_code".into());
            }
            if let Some(key) = payload {
                match obj.get(key) {
                    None => bad.push(format!("$.{key}")),
                    Some(v) if key == "witness" => check_witness(v, "$.witness", &mut bad),
                    Some(v) if key == "certificate" => check_certificate(v, "$.certificate", &mut bad),
                    Some(_) => {}
                }
            }
        }
    }
    match obj.get("residuals").and_then(Value::as_object) {
        None => bad.push("$.residuals".into()),
        Some(res) => {
            for (k, v) in res {
                if !(v.is_number() || v.is_null() || v.is_boolean()) {
                    bad.push(format!("$.residuals.{k}"));
                }
            }
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(SchemaViolation { paths: bad })
    }
}

/// Ordered object builder.
pub(crate) fn object(entries: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in entries {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}
