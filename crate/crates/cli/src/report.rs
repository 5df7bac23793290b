//! Report rendering: a stable plain-text column layout for golden files, and
//! a line-per-record key=value format behind `--format=records`. Nothing
//! time- or path-dependent goes into the bytes.

use crate::checks::{RunReport, Status};

pub fn render_text(r: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("vlab check report\n");
    out.push_str(&format!("spec: {}\n", r.spec_name));
    out.push_str(&format!("seed: {}\n", r.seed));
    out.push_str(&format!("field: {}\n", r.field));
    if let Some(v) = &r.valuation {
        out.push_str(&format!("valuation: {}\n", v));
    }
    for row in &r.rows {
        out.push_str(&format!(
            "[{}] {:<14} {:<11}",
            row.index, row.name, row.status.as_str()
        ));
        for (k, v) in &row.details {
            out.push_str(&format!(" {}={}", k, quoted(v)));
        }
        out.push('\n');
    }
    let passed = r
        .rows
        .iter()
        .filter(|row| row.status == Status::Pass)
        .count();
    let unsupported = r
        .rows
        .iter()
        .filter(|row| row.status == Status::Unsupported)
        .count();
    out.push_str(&format!(
        "result: {} checks={}/{} unsupported={}\n",
        match r.exit_code() {
            0 => "PASS",
            1 => "FAIL",
            _ => "UNSUPPORTED",
        },
        passed,
        r.rows.len(),
        unsupported
    ));
    out
}

pub fn render_records(r: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "spec={} seed={} field={}\n",
        quoted(&r.spec_name),
        r.seed,
        quoted(&r.field)
    ));
    for row in &r.rows {
        out.push_str(&format!(
            "check={} index={} status={}",
            row.name,
            row.index,
            row.status.as_str().to_lowercase()
        ));
        for (k, v) in &row.details {
            out.push_str(&format!(" {}={}", k, quoted(v)));
        }
        out.push('\n');
    }
    out.push_str(&format!(
        "result={}\n",
        match r.exit_code() {
            0 => "pass",
            1 => "fail",
            _ => "unsupported",
        }
    ));
    out
}

/// Quote values containing spaces so records stay one token per key=value.
fn quoted(v: &str) -> String {
    if v.contains(' ') || v.contains('=') {
        format!("\"{}\"", v)
    } else {
        v.to_string()
    }
}
