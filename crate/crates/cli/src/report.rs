//! Plain-text result tables.

use flock_ioc_core::IocSolution;

/// One table row: a flight (or a set of stacked flights) and its estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub t_f: f64,
    /// The estimated (unknown) weights in index order.
    pub weights: Vec<f64>,
    pub r_w: f64,
}

impl ReportRow {
    pub fn from_solution(label: impl Into<String>, t_f: f64, sol: &IocSolution) -> Self {
        let unknown = sol.c_hat.known().unknown_indices();
        let values = sol.c_hat.values();
        ReportRow { label: label.into(), t_f, weights: unknown.iter().map(|&i| values[i]).collect(), r_w: sol.r_w }
    }
}

/// Two decimals; values that round to zero print as `0`.
pub fn format_weight(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "0.00" || s == "-0.00" {
        "0".into()
    } else {
        s
    }
}

/// Three significant digits in scientific notation, e.g. `2.33e13`.
pub fn format_condition(r_w: f64) -> String {
    if r_w.is_finite() {
        format!("{r_w:.2e}")
    } else {
        "inf".into()
    }
}

/// Seconds with at most three decimals and no trailing zeros.
pub fn format_seconds(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// `c_1, c_2, ...` labels for zero-based indices.
pub fn weight_labels(indices: &[usize]) -> Vec<String> {
    indices.iter().map(|i| format!("c_{}", i + 1)).collect()
}

pub fn render_header(labels: &[String]) -> String {
    format!("Flight No | t_f | {} | r_w", labels.join(", "))
}

pub fn render_row(row: &ReportRow) -> String {
    let weights: Vec<String> = row.weights.iter().map(|&v| format_weight(v)).collect();
    format!("{} | {} s | {} | {}", row.label, format_seconds(row.t_f), weights.join(", "), format_condition(row.r_w))
}

pub fn render_table(title: &str, labels: &[String], rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&render_header(labels));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out
}

/// Comma-separated values with a fixed number of significant digits.
pub fn format_spectrum(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

pub fn format_direction(v: &[f64]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|&x| {
            let s = format!("{x:.4}");
            if s == "-0.0000" {
                "0.0000".into()
            } else {
                s
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}
