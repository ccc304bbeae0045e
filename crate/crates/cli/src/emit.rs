//! results.csv, summary.json and plot.gp. All three are pure functions of the result set, so equal
//! inputs give equal bytes.

use std::fmt::Write as _;

use serde::Serialize;

use crate::experiments::{Outcome, VerdictEntry};

pub const CSV_HEADER: &str = "experiment,cell,metric,value,verdict,config_hash,code_version";

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One finished (or aborted) experiment.
pub struct Section<'a> {
    pub id: String,
    pub kind: &'static str,
    pub config: serde_json::Value,
    pub outcome: &'a Outcome,
}

/// Shortest round-trip scientific form; NaN and infinities spelled out.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

pub fn csv(sections: &[Section], hash: &str) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for sec in sections {
        for r in &sec.outcome.rows {
            debug_assert!(!r.cell.contains(',') && !r.metric.contains(','));
            let _ = writeln!(out, "{},{},{},{},{},{},{}", sec.id, r.cell, r.metric, number(r.value), r.verdict, hash, CODE_VERSION);
        }
    }
    out
}

#[derive(Serialize)]
pub struct GuardRecord {
    pub experiment: String,
    pub guard: String,
    pub message: String,
}

#[derive(Serialize)]
struct JsonVerdict<'a> {
    cell: &'a str,
    metric: &'a str,
    value: String,
    verdict: &'a str,
    thresholds: &'a std::collections::BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct JsonSection<'a> {
    id: &'a str,
    kind: &'a str,
    rows: usize,
    verdicts: Vec<JsonVerdict<'a>>,
    flags: &'a [String],
    parameters: &'a serde_json::Value,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    code_version: &'a str,
    config_hash: &'a str,
    status: &'a str,
    exit_code: i32,
    guards_triggered: &'a [GuardRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    experiments: Vec<JsonSection<'a>>,
}

fn verdict_json(v: &VerdictEntry) -> JsonVerdict<'_> {
    // values as the CSV spells them, so the two files agree textually
    JsonVerdict { cell: &v.cell, metric: &v.metric, value: number(v.value), verdict: &v.verdict, thresholds: &v.thresholds }
}

pub fn summary(sections: &[Section], hash: &str, exit_code: i32, guards: &[GuardRecord], error: Option<&str>) -> String {
    let s = Summary {
        schema_version: crate::config::SCHEMA_VERSION,
        code_version: CODE_VERSION,
        config_hash: hash,
        status: if exit_code == 0 { "ok" } else { "aborted" },
        exit_code,
        guards_triggered: guards,
        error,
        experiments: sections
            .iter()
            .map(|sec| JsonSection {
                id: &sec.id,
                kind: sec.kind,
                rows: sec.outcome.rows.len(),
                verdicts: sec.outcome.verdicts.iter().map(verdict_json).collect(),
                flags: &sec.outcome.flags,
                parameters: &sec.config,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&s).expect("summary serializes");
    text.push('\n');
    text
}

/// Gnuplot commands reading results.csv only: one panel per (experiment, metric), value against
/// row order within that series.
pub fn plot_script(sections: &[Section]) -> String {
    let mut out = String::new();
    out.push_str("# gnuplot script over results.csv; run from the output directory\n");
    out.push_str("set datafile separator \",\"\n");
    out.push_str("set terminal dumb size 100,30\n");
    out.push_str("set key off\n");
    for sec in sections {
        let mut metrics: Vec<&str> = vec![];
        for r in &sec.outcome.rows {
            if r.verdict.is_empty() && !metrics.contains(&r.metric.as_str()) {
                metrics.push(&r.metric);
            }
        }
        for m in metrics {
            let _ = writeln!(out, "set title \"{} {}\"", sec.id, m);
            let _ = writeln!(out, "plot \"< awk -F, '$1==\\\"{}\\\" && $3==\\\"{}\\\"' results.csv\" using 0:4 with linespoints", sec.id, m);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Row;

    fn outcome(rows: usize) -> Outcome {
        Outcome {
            rows: (0..rows)
                .map(|i| Row { cell: format!("j={i}"), metric: "M_j".into(), value: i as f64 * 0.1, verdict: String::new() })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_rows_is_header_only() {
        let o = outcome(0);
        let secs = [Section { id: "x".into(), kind: "shortrange", config: serde_json::Value::Null, outcome: &o }];
        assert_eq!(csv(&secs, "h"), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn constant_column_count() {
        let o = outcome(5);
        let secs = [Section { id: "x".into(), kind: "shortrange", config: serde_json::Value::Null, outcome: &o }];
        let text = csv(&secs, "abc");
        let cols = CSV_HEADER.split(',').count();
        for line in text.lines() {
            assert_eq!(line.split(',').count(), cols, "{line}");
        }
        assert!(text.lines().skip(1).all(|l| l.contains(",abc,")));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -2.5e-13, 1.0 / 3.0, 6.02e23] {
            assert_eq!(number(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(number(f64::NAN), "nan");
        assert_eq!(number(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn summary_matches_csv_values() {
        let mut o = outcome(2);
        let v = VerdictEntry { cell: "s=1".into(), metric: "tail_slope".into(), value: -0.171, verdict: "short_range".into(), thresholds: [("short_below".to_string(), -0.1)].into() };
        o.rows.push(Row { cell: v.cell.clone(), metric: v.metric.clone(), value: v.value, verdict: v.verdict.clone() });
        o.verdicts.push(v);
        let secs = [Section { id: "x".into(), kind: "shortrange", config: serde_json::Value::Null, outcome: &o }];
        let csv_text = csv(&secs, "h");
        let json: serde_json::Value = serde_json::from_str(&summary(&secs, "h", 0, &[], None)).unwrap();
        let jv = &json["experiments"][0]["verdicts"][0];
        let line = csv_text.lines().find(|l| l.contains("tail_slope")).unwrap();
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(jv["value"].as_str().unwrap(), fields[3]);
        assert_eq!(jv["verdict"].as_str().unwrap(), fields[4]);
        assert_eq!(jv["thresholds"]["short_below"].as_f64().unwrap(), -0.1);
    }
}
