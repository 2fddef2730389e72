//! Deterministic report emission: canonical JSON (sorted keys, floats at six
//! decimals) and plot-ready CSV tables.

use crate::error::{Error, Result};
use crate::fairness::{FairnessGap, MetricSet, ParetoFront, ParetoPoint};
use crate::select::CriterionBenchmark;
use crate::shift::{GapDecomposition, TransferReport};
use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const TOOL: &str = "fairaudit";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed six-decimal rendering; negative zero prints as zero and non-finite
/// values as an empty cell.
pub fn fmt_f64(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_f64() {
        let s = fmt_f64(n.as_f64().unwrap_or(f64::NAN));
        out.push_str(if s.is_empty() { "null" } else { &s });
    } else {
        let _ = write!(out, "{n}");
    }
}

fn write_value(out: &mut String, v: &Value, indent: Option<usize>) {
    let newline = |out: &mut String, level: usize| {
        if let Some(step) = indent {
            out.push('\n');
            out.extend(std::iter::repeat_n(' ', step * level));
        }
    };
    fn go(out: &mut String, v: &Value, indent: Option<usize>, level: usize, nl: &dyn Fn(&mut String, usize)) {
        match v {
            Value::Null => out.push_str("null"),
            Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Value::Number(n) => write_number(out, n),
            Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap_or_default()),
            Value::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    nl(out, level + 1);
                    go(out, item, indent, level + 1, nl);
                }
                nl(out, level);
                out.push(']');
            }
            Value::Object(map) => {
                if map.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                for (i, k) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    nl(out, level + 1);
                    out.push_str(&serde_json::to_string(k).unwrap_or_default());
                    out.push(':');
                    if indent.is_some() {
                        out.push(' ');
                    }
                    go(out, &map[k], indent, level + 1, nl);
                }
                nl(out, level);
                out.push('}');
            }
        }
    }
    go(out, v, indent, 0, &newline);
}

pub fn to_compact_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, None);
    out
}

pub fn to_canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, Some(2));
    out.push('\n');
    out
}

pub fn to_value<S: Serialize>(v: &S) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Json {
        line: 0,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportEnvelope {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub payload: Value,
}

impl ReportEnvelope {
    pub fn new<C: Serialize, P: Serialize>(command: &str, config: &C, payload: &P) -> Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            config: to_value(config)?,
            payload: to_value(payload)?,
        })
    }

    /// Guarantees the listed payload keys exist, as empty arrays if absent.
    pub fn with_sections(mut self, sections: &[&str]) -> Self {
        if let Value::Object(map) = &mut self.payload {
            for s in sections {
                let slot = map.entry(s.to_string()).or_insert(Value::Array(vec![]));
                if slot.is_null() {
                    *slot = Value::Array(vec![]);
                }
            }
        }
        self
    }

    pub fn render(&self) -> Result<String> {
        Ok(to_canonical_json(&to_value(self)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io("<table>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Writes `report.json` plus one CSV per table into `dir`, returning the paths.
pub fn write_report(dir: &Path, envelope: &ReportEnvelope, tables: &[Table]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(tables.len() + 1);
    let json = dir.join("report.json");
    fs::write(&json, envelope.render()?).map_err(|e| Error::io(&json, e))?;
    written.push(json);
    for t in tables {
        let path = dir.join(&t.name);
        fs::write(&path, t.render()?).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_json_file<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    fs::write(path, to_canonical_json(&to_value(value)?)).map_err(|e| Error::io(path, e))
}

pub fn metrics_table(sets: &[MetricSet]) -> Table {
    let mut t = Table::new(
        "metrics.csv",
        &["model_id", "group", "n", "auroc", "tpr", "tnr", "fpr", "fnr", "f1", "ap", "ece", "threshold"],
    );
    for set in sets {
        for g in std::iter::once(&set.overall).chain(&set.groups) {
            t.push(vec![
                set.model_id.clone(),
                g.group.clone(),
                g.n.to_string(),
                fmt_opt(g.auroc),
                fmt_opt(g.tpr),
                fmt_opt(g.tnr),
                fmt_opt(g.fpr),
                fmt_opt(g.fnr),
                fmt_f64(g.f1),
                fmt_opt(g.average_precision),
                fmt_f64(g.ece),
                fmt_f64(g.threshold),
            ]);
        }
    }
    t
}

pub fn gaps_table<'a>(gaps: impl IntoIterator<Item = (&'a str, &'a FairnessGap)>) -> Table {
    let mut t = Table::new("gaps.csv", &["model_id", "metric", "g1", "g2", "signed_gap", "abs_gap"]);
    for (model_id, g) in gaps {
        t.push(vec![
            model_id.to_string(),
            g.metric.clone(),
            g.pair.g1.clone(),
            g.pair.g2.clone(),
            fmt_f64(g.signed_gap),
            fmt_f64(g.abs_gap),
        ]);
    }
    t
}

pub fn waterfall_table(d: &GapDecomposition<f64>) -> Table {
    let mut t = Table::new("waterfall.csv", &["term", "value"]);
    for (term, value) in d.terms() {
        t.push(vec![term.to_string(), fmt_f64(value)]);
    }
    t
}

pub fn transfer_table<'a>(reports: impl IntoIterator<Item = (&'a str, &'a TransferReport)>) -> Table {
    let mut t = Table::new(
        "transfer.csv",
        &["setting", "axis", "n", "r", "p", "ci_low", "ci_high"],
    );
    for (setting, rep) in reports {
        for (axis, c) in [("performance", &rep.performance), ("fairness", &rep.fairness)] {
            t.push(vec![
                setting.to_string(),
                axis.to_string(),
                c.n.to_string(),
                fmt_f64(c.r),
                fmt_f64(c.p),
                fmt_f64(c.ci95.0),
                fmt_f64(c.ci95.1),
            ]);
        }
    }
    t
}

pub fn pareto_table(name: &str, points: &[ParetoPoint<f64>], front: &ParetoFront<f64>) -> Table {
    let mut t = Table::new(name, &["model_id", "performance", "gap", "on_front"]);
    let mut sorted: Vec<&ParetoPoint<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    for p in sorted {
        t.push(vec![
            p.model_id.clone(),
            fmt_f64(p.performance),
            fmt_f64(p.gap),
            front.contains(&p.model_id).to_string(),
        ]);
    }
    t
}

pub fn selection_table(b: &CriterionBenchmark) -> Table {
    let mut t = Table::new(
        "selection.csv",
        &["criterion", "setting", "selected_model", "ood_gap", "oracle_model", "oracle_gap", "increase"],
    );
    for r in &b.rows {
        t.push(vec![
            r.entry.clone(),
            r.setting.clone(),
            r.selected_model.clone(),
            fmt_f64(r.ood_gap),
            r.oracle_model.clone(),
            fmt_f64(r.oracle_gap),
            fmt_f64(r.increase),
        ]);
    }
    t
}
