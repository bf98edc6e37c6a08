use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SWEEP_HEADER: [&str; 8] = [
    "learning_rate",
    "seed1",
    "seed2",
    "method",
    "stop_epoch",
    "test_metric",
    "criterion_value",
    "status",
];

/// One stopping decision of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub learning_rate: f64,
    pub seed1: u64,
    pub seed2: u64,
    pub method: String,
    pub stop_epoch: usize,
    pub test_metric: f64,
    pub criterion_value: f64,
    pub status: String,
}

/// Writes rows sorted by learning rate, seeds and method.
pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.learning_rate
            .total_cmp(&b.learning_rate)
            .then(a.seed1.cmp(&b.seed1))
            .then(a.seed2.cmp(&b.seed2))
            .then(a.method.cmp(&b.method))
    });
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(input: impl Read) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(CliError::Input(format!(
            "sweep header must be {}, got {}",
            SWEEP_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub cells: usize,
    pub mean: f64,
    /// Population standard deviation across cells.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateTable {
    /// Deployable methods in order of first appearance.
    pub methods: Vec<MethodSummary>,
    pub best: Option<String>,
    pub runner_up: Option<String>,
    /// Reference rows whose method name starts with `oracle`.
    pub oracle: Vec<MethodSummary>,
}

pub fn is_oracle(method: &str) -> bool {
    method.starts_with("oracle")
}

/// Mean and spread of the test metric per method.
pub fn aggregate(rows: &[SweepRow]) -> Result<AggregateTable> {
    if rows.is_empty() {
        return Err(CliError::Input("no sweep rows to aggregate".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    let summarize = |m: &str| {
        let v: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.test_metric).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MethodSummary {
            method: m.to_string(),
            cells: v.len(),
            mean,
            std: var.sqrt(),
        }
    };
    let (oracle, methods): (Vec<_>, Vec<_>) = order.iter().map(|m| summarize(m)).partition(|s| is_oracle(&s.method));
    let mut ranked: Vec<&MethodSummary> = methods.iter().collect();
    ranked.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    Ok(AggregateTable {
        best: ranked.first().map(|s| s.method.clone()),
        runner_up: ranked.get(1).map(|s| s.method.clone()),
        methods,
        oracle,
    })
}

impl AggregateTable {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| method | cells | mean | std |\n|---|---|---|---|\n");
        for m in &self.methods {
            let mut name = m.method.clone();
            if self.best.as_deref() == Some(&m.method) {
                name = format!("**{name}**");
            } else if self.runner_up.as_deref() == Some(&m.method) {
                name = format!("*{name}*");
            }
            let _ = writeln!(s, "| {name} | {} | {:.4} | {:.4} |", m.cells, m.mean, m.std);
        }
        for m in &self.oracle {
            let _ = writeln!(s, "| {} (reference) | {} | {:.4} | {:.4} |", m.method, m.cells, m.mean, m.std);
        }
        s
    }
}
