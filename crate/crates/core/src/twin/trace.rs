use std::io::{BufRead, Write};

use crate::data::format_g17;
use crate::error::{Error, Result};
use crate::models::GradStats;

pub const TRACE_COLUMNS: [&str; 10] = [
    "epoch",
    "weight_cosdist",
    "pred_cosdist",
    "cf_cosdist",
    "train_loss1",
    "train_loss2",
    "eval_metric1",
    "grad_norm1",
    "grad_disparity1",
    "rank_flag",
];

/// Compact per-epoch gradient diagnostics of instance 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradSummary {
    pub grad_norm: f64,
    /// Evidence statistic; positive once the gradient is lost in its noise.
    pub evidence: f64,
    pub disparity: Option<f64>,
    pub num_batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub weight_cosdist: f64,
    pub pred_cosdist: f64,
    /// Projected-vs-counterfactual distance, on sampled two-layer epochs.
    pub cf_cosdist: Option<f64>,
    /// Raw-weights-vs-counterfactual distance, on the same epochs.
    pub cf_raw_cosdist: Option<f64>,
    pub train_loss1: f64,
    pub train_loss2: f64,
    pub eval_metric1: f64,
    pub grad: GradSummary,
    pub rank_flag: Option<bool>,
    /// Instance 1's distance to the minimum-norm solution, when tracked.
    pub ref_cosdist: Option<f64>,
}

impl EpochRecord {
    pub(crate) fn is_finite(&self) -> bool {
        [
            self.weight_cosdist,
            self.pred_cosdist,
            self.train_loss1,
            self.train_loss2,
            self.eval_metric1,
            self.grad.grad_norm,
        ]
        .iter()
        .chain(self.cf_cosdist.iter())
        .chain(self.cf_raw_cosdist.iter())
        .chain(self.ref_cosdist.iter())
        .chain(self.grad.disparity.iter())
        .all(|v| v.is_finite())
    }
}

/// Per-epoch diagnostics of a twin run, epochs contiguous from 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwinTrace {
    /// Weight distance of the freshly initialized pair.
    pub initial_weight_cosdist: f64,
    records: Vec<EpochRecord>,
    grad_stats: Vec<GradStats>,
}

impl TwinTrace {
    pub fn new(initial_weight_cosdist: f64) -> Self {
        Self {
            initial_weight_cosdist,
            records: Vec::new(),
            grad_stats: Vec::new(),
        }
    }

    /// Builds a trace from records; their epochs must run 1, 2, 3, ...
    pub fn from_records(initial_weight_cosdist: f64, records: Vec<EpochRecord>) -> Result<Self> {
        if let Some((i, r)) = records.iter().enumerate().find(|(i, r)| r.epoch != i + 1) {
            return Err(Error::InvalidConfig(format!(
                "trace row {i} has epoch {}, expected {}",
                r.epoch,
                i + 1
            )));
        }
        Ok(Self {
            initial_weight_cosdist,
            records,
            grad_stats: Vec::new(),
        })
    }

    pub(crate) fn push(&mut self, record: EpochRecord, stats: Option<GradStats>) {
        debug_assert_eq!(record.epoch, self.records.len() + 1);
        self.records.push(record);
        if let Some(s) = stats {
            self.grad_stats.push(s);
        }
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [EpochRecord] {
        &mut self.records
    }

    /// Full gradient statistics, present when the run kept them.
    pub fn grad_stats(&self) -> &[GradStats] {
        &self.grad_stats
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn weight_cosdist(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.weight_cosdist).collect()
    }

    pub fn pred_cosdist(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.pred_cosdist).collect()
    }

    pub fn eval_metric(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eval_metric1).collect()
    }

    pub fn evidence(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad.evidence).collect()
    }

    pub fn disparity(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.grad.disparity).collect()
    }

    pub fn ref_cosdist(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.ref_cosdist).collect()
    }

    /// `(epoch, distance, rank_deficient)` on the epochs that sampled a
    /// counterfactual distance.
    pub fn cf_samples(&self) -> Vec<(usize, f64, bool)> {
        self.records
            .iter()
            .filter_map(|r| {
                r.cf_cosdist
                    .map(|v| (r.epoch, v, r.rank_flag.unwrap_or(false)))
            })
            .collect()
    }

    /// Writes the fixed-column CSV form, one row per epoch.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", TRACE_COLUMNS.join(","))?;
        let opt = |v: Option<f64>| v.map(format_g17).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.epoch,
                format_g17(r.weight_cosdist),
                format_g17(r.pred_cosdist),
                opt(r.cf_cosdist),
                format_g17(r.train_loss1),
                format_g17(r.train_loss2),
                format_g17(r.eval_metric1),
                format_g17(r.grad.grad_norm),
                opt(r.grad.disparity),
                r.rank_flag.map(|b| b.to_string()).unwrap_or_default(),
            )?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`TwinTrace::write_csv`]. Columns outside the
    /// file format come back as defaults.
    pub fn read_csv(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != TRACE_COLUMNS.join(",") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {:?}", TRACE_COLUMNS.join(",")),
            });
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != TRACE_COLUMNS.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} fields, found {}", TRACE_COLUMNS.len(), f.len()),
                });
            }
            let bad = |col: usize| Error::Parse {
                line: line_no,
                message: format!("invalid {} value {:?}", TRACE_COLUMNS[col], f[col]),
            };
            let num = |col: usize| f[col].parse::<f64>().map_err(|_| bad(col));
            let opt = |col: usize| {
                if f[col].is_empty() {
                    Ok(None)
                } else {
                    num(col).map(Some)
                }
            };
            let rank_flag = match f[9] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                _ => return Err(bad(9)),
            };
            records.push(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad(0))?,
                weight_cosdist: num(1)?,
                pred_cosdist: num(2)?,
                cf_cosdist: opt(3)?,
                cf_raw_cosdist: None,
                train_loss1: num(4)?,
                train_loss2: num(5)?,
                eval_metric1: num(6)?,
                grad: GradSummary {
                    grad_norm: num(7)?,
                    evidence: f64::NAN,
                    disparity: opt(8)?,
                    num_batches: 0,
                },
                rank_flag,
                ref_cosdist: None,
            });
        }
        Self::from_records(f64::NAN, records)
    }
}
