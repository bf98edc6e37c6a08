use std::fs;
use std::path::{Path, PathBuf};

use cdc_core::data::{
    inject_label_noise, load_cifar10, load_idx, load_svmlight_qid_with_dim, make_synthetic_ranking,
    make_synthetic_with, normalize_rows, sample_queries, Dataset, NoiseSpec, Standardizer, SyntheticSpec,
};
use cdc_core::models::{SgdConfig, StatsPolicy};
use cdc_core::numerics::CornerConfig;
use cdc_core::objectives::EvalMetric;
use cdc_core::stopping::{
    cdc_stop, cv_run, eb_stop_series, gd_stop_series, oracle_stop, trace_disparity, StopDecision,
};
use cdc_core::twin::{prepare, train_twins_prepared, ModelKind, Prepared, TwinConfig, TwinTrace};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ImageSource, Preprocess, RankingSource, StopRule, Task};
use crate::error::{CliError, Result};
use crate::report::{aggregate, write_sweep_csv, AggregateTable, SweepRow};

/// Training and test splits with the output count and metric they imply.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub train: Dataset,
    pub test: Dataset,
    pub outputs: usize,
    pub metric: EvalMetric,
}

/// A cell or a single rule of a cell that did not produce a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub learning_rate: f64,
    pub seed1: u64,
    pub seed2: u64,
    pub method: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub learning_rate: f64,
    pub seeds: (u64, u64),
    pub trace: Option<TwinTrace>,
    /// Decisions labelled by rule, each with the test metric at its epoch.
    pub decisions: Vec<(StopDecision, f64)>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub cells: Vec<CellOutcome>,
    pub rows: Vec<SweepRow>,
    pub failures: Vec<Failure>,
    pub table: Option<AggregateTable>,
}

impl RunSummary {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Loads, validates and runs the config at `path`.
pub fn run_experiment(path: &Path) -> Result<RunSummary> {
    let cfg = ExperimentConfig::load(path)?;
    run_config(&cfg)
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let data = load_task(cfg).map_err(|e| CliError::Config(format!("loading the task data: {e}")))?;
    let base = twin_config(cfg, &data, cfg.learning_rates[0], cfg.seeds[0])?;
    base.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let prepared = prepare(&base, &data.train, &data.test)?;

    let grid: Vec<(f64, (u64, u64))> = cfg
        .learning_rates
        .iter()
        .flat_map(|&lr| cfg.seeds.iter().map(move |&s| (lr, s)))
        .collect();
    let cells: Vec<CellOutcome> = grid
        .par_iter()
        .map(|&(lr, seeds)| run_cell(cfg, &data, &prepared, lr, seeds))
        .collect();

    let rows: Vec<SweepRow> = cells
        .iter()
        .flat_map(|c| {
            c.decisions.iter().map(move |(d, metric)| SweepRow {
                learning_rate: c.learning_rate,
                seed1: c.seeds.0,
                seed2: c.seeds.1,
                method: d.method.clone(),
                stop_epoch: d.epoch,
                test_metric: *metric,
                criterion_value: d.criterion_value,
                status: d.status.as_str().to_string(),
            })
        })
        .collect();
    let failures: Vec<Failure> = cells.iter().flat_map(|c| c.failures.iter().cloned()).collect();
    let table = if rows.is_empty() { None } else { Some(aggregate(&rows)?) };

    let summary = RunSummary {
        output_dir: cfg.output_dir.clone(),
        cells,
        rows,
        failures,
        table,
    };
    write_artifacts(&summary)?;
    Ok(summary)
}

pub fn load_task(cfg: &ExperimentConfig) -> Result<TaskData> {
    match &cfg.task {
        Task::ImageClassification {
            source,
            train_samples,
            test_samples,
            preprocess,
            classes,
        } => {
            let (mut train, mut test) = match source {
                ImageSource::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                } => (load_idx(train_images, train_labels)?, load_idx(test_images, test_labels)?),
                ImageSource::Cifar10 { train, test } => (load_cifar10(train)?, load_cifar10(test)?),
            };
            if let Some(n) = train_samples {
                train = train.head(*n)?;
            }
            if let Some(n) = test_samples {
                test = test.head(*n)?;
            }
            match preprocess {
                Preprocess::None => {}
                Preprocess::UnitNorm => {
                    train = normalize_rows(&train);
                    test = normalize_rows(&test);
                }
                Preprocess::Standardize => {
                    let s = Standardizer::fit(&train);
                    train = s.apply(&train)?;
                    test = s.apply(&test)?;
                }
            }
            let train = with_noise(train, cfg, *classes)?;
            Ok(TaskData {
                train,
                test,
                outputs: *classes,
                metric: EvalMetric::Accuracy,
            })
        }
        Task::Synthetic {
            n_train,
            n_test,
            dim,
            classes,
            separation,
            input_scale,
            seed,
        } => {
            let (train, test) = make_synthetic_with(&SyntheticSpec {
                n_train: *n_train,
                n_test: *n_test,
                dim: *dim,
                classes: *classes,
                separation: *separation,
                noise_fraction: cfg.noise_fraction,
                input_scale: *input_scale,
                seed: *seed,
            })?;
            Ok(TaskData {
                train,
                test,
                outputs: *classes,
                metric: EvalMetric::Accuracy,
            })
        }
        Task::LearnToRank {
            source,
            train_queries,
            query_seed,
        } => {
            let (mut train, test) = match source {
                RankingSource::Svmlight { train, test } => {
                    let d = load_svmlight_qid_with_dim(train, None)?
                        .dim()
                        .max(load_svmlight_qid_with_dim(test, None)?.dim());
                    (
                        load_svmlight_qid_with_dim(train, Some(d))?,
                        load_svmlight_qid_with_dim(test, Some(d))?,
                    )
                }
                RankingSource::Synthetic(spec) => make_synthetic_ranking(spec)?,
            };
            if let Some(q) = train_queries {
                train = sample_queries(&train, *q, *query_seed)?;
            }
            let grades = train.labels().iter().fold(0.0f64, |m, &g| m.max(g)) as usize + 1;
            let train = with_noise(train, cfg, grades)?;
            Ok(TaskData {
                train,
                test,
                outputs: 1,
                metric: EvalMetric::NdcgAt10,
            })
        }
    }
}

fn with_noise(ds: Dataset, cfg: &ExperimentConfig, classes: usize) -> Result<Dataset> {
    if cfg.noise_fraction == 0.0 {
        return Ok(ds);
    }
    let noisy = inject_label_noise(
        ds.labels(),
        &NoiseSpec {
            fraction: cfg.noise_fraction,
            num_classes: classes,
            seed: cfg.noise_seed,
        },
    )?;
    Ok(ds.with_labels(noisy)?)
}

fn twin_config(cfg: &ExperimentConfig, data: &TaskData, lr: f64, seeds: (u64, u64)) -> Result<TwinConfig> {
    let wants_stats = cfg.stopping.iter().any(StopRule::needs_grad_stats);
    let pairs = cfg
        .stopping
        .iter()
        .find_map(|r| match r {
            StopRule::Gd { pairs, .. } => Some(*pairs),
            _ => None,
        })
        .unwrap_or(5);
    Ok(TwinConfig {
        model_kind: cfg.model.kind,
        width: cfg.model.width()?,
        outputs: data.outputs,
        seeds,
        featurizer_seed: cfg.featurizer_seed,
        sgd: SgdConfig {
            learning_rate: lr,
            batch_size: cfg.batch_size,
            max_epochs: cfg.max_epochs,
            shuffle_seed: cfg.shuffle_seed,
        },
        loss: cfg.loss(),
        eval_metric: data.metric,
        counterfactual_every: cfg.counterfactual_every,
        rcond: cfg.rcond,
        disparity_pairs: pairs,
        stats: if wants_stats {
            cfg.grad_stats.unwrap_or_default()
        } else {
            StatsPolicy::none()
        },
        keep_grad_stats: false,
        track_min_norm: cfg.track_min_norm,
    })
}

fn run_cell(cfg: &ExperimentConfig, data: &TaskData, prepared: &Prepared, lr: f64, seeds: (u64, u64)) -> CellOutcome {
    let fail = |method: Option<String>, reason: String| Failure {
        learning_rate: lr,
        seed1: seeds.0,
        seed2: seeds.1,
        method,
        reason,
    };
    let mut out = CellOutcome {
        learning_rate: lr,
        seeds,
        trace: None,
        decisions: Vec::new(),
        failures: Vec::new(),
    };
    let twin = match twin_config(cfg, data, lr, seeds) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(fail(None, e.to_string()));
            return out;
        }
    };
    let trace = match train_twins_prepared(&twin, prepared) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(fail(None, e.to_string()));
            return out;
        }
    };
    let metric = trace.eval_metric();
    let use_cf = twin.model_kind == ModelKind::TwoLayer;
    for rule in &cfg.stopping {
        let label = rule.label();
        let decision = match rule {
            StopRule::CdcThreshold { theta, .. } => cdc_stop(&trace, &CornerConfig::threshold(*theta), use_cf),
            StopRule::CdcCurvature { delta, sigma, .. } => {
                cdc_stop(&trace, &CornerConfig::curvature(delta.unwrap_or(lr), *sigma), use_cf)
            }
            StopRule::Cv { folds, patience, .. } => {
                cv_run(&twin, &data.train, *folds, *patience).map(|o| o.decision)
            }
            StopRule::Eb { .. } => eb_stop_series(&trace.evidence()),
            StopRule::Gd { patience, .. } => {
                trace_disparity(&trace).and_then(|d| gd_stop_series(&d, *patience))
            }
            StopRule::Oracle { budget, .. } => oracle_stop(&trace, *budget),
        };
        match decision {
            Ok(mut d) => {
                d.method = label;
                let m = metric[d.epoch - 1];
                out.decisions.push((d, m));
            }
            Err(e) => out.failures.push(fail(Some(label), e.to_string())),
        }
    }
    out.trace = Some(trace);
    out
}

pub fn cell_name(lr: f64, seeds: (u64, u64)) -> String {
    format!("lr{lr}_seeds{}-{}", seeds.0, seeds.1)
}

fn write_artifacts(s: &RunSummary) -> Result<()> {
    let traces = s.output_dir.join("traces");
    let decisions = s.output_dir.join("decisions");
    fs::create_dir_all(&traces)?;
    fs::create_dir_all(&decisions)?;
    for c in &s.cells {
        let name = cell_name(c.learning_rate, c.seeds);
        if let Some(t) = &c.trace {
            let mut buf = Vec::new();
            t.write_csv(&mut buf)?;
            fs::write(traces.join(format!("{name}.csv")), buf)?;
        }
        let ds: Vec<&StopDecision> = c.decisions.iter().map(|(d, _)| d).collect();
        fs::write(
            decisions.join(format!("{name}.json")),
            serde_json::to_string_pretty(&ds)? + "\n",
        )?;
    }
    write_sweep_csv(&s.rows, fs::File::create(s.output_dir.join("sweep.csv"))?)?;
    if let Some(t) = &s.table {
        fs::write(s.output_dir.join("aggregate.md"), t.to_markdown())?;
    }
    fs::write(
        s.output_dir.join("failures.json"),
        serde_json::to_string_pretty(&s.failures)? + "\n",
    )?;
    Ok(())
}
