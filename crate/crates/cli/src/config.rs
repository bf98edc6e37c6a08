use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use cdc_core::data::RankingSpec;
use cdc_core::models::StatsPolicy;
use cdc_core::objectives::LossKind;
use cdc_core::twin::ModelKind;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One experiment: a task, a model, a learning-rate × seed-pair grid and the
/// stopping rules to compare on every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub task: Task,
    /// Fraction of training labels replaced by uniform draws.
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub noise_seed: u64,
    pub model: ModelSpec,
    /// Defaults to cross-entropy for classification and ListNet for ranking.
    #[serde(default)]
    pub loss: Option<LossKind>,
    pub learning_rates: Vec<f64>,
    pub seeds: Vec<(u64, u64)>,
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default)]
    pub shuffle_seed: u64,
    #[serde(default)]
    pub featurizer_seed: u64,
    #[serde(default = "default_cf_every")]
    pub counterfactual_every: usize,
    #[serde(default)]
    pub rcond: Option<f64>,
    /// Gradient statistics kept for the EB and GD rules.
    #[serde(default)]
    pub grad_stats: Option<StatsPolicy>,
    /// Record instance 1's distance to the minimum-norm solution.
    #[serde(default)]
    pub track_min_norm: bool,
    pub stopping: Vec<StopRule>,
    pub output_dir: PathBuf,
}

fn default_cf_every() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    ImageClassification {
        source: ImageSource,
        /// Keep only the first `train_samples` training images.
        #[serde(default)]
        train_samples: Option<usize>,
        #[serde(default)]
        test_samples: Option<usize>,
        #[serde(default)]
        preprocess: Preprocess,
        #[serde(default = "default_classes")]
        classes: usize,
    },
    LearnToRank {
        source: RankingSource,
        /// Subsample this many training queries.
        #[serde(default)]
        train_queries: Option<usize>,
        #[serde(default)]
        query_seed: u64,
    },
    Synthetic {
        n_train: usize,
        n_test: usize,
        dim: usize,
        classes: usize,
        #[serde(default = "one")]
        separation: f64,
        #[serde(default = "one")]
        input_scale: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_classes() -> usize {
    10
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageSource {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    Cifar10 {
        train: Vec<PathBuf>,
        test: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RankingSource {
    Svmlight { train: PathBuf, test: PathBuf },
    Synthetic(RankingSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preprocess {
    #[default]
    None,
    /// Scale each input row to unit Euclidean norm.
    UnitNorm,
    /// Per-feature standardization fitted on the training split.
    Standardize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizePreset {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Standard width: featurizations of 9k/25k/50k for linear models,
    /// hidden widths 150/350/700 for two-layer nets.
    #[serde(default)]
    pub size: Option<SizePreset>,
    /// Explicit width instead of a preset.
    #[serde(default)]
    pub width: Option<usize>,
}

impl ModelSpec {
    pub fn width(&self) -> Result<usize> {
        match (self.size, self.width) {
            (Some(s), None) => Ok(preset_width(self.kind, s)),
            (None, Some(w)) if w > 0 => Ok(w),
            (None, Some(_)) => Err(CliError::Config("model width must be positive".into())),
            _ => Err(CliError::Config(
                "model needs exactly one of `size` and `width`".into(),
            )),
        }
    }
}

pub fn preset_width(kind: ModelKind, size: SizePreset) -> usize {
    match (kind, size) {
        (ModelKind::Linear, SizePreset::Small) => 9_000,
        (ModelKind::Linear, SizePreset::Medium) => 25_000,
        (ModelKind::Linear, SizePreset::Large) => 50_000,
        (ModelKind::TwoLayer, SizePreset::Small) => 150,
        (ModelKind::TwoLayer, SizePreset::Medium) => 350,
        (ModelKind::TwoLayer, SizePreset::Large) => 700,
    }
}

/// A stopping rule and its parameters. `label` names the rule in outputs
/// and defaults to the method name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopRule {
    CdcThreshold {
        #[serde(default = "default_theta")]
        theta: f64,
        #[serde(default)]
        label: Option<String>,
    },
    CdcCurvature {
        /// Defaults to the learning rate of the cell.
        #[serde(default)]
        delta: Option<f64>,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default)]
        label: Option<String>,
    },
    Cv {
        #[serde(default = "five")]
        folds: usize,
        #[serde(default = "five")]
        patience: usize,
        #[serde(default)]
        label: Option<String>,
    },
    Eb {
        #[serde(default)]
        label: Option<String>,
    },
    Gd {
        #[serde(default = "five")]
        pairs: usize,
        #[serde(default = "five")]
        patience: usize,
        #[serde(default)]
        label: Option<String>,
    },
    Oracle {
        #[serde(default = "default_budget")]
        budget: usize,
        #[serde(default)]
        label: Option<String>,
    },
}

fn default_theta() -> f64 {
    0.2
}

fn default_sigma() -> f64 {
    5.0
}

fn five() -> usize {
    5
}

fn default_budget() -> usize {
    500
}

impl StopRule {
    pub fn method(&self) -> &'static str {
        match self {
            StopRule::CdcThreshold { .. } => "cdc_threshold",
            StopRule::CdcCurvature { .. } => "cdc_curvature",
            StopRule::Cv { .. } => "cv",
            StopRule::Eb { .. } => "eb",
            StopRule::Gd { .. } => "gd",
            StopRule::Oracle { .. } => "oracle",
        }
    }

    pub fn label(&self) -> String {
        let custom = match self {
            StopRule::CdcThreshold { label, .. }
            | StopRule::CdcCurvature { label, .. }
            | StopRule::Cv { label, .. }
            | StopRule::Eb { label }
            | StopRule::Gd { label, .. }
            | StopRule::Oracle { label, .. } => label,
        };
        custom.clone().unwrap_or_else(|| self.method().to_string())
    }

    pub fn needs_grad_stats(&self) -> bool {
        matches!(self, StopRule::Eb { .. } | StopRule::Gd { .. })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Reads a config and resolves its relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        match &mut self.task {
            Task::ImageClassification { source, .. } => match source {
                ImageSource::Idx {
                    train_images,
                    train_labels,
                    test_images,
                    test_labels,
                } => {
                    for p in [train_images, train_labels, test_images, test_labels] {
                        fix(p);
                    }
                }
                ImageSource::Cifar10 { train, test } => train.iter_mut().chain(test.iter_mut()).for_each(fix),
            },
            Task::LearnToRank { source: RankingSource::Svmlight { train, test }, .. } => {
                fix(train);
                fix(test);
            }
            _ => {}
        }
    }

    pub fn is_ranking(&self) -> bool {
        matches!(self.task, Task::LearnToRank { .. })
    }

    pub fn loss(&self) -> LossKind {
        self.loss.unwrap_or(if self.is_ranking() {
            LossKind::ListNet
        } else {
            LossKind::CrossEntropy
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.learning_rates.is_empty() {
            return bad("learning_rates is empty".into());
        }
        if let Some(lr) = self.learning_rates.iter().find(|lr| !(lr.is_finite() && **lr > 0.0)) {
            return bad(format!("learning rate {lr} is not positive"));
        }
        if self.seeds.is_empty() {
            return bad("seeds is empty".into());
        }
        if let Some((a, _)) = self.seeds.iter().find(|(a, b)| a == b) {
            return bad(format!("seed pair ({a}, {a}) has equal seeds"));
        }
        if self.stopping.is_empty() {
            return bad("stopping is empty".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction {} is outside [0, 1]", self.noise_fraction));
        }
        if self.counterfactual_every == 0 {
            return bad("counterfactual_every must be at least 1".into());
        }
        self.model.width()?;
        let mut seen = HashSet::new();
        for rule in &self.stopping {
            let label = rule.label();
            if !seen.insert(label.clone()) {
                return bad(format!("stopping label {label:?} is used twice"));
            }
            match rule {
                StopRule::CdcThreshold { theta, .. } if !(*theta > 0.0 && theta.is_finite()) => {
                    return bad(format!("{label}: theta must be positive"));
                }
                StopRule::CdcCurvature { delta, sigma, .. }
                    if delta.is_some_and(|d| !(d > 0.0 && d.is_finite())) || !(*sigma >= 0.0) =>
                {
                    return bad(format!("{label}: delta must be positive and sigma non-negative"));
                }
                StopRule::Cv { folds, patience, .. } if *folds < 2 || *patience == 0 => {
                    return bad(format!("{label}: needs folds >= 2 and patience >= 1"));
                }
                StopRule::Gd { pairs, patience, .. } if *pairs == 0 || *patience == 0 => {
                    return bad(format!("{label}: needs pairs >= 1 and patience >= 1"));
                }
                StopRule::Oracle { budget: 0, .. } => {
                    return bad(format!("{label}: budget must be at least 1"));
                }
                _ => {}
            }
        }
        let loss = self.loss();
        match (&self.task, loss) {
            (Task::LearnToRank { .. }, LossKind::CrossEntropy) => {
                bad("ranking tasks cannot use cross-entropy".into())
            }
            (Task::LearnToRank { .. }, _) => Ok(()),
            (_, LossKind::ListNet) => bad("ListNet needs a ranking task".into()),
            (Task::Synthetic { dim: 0, .. }, _) | (Task::Synthetic { classes: 0, .. }, _) => {
                bad("synthetic task needs dim and classes >= 1".into())
            }
            _ => Ok(()),
        }
    }
}
