// SPDX-License-Identifier: Apache-2.0

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::report::{PredictionRow, TargetMetrics};
use super::{ConfusionCounts, EvalError};
use crate::features::{DatasetClass, DatasetRow};
use crate::ml::{train, Hyperparameters, MlError, ModelKind, ModelSpec, Target, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellStatus {
    Scored,
    /// Training labels are single-class or the test set has no positives.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Absent when no model could be trained.
    pub confusion: Option<ConfusionCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub kind: ModelKind,
    pub target: Target,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub train_positives: u64,
    pub test_positives: u64,
    pub per_seed: Vec<SeedResult>,
    /// Summed over seeds; only present for scored cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<TargetMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRanking {
    pub rank: usize,
    pub kind: ModelKind,
    /// F1 over the IR and EM confusion counts of scored cells, summed.
    pub pooled_f1: Option<f64>,
    pub prediction_accuracy: Option<f64>,
    pub false_positive_fraction: Option<f64>,
    pub scored_targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub window_class: DatasetClass,
    pub train_rows: usize,
    pub test_rows: usize,
    pub cells: Vec<CellReport>,
    pub ranking: Vec<KindRanking>,
}

impl ClassComparison {
    pub fn best(&self) -> Option<ModelKind> {
        self.ranking.first().filter(|r| r.pooled_f1.is_some()).map(|r| r.kind)
    }
}

/// Whether the commonly reported ordering held on this run. `None` means
/// the relevant cells were not all scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedOrdering {
    pub knn_best_on_continuous: Option<bool>,
    pub mlp_at_least_forest_on_discontinuous: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seeds: Vec<u64>,
    pub classes: Vec<ClassComparison>,
    pub expected_ordering: ExpectedOrdering,
}

impl ComparisonReport {
    pub fn class(&self, c: DatasetClass) -> Option<&ClassComparison> {
        self.classes.iter().find(|x| x.window_class == c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}

/// Train and test rows of one window class.
#[derive(Debug, Clone, Copy)]
pub struct ClassSplit<'a> {
    pub window_class: DatasetClass,
    pub train: &'a [DatasetRow],
    pub test: &'a [DatasetRow],
}

/// Predictions of `model` for every row.
pub fn predict_rows(model: &TrainedModel, rows: &[DatasetRow]) -> Result<Vec<PredictionRow>, MlError> {
    rows.iter()
        .map(|r| {
            let p = model.predict(&r.features)?;
            Ok(PredictionRow {
                design_id: r.design_id.clone(),
                window: r.window,
                class: r.class,
                target: model.spec.target,
                kind: model.spec.kind,
                label: p.label,
                score: p.score,
            })
        })
        .collect()
}

/// The same label for every row; stands in for a model whose training set
/// held one class only.
pub fn constant_rows(rows: &[DatasetRow], target: Target, kind: ModelKind, label: u8) -> Vec<PredictionRow> {
    rows.iter()
        .map(|r| PredictionRow {
            design_id: r.design_id.clone(),
            window: r.window,
            class: r.class,
            target,
            kind,
            label,
            score: label as f64,
        })
        .collect()
}

fn tally(test: &[DatasetRow], preds: &[PredictionRow], target: Target) -> ConfusionCounts {
    ConfusionCounts::tally(test.iter().zip(preds).map(|(r, p)| (target.label(r), p.label)))
}

struct Job {
    class: usize,
    spec: ModelSpec,
}

/// Trained model (or `None` for a single-class training set) and its test
/// counts, in job order.
type JobResult = Result<(Option<TrainedModel>, Option<ConfusionCounts>), EvalError>;

fn run_jobs(jobs: &[Job], splits: &[ClassSplit]) -> Vec<JobResult> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<JobResult>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let split = &splits[job.class];
                let out = match train(&job.spec, split.train) {
                    Ok(m) => predict_rows(&m, split.test)
                        .map(|p| {
                            let c = tally(split.test, &p, job.spec.target);
                            (Some(m), Some(c))
                        })
                        .map_err(EvalError::from),
                    Err(MlError::SingleClassDataset { .. }) => Ok((None, None)),
                    Err(e) => Err(e.into()),
                };
                results.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    results.into_inner().expect("no poisoned workers").into_iter().map(|r| r.expect("every job ran")).collect()
}

fn positives(rows: &[DatasetRow], target: Target) -> u64 {
    rows.iter().filter(|r| target.label(r) == 1).count() as u64
}

/// Trains every menu kind for both targets and every seed on each class's
/// training rows, scores them on its test rows and ranks kinds per class.
/// Also hands back the trained models (`None` where training was
/// single-class) in class, kind, target, seed order.
pub fn compare_models_with_models(
    splits: &[ClassSplit],
    menu: &[Hyperparameters],
    seeds: &[u64],
) -> Result<(ComparisonReport, Vec<(ModelSpec, Option<TrainedModel>)>), EvalError> {
    let mut jobs = Vec::new();
    for (ci, split) in splits.iter().enumerate() {
        for h in menu {
            for target in Target::ALL {
                for &seed in seeds {
                    let mut spec = ModelSpec::new(h.kind(), target, split.window_class, seed);
                    spec.hyperparameters = h.clone();
                    jobs.push(Job { class: ci, spec });
                }
            }
        }
    }
    let mut results = run_jobs(&jobs, splits).into_iter();
    let mut models = Vec::with_capacity(jobs.len());
    let mut jobs_iter = jobs.iter();
    let mut classes = Vec::new();
    for split in splits {
        let mut cells = Vec::new();
        let mut ranking = Vec::new();
        for h in menu {
            let mut pooled = ConfusionCounts::default();
            let mut scored_targets = Vec::new();
            for target in Target::ALL {
                let mut per_seed = Vec::new();
                for &seed in seeds {
                    let job = jobs_iter.next().expect("job per cell");
                    let (model, confusion) = results.next().expect("result per job")?;
                    models.push((job.spec.clone(), model));
                    per_seed.push(SeedResult { seed, confusion });
                }
                let (train_positives, test_positives) = (positives(split.train, target), positives(split.test, target));
                let untrained = per_seed.iter().any(|s| s.confusion.is_none());
                let reason = if untrained {
                    Some("training labels are single-class".to_string())
                } else if test_positives == 0 {
                    Some("no positives in the test set".to_string())
                } else {
                    None
                };
                let metrics = reason.is_none().then(|| {
                    TargetMetrics::new(per_seed.iter().filter_map(|s| s.confusion).sum())
                });
                if let Some(m) = &metrics {
                    pooled = pooled + m.confusion;
                    scored_targets.push(target);
                }
                cells.push(CellReport {
                    kind: h.kind(),
                    target,
                    status: if reason.is_none() { CellStatus::Scored } else { CellStatus::Degenerate },
                    reason,
                    train_positives,
                    test_positives,
                    per_seed,
                    metrics,
                });
            }
            let scored = !scored_targets.is_empty();
            let signoff = pooled.actual_positive();
            ranking.push(KindRanking {
                rank: 0,
                kind: h.kind(),
                pooled_f1: if scored { pooled.f1() } else { None },
                prediction_accuracy: (scored && signoff > 0).then(|| pooled.tp as f64 / signoff as f64),
                false_positive_fraction: if scored { pooled.precision().map(|p| 1.0 - p) } else { None },
                scored_targets,
            });
        }
        // stable sort keeps menu order among equal scores
        ranking.sort_by(|a, b| b.pooled_f1.unwrap_or(-1.0).total_cmp(&a.pooled_f1.unwrap_or(-1.0)));
        for (i, r) in ranking.iter_mut().enumerate() {
            r.rank = i + 1;
        }
        classes.push(ClassComparison {
            window_class: split.window_class,
            train_rows: split.train.len(),
            test_rows: split.test.len(),
            cells,
            ranking,
        });
    }
    let f1_of = |c: &ClassComparison, k: ModelKind| c.ranking.iter().find(|r| r.kind == k).and_then(|r| r.pooled_f1);
    let cont = classes.iter().find(|c| c.window_class == DatasetClass::Continuous);
    let disc = classes.iter().find(|c| c.window_class == DatasetClass::Discontinuous);
    let expected_ordering = ExpectedOrdering {
        knn_best_on_continuous: cont.and_then(|c| {
            let all: Option<Vec<f64>> = c.ranking.iter().map(|r| r.pooled_f1).collect();
            let knn = f1_of(c, ModelKind::Knn)?;
            all.map(|v| v.iter().all(|&x| knn >= x))
        }),
        mlp_at_least_forest_on_discontinuous: disc
            .and_then(|c| Some(f1_of(c, ModelKind::Mlp)? >= f1_of(c, ModelKind::Forest)?)),
    };
    Ok((ComparisonReport { seeds: seeds.to_vec(), classes, expected_ordering }, models))
}

pub fn compare_models(
    splits: &[ClassSplit],
    menu: &[Hyperparameters],
    seeds: &[u64],
) -> Result<ComparisonReport, EvalError> {
    compare_models_with_models(splits, menu, seeds).map(|(r, _)| r)
}
