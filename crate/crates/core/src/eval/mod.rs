// SPDX-License-Identifier: Apache-2.0

//! Dataset splitting, confusion metrics, sign-off comparison reports and
//! the three-model comparison harness.

mod compare;
mod report;
mod split;

pub use compare::{
    compare_models, compare_models_with_models, constant_rows, predict_rows, CellReport, CellStatus, ClassComparison,
    ClassSplit, ComparisonReport, ExpectedOrdering, KindRanking, SeedResult,
};
pub use report::{
    evaluate, format_percent, render_text, ClassReport, PredictionRow, Table1Report, TargetMetrics, ACCURACY_FOOTER,
};
pub use split::{split_dataset, split_indices, split_sizes};

use serde::{Deserialize, Serialize};

use crate::ml::MlError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("EMPTY_DATASET: need at least 2 rows to split, got {0}")]
    EmptyDataset(usize),
    #[error("INVALID_FRACTION: test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("ALIGNMENT_ERROR: {0}")]
    Alignment(String),
    #[error(transparent)]
    Ml(#[from] MlError),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::EmptyDataset(_) => "EMPTY_DATASET",
            EvalError::InvalidFraction(_) => "INVALID_FRACTION",
            EvalError::Alignment(_) => "ALIGNMENT_ERROR",
            EvalError::Ml(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn tally(labels: impl IntoIterator<Item = (u8, u8)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (truth, pred) in labels {
            c.record(truth, pred);
        }
        c
    }

    pub fn record(&mut self, truth: u8, pred: u8) {
        match (truth == 1, pred == 1) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Rows the sign-off oracle marks as violating.
    pub fn actual_positive(&self) -> u64 {
        self.tp + self.fn_
    }

    /// Rows the classifier flags.
    pub fn flagged(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.flagged())
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.actual_positive())
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, fn_: self.fn_ + o.fn_, tn: self.tn + o.tn }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}
