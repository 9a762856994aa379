// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ConfusionCounts, EvalError};
use crate::features::{DatasetClass, DatasetRow, WindowClass, WindowId};
use crate::ml::{ModelKind, Target};

pub const ACCURACY_FOOTER: &str = "Prediction accuracy = (flagged IR + flagged EM - false positives) / \
(sign-off IR + sign-off EM); false positives pool both targets. Precision, recall and F1 are per target.";

/// One classifier decision for one window and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRow {
    pub design_id: String,
    pub window: WindowId,
    pub class: WindowClass,
    pub target: Target,
    pub kind: ModelKind,
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMetrics {
    pub confusion: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl TargetMetrics {
    pub fn new(confusion: ConfusionCounts) -> Self {
        TargetMetrics {
            confusion,
            precision: confusion.precision(),
            recall: confusion.recall(),
            f1: confusion.f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub window_class: DatasetClass,
    /// Model kind behind each target's predictions, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<(Target, ModelKind)>,
    pub windows: u64,
    pub signoff_ir: u64,
    pub signoff_em: u64,
    pub flagged_ir: u64,
    pub flagged_em: u64,
    pub false_positives: u64,
    /// Null when sign-off reports no violations.
    pub prediction_accuracy: Option<f64>,
    pub prediction_accuracy_text: Option<String>,
    /// False positives over flagged windows, null when nothing is flagged.
    pub false_positive_fraction: Option<f64>,
    pub ir: TargetMetrics,
    pub em: TargetMetrics,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Two-decimal percentage of `num / den`, half-up, or None for `den = 0`.
pub fn format_percent(num: u64, den: u64) -> Option<String> {
    if den == 0 {
        return None;
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (20_000 * num + den) / (2 * den);
    Some(format!("{}.{:02}%", hundredths / 100, hundredths % 100))
}

impl ClassReport {
    pub fn from_counts(window_class: DatasetClass, windows: u64, ir: ConfusionCounts, em: ConfusionCounts) -> Self {
        let signoff = ir.actual_positive() + em.actual_positive();
        let flagged = ir.flagged() + em.flagged();
        let fp = ir.fp + em.fp;
        let correct = flagged - fp;
        ClassReport {
            window_class,
            models: Vec::new(),
            windows,
            signoff_ir: ir.actual_positive(),
            signoff_em: em.actual_positive(),
            flagged_ir: ir.flagged(),
            flagged_em: em.flagged(),
            false_positives: fp,
            prediction_accuracy: (signoff > 0).then(|| correct as f64 / signoff as f64),
            prediction_accuracy_text: format_percent(correct, signoff),
            false_positive_fraction: (flagged > 0).then(|| fp as f64 / flagged as f64),
            ir: TargetMetrics::new(ir),
            em: TargetMetrics::new(em),
            notes: Vec::new(),
        }
    }

    /// Confusion counts with IR and EM added together.
    pub fn pooled(&self) -> ConfusionCounts {
        self.ir.confusion + self.em.confusion
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Report {
    pub classes: Vec<ClassReport>,
    pub footer: String,
}

impl Table1Report {
    pub fn new(classes: Vec<ClassReport>) -> Self {
        Table1Report { classes, footer: ACCURACY_FOOTER.to_string() }
    }

    pub fn class(&self, c: DatasetClass) -> Option<&ClassReport> {
        self.classes.iter().find(|r| r.window_class == c)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Scores `predictions` against the labelled rows of one window class.
/// Every row needs exactly one prediction per target.
pub fn evaluate(
    predictions: &[PredictionRow],
    rows: &[DatasetRow],
    window_class: DatasetClass,
) -> Result<ClassReport, EvalError> {
    let mut index: HashMap<(&str, WindowId), usize> = HashMap::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        if r.dataset_class() != window_class {
            return Err(EvalError::Alignment(format!(
                "dataset row {i} is a {} window in a {window_class} dataset",
                r.dataset_class()
            )));
        }
        if index.insert((r.design_id.as_str(), r.window), i).is_some() {
            return Err(EvalError::Alignment(format!("window {} of {} appears twice in the dataset", r.window, r.design_id)));
        }
    }
    let mut counts = [ConfusionCounts::default(); 2];
    let mut models = Vec::new();
    for (t, target) in Target::ALL.into_iter().enumerate() {
        let mut seen = vec![false; rows.len()];
        let mut kind = None;
        for p in predictions.iter().filter(|p| p.target == target) {
            let &i = index.get(&(p.design_id.as_str(), p.window)).ok_or_else(|| {
                EvalError::Alignment(format!("{target} prediction for window {} of {} has no dataset row", p.window, p.design_id))
            })?;
            if p.class != rows[i].class {
                return Err(EvalError::Alignment(format!(
                    "window {} is {:?} in the dataset but {:?} in the predictions",
                    p.window, rows[i].class, p.class
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(EvalError::Alignment(format!("two {target} predictions for window {} of {}", p.window, p.design_id)));
            }
            if p.label > 1 {
                return Err(EvalError::Alignment(format!("label {} is not 0 or 1", p.label)));
            }
            kind.get_or_insert(p.kind);
            counts[t].record(target.label(&rows[i]), p.label);
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(EvalError::Alignment(format!(
                "no {target} prediction for window {} of {}",
                rows[i].window, rows[i].design_id
            )));
        }
        if let Some(k) = kind {
            models.push((target, k));
        }
    }
    let mut report = ClassReport::from_counts(window_class, rows.len() as u64, counts[0], counts[1]);
    report.models = models;
    Ok(report)
}

fn cell(v: Option<u64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |n| n.to_string())
}

/// Plain-text table laid out like the sign-off comparison table, one pair
/// of columns per window class, followed by per-target metrics.
pub fn render_text(report: &Table1Report, color: bool) -> String {
    let (bold, reset) = if color { ("\x1b[1m", "\x1b[0m") } else { ("", "") };
    let label_w = 22;
    let col_w = 12;
    let mut out = String::new();
    let mut line = |label: &str, cols: Vec<String>| {
        let mut s = format!("{label:<label_w$}");
        for c in cols {
            s.push_str(&format!("{c:<col_w$}"));
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    let classes = &report.classes;
    let pair_w = 2 * col_w;
    line("", classes.iter().map(|c| format!("{:<pair_w$}", format!("{} window", c.window_class))).collect());
    line("", classes.iter().flat_map(|_| ["sign-off".to_string(), "Fast check".to_string()]).collect());
    line("# Analysis windows", classes.iter().flat_map(|c| [c.windows.to_string(), c.windows.to_string()]).collect());
    line("# IR violations", classes.iter().flat_map(|c| [c.signoff_ir.to_string(), c.flagged_ir.to_string()]).collect());
    line("# EM violations", classes.iter().flat_map(|c| [c.signoff_em.to_string(), c.flagged_em.to_string()]).collect());
    line("# False positive", classes.iter().flat_map(|c| [cell(None), cell(Some(c.false_positives))]).collect());
    line(
        "Prediction accuracy",
        classes
            .iter()
            .flat_map(|c| [cell(None), c.prediction_accuracy_text.clone().unwrap_or_else(|| "N/A".into())])
            .collect(),
    );
    if color {
        let header_end = out.find('\n').unwrap_or(out.len());
        out.insert_str(header_end, reset);
        out.insert_str(0, bold);
    }
    out.push('\n');
    let f = |v: Option<f64>| v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.4}"));
    for c in classes {
        out.push_str(&format!("{bold}{} window{reset}", c.window_class));
        if !c.models.is_empty() {
            let m: Vec<String> = c.models.iter().map(|(t, k)| format!("{t}={k}")).collect();
            out.push_str(&format!(" ({})", m.join(", ")));
        }
        out.push('\n');
        for (t, m) in [("IR", &c.ir), ("EM", &c.em)] {
            let k = m.confusion;
            out.push_str(&format!(
                "  {t}  tp {} fp {} fn {} tn {}  precision {} recall {} f1 {}\n",
                k.tp,
                k.fp,
                k.fn_,
                k.tn,
                f(m.precision),
                f(m.recall),
                f(m.f1)
            ));
        }
        for n in &c.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
    }
    out.push('\n');
    out.push_str(&report.footer);
    out.push('\n');
    out
}
