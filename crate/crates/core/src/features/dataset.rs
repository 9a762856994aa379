// SPDX-License-Identifier: Apache-2.0

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::extract::{extract_features, FeatureLayout, GridMeta};
use super::window::{tile_windows, window_of_point, AnalysisWindow, WindowClass, WindowId};
use super::FeatureError;
use crate::design::{design_id, Design};
use crate::solver::ViolationSet;

pub const FEATURE_LAYOUT_VERSION: u32 = 1;
const DATASET_FORMAT: &str = "fastpi-dataset";

/// Which model family a window belongs to; boundary and corner windows are
/// pooled into one discontinuous set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetClass {
    Continuous,
    Discontinuous,
}

impl DatasetClass {
    pub const ALL: [DatasetClass; 2] = [DatasetClass::Continuous, DatasetClass::Discontinuous];

    pub fn of(class: WindowClass) -> Self {
        if class.is_continuous() {
            DatasetClass::Continuous
        } else {
            DatasetClass::Discontinuous
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetClass::Continuous => "continuous",
            DatasetClass::Discontinuous => "discontinuous",
        }
    }
}

impl fmt::Display for DatasetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "continuous" => Ok(DatasetClass::Continuous),
            "discontinuous" => Ok(DatasetClass::Discontinuous),
            other => Err(format!("unknown window class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub design_id: String,
    pub window: WindowId,
    pub class: WindowClass,
    pub features: Vec<f64>,
    pub label_ir: u8,
    pub label_em: u8,
}

impl DatasetRow {
    pub fn dataset_class(&self) -> DatasetClass {
        DatasetClass::of(self.class)
    }

    /// Hotspot for either target.
    pub fn any_positive(&self) -> bool {
        self.label_ir == 1 || self.label_em == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub feature_layout_version: u32,
    pub layers: usize,
    pub cover_window: f64,
    pub unit_inverter_width: f64,
    pub row_height: f64,
    pub window_class: DatasetClass,
    pub feature_length: usize,
}

impl DatasetHeader {
    pub fn new(design: &Design, class: DatasetClass) -> Self {
        let layout = FeatureLayout::of(design);
        DatasetHeader {
            format: DATASET_FORMAT.to_string(),
            feature_layout_version: FEATURE_LAYOUT_VERSION,
            layers: layout.layers,
            cover_window: design.config.cover_window,
            unit_inverter_width: design.config.unit_inverter_width,
            row_height: design.config.row_height,
            window_class: class,
            feature_length: layout.len(class == DatasetClass::Continuous),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: DatasetHeader,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Datasets {
    pub continuous: Vec<DatasetRow>,
    pub discontinuous: Vec<DatasetRow>,
    pub continuous_header: DatasetHeader,
    pub discontinuous_header: DatasetHeader,
}

impl Datasets {
    pub fn get(&self, class: DatasetClass) -> (&DatasetHeader, &[DatasetRow]) {
        match class {
            DatasetClass::Continuous => (&self.continuous_header, &self.continuous),
            DatasetClass::Discontinuous => (&self.discontinuous_header, &self.discontinuous),
        }
    }
}

fn hot_windows(design: &Design, violations: &ViolationSet) -> (HashSet<WindowId>, HashSet<WindowId>) {
    let centres: std::collections::HashMap<&str, (f64, f64)> =
        design.cells.iter().map(|c| (c.id.as_str(), c.center())).collect();
    let ir = violations
        .ir
        .iter()
        .filter_map(|v| centres.get(v.cell.as_str()))
        .filter_map(|&(x, y)| window_of_point(design, x, y))
        .collect();
    let em = violations
        .em
        .iter()
        .filter_map(|v| {
            let (x, y) = v.midpoint();
            window_of_point(design, x, y)
        })
        .collect();
    (ir, em)
}

/// `(label_ir, label_em)`: 1 when a violating cell centre, respectively a
/// violating wire midpoint, falls in the window's half-open box.
pub fn label_window(window: &AnalysisWindow, violations: &ViolationSet, design: &Design) -> (u8, u8) {
    let (ir, em) = hot_windows(design, violations);
    (ir.contains(&window.id) as u8, em.contains(&window.id) as u8)
}

/// One row per window, split into continuous and discontinuous sets, each
/// in row-major window order.
pub fn build_dataset(design: &Design, violations: &ViolationSet) -> Result<Datasets, FeatureError> {
    let id = design_id(design);
    let meta = GridMeta::new(design);
    let (ir, em) = hot_windows(design, violations);
    let mut continuous = Vec::new();
    let mut discontinuous = Vec::new();
    for w in tile_windows(design) {
        let features = extract_features(design, &w, &meta)?;
        let row = DatasetRow {
            design_id: id.clone(),
            window: w.id,
            class: w.class,
            features: features.0,
            label_ir: ir.contains(&w.id) as u8,
            label_em: em.contains(&w.id) as u8,
        };
        if w.class.is_continuous() {
            continuous.push(row);
        } else {
            discontinuous.push(row);
        }
    }
    Ok(Datasets {
        continuous,
        discontinuous,
        continuous_header: DatasetHeader::new(design, DatasetClass::Continuous),
        discontinuous_header: DatasetHeader::new(design, DatasetClass::Discontinuous),
    })
}

/// JSON-lines: a header line, then one row per line.
pub fn write_dataset(header: &DatasetHeader, rows: &[DatasetRow]) -> String {
    let mut out = serde_json::to_string(&HeaderLine { header: header.clone() }).expect("header");
    out.push('\n');
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row"));
        out.push('\n');
    }
    out
}

pub fn read_dataset(text: &str) -> Result<(DatasetHeader, Vec<DatasetRow>), FeatureError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| FeatureError::Parse("empty dataset file (missing header line)".into()))?;
    let header: HeaderLine = serde_json::from_str(first)
        .map_err(|e| FeatureError::Parse(format!("line 1: header: {e}")))?;
    let header = header.header;
    if header.format != DATASET_FORMAT {
        return Err(FeatureError::Parse(format!("unknown dataset format `{}`", header.format)));
    }
    if header.feature_layout_version != FEATURE_LAYOUT_VERSION {
        return Err(FeatureError::Parse(format!(
            "feature layout version {} (expected {FEATURE_LAYOUT_VERSION})",
            header.feature_layout_version
        )));
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        let row: DatasetRow = serde_json::from_str(line)
            .map_err(|e| FeatureError::Parse(format!("line {}: {e}", k + 1)))?;
        if row.label_ir > 1 || row.label_em > 1 {
            return Err(FeatureError::Parse(format!("line {}: labels must be 0 or 1", k + 1)));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{generate_design, GeneratorConfig};
    use crate::solver::{EmViolation, IrViolation};

    fn design() -> Design {
        generate_design(&GeneratorConfig::default(), 21).unwrap()
    }

    fn em_at(x: f64, y: f64) -> EmViolation {
        EmViolation { branch: 0, layer: 1, current: 1.0, current_density: 1.0, x0: x - 1.0, y0: y, x1: x + 1.0, y1: y }
    }

    #[test]
    fn ir_label_uses_cell_centre() {
        let mut d = design();
        d.cells[0].x = 12.0;
        d.cells[0].y = 6.0;
        d.cells[0].width = 1.0;
        // centre (12.5, 7.0) lies in [10,15) x [5,10)
        let v = ViolationSet {
            ir: vec![IrViolation { cell: d.cells[0].id.clone(), drop: 0.2 }],
            em: vec![],
        };
        let win = tile_windows(&d).into_iter().find(|w| w.id == WindowId { row: 1, col: 2 }).unwrap();
        assert_eq!(label_window(&win, &v, &d), (1, 0));
    }

    #[test]
    fn em_midpoint_on_shared_edge_goes_right() {
        let d = design();
        let v = ViolationSet { ir: vec![], em: vec![em_at(15.0, 7.0)] };
        let windows = tile_windows(&d);
        let left = windows.iter().find(|w| w.id == WindowId { row: 1, col: 2 }).unwrap();
        let right = windows.iter().find(|w| w.id == WindowId { row: 1, col: 3 }).unwrap();
        assert_eq!(label_window(left, &v, &d), (0, 0));
        assert_eq!(label_window(right, &v, &d), (0, 1));
    }

    #[test]
    fn no_violations_no_labels() {
        let d = design();
        let ds = build_dataset(&d, &ViolationSet::default()).unwrap();
        assert!(ds.continuous.iter().chain(&ds.discontinuous).all(|r| r.label_ir == 0 && r.label_em == 0));
        assert_eq!(ds.continuous.len(), 1296);
        assert_eq!(ds.discontinuous.len(), 304);
        assert!(ds.discontinuous.iter().all(|r| matches!(r.class, WindowClass::Boundary | WindowClass::Corner)));
    }

    #[test]
    fn jsonl_round_trip_and_key_order() {
        let d = design();
        let ds = build_dataset(&d, &ViolationSet::default()).unwrap();
        let text = write_dataset(&ds.continuous_header, &ds.continuous[..3]);
        let second = text.lines().nth(1).unwrap();
        let keys = ["\"design_id\"", "\"window\"", "\"class\"", "\"features\"", "\"label_ir\"", "\"label_em\""];
        let pos: Vec<usize> = keys.iter().map(|k| second.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|p| p[0] < p[1]), "{second}");
        let (h, rows) = read_dataset(&text).unwrap();
        assert_eq!(h, ds.continuous_header);
        assert_eq!(rows, ds.continuous[..3]);
    }

    #[test]
    fn malformed_dataset_lines() {
        assert!(read_dataset("").is_err());
        let d = design();
        let ds = build_dataset(&d, &ViolationSet::default()).unwrap();
        let mut text = write_dataset(&ds.continuous_header, &ds.continuous[..1]);
        text.push_str("{\"design_id\": 1}\n");
        let err = read_dataset(&text).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
