// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Design, GEOM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DieDegenerate,
    DieTooSmall,
    LayerCount,
    LayerIndexGap,
    LayerDirection,
    StripeOverlap,
    OffsetRange,
    LayerElectrical,
    NineBumpContainment,
    C4Padding,
    SupplyVoltage,
    CellPower,
    CellOutsideDie,
    CellOverlap,
    CellRowAlignment,
    CellHeight,
    DuplicateCellId,
    CapNegative,
    CapMapCoverage,
    WindowGeometry,
    PdGridNotInteger,
    IrThresholdRange,
    EmLimit,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DieDegenerate => "DIE_DEGENERATE",
            ViolationCode::DieTooSmall => "DIE_TOO_SMALL",
            ViolationCode::LayerCount => "LAYER_COUNT",
            ViolationCode::LayerIndexGap => "LAYER_INDEX_GAP",
            ViolationCode::LayerDirection => "LAYER_DIRECTION",
            ViolationCode::StripeOverlap => "STRIPE_OVERLAP",
            ViolationCode::OffsetRange => "OFFSET_RANGE",
            ViolationCode::LayerElectrical => "LAYER_ELECTRICAL",
            ViolationCode::NineBumpContainment => "NINE_BUMP_CONTAINMENT",
            ViolationCode::C4Padding => "C4_PADDING",
            ViolationCode::SupplyVoltage => "SUPPLY_VOLTAGE",
            ViolationCode::CellPower => "CELL_POWER",
            ViolationCode::CellOutsideDie => "CELL_OUTSIDE_DIE",
            ViolationCode::CellOverlap => "CELL_OVERLAP",
            ViolationCode::CellRowAlignment => "CELL_ROW_ALIGNMENT",
            ViolationCode::CellHeight => "CELL_HEIGHT",
            ViolationCode::DuplicateCellId => "DUPLICATE_CELL_ID",
            ViolationCode::CapNegative => "CAP_NEGATIVE",
            ViolationCode::CapMapCoverage => "CAP_MAP_COVERAGE",
            ViolationCode::WindowGeometry => "WINDOW_GEOMETRY",
            ViolationCode::PdGridNotInteger => "PD_GRID_NOT_INTEGER",
            ViolationCode::IrThresholdRange => "IR_THRESHOLD_RANGE",
            ViolationCode::EmLimit => "EM_LIMIT",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

fn is_integer_multiple(value: f64, unit: f64) -> bool {
    if !(unit > 0.0) {
        return false;
    }
    let q = value / unit;
    (q - q.round()).abs() <= 1e-9 * q.abs().max(1.0)
}

/// Returns every invariant violation; an empty list means the design is valid.
pub fn validate_design(design: &Design) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code: ViolationCode, message: String| out.push(Violation { code, message });

    let die = &design.die;
    let cfg = &design.config;
    let die_ok = die.x1 > die.x0 && die.y1 > die.y0;
    if !die_ok {
        push(
            ViolationCode::DieDegenerate,
            format!("die {:?} has non-positive extent", die),
        );
    }

    // Window geometry.
    if !(cfg.analysis_window > 0.0) || !(cfg.cover_window > cfg.analysis_window) {
        push(
            ViolationCode::WindowGeometry,
            format!(
                "cover window {} must exceed analysis window {} > 0",
                cfg.cover_window, cfg.analysis_window
            ),
        );
    }
    if !is_integer_multiple(cfg.cover_window, cfg.unit_inverter_width)
        || !is_integer_multiple(cfg.cover_window, cfg.row_height)
    {
        push(
            ViolationCode::PdGridNotInteger,
            format!(
                "L/W = {} and L/H = {} must be positive integers",
                cfg.cover_window / cfg.unit_inverter_width,
                cfg.cover_window / cfg.row_height
            ),
        );
    }
    if !(cfg.ir_threshold_fraction > 0.0 && cfg.ir_threshold_fraction < 1.0) {
        push(
            ViolationCode::IrThresholdRange,
            format!("ir_threshold_fraction {} not in (0, 1)", cfg.ir_threshold_fraction),
        );
    }
    if !(cfg.em_current_density_limit > 0.0) {
        push(
            ViolationCode::EmLimit,
            format!("em_current_density_limit {} must be > 0", cfg.em_current_density_limit),
        );
    }
    if die_ok && (die.width() < cfg.cover_window || die.height() < cfg.cover_window) {
        push(
            ViolationCode::DieTooSmall,
            format!(
                "die {}x{} smaller than cover window {}",
                die.width(),
                die.height(),
                cfg.cover_window
            ),
        );
    }

    // Layers.
    if design.layers.len() < 2 {
        push(
            ViolationCode::LayerCount,
            format!("need at least 2 layers, found {}", design.layers.len()),
        );
    }
    for (pos, layer) in design.layers.iter().enumerate() {
        if layer.index as usize != pos + 1 {
            push(
                ViolationCode::LayerIndexGap,
                format!("layer at position {} has index {}, expected {}", pos, layer.index, pos + 1),
            );
        }
        if !(layer.width > 0.0 && layer.width < layer.pitch) {
            push(
                ViolationCode::StripeOverlap,
                format!(
                    "layer {}: width {} must satisfy 0 < w < pitch {}",
                    layer.index, layer.width, layer.pitch
                ),
            );
        }
        if !(layer.offset >= 0.0 && layer.offset < layer.pitch) {
            push(
                ViolationCode::OffsetRange,
                format!(
                    "layer {}: offset {} must satisfy 0 <= o < pitch {}",
                    layer.index, layer.offset, layer.pitch
                ),
            );
        }
        if !(layer.sheet_resistance > 0.0
            && layer.thickness > 0.0
            && layer.via_resistance_to_above >= 0.0)
        {
            push(
                ViolationCode::LayerElectrical,
                format!(
                    "layer {}: sheet_resistance {}, thickness {}, via {} out of range",
                    layer.index, layer.sheet_resistance, layer.thickness, layer.via_resistance_to_above
                ),
            );
        }
        if pos > 0 && design.layers[pos - 1].direction == layer.direction {
            push(
                ViolationCode::LayerDirection,
                format!(
                    "layers {} and {} share direction {:?}",
                    design.layers[pos - 1].index,
                    layer.index,
                    layer.direction
                ),
            );
        }
    }

    // C4 array.
    let c4 = &design.c4;
    if c4.pitch < cfg.cover_window {
        push(
            ViolationCode::NineBumpContainment,
            format!(
                "c4 pitch {} < cover window {}: cover window cannot fit a 3x3 bump matrix",
                c4.pitch, cfg.cover_window
            ),
        );
    }
    if c4.pitch > 0.0 {
        let pad_ok = |origin: f64, lo: f64| {
            origin <= lo - c4.pitch + GEOM_EPS && origin > lo - 2.0 * c4.pitch + GEOM_EPS
        };
        if !pad_ok(c4.origin.x, die.x0) || !pad_ok(c4.origin.y, die.y0) {
            push(
                ViolationCode::C4Padding,
                format!(
                    "c4 origin ({}, {}) must lie within one pitch below die.lower-left - pitch",
                    c4.origin.x, c4.origin.y
                ),
            );
        }
    } else {
        push(ViolationCode::C4Padding, format!("c4 pitch {} must be > 0", c4.pitch));
    }
    if !(c4.supply_voltage > 0.0) || c4.series_resistance < 0.0 {
        push(
            ViolationCode::SupplyVoltage,
            format!(
                "supply voltage {} must be > 0 and series resistance {} >= 0",
                c4.supply_voltage, c4.series_resistance
            ),
        );
    }

    // Cells.
    let mut ids = HashSet::new();
    let mut by_row: BTreeMap<i64, Vec<(f64, f64, &str)>> = BTreeMap::new();
    for cell in &design.cells {
        if !ids.insert(cell.id.as_str()) {
            push(ViolationCode::DuplicateCellId, format!("duplicate cell id {}", cell.id));
        }
        if !(cell.power >= 0.0) {
            push(ViolationCode::CellPower, format!("cell {} power {} < 0", cell.id, cell.power));
        }
        if !(cell.width > 0.0) || (cell.height - cfg.row_height).abs() > GEOM_EPS {
            push(
                ViolationCode::CellHeight,
                format!(
                    "cell {} size {}x{} (height must equal row height {})",
                    cell.id, cell.width, cell.height, cfg.row_height
                ),
            );
        }
        if !die.contains_box(&cell.bbox()) {
            push(ViolationCode::CellOutsideDie, format!("cell {} lies outside the die", cell.id));
        }
        if !is_integer_multiple(cell.y - die.y0, cfg.row_height) {
            push(
                ViolationCode::CellRowAlignment,
                format!("cell {} y = {} not on a row boundary", cell.id, cell.y),
            );
        }
        let row = ((cell.y - die.y0) / cfg.row_height.max(f64::MIN_POSITIVE)).round() as i64;
        by_row
            .entry(row)
            .or_default()
            .push((cell.x, cell.x + cell.width, cell.id.as_str()));
    }
    for cells in by_row.values_mut() {
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in cells.windows(2) {
            if pair[1].0 < pair[0].1 - GEOM_EPS {
                push(
                    ViolationCode::CellOverlap,
                    format!("cells {} and {} overlap", pair[0].2, pair[1].2),
                );
            }
        }
    }

    // Routing capacitance map.
    let cap = &design.cap_map;
    let cols_ok = is_integer_multiple(die.width(), cap.tile_size)
        && is_integer_multiple(die.height(), cap.tile_size);
    let expect_cols = (die.width() / cap.tile_size).round() as usize;
    let expect_rows = (die.height() / cap.tile_size).round() as usize;
    if !cols_ok
        || cap.rows() != expect_rows
        || cap.values.iter().any(|r| r.len() != expect_cols)
    {
        push(
            ViolationCode::CapMapCoverage,
            format!(
                "cap map {}x{} tiles of {} does not cover die {}x{} exactly",
                cap.cols(),
                cap.rows(),
                cap.tile_size,
                die.width(),
                die.height()
            ),
        );
    }
    if cap.values.iter().flatten().any(|v| !(*v >= 0.0)) {
        push(ViolationCode::CapNegative, "cap map has negative entries".into());
    }

    out
}
