// SPDX-License-Identifier: Apache-2.0

//! Chip-design data model.
//!
//! Units are fixed across the crate: micrometres, volts, amperes, watts, ohms
//! and femtofarads. Only the supply net (Vdd) is modelled; ground is ideal.

mod generate;
mod io;
mod validate;

pub use generate::{generate_design, GeneratorConfig, GeneratorFile, LayerTemplate};
pub use io::{design_id, parse_design, parse_generator_config, serialize_design, SCHEMA_VERSION};
pub use validate::{validate_design, Violation, ViolationCode};

use serde::{Deserialize, Serialize};

/// Geometric tolerance for comparisons on coordinates (µm).
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
    #[error("SCHEMA_VERSION_MISMATCH: expected \"{expected}\", found \"{found}\"")]
    SchemaVersionMismatch { expected: String, found: String },
    #[error("INFEASIBLE_UTILIZATION: {0}")]
    InfeasibleUtilization(String),
}

impl DesignError {
    pub fn code(&self) -> &'static str {
        match self {
            DesignError::Parse(_) => "PARSE_ERROR",
            DesignError::SchemaVersionMismatch { .. } => "SCHEMA_VERSION_MISMATCH",
            DesignError::InfeasibleUtilization(_) => "INFEASIBLE_UTILIZATION",
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Area of the intersection with `other` (0 when disjoint).
    pub fn overlap_area(&self, other: &BBox) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 - GEOM_EPS
            && other.y0 >= self.y0 - GEOM_EPS
            && other.x1 <= self.x1 + GEOM_EPS
            && other.y1 <= self.y1 + GEOM_EPS
    }

    /// Half-open membership `[x0, x1) x [y0, y1)`.
    pub fn contains_half_open(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Horizontal,
    Vertical,
}

impl Direction {
    pub fn other(self) -> Direction {
        match self {
            Direction::Horizontal => Direction::Vertical,
            Direction::Vertical => Direction::Horizontal,
        }
    }
}

/// One metal layer of the power stripe stack.
///
/// `offset` is measured from the die's lower-left corner along the axis
/// perpendicular to the stripes, so stripe centrelines sit at
/// `die.x0 + offset + k * pitch` (vertical) or `die.y0 + offset + k * pitch`
/// (horizontal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    /// 1 is the lowest layer, T the top layer.
    pub index: u32,
    pub direction: Direction,
    pub width: f64,
    pub pitch: f64,
    pub offset: f64,
    /// Ohms per square.
    pub sheet_resistance: f64,
    pub thickness: f64,
    /// Ohms per via cut to the layer above (unused on the top layer).
    pub via_resistance_to_above: f64,
}

impl LayerSpec {
    /// Stripe centreline coordinates clipped to the die.
    pub fn stripe_positions(&self, die: &BBox) -> Vec<f64> {
        let (lo, hi) = match self.direction {
            Direction::Vertical => (die.x0, die.x1),
            Direction::Horizontal => (die.y0, die.y1),
        };
        let mut out = Vec::new();
        if !(self.pitch > 0.0) {
            return out;
        }
        let mut k = 0u64;
        loop {
            let pos = lo + self.offset + k as f64 * self.pitch;
            if pos > hi + GEOM_EPS {
                break;
            }
            out.push(pos);
            k += 1;
        }
        out
    }

    pub fn cross_section(&self) -> f64 {
        self.width * self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// C4 bump lattice.
///
/// Bumps sit at `origin + (m * pitch, n * pitch)` for `m, n >= 0`, clipped to
/// the die padded by one pitch on every side. Only bumps inside the die are
/// electrically attached; the padding ring exists so every window sees a full
/// three-by-three bump matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C4Array {
    pub pitch: f64,
    pub origin: Point,
    pub supply_voltage: f64,
    /// Series resistance between a bump and its top-layer node (0 = ideal pin).
    #[serde(default)]
    pub series_resistance: f64,
}

impl C4Array {
    /// Bump coordinates along one axis, from `origin` up to `hi + pitch`.
    fn axis(&self, origin: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if !(self.pitch > 0.0) {
            return out;
        }
        let limit = hi + self.pitch + GEOM_EPS;
        let mut k = 0u64;
        loop {
            let pos = origin + k as f64 * self.pitch;
            if pos > limit {
                break;
            }
            out.push(pos);
            k += 1;
        }
        out
    }

    pub fn columns(&self, die: &BBox) -> Vec<f64> {
        self.axis(self.origin.x, die.x1)
    }

    pub fn rows(&self, die: &BBox) -> Vec<f64> {
        self.axis(self.origin.y, die.y1)
    }

    /// All bumps in the padded lattice, row-major from the bottom row.
    pub fn bumps(&self, die: &BBox) -> Vec<Point> {
        let cols = self.columns(die);
        self.rows(die)
            .iter()
            .flat_map(|&y| cols.iter().map(move |&x| Point { x, y }))
            .collect()
    }

    /// Bumps inside the die (closed box); these are the electrical supplies.
    pub fn in_die_bumps(&self, die: &BBox) -> Vec<Point> {
        self.bumps(die)
            .into_iter()
            .filter(|p| {
                p.x >= die.x0 - GEOM_EPS
                    && p.x <= die.x1 + GEOM_EPS
                    && p.y >= die.y0 - GEOM_EPS
                    && p.y <= die.y1 + GEOM_EPS
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellInstance {
    pub id: String,
    /// Lower-left corner.
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub power: f64,
}

impl CellInstance {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.x + self.width, self.y + self.height)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.width, self.y + 0.5 * self.height)
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Signal-routing coupling capacitance per square tile, in fF.
///
/// `values[row][col]`, row 0 at the die's bottom edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingCapMap {
    pub tile_size: f64,
    pub values: Vec<Vec<f64>>,
}

impl RoutingCapMap {
    pub fn rows(&self) -> usize {
        self.values.len()
    }

    pub fn cols(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Area-weighted capacitance of the tiles overlapping `region`.
    pub fn weighted_sum(&self, die: &BBox, region: &BBox) -> f64 {
        let ts = self.tile_size;
        if !(ts > 0.0) || self.rows() == 0 {
            return 0.0;
        }
        let tile_area = ts * ts;
        let c_lo = (((region.x0 - die.x0) / ts).floor().max(0.0)) as usize;
        let r_lo = (((region.y0 - die.y0) / ts).floor().max(0.0)) as usize;
        let c_hi = (((region.x1 - die.x0) / ts).ceil().max(0.0) as usize).min(self.cols());
        let r_hi = (((region.y1 - die.y0) / ts).ceil().max(0.0) as usize).min(self.rows());
        let mut sum = 0.0;
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let tile = BBox::new(
                    die.x0 + c as f64 * ts,
                    die.y0 + r as f64 * ts,
                    die.x0 + (c + 1) as f64 * ts,
                    die.y0 + (r + 1) as f64 * ts,
                );
                let ov = tile.overlap_area(region);
                if ov > 0.0 {
                    sum += self.values[r][c] * ov / tile_area;
                }
            }
        }
        sum
    }
}

/// Analysis geometry and electrical limits shared by labelling and features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    #[serde(default = "default_analysis_window")]
    pub analysis_window: f64,
    #[serde(default = "default_cover_window")]
    pub cover_window: f64,
    pub unit_inverter_width: f64,
    pub row_height: f64,
    #[serde(default = "default_ir_threshold_fraction")]
    pub ir_threshold_fraction: f64,
    /// A/µm².
    pub em_current_density_limit: f64,
}

fn default_analysis_window() -> f64 {
    5.0
}
fn default_cover_window() -> f64 {
    20.0
}
fn default_ir_threshold_fraction() -> f64 {
    0.10
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            analysis_window: default_analysis_window(),
            cover_window: default_cover_window(),
            unit_inverter_width: 1.0,
            row_height: 2.0,
            ir_threshold_fraction: default_ir_threshold_fraction(),
            em_current_density_limit: 1e-2,
        }
    }
}

impl DesignConfig {
    /// Sub-window count along x in the power-density grid (L / W).
    pub fn pd_cols(&self) -> usize {
        (self.cover_window / self.unit_inverter_width).round() as usize
    }

    /// Sub-window count along y in the power-density grid (L / H).
    pub fn pd_rows(&self) -> usize {
        (self.cover_window / self.row_height).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub die: BBox,
    pub config: DesignConfig,
    pub layers: Vec<LayerSpec>,
    pub c4: C4Array,
    pub cells: Vec<CellInstance>,
    pub cap_map: RoutingCapMap,
}

impl Design {
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn supply_voltage(&self) -> f64 {
        self.c4.supply_voltage
    }

    /// Rigid translation of every coordinate; stripe offsets are die-relative
    /// and therefore unchanged.
    pub fn translated(&self, dx: f64, dy: f64) -> Design {
        let mut d = self.clone();
        d.die = d.die.translate(dx, dy);
        d.c4.origin.x += dx;
        d.c4.origin.y += dy;
        for c in &mut d.cells {
            c.x += dx;
            c.y += dy;
        }
        d
    }
}
