// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::design::{BBox, Design, GEOM_EPS};

/// `(row, col)`; row 0 is the bottom tile row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct WindowId {
    pub row: usize,
    pub col: usize,
}

impl From<[usize; 2]> for WindowId {
    fn from(v: [usize; 2]) -> Self {
        WindowId { row: v[0], col: v[1] }
    }
}

impl From<WindowId> for [usize; 2] {
    fn from(w: WindowId) -> Self {
        [w.row, w.col]
    }
}

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowClass {
    Continuous,
    /// Cover window crosses one die edge (or the tile is clipped).
    Boundary,
    /// Cover window crosses two adjacent die edges.
    Corner,
}

impl WindowClass {
    pub fn is_continuous(self) -> bool {
        self == WindowClass::Continuous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisWindow {
    pub id: WindowId,
    pub bbox: BBox,
    pub cover_bbox: BBox,
    pub class: WindowClass,
}

fn tile_counts(design: &Design) -> (usize, usize) {
    let aw = design.config.analysis_window;
    let cols = ((design.die.width() / aw) - GEOM_EPS).ceil().max(1.0) as usize;
    let rows = ((design.die.height() / aw) - GEOM_EPS).ceil().max(1.0) as usize;
    (rows, cols)
}

/// Row-major tiling of the die into analysis windows with their cover
/// windows and continuity class. Tiles on the top/right edge are clipped
/// when the die side is not a multiple of the window size.
pub fn tile_windows(design: &Design) -> Vec<AnalysisWindow> {
    let die = design.die;
    let aw = design.config.analysis_window;
    let half = 0.5 * design.config.cover_window;
    let (rows, cols) = tile_counts(design);
    let mut out = Vec::with_capacity(rows * cols);
    for row in 0..rows {
        for col in 0..cols {
            let x0 = die.x0 + col as f64 * aw;
            let y0 = die.y0 + row as f64 * aw;
            let bbox = BBox::new(x0, y0, (x0 + aw).min(die.x1), (y0 + aw).min(die.y1));
            let clipped = bbox.width() < aw - GEOM_EPS || bbox.height() < aw - GEOM_EPS;
            let (cx, cy) = bbox.center();
            let cover = BBox::new(cx - half, cy - half, cx + half, cy + half);
            let crosses_x = (cover.x0 < die.x0 - GEOM_EPS) as u8 + (cover.x1 > die.x1 + GEOM_EPS) as u8;
            let crosses_y = (cover.y0 < die.y0 - GEOM_EPS) as u8 + (cover.y1 > die.y1 + GEOM_EPS) as u8;
            let class = match (crosses_x + crosses_y, clipped) {
                (0, false) => WindowClass::Continuous,
                (0, true) | (1, _) => WindowClass::Boundary,
                _ => WindowClass::Corner,
            };
            out.push(AnalysisWindow { id: WindowId { row, col }, bbox, cover_bbox: cover, class });
        }
    }
    out
}

/// Window whose half-open box contains `(x, y)`. The die's top and right
/// edges belong to the last row and column so every in-die point maps to
/// exactly one window.
pub fn window_of_point(design: &Design, x: f64, y: f64) -> Option<WindowId> {
    let die = design.die;
    if x < die.x0 || x > die.x1 || y < die.y0 || y > die.y1 {
        return None;
    }
    let aw = design.config.analysis_window;
    let (rows, cols) = tile_counts(design);
    let col = (((x - die.x0) / aw).floor() as usize).min(cols - 1);
    let row = (((y - die.y0) / aw).floor() as usize).min(rows - 1);
    Some(WindowId { row, col })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{generate_design, GeneratorConfig};

    fn design(w: f64, h: f64) -> Design {
        generate_design(
            &GeneratorConfig { die_width: w, die_height: h, ..Default::default() },
            1,
        )
        .unwrap()
    }

    #[test]
    fn default_die_counts() {
        let d = design(200.0, 200.0);
        let w = tile_windows(&d);
        assert_eq!(w.len(), 1600);
        let cont = w.iter().filter(|w| w.class.is_continuous()).count();
        assert_eq!(cont, 1296);
        assert_eq!(w.len() - cont, 304);
        let at = |r, c| w.iter().find(|w| w.id == WindowId { row: r, col: c }).unwrap();
        assert_eq!(at(0, 0).class, WindowClass::Corner);
        assert_eq!(at(0, 20).class, WindowClass::Boundary);
        assert_eq!(at(20, 20).class, WindowClass::Continuous);
        assert_eq!(at(1, 1).class, WindowClass::Corner);
        assert_eq!(at(39, 2).class, WindowClass::Boundary);
    }

    #[test]
    fn windows_partition_die() {
        let d = design(200.0, 200.0);
        let area: f64 = tile_windows(&d).iter().map(|w| w.bbox.area()).sum();
        assert_eq!(area, d.die.area());
    }

    #[test]
    fn clipped_tiles_are_discontinuous() {
        // 203 is not a multiple of 5; the last column is 3 µm wide.
        let mut d = design(200.0, 200.0);
        d.die.x1 = 203.0;
        let w = tile_windows(&d);
        assert_eq!(w.len(), 41 * 40);
        for win in w.iter().filter(|w| w.id.col == 40) {
            assert!((win.bbox.width() - 3.0).abs() < 1e-12);
            assert!(!win.class.is_continuous());
        }
    }

    #[test]
    fn half_open_membership() {
        let d = design(200.0, 200.0);
        assert_eq!(window_of_point(&d, 15.0, 7.0), Some(WindowId { row: 1, col: 3 }));
        assert_eq!(window_of_point(&d, 14.999, 7.0), Some(WindowId { row: 1, col: 2 }));
        assert_eq!(window_of_point(&d, 200.0, 200.0), Some(WindowId { row: 39, col: 39 }));
        assert_eq!(window_of_point(&d, 200.1, 10.0), None);
    }
}
