// SPDX-License-Identifier: Apache-2.0

//! Window feature vectors.
//!
//! Layout, in order:
//!
//! * discontinuous windows only: `X_a, Y_a, X_b, Y_b`, the die corners
//!   relative to the analysis window's lower-left corner;
//! * `w_i, p_i, o_i` for layers 1..T;
//! * the cover-window power-density grid, `(L/W) x (L/H)` sub-windows of
//!   size `W x H`, x-major (`index = i * (L/H) + j`), in W/µm²;
//! * `c`, the routing coupling capacitance over the analysis window (fF);
//! * `X_k, Y_k` for the nine bumps of the enclosing 3x3 matrix, signed
//!   displacement from the cover-window centre, bottom row first.

use serde::{Deserialize, Serialize};

use super::window::AnalysisWindow;
use super::FeatureError;
use crate::design::{BBox, Design};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub layers: usize,
    pub pd_cols: usize,
    pub pd_rows: usize,
}

impl FeatureLayout {
    pub fn of(design: &Design) -> Self {
        FeatureLayout {
            layers: design.layer_count(),
            pd_cols: design.config.pd_cols(),
            pd_rows: design.config.pd_rows(),
        }
    }

    pub fn continuous_len(&self) -> usize {
        3 * self.layers + self.pd_cols * self.pd_rows + 1 + 18
    }

    pub fn discontinuous_len(&self) -> usize {
        self.continuous_len() + 4
    }

    pub fn len(&self, continuous: bool) -> usize {
        if continuous {
            self.continuous_len()
        } else {
            self.discontinuous_len()
        }
    }

    /// Human-readable feature names in vector order.
    pub fn names(&self, continuous: bool) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len(continuous));
        if !continuous {
            out.extend(["X_a", "Y_a", "X_b", "Y_b"].map(String::from));
        }
        for i in 1..=self.layers {
            out.push(format!("w_{i}"));
            out.push(format!("p_{i}"));
            out.push(format!("o_{i}"));
        }
        for i in 1..=self.pd_cols {
            for j in 1..=self.pd_rows {
                out.push(format!("pd_{i}_{j}"));
            }
        }
        out.push("c".into());
        for k in 1..=9 {
            out.push(format!("X_{k}"));
            out.push(format!("Y_{k}"));
        }
        out
    }
}

/// Per-design lookup structures shared by every window.
#[derive(Debug, Clone)]
pub struct GridMeta {
    /// Cell indices per placement row, sorted by x.
    rows: Vec<Vec<usize>>,
    bump_cols: Vec<f64>,
    bump_rows: Vec<f64>,
}

impl GridMeta {
    pub fn new(design: &Design) -> Self {
        let h = design.config.row_height;
        let n_rows = ((design.die.height() / h).ceil() as usize).max(1);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for (k, c) in design.cells.iter().enumerate() {
            let r = (((c.y - design.die.y0) / h).round().max(0.0) as usize).min(n_rows - 1);
            rows[r].push(k);
        }
        for r in &mut rows {
            r.sort_by(|&a, &b| design.cells[a].x.total_cmp(&design.cells[b].x));
        }
        GridMeta {
            rows,
            bump_cols: design.c4.columns(&design.die),
            bump_rows: design.c4.rows(&design.die),
        }
    }

    fn cells_overlapping<'a>(
        &'a self,
        design: &'a Design,
        region: &'a BBox,
    ) -> impl Iterator<Item = usize> + 'a {
        let h = design.config.row_height;
        let lo = ((region.y0 - design.die.y0) / h).floor().max(0.0) as usize;
        let hi = (((region.y1 - design.die.y0) / h).ceil().max(0.0) as usize).min(self.rows.len());
        (lo.min(hi)..hi).flat_map(move |r| {
            let row = &self.rows[r];
            let start = row.partition_point(|&k| {
                let c = &design.cells[k];
                c.x + c.width <= region.x0
            });
            row[start..]
                .iter()
                .copied()
                .take_while(move |&k| design.cells[k].x < region.x1)
        })
    }
}

/// Centre index of the 3x3 bump matrix along one axis: the bump nearest the
/// window centre (ties low), clamped so both neighbours exist.
fn matrix_centre(axis: &[f64], c: f64) -> Option<usize> {
    if axis.len() < 3 {
        return None;
    }
    let i = axis.partition_point(|&p| p < c);
    let nearest = if i == 0 {
        0
    } else if i == axis.len() || c - axis[i - 1] <= axis[i] - c {
        i - 1
    } else {
        i
    };
    Some(nearest.clamp(1, axis.len() - 2))
}

pub fn extract_features(
    design: &Design,
    window: &AnalysisWindow,
    meta: &GridMeta,
) -> Result<FeatureVector, FeatureError> {
    let cfg = &design.config;
    let layout = FeatureLayout::of(design);
    let continuous = window.class.is_continuous();
    let mut v = Vec::with_capacity(layout.len(continuous));

    if !continuous {
        let die = design.die;
        let (ox, oy) = (window.bbox.x0, window.bbox.y0);
        v.extend([die.x0 - ox, die.y0 - oy, die.x1 - ox, die.y1 - oy]);
    }

    for layer in &design.layers {
        v.extend([layer.width, layer.pitch, layer.offset]);
    }

    let cover = window.cover_bbox;
    let (sw, sh) = (cfg.unit_inverter_width, cfg.row_height);
    let (nc, nr) = (layout.pd_cols, layout.pd_rows);
    let mut pd = vec![0.0; nc * nr];
    for k in meta.cells_overlapping(design, &cover) {
        let cell = &design.cells[k];
        let cb = cell.bbox();
        let area = cell.area();
        if !(area > 0.0) {
            continue;
        }
        let i0 = ((cb.x0 - cover.x0) / sw).floor().max(0.0) as usize;
        let i1 = (((cb.x1 - cover.x0) / sw).ceil().max(0.0) as usize).min(nc);
        let j0 = ((cb.y0 - cover.y0) / sh).floor().max(0.0) as usize;
        let j1 = (((cb.y1 - cover.y0) / sh).ceil().max(0.0) as usize).min(nr);
        for i in i0..i1 {
            for j in j0..j1 {
                let sub = BBox::new(
                    cover.x0 + i as f64 * sw,
                    cover.y0 + j as f64 * sh,
                    cover.x0 + (i + 1) as f64 * sw,
                    cover.y0 + (j + 1) as f64 * sh,
                );
                let ov = cb.overlap_area(&sub);
                if ov > 0.0 {
                    pd[i * nr + j] += cell.power * (ov / area) / (sw * sh);
                }
            }
        }
    }
    v.extend_from_slice(&pd);

    v.push(design.cap_map.weighted_sum(&design.die, &window.bbox));

    let (cx, cy) = cover.center();
    let (Some(ci), Some(cj)) = (
        matrix_centre(&meta.bump_cols, cx),
        matrix_centre(&meta.bump_rows, cy),
    ) else {
        return Err(FeatureError::MissingBumpMatrix(format!(
            "window {}: bump lattice has {}x{} bumps, need at least 3x3",
            window.id,
            meta.bump_cols.len(),
            meta.bump_rows.len()
        )));
    };
    for bj in cj - 1..=cj + 1 {
        for bi in ci - 1..=ci + 1 {
            v.push(meta.bump_cols[bi] - cx);
            v.push(meta.bump_rows[bj] - cy);
        }
    }

    debug_assert_eq!(v.len(), layout.len(continuous));
    Ok(FeatureVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{generate_design, CellInstance, GeneratorConfig, Point};
    use crate::features::{tile_windows, WindowClass, WindowId};

    fn empty_design() -> Design {
        let mut d = generate_design(&GeneratorConfig::default(), 4).unwrap();
        d.cells.clear();
        for row in &mut d.cap_map.values {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        d
    }

    fn window(d: &Design, row: usize, col: usize) -> AnalysisWindow {
        tile_windows(d).into_iter().find(|w| w.id == WindowId { row, col }).unwrap()
    }

    #[test]
    fn lengths_match_layout() {
        let d = generate_design(&GeneratorConfig::default(), 4).unwrap();
        let layout = FeatureLayout::of(&d);
        assert_eq!(layout.continuous_len(), 231);
        assert_eq!(layout.discontinuous_len(), 235);
        assert_eq!(layout.names(true).len(), 231);
        let meta = GridMeta::new(&d);
        for w in tile_windows(&d) {
            let f = extract_features(&d, &w, &meta).unwrap();
            assert_eq!(f.len(), layout.len(w.class.is_continuous()));
            assert!(f.0.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn single_cell_fills_one_subwindow() {
        let mut d = empty_design();
        let w = window(&d, 10, 10);
        // Cover window lower-left of tile (10, 10) is (42.5, 42.5); tiles are 1x2.
        d.cells.push(CellInstance {
            id: "c0".into(),
            x: w.cover_bbox.x0,
            y: w.cover_bbox.y0,
            width: 1.0,
            height: 2.0,
            power: 2e-6,
        });
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        let pd = &f.0[12..212];
        assert!((pd[0] - 1e-6).abs() < 1e-21);
        assert!(pd[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_window_has_zero_density_and_cap() {
        let d = empty_design();
        let w = window(&d, 10, 10);
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        assert!(f.0[12..213].iter().all(|&v| v == 0.0));
        let layer_feats: Vec<f64> = d.layers.iter().flat_map(|l| [l.width, l.pitch, l.offset]).collect();
        assert_eq!(&f.0[..12], layer_feats.as_slice());
    }

    #[test]
    fn centred_bump_matrix() {
        let mut d = empty_design();
        d.c4.pitch = 100.0;
        d.c4.origin = Point { x: -100.0, y: -100.0 };
        let mut w = window(&d, 19, 19);
        // Force the cover centre onto the bump at (100, 100).
        w.cover_bbox = BBox::new(90.0, 90.0, 110.0, 110.0);
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        let bumps = &f.0[213..];
        assert_eq!(&bumps[8..10], &[0.0, 0.0]);
        assert_eq!(&bumps[0..2], &[-100.0, -100.0]);
        assert_eq!(&bumps[4..6], &[100.0, -100.0]);
        assert_eq!(&bumps[12..14], &[-100.0, 100.0]);
        assert_eq!(&bumps[16..18], &[100.0, 100.0]);
    }

    #[test]
    fn discontinuous_prefix_is_die_relative() {
        let d = empty_design();
        let w = window(&d, 0, 0);
        assert_eq!(w.class, WindowClass::Corner);
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        assert_eq!(&f.0[..4], &[0.0, 0.0, 200.0, 200.0]);
        let w = window(&d, 0, 20);
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        assert_eq!(&f.0[..4], &[-100.0, 0.0, 100.0, 200.0]);
    }

    #[test]
    fn cap_sums_over_analysis_window_only() {
        let mut d = empty_design();
        for row in &mut d.cap_map.values {
            row.iter_mut().for_each(|v| *v = 1.5);
        }
        let w = window(&d, 10, 10);
        let f = extract_features(&d, &w, &GridMeta::new(&d)).unwrap();
        // One 5x5 cap tile aligned with the 5x5 analysis window.
        assert_eq!(f.0[212], 1.5);
    }

    #[test]
    fn tiny_lattice_is_missing_matrix() {
        let mut d = empty_design();
        // Lattice columns at 150 and 1150 only.
        d.c4.pitch = 1000.0;
        d.c4.origin = Point { x: 150.0, y: 150.0 };
        let w = window(&d, 10, 10);
        let err = extract_features(&d, &w, &GridMeta::new(&d)).unwrap_err();
        assert_eq!(err.code(), "MISSING_BUMP_MATRIX");
    }
}
