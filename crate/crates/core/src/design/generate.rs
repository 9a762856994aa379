// SPDX-License-Identifier: Apache-2.0

//! Seeded synthetic design generator.
//!
//! Electrical defaults below are stand-ins chosen so that both IR and EM
//! labels occur on the default die; they are not measured values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    BBox, C4Array, CellInstance, Design, DesignConfig, DesignError, Direction, LayerSpec, Point,
    RoutingCapMap, GEOM_EPS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerTemplate {
    pub direction: Direction,
    pub width: f64,
    pub pitch: f64,
    pub offset: f64,
    pub sheet_resistance: f64,
    pub thickness: f64,
    pub via_resistance_to_above: f64,
}

fn default_layers() -> Vec<LayerTemplate> {
    let l = |direction, width, pitch, offset, sheet, thickness, via| LayerTemplate {
        direction,
        width,
        pitch,
        offset,
        sheet_resistance: sheet,
        thickness,
        via_resistance_to_above: via,
    };
    vec![
        l(Direction::Horizontal, 0.4, 2.0, 0.0, 0.05, 0.1, 0.1),
        l(Direction::Vertical, 0.4, 5.0, 2.5, 0.05 / 2.0, 0.2, 1.0),
        l(Direction::Horizontal, 0.5, 10.0, 0.0, 0.05 / 3.0, 0.35, 1.0),
        l(Direction::Vertical, 0.5, 20.0, 0.0, 0.05 / 4.0, 0.5, 1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub die_width: f64,
    pub die_height: f64,
    /// Bottom-to-top stripe stack; its length is T.
    pub layers: Vec<LayerTemplate>,
    pub analysis_window: f64,
    pub cover_window: f64,
    pub unit_inverter_width: f64,
    pub row_height: f64,
    pub ir_threshold_fraction: f64,
    pub em_current_density_limit: f64,
    pub supply_voltage: f64,
    pub c4_pitch: f64,
    pub bump_series_resistance: f64,
    /// Fraction of die area covered by cells.
    pub utilization: f64,
    /// Cell widths are drawn uniformly from 1..=max_cell_sites unit widths.
    pub max_cell_sites: u32,
    /// Baseline cell power per unit area (W/µm²).
    pub baseline_power_density: f64,
    pub hot_clusters: u32,
    /// Gaussian sigma of each power cluster (µm).
    pub cluster_sigma: f64,
    /// Peak power multiplier at a cluster centre.
    pub hot_cold_ratio: f64,
    pub cap_tile_size: f64,
    /// Per-tile coupling capacitance is uniform in [cap_min, cap_max] fF before cluster scaling.
    pub cap_min: f64,
    pub cap_max: f64,
    /// Capacitance gain at a cluster centre: cap *= 1 + gain * profile.
    pub cap_cluster_gain: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let dc = DesignConfig::default();
        GeneratorConfig {
            die_width: 200.0,
            die_height: 200.0,
            layers: default_layers(),
            analysis_window: dc.analysis_window,
            cover_window: dc.cover_window,
            unit_inverter_width: dc.unit_inverter_width,
            row_height: dc.row_height,
            ir_threshold_fraction: dc.ir_threshold_fraction,
            em_current_density_limit: 0.1,
            supply_voltage: 1.0,
            c4_pitch: 20.0,
            bump_series_resistance: 2.5,
            utilization: 0.95,
            max_cell_sites: 4,
            // 3e-5 W/µm² spread over 60% of the die
            baseline_power_density: 3e-5 * (0.6 / 0.95),
            hot_clusters: 3,
            cluster_sigma: 15.0,
            hot_cold_ratio: 40.0,
            cap_tile_size: 5.0,
            cap_min: 0.5,
            cap_max: 2.0,
            cap_cluster_gain: 0.5,
        }
    }
}

/// On-disk wrapper: `{"schema_version": "1", "generator": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    pub schema_version: String,
    pub generator: GeneratorConfig,
}

struct Cluster {
    x: f64,
    y: f64,
}

impl GeneratorConfig {
    fn profile(&self, clusters: &[Cluster], x: f64, y: f64) -> f64 {
        let two_s2 = 2.0 * self.cluster_sigma * self.cluster_sigma;
        clusters
            .iter()
            .map(|c| {
                let r2 = (x - c.x).powi(2) + (y - c.y).powi(2);
                (-r2 / two_s2).exp()
            })
            .fold(0.0, f64::max)
    }
}

/// Builds a design that depends only on `(cfg, seed)`.
pub fn generate_design(cfg: &GeneratorConfig, seed: u64) -> Result<Design, DesignError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let die = BBox::new(0.0, 0.0, cfg.die_width, cfg.die_height);

    if !(cfg.utilization > 0.0 && cfg.utilization <= 1.0) {
        return Err(DesignError::InfeasibleUtilization(format!(
            "utilization {} not in (0, 1]",
            cfg.utilization
        )));
    }
    let site_w = cfg.unit_inverter_width;
    let row_h = cfg.row_height;
    if !(site_w > 0.0 && row_h > 0.0 && cfg.max_cell_sites >= 1) {
        return Err(DesignError::InfeasibleUtilization(
            "cell site size must be positive".into(),
        ));
    }
    let sites = (die.width() / site_w + GEOM_EPS).floor() as usize;
    let rows = (die.height() / row_h + GEOM_EPS).floor() as usize;

    let clusters: Vec<Cluster> = (0..cfg.hot_clusters)
        .map(|_| Cluster {
            x: rng.gen_range(die.x0..die.x1),
            y: rng.gen_range(die.y0..die.y1),
        })
        .collect();

    // Cell widths until the target area is reached (overshoot < one cell).
    let target_area = cfg.utilization * die.area();
    let mut widths: Vec<usize> = Vec::new();
    let mut area = 0.0;
    while area < target_area - GEOM_EPS {
        let w = rng.gen_range(1..=cfg.max_cell_sites) as usize;
        widths.push(w);
        area += w as f64 * site_w * row_h;
    }
    if widths.iter().sum::<usize>() > sites * rows {
        return Err(DesignError::InfeasibleUtilization(format!(
            "{} cell sites requested but only {} available",
            widths.iter().sum::<usize>(),
            sites * rows
        )));
    }

    // Round-robin first fit across rows.
    let mut row_cells: Vec<Vec<usize>> = vec![Vec::new(); rows];
    let mut used = vec![0usize; rows];
    let mut cursor = 0usize;
    for &w in &widths {
        let slot = (0..rows)
            .map(|k| (cursor + k) % rows)
            .find(|&r| used[r] + w <= sites)
            .ok_or_else(|| {
                DesignError::InfeasibleUtilization(format!(
                    "no row has {w} free sites left (utilization {})",
                    cfg.utilization
                ))
            })?;
        row_cells[slot].push(w);
        used[slot] += w;
        cursor = (slot + 1) % rows;
    }

    let mut cells = Vec::with_capacity(widths.len());
    for (r, row) in row_cells.iter().enumerate() {
        let free = sites - used[r];
        let mut cuts: Vec<usize> = (0..row.len()).map(|_| rng.gen_range(0..=free)).collect();
        cuts.sort_unstable();
        let mut site = 0usize;
        let mut prev_cut = 0usize;
        for (k, &w) in row.iter().enumerate() {
            site += cuts[k] - prev_cut;
            prev_cut = cuts[k];
            let x = die.x0 + site as f64 * site_w;
            let y = die.y0 + r as f64 * row_h;
            let width = w as f64 * site_w;
            let (cx, cy) = (x + 0.5 * width, y + 0.5 * row_h);
            let mult = 1.0 + (cfg.hot_cold_ratio - 1.0) * cfg.profile(&clusters, cx, cy);
            cells.push(CellInstance {
                id: String::new(),
                x,
                y,
                width,
                height: row_h,
                power: cfg.baseline_power_density * width * row_h * mult,
            });
            site += w;
        }
    }
    for (k, c) in cells.iter_mut().enumerate() {
        c.id = format!("c{k:06}");
    }

    let ts = cfg.cap_tile_size;
    let cap_cols = (die.width() / ts).round() as usize;
    let cap_rows = (die.height() / ts).round() as usize;
    let values = (0..cap_rows)
        .map(|r| {
            (0..cap_cols)
                .map(|c| {
                    let base = if cfg.cap_max > cfg.cap_min {
                        rng.gen_range(cfg.cap_min..cfg.cap_max)
                    } else {
                        cfg.cap_min
                    };
                    let cx = die.x0 + (c as f64 + 0.5) * ts;
                    let cy = die.y0 + (r as f64 + 0.5) * ts;
                    base * (1.0 + cfg.cap_cluster_gain * cfg.profile(&clusters, cx, cy))
                })
                .collect()
        })
        .collect();

    let layers = cfg
        .layers
        .iter()
        .enumerate()
        .map(|(i, t)| LayerSpec {
            index: i as u32 + 1,
            direction: t.direction,
            width: t.width,
            pitch: t.pitch,
            offset: t.offset,
            sheet_resistance: t.sheet_resistance,
            thickness: t.thickness,
            via_resistance_to_above: t.via_resistance_to_above,
        })
        .collect();

    Ok(Design {
        die,
        config: DesignConfig {
            analysis_window: cfg.analysis_window,
            cover_window: cfg.cover_window,
            unit_inverter_width: site_w,
            row_height: row_h,
            ir_threshold_fraction: cfg.ir_threshold_fraction,
            em_current_density_limit: cfg.em_current_density_limit,
        },
        layers,
        c4: C4Array {
            pitch: cfg.c4_pitch,
            origin: Point {
                x: die.x0 - cfg.c4_pitch,
                y: die.y0 - cfg.c4_pitch,
            },
            supply_voltage: cfg.supply_voltage,
            series_resistance: cfg.bump_series_resistance,
        },
        cells,
        cap_map: RoutingCapMap { tile_size: ts, values },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{serialize_design, validate_design};

    #[test]
    fn deterministic() {
        let cfg = GeneratorConfig::default();
        let a = serialize_design(&generate_design(&cfg, 42).unwrap());
        let b = serialize_design(&generate_design(&cfg, 42).unwrap());
        assert_eq!(a, b);
        let c = serialize_design(&generate_design(&cfg, 43).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn unbiased_power_is_baseline() {
        let cfg = GeneratorConfig {
            hot_cold_ratio: 1.0,
            hot_clusters: 0,
            ..GeneratorConfig::default()
        };
        let d = generate_design(&cfg, 5).unwrap();
        for c in &d.cells {
            assert_eq!(c.power, cfg.baseline_power_density * c.area());
        }
    }

    #[test]
    fn placed_area_hits_target() {
        let cfg = GeneratorConfig {
            utilization: 0.6,
            ..GeneratorConfig::default()
        };
        let d = generate_design(&cfg, 1).unwrap();
        let area: f64 = d.cells.iter().map(CellInstance::area).sum();
        let max_cell = d.cells.iter().map(CellInstance::area).fold(0.0, f64::max);
        assert!((area - 0.6 * 40000.0).abs() <= max_cell, "area {area}");
    }

    #[test]
    fn overfull_is_infeasible() {
        let cfg = GeneratorConfig {
            utilization: 1.5,
            ..GeneratorConfig::default()
        };
        assert_eq!(
            generate_design(&cfg, 1).unwrap_err().code(),
            "INFEASIBLE_UTILIZATION"
        );
    }

    #[test]
    fn dense_fill_is_valid() {
        let cfg = GeneratorConfig {
            utilization: 0.95,
            die_width: 80.0,
            die_height: 80.0,
            ..GeneratorConfig::default()
        };
        let d = generate_design(&cfg, 9).unwrap();
        assert_eq!(validate_design(&d), vec![]);
    }

    #[test]
    fn generator_file_defaults_fill_in() {
        let text = r#"{"schema_version": "1", "generator": {"die_width": 100.0, "die_height": 120.0}}"#;
        let cfg = crate::design::parse_generator_config(text).unwrap();
        assert_eq!(cfg.die_height, 120.0);
        assert_eq!(cfg.layers.len(), 4);
        let bad = r#"{"schema_version": "1", "generator": {"die_widht": 100.0}}"#;
        assert!(crate::design::parse_generator_config(bad).is_err());
    }
}
