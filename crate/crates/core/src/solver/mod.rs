// SPDX-License-Identifier: Apache-2.0

//! DC power-grid sign-off oracle.
//!
//! Bumps are ideal Vdd sources, cells are constant-current sinks, and the
//! reduced nodal system is solved directly with a sparse Cholesky factor.

mod dc;
mod grid;
pub mod sparse;

pub use dc::{cell_currents, solve_dc, SolveResult, RESIDUAL_TOLERANCE};
pub use grid::{build_grid, Branch, BranchKind, GridGraph, GridNode, LoadPoint};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::design::{Design, DesignConfig};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("FLOATING_NETWORK: {0}")]
    FloatingNetwork(String),
    #[error("SINGULAR_SYSTEM: {0}")]
    SingularSystem(String),
    #[error("NO_CONVERGENCE: achieved relative residual {residual:e}")]
    NoConvergence { residual: f64 },
    #[error("LOAD_MISMATCH: expected {expected} load currents, got {found}")]
    LoadMismatch { expected: usize, found: usize },
    #[error("NEGATIVE_LOAD: load current {0} must be finite and >= 0")]
    NegativeLoad(f64),
    #[error("PARSE_ERROR: {0}")]
    Parse(String),
}

impl SolveError {
    pub fn code(&self) -> &'static str {
        match self {
            SolveError::FloatingNetwork(_) => "FLOATING_NETWORK",
            SolveError::SingularSystem(_) => "SINGULAR_SYSTEM",
            SolveError::NoConvergence { .. } => "NO_CONVERGENCE",
            SolveError::LoadMismatch { .. } => "LOAD_MISMATCH",
            SolveError::NegativeLoad(_) => "NEGATIVE_LOAD",
            SolveError::Parse(_) => "PARSE_ERROR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrViolation {
    pub cell: String,
    pub drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmViolation {
    pub branch: usize,
    pub layer: u32,
    pub current: f64,
    pub current_density: f64,
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl EmViolation {
    pub fn midpoint(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationSet {
    /// Sorted by cell id.
    pub ir: Vec<IrViolation>,
    /// Sorted by branch index.
    pub em: Vec<EmViolation>,
}

/// Applies the strict thresholds `drop > fraction * Vdd` and `J > J_limit`.
/// EM is checked on wire branches only.
pub fn compute_violations(
    grid: &GridGraph,
    result: &SolveResult,
    config: &DesignConfig,
) -> ViolationSet {
    let ir_limit = config.ir_threshold_fraction * result.supply_voltage;
    let mut ir: Vec<IrViolation> = result
        .cell_ir_drop
        .iter()
        .filter(|(_, d)| *d > ir_limit)
        .map(|(id, d)| IrViolation { cell: id.clone(), drop: *d })
        .collect();
    ir.sort_by(|a, b| a.cell.cmp(&b.cell));

    let em = grid
        .branches
        .iter()
        .enumerate()
        .filter_map(|(k, br)| {
            let j = result.branch_current_density[k]?;
            (br.kind == BranchKind::Wire && j > config.em_current_density_limit).then(|| {
                let (a, b) = (grid.nodes[br.a], grid.nodes[br.b]);
                EmViolation {
                    branch: k,
                    layer: br.layer,
                    current: result.branch_currents[k],
                    current_density: j,
                    x0: a.x,
                    y0: a.y,
                    x1: b.x,
                    y1: b.y,
                }
            })
        })
        .collect();
    ViolationSet { ir, em }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveMetadata {
    pub nodes: usize,
    pub branches: usize,
    pub wire_branches: usize,
    pub via_branches: usize,
    pub dirichlet_nodes: usize,
    pub unknowns: usize,
    pub cells: usize,
    pub supply_voltage: f64,
    pub total_load_current: f64,
    pub relative_residual: f64,
    pub max_ir_drop: f64,
    pub max_current_density: f64,
    pub ir_threshold: f64,
    pub em_current_density_limit: f64,
}

/// Golden result file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenFile {
    pub schema_version: String,
    pub metadata: SolveMetadata,
    pub cell_ir_drop: BTreeMap<String, f64>,
    pub ir: Vec<IrViolation>,
    pub em: Vec<EmViolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_voltages: Option<Vec<f64>>,
}

impl GoldenFile {
    pub fn violations(&self) -> ViolationSet {
        ViolationSet { ir: self.ir.clone(), em: self.em.clone() }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("golden serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, SolveError> {
        serde_json::from_str(text).map_err(|e| SolveError::Parse(e.to_string()))
    }
}

/// Full sign-off run on a design.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub grid: GridGraph,
    pub result: SolveResult,
    pub violations: ViolationSet,
}

impl Analysis {
    pub fn golden(&self, design: &Design, dump_voltages: bool) -> GoldenFile {
        let r = &self.result;
        let metadata = SolveMetadata {
            nodes: self.grid.nodes.len(),
            branches: self.grid.branches.len(),
            wire_branches: self.grid.wire_count(),
            via_branches: self.grid.via_count(),
            dirichlet_nodes: self.grid.dirichlet_nodes.len(),
            unknowns: r.unknowns,
            cells: design.cells.len(),
            supply_voltage: r.supply_voltage,
            total_load_current: r.total_load,
            relative_residual: r.residual,
            max_ir_drop: r.cell_ir_drop.iter().map(|(_, d)| *d).fold(0.0, f64::max),
            max_current_density: r
                .branch_current_density
                .iter()
                .flatten()
                .copied()
                .fold(0.0, f64::max),
            ir_threshold: design.config.ir_threshold_fraction * r.supply_voltage,
            em_current_density_limit: design.config.em_current_density_limit,
        };
        GoldenFile {
            schema_version: crate::design::SCHEMA_VERSION.to_string(),
            metadata,
            cell_ir_drop: r.cell_ir_drop.iter().cloned().collect(),
            ir: self.violations.ir.clone(),
            em: self.violations.em.clone(),
            node_voltages: dump_voltages.then(|| r.node_voltages.clone()),
        }
    }
}

pub fn analyze(design: &Design) -> Result<Analysis, SolveError> {
    let grid = build_grid(design)?;
    let result = solve_dc(&grid, &cell_currents(design))?;
    let violations = compute_violations(&grid, &result, &design.config);
    Ok(Analysis { grid, result, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_wire(current: f64) -> (GridGraph, SolveResult, DesignConfig) {
        let grid = GridGraph {
            nodes: vec![
                GridNode { layer: 1, x: 0.0, y: 0.0 },
                GridNode { layer: 1, x: 10.0, y: 0.0 },
            ],
            branches: vec![Branch {
                a: 0,
                b: 1,
                resistance: 1.0,
                kind: BranchKind::Wire,
                layer: 1,
                cross_section: 1.0 * 0.1,
            }],
            dirichlet_nodes: vec![0],
            loads: vec![LoadPoint { id: "c0".into(), node: 1 }],
            supply_voltage: 1.0,
        };
        let r = solve_dc(&grid, &[current]).unwrap();
        (grid, r, DesignConfig::default())
    }

    #[test]
    fn em_density_from_cross_section() {
        let (g, r, cfg) = single_wire(2e-3);
        let v = compute_violations(&g, &r, &cfg);
        assert_eq!(v.em.len(), 1);
        assert!((v.em[0].current_density - 0.02).abs() < 1e-15);
        assert_eq!(v.em[0].midpoint(), (5.0, 0.0));
    }

    #[test]
    fn ir_threshold_is_strict() {
        let (g, mut r, cfg) = single_wire(1e-3);
        r.cell_ir_drop[0].1 = 0.12;
        assert_eq!(compute_violations(&g, &r, &cfg).ir.len(), 1);
        r.cell_ir_drop[0].1 = 0.10;
        assert!(compute_violations(&g, &r, &cfg).ir.is_empty());
    }

    #[test]
    fn golden_round_trip() {
        let d = crate::design::generate_design(
            &crate::design::GeneratorConfig { die_width: 80.0, die_height: 80.0, ..Default::default() },
            2,
        )
        .unwrap();
        let a = analyze(&d).unwrap();
        let g = a.golden(&d, false);
        assert!(!g.to_json().contains("node_voltages"));
        assert_eq!(GoldenFile::parse(&g.to_json()).unwrap(), g);
        let with_v = a.golden(&d, true);
        assert_eq!(with_v.node_voltages.as_ref().unwrap().len(), a.grid.nodes.len());
    }
}
