// SPDX-License-Identifier: Apache-2.0

use super::grid::{BranchKind, GridGraph};
use super::sparse::{EnvelopeCholesky, FactorError, SymmetricCsr};
use super::SolveError;
use crate::design::Design;

/// Kirchhoff residual contract relative to total load current.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
const MAX_REFINEMENT_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub supply_voltage: f64,
    pub node_voltages: Vec<f64>,
    /// Vdd minus node voltage, solved for directly to avoid cancellation.
    pub node_drops: Vec<f64>,
    /// Signed, positive from `a` to `b`.
    pub branch_currents: Vec<f64>,
    /// |I| / (w * t) for wire branches; `None` for vias and bump branches.
    pub branch_current_density: Vec<Option<f64>>,
    /// Drop at each load's attachment node, aligned with `GridGraph::loads`.
    pub cell_ir_drop: Vec<(String, f64)>,
    /// Current sourced by each pinned node, aligned with `dirichlet_nodes`.
    pub source_currents: Vec<f64>,
    pub total_load: f64,
    /// max |KCL residual| / total load (absolute when the load is zero).
    pub residual: f64,
    pub unknowns: usize,
}

/// Cell load currents I = P / Vdd in `GridGraph::loads` order.
pub fn cell_currents(design: &Design) -> Vec<f64> {
    let vdd = design.supply_voltage();
    design.cells.iter().map(|c| c.power / vdd).collect()
}

fn kcl_residual(grid: &GridGraph, drops: &[f64], injection: &[f64], pinned: &[bool]) -> Vec<f64> {
    let mut r = injection.to_vec();
    for br in &grid.branches {
        let i = (drops[br.b] - drops[br.a]) * br.conductance();
        // residual = load - current entering through branches
        r[br.a] += i;
        r[br.b] -= i;
    }
    for (k, p) in pinned.iter().enumerate() {
        if *p {
            r[k] = 0.0;
        }
    }
    r
}

/// Solves the DC operating point with pinned nodes at Vdd and loads sinking
/// `loads[k]` amperes at `grid.loads[k]`.
pub fn solve_dc(grid: &GridGraph, loads: &[f64]) -> Result<SolveResult, SolveError> {
    if loads.len() != grid.loads.len() {
        return Err(SolveError::LoadMismatch { expected: grid.loads.len(), found: loads.len() });
    }
    if let Some(bad) = loads.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(SolveError::NegativeLoad(*bad));
    }
    let reachable = grid.check_connected()?;
    let n = grid.nodes.len();
    let mut pinned = vec![false; n];
    for &d in &grid.dirichlet_nodes {
        pinned[d] = true;
    }

    let mut injection = vec![0.0; n];
    for (lp, &i) in grid.loads.iter().zip(loads) {
        injection[lp.node] += i;
    }
    let total_load: f64 = loads.iter().sum();

    // Unknowns: reachable, unpinned nodes. Unreachable nodes carry no load
    // (checked above) and are left at zero drop.
    let mut index = vec![usize::MAX; n];
    let mut unknown_nodes = Vec::new();
    for k in 0..n {
        if reachable[k] && !pinned[k] {
            index[k] = unknown_nodes.len();
            unknown_nodes.push(k);
        }
    }
    let m = unknown_nodes.len();

    let mut drops = vec![0.0; n];
    if total_load > 0.0 && m > 0 {
        let mut trip = Vec::with_capacity(4 * grid.branches.len());
        for br in &grid.branches {
            if !(br.resistance > 0.0) {
                return Err(SolveError::SingularSystem(format!(
                    "branch {}-{} has non-positive resistance {}",
                    br.a, br.b, br.resistance
                )));
            }
            let g = br.conductance();
            let (ia, ib) = (index[br.a], index[br.b]);
            if ia != usize::MAX {
                trip.push((ia, ia, g));
            }
            if ib != usize::MAX {
                trip.push((ib, ib, g));
            }
            if ia != usize::MAX && ib != usize::MAX {
                trip.push((ia, ib, -g));
                trip.push((ib, ia, -g));
            }
        }
        let a = SymmetricCsr::from_triplets(m, trip);
        let rhs: Vec<f64> = unknown_nodes.iter().map(|&k| injection[k]).collect();
        let chol = EnvelopeCholesky::factor(&a).map_err(|FactorError::NotPositiveDefinite { row, pivot }| {
            SolveError::SingularSystem(format!("pivot {pivot:e} at permuted row {row}"))
        })?;
        let mut x = chol.solve(&rhs);
        for _ in 0..MAX_REFINEMENT_STEPS {
            let ax = a.mul_vec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            let worst = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if worst <= 1e-3 * RESIDUAL_TOLERANCE * total_load {
                break;
            }
            let dx = chol.solve(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        for (u, &k) in unknown_nodes.iter().enumerate() {
            drops[k] = x[u];
        }
    }

    let r = kcl_residual(grid, &drops, &injection, &pinned);
    let worst = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let residual = if total_load > 0.0 { worst / total_load } else { worst };
    if residual > RESIDUAL_TOLERANCE {
        return Err(SolveError::NoConvergence { residual });
    }

    let vdd = grid.supply_voltage;
    let branch_currents: Vec<f64> = grid
        .branches
        .iter()
        .map(|br| (drops[br.b] - drops[br.a]) * br.conductance())
        .collect();
    let branch_current_density = grid
        .branches
        .iter()
        .zip(&branch_currents)
        .map(|(br, i)| (br.kind == BranchKind::Wire).then(|| i.abs() / br.cross_section))
        .collect();

    let mut sourced = vec![0.0; n];
    for (br, &i) in grid.branches.iter().zip(&branch_currents) {
        sourced[br.a] += i;
        sourced[br.b] -= i;
    }
    let source_currents = grid.dirichlet_nodes.iter().map(|&d| sourced[d]).collect();

    Ok(SolveResult {
        supply_voltage: vdd,
        node_voltages: drops.iter().map(|d| vdd - d).collect(),
        cell_ir_drop: grid.loads.iter().map(|lp| (lp.id.clone(), drops[lp.node])).collect(),
        node_drops: drops,
        branch_currents,
        branch_current_density,
        source_currents,
        total_load,
        residual,
        unknowns: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::grid::{Branch, GridNode, LoadPoint};

    /// One stripe of 10 one-ohm segments pinned at both ends.
    pub(crate) fn ladder() -> GridGraph {
        let nodes = (0..=10)
            .map(|k| GridNode { layer: 1, x: k as f64, y: 0.0 })
            .collect();
        let branches = (0..10)
            .map(|k| Branch {
                a: k,
                b: k + 1,
                resistance: 1.0,
                kind: BranchKind::Wire,
                layer: 1,
                cross_section: 0.1,
            })
            .collect();
        GridGraph {
            nodes,
            branches,
            dirichlet_nodes: vec![0, 10],
            loads: vec![LoadPoint { id: "mid".into(), node: 5 }],
            supply_voltage: 1.0,
        }
    }

    #[test]
    fn ladder_mid_drop() {
        let r = solve_dc(&ladder(), &[1e-3]).unwrap();
        assert!((r.node_voltages[5] - 0.9975).abs() <= 1e-9 * 0.9975);
        for s in &r.source_currents {
            assert!((s - 0.5e-3).abs() <= 1e-9 * 0.5e-3);
        }
    }

    #[test]
    fn zero_load_is_flat() {
        let r = solve_dc(&ladder(), &[0.0]).unwrap();
        assert!(r.node_voltages.iter().all(|&v| v == 1.0));
        assert!(r.branch_currents.iter().all(|&i| i == 0.0));
    }

    #[test]
    fn negative_load_rejected() {
        assert!(solve_dc(&ladder(), &[-1.0]).is_err());
        assert!(matches!(
            solve_dc(&ladder(), &[]),
            Err(SolveError::LoadMismatch { .. })
        ));
    }

    #[test]
    fn zero_resistance_branch_is_singular() {
        let mut g = ladder();
        g.branches[3].resistance = 0.0;
        assert_eq!(solve_dc(&g, &[1e-3]).unwrap_err().code(), "SINGULAR_SYSTEM");
    }
}
