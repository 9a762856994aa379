// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use fastpi::solver::{Branch, BranchKind, GridGraph, GridNode, LoadPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Connected resistor network: a random spanning tree plus extra edges,
/// one to three pinned nodes and a load on roughly a third of the rest.
pub fn random_grid(seed: u64, max_nodes: usize) -> (GridGraph, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(8..=max_nodes);
    let nodes = (0..n)
        .map(|_| GridNode { layer: 1, x: rng.gen_range(0.0..100.0), y: rng.gen_range(0.0..100.0) })
        .collect();
    let mut branches = Vec::new();
    let edge = |a: usize, b: usize, rng: &mut ChaCha8Rng| Branch {
        a,
        b,
        resistance: rng.gen_range(0.05..20.0),
        kind: BranchKind::Wire,
        layer: 1,
        cross_section: rng.gen_range(0.05..2.0),
    };
    for v in 1..n {
        let u = rng.gen_range(0..v);
        branches.push(edge(u, v, &mut rng));
    }
    for _ in 0..rng.gen_range(0..n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            branches.push(edge(a, b, &mut rng));
        }
    }
    let mut pins: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..n)).collect();
    pins.sort_unstable();
    pins.dedup();
    let mut loads = Vec::new();
    let mut currents = Vec::new();
    for v in 0..n {
        if !pins.contains(&v) && rng.gen_bool(0.35) {
            loads.push(LoadPoint { id: format!("c{v}"), node: v });
            currents.push(rng.gen_range(0.0..5e-3));
        }
    }
    let grid = GridGraph { nodes, branches, dirichlet_nodes: pins, loads, supply_voltage: 1.0 };
    (grid, currents)
}

/// Ten one-ohm segments pinned at both ends, 1 mA drawn at the middle node.
pub fn ladder() -> (GridGraph, Vec<f64>) {
    let nodes = (0..=10).map(|k| GridNode { layer: 1, x: k as f64, y: 0.0 }).collect();
    let branches = (0..10)
        .map(|k| Branch { a: k, b: k + 1, resistance: 1.0, kind: BranchKind::Wire, layer: 1, cross_section: 0.1 })
        .collect();
    let grid = GridGraph {
        nodes,
        branches,
        dirichlet_nodes: vec![0, 10],
        loads: vec![LoadPoint { id: "mid".into(), node: 5 }],
        supply_voltage: 1.0,
    };
    (grid, vec![1e-3])
}

/// Node voltages from the full nodal system over free nodes, assembled
/// densely and solved by Gaussian elimination with partial pivoting.
pub fn dense_voltages(grid: &GridGraph, currents: &[f64]) -> Vec<f64> {
    let n = grid.nodes.len();
    let pinned: Vec<bool> = (0..n).map(|v| grid.dirichlet_nodes.contains(&v)).collect();
    let free: Vec<usize> = (0..n).filter(|&v| !pinned[v]).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let m = free.len();
    let mut a = vec![vec![0.0f64; m + 1]; m];
    let vdd = grid.supply_voltage;
    for br in &grid.branches {
        let g = 1.0 / br.resistance;
        for (p, q) in [(br.a, br.b), (br.b, br.a)] {
            if pinned[p] {
                continue;
            }
            let i = slot[p];
            a[i][i] += g;
            if pinned[q] {
                a[i][m] += g * vdd;
            } else {
                a[i][slot[q]] -= g;
            }
        }
    }
    for (l, &c) in grid.loads.iter().zip(currents) {
        if !pinned[l.node] {
            a[slot[l.node]][m] -= c;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        for r in 0..m {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col] / d;
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    let mut v = vec![vdd; n];
    for (i, &node) in free.iter().enumerate() {
        v[node] = a[i][m] / a[i][i];
    }
    v
}

/// max |got - want| / |want| over entries.
pub fn max_elementwise_relative(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs() / w.abs().max(f64::MIN_POSITIVE)))
}

/// max |got - want| over entries, relative to the largest |want|.
pub fn max_scaled_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    got.iter().zip(want).fold(0.0f64, |m, (g, w)| m.max((g - w).abs())) / scale.max(f64::MIN_POSITIVE)
}
