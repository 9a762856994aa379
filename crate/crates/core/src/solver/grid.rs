// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::SolveError;
use crate::design::{Design, Direction, LayerSpec, GEOM_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridNode {
    /// Metal layer index; bump pad nodes sit one above the top layer.
    pub layer: u32,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchKind {
    Wire,
    Via,
    /// Series resistance between a bump pad and its top-layer node.
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub a: usize,
    pub b: usize,
    pub resistance: f64,
    pub kind: BranchKind,
    /// Layer of a wire; lower layer of a via.
    pub layer: u32,
    /// Conductor cross-section w * t (µm²); 0 for vias and bump branches.
    pub cross_section: f64,
}

impl Branch {
    pub fn conductance(&self) -> f64 {
        1.0 / self.resistance
    }
}

/// A current sink attached to a grid node (one per cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub id: String,
    pub node: usize,
}

/// Resistor network of the supply grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridGraph {
    pub nodes: Vec<GridNode>,
    pub branches: Vec<Branch>,
    /// Nodes pinned to the supply voltage, sorted and unique.
    pub dirichlet_nodes: Vec<usize>,
    pub loads: Vec<LoadPoint>,
    pub supply_voltage: f64,
}

impl GridGraph {
    /// Checks that every load node reaches a pinned node, and returns the
    /// reachability mask.
    pub fn check_connected(&self) -> Result<Vec<bool>, SolveError> {
        let n = self.nodes.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for br in &self.branches {
            adj[br.a].push(br.b);
            adj[br.b].push(br.a);
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.dirichlet_nodes.clone();
        for &d in &self.dirichlet_nodes {
            seen[d] = true;
        }
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(load) = self.loads.iter().find(|l| !seen[l.node]) {
            return Err(SolveError::FloatingNetwork(format!(
                "load {} at node {} has no path to a supply bump",
                load.id, load.node
            )));
        }
        Ok(seen)
    }

    pub fn wire_count(&self) -> usize {
        self.branches.iter().filter(|b| b.kind == BranchKind::Wire).count()
    }

    pub fn via_count(&self) -> usize {
        self.branches.iter().filter(|b| b.kind == BranchKind::Via).count()
    }
}

/// Nearest value in a sorted slice; ties go to the lower value.
fn nearest_index(sorted: &[f64], v: f64) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let i = sorted.partition_point(|&p| p < v);
    if i == 0 {
        return Some(0);
    }
    if i == sorted.len() {
        return Some(sorted.len() - 1);
    }
    if v - sorted[i - 1] <= sorted[i] - v {
        Some(i - 1)
    } else {
        Some(i)
    }
}

struct LayerNodes {
    /// Stripe centreline coordinates.
    stripes: Vec<f64>,
    /// Per stripe: sorted positions along the stripe and their node ids.
    along: Vec<Vec<(f64, usize)>>,
}

impl LayerNodes {
    fn node_at(&self, stripe: usize, pos: f64) -> Option<usize> {
        let row = &self.along[stripe];
        let i = row.partition_point(|&(p, _)| p < pos - GEOM_EPS);
        row.get(i)
            .filter(|&&(p, _)| (p - pos).abs() <= GEOM_EPS)
            .map(|&(_, id)| id)
    }

    /// Nearest node id to (x, y); `dir` is the stripe direction of this layer.
    fn nearest(&self, dir: Direction, x: f64, y: f64) -> Option<usize> {
        let (across, along) = match dir {
            Direction::Horizontal => (y, x),
            Direction::Vertical => (x, y),
        };
        let s = nearest_index(&self.stripes, across)?;
        let positions: Vec<f64> = self.along[s].iter().map(|&(p, _)| p).collect();
        let k = nearest_index(&positions, along)?;
        Some(self.along[s][k].1)
    }
}

fn node_xy(dir: Direction, stripe: f64, along: f64) -> (f64, f64) {
    match dir {
        Direction::Horizontal => (along, stripe),
        Direction::Vertical => (stripe, along),
    }
}

/// Collapses the endpoints of 0-ohm vias into one node and compacts the node
/// list. Returns the old-to-new node index map.
fn merge_zero_ohm_vias(grid: &mut GridGraph) -> Vec<usize> {
    let n = grid.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut u: usize) -> usize {
        while parent[u] != u {
            parent[u] = parent[parent[u]];
            u = parent[u];
        }
        u
    }
    let mut any = false;
    for br in &grid.branches {
        if br.kind == BranchKind::Via && br.resistance == 0.0 {
            let (ra, rb) = (find(&mut parent, br.a), find(&mut parent, br.b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
            any = true;
        }
    }
    if !any {
        return (0..n).collect();
    }
    let mut new_index = vec![usize::MAX; n];
    let mut nodes = Vec::new();
    for u in 0..n {
        if find(&mut parent, u) == u {
            new_index[u] = nodes.len();
            nodes.push(grid.nodes[u]);
        }
    }
    let alias: Vec<usize> = (0..n).map(|u| new_index[find(&mut parent, u)]).collect();
    grid.nodes = nodes;
    grid.branches.retain(|br| !(br.kind == BranchKind::Via && br.resistance == 0.0));
    for br in &mut grid.branches {
        br.a = alias[br.a];
        br.b = alias[br.b];
    }
    alias
}

/// Materializes the supply network described by the layer stripe stack,
/// attaches one load point per cell and pins the bumps.
pub fn build_grid(design: &Design) -> Result<GridGraph, SolveError> {
    let die = &design.die;
    let layers: &[LayerSpec] = &design.layers;
    let stripes: Vec<Vec<f64>> = layers.iter().map(|l| l.stripe_positions(die)).collect();

    let mut grid = GridGraph {
        supply_voltage: design.supply_voltage(),
        ..GridGraph::default()
    };
    let mut per_layer: Vec<LayerNodes> = Vec::with_capacity(layers.len());

    for (li, layer) in layers.iter().enumerate() {
        let mut cross: Vec<f64> = Vec::new();
        if li > 0 {
            cross.extend_from_slice(&stripes[li - 1]);
        }
        if li + 1 < layers.len() {
            cross.extend_from_slice(&stripes[li + 1]);
        }
        cross.sort_by(f64::total_cmp);
        cross.dedup_by(|a, b| (*a - *b).abs() <= GEOM_EPS);

        let mut along = Vec::with_capacity(stripes[li].len());
        for &s in &stripes[li] {
            let mut row = Vec::with_capacity(cross.len());
            for (k, &p) in cross.iter().enumerate() {
                let (x, y) = node_xy(layer.direction, s, p);
                let id = grid.nodes.len();
                grid.nodes.push(GridNode { layer: layer.index, x, y });
                row.push((p, id));
                if k > 0 {
                    let (prev_p, prev_id) = row[k - 1];
                    let len = p - prev_p;
                    grid.branches.push(Branch {
                        a: prev_id,
                        b: id,
                        resistance: layer.sheet_resistance * len / layer.width,
                        kind: BranchKind::Wire,
                        layer: layer.index,
                        cross_section: layer.cross_section(),
                    });
                }
            }
            along.push(row);
        }
        per_layer.push(LayerNodes { stripes: stripes[li].clone(), along });
    }

    // Vias at every intersection of adjacent layers.
    for li in 0..layers.len().saturating_sub(1) {
        let (lo, hi) = (&per_layer[li], &per_layer[li + 1]);
        for (a, &sa) in lo.stripes.iter().enumerate() {
            for (b, &sb) in hi.stripes.iter().enumerate() {
                let (Some(na), Some(nb)) = (lo.node_at(a, sb), hi.node_at(b, sa)) else {
                    continue;
                };
                grid.branches.push(Branch {
                    a: na,
                    b: nb,
                    resistance: layers[li].via_resistance_to_above,
                    kind: BranchKind::Via,
                    layer: layers[li].index,
                    cross_section: 0.0,
                });
            }
        }
    }

    let alias = merge_zero_ohm_vias(&mut grid);
    let remap = |id: usize| alias[id];

    if let Some(bottom) = per_layer.first() {
        let dir = layers[0].direction;
        for cell in &design.cells {
            let (cx, cy) = cell.center();
            if let Some(node) = bottom.nearest(dir, cx, cy) {
                grid.loads.push(LoadPoint { id: cell.id.clone(), node: remap(node) });
            } else {
                return Err(SolveError::FloatingNetwork(format!(
                    "cell {} has no layer-1 node to attach to",
                    cell.id
                )));
            }
        }
    } else if let Some(cell) = design.cells.first() {
        return Err(SolveError::FloatingNetwork(format!(
            "cell {} has no layer-1 node to attach to",
            cell.id
        )));
    }

    if let (Some(top), Some(top_spec)) = (per_layer.last(), layers.last()) {
        let mut pins = Vec::new();
        for bump in design.c4.in_die_bumps(die) {
            let Some(node) = top.nearest(top_spec.direction, bump.x, bump.y).map(remap) else {
                continue;
            };
            if design.c4.series_resistance > 0.0 {
                let pad = grid.nodes.len();
                grid.nodes.push(GridNode { layer: top_spec.index + 1, x: bump.x, y: bump.y });
                grid.branches.push(Branch {
                    a: pad,
                    b: node,
                    resistance: design.c4.series_resistance,
                    kind: BranchKind::Bump,
                    layer: top_spec.index,
                    cross_section: 0.0,
                });
                pins.push(pad);
            } else {
                pins.push(node);
            }
        }
        pins.sort_unstable();
        pins.dedup();
        grid.dirichlet_nodes = pins;
    }

    grid.check_connected()?;
    Ok(grid)
}
