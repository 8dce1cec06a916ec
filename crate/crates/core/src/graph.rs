//! Cloth graphs, neighbour sets and feature normalization.

use std::collections::VecDeque;

use edo_clothsim::{ClothState, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A cloth state as a graph over a `rows × cols` grid of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GraphRecord", into = "GraphRecord")]
pub struct GraphState {
    pub rows: usize,
    pub cols: usize,
    pub positions: Vec<Vec3>,
    /// Undirected edges with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub gripper_mask: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    rows: usize,
    cols: usize,
    positions: Vec<Vec3>,
    gripper_mask: Vec<bool>,
}

impl From<GraphRecord> for GraphState {
    fn from(r: GraphRecord) -> Self {
        GraphState {
            edges: grid_edges(r.rows, r.cols),
            rows: r.rows,
            cols: r.cols,
            positions: r.positions,
            gripper_mask: r.gripper_mask,
        }
    }
}

impl From<GraphState> for GraphRecord {
    fn from(g: GraphState) -> Self {
        GraphRecord {
            rows: g.rows,
            cols: g.cols,
            positions: g.positions,
            gripper_mask: g.gripper_mask,
        }
    }
}

impl GraphState {
    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    /// Checks the structural invariants: sizes agree, no self-loops, no
    /// duplicate edges, edge endpoints in range.
    pub fn validate(&self) -> Result<()> {
        let n = self.rows * self.cols;
        if self.positions.len() != n || self.gripper_mask.len() != n {
            return Err(CoreError::Data(format!(
                "graph {}x{} has {} positions and {} mask entries",
                self.rows,
                self.cols,
                self.positions.len(),
                self.gripper_mask.len()
            )));
        }
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &self.edges {
            if i == j || i >= n || j >= n || !seen.insert((i.min(j), i.max(j))) {
                return Err(CoreError::Data(format!("bad edge ({i}, {j})")));
            }
        }
        if self.positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(CoreError::Data("non-finite node position".into()));
        }
        Ok(())
    }
}

fn grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(2 * rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    edges
}

/// 4-connected grid with zeroed positions; rows 0 and `rows - 1` are gripped.
pub fn grid_graph(rows: usize, cols: usize) -> Result<GraphState> {
    if rows < 2 || cols < 2 {
        return Err(CoreError::Argument(format!(
            "grid needs at least 2x2 nodes, got {rows}x{cols}"
        )));
    }
    let n = rows * cols;
    let gripper_mask = (0..n)
        .map(|i| i / cols == 0 || i / cols == rows - 1)
        .collect();
    Ok(GraphState {
        rows,
        cols,
        positions: vec![[0.0; 3]; n],
        edges: grid_edges(rows, cols),
        gripper_mask,
    })
}

/// Per-node sets of nodes at graph distance exactly 1 and exactly 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborTable {
    pub hop1: Vec<Vec<usize>>,
    pub hop2: Vec<Vec<usize>>,
}

impl NeighborTable {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(CoreError::Argument(format!("edge ({i}, {j}) out of range")));
            }
            adj[i].push(j);
            adj[j].push(i);
        }
        if n > 0 && bfs(&adj, 0).iter().any(|d| d.is_none()) {
            return Err(CoreError::Argument("graph is disconnected".into()));
        }
        let mut hop1 = Vec::with_capacity(n);
        let mut hop2 = Vec::with_capacity(n);
        for v in 0..n {
            let dist = bfs(&adj, v);
            hop1.push((0..n).filter(|&u| dist[u] == Some(1)).collect());
            hop2.push((0..n).filter(|&u| dist[u] == Some(2)).collect());
        }
        Ok(Self { hop1, hop2 })
    }

    pub fn num_nodes(&self) -> usize {
        self.hop1.len()
    }
}

fn bfs(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v].unwrap();
        for &u in &adj[v] {
            if dist[u].is_none() {
                dist[u] = Some(d + 1);
                queue.push_back(u);
            }
        }
    }
    dist
}

pub fn neighbor_table(graph: &GraphState) -> Result<NeighborTable> {
    NeighborTable::from_edges(graph.num_nodes(), &graph.edges)
}

/// Grid indices kept when reducing `src` points to `dst`: evenly spread,
/// always including both ends.
fn downsample_indices(src: usize, dst: usize) -> Result<Vec<usize>> {
    if dst < 2 || src < dst || (!src.is_multiple_of(dst) && !(src - 1).is_multiple_of(dst - 1)) {
        return Err(CoreError::Argument(format!(
            "cannot downsample {src} grid points to {dst}"
        )));
    }
    Ok((0..dst)
        .map(|i| ((i * (src - 1)) as f64 / (dst - 1) as f64).round() as usize)
        .collect())
}

/// Reduces a simulated cloth to a `rows × cols` graph by picking evenly
/// spaced grid nodes (corners always kept). Gripper membership is taken from
/// the constrained nodes of the simulation.
pub fn downsample_cloth(state: &ClothState, rows: usize, cols: usize) -> Result<GraphState> {
    let mask = state.fixed_mask();
    downsample_grid(state.rows, state.cols, &state.positions, &mask, rows, cols)
}

pub fn downsample_grid(
    src_rows: usize,
    src_cols: usize,
    positions: &[Vec3],
    mask: &[bool],
    rows: usize,
    cols: usize,
) -> Result<GraphState> {
    let ri = downsample_indices(src_rows, rows)?;
    let ci = downsample_indices(src_cols, cols)?;
    let mut g = grid_graph(rows, cols)?;
    for (r, &sr) in ri.iter().enumerate() {
        for (c, &sc) in ci.iter().enumerate() {
            g.positions[r * cols + c] = positions[sr * src_cols + sc];
            g.gripper_mask[r * cols + c] = mask[sr * src_cols + sc];
        }
    }
    Ok(g)
}

/// Per-feature standardization fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Fits mean and population standard deviation of each column of the
    /// row-major `data` (width `names.len()`).
    pub fn fit(names: &[&str], data: &[f64]) -> Result<Self> {
        let w = names.len();
        if w == 0 || data.is_empty() || !data.len().is_multiple_of(w) {
            return Err(CoreError::Argument(format!(
                "cannot fit {w} features on {} values",
                data.len()
            )));
        }
        let n = (data.len() / w) as f64;
        let mut mean = vec![0.0; w];
        for row in data.chunks(w) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; w];
        for row in data.chunks(w) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut std = Vec::with_capacity(w);
        for (k, v) in var.iter().enumerate() {
            let s = (v / n).sqrt();
            if !(s > 1e-12 * mean[k].abs().max(1.0)) {
                return Err(CoreError::Data(format!(
                    "feature '{}' has zero variance",
                    names[k]
                )));
            }
            std.push(s);
        }
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            mean,
            std,
        })
    }

    /// Fits the components of a vector quantity. A component whose spread is
    /// below `1e-9` of the largest component spread (e.g. a force component
    /// that vanishes by symmetry) is scaled by that largest spread instead,
    /// so numerical noise stays near zero rather than being amplified.
    pub fn fit_vector(names: &[&str], data: &[f64]) -> Result<Self> {
        let w = names.len();
        if w == 0 || data.is_empty() || !data.len().is_multiple_of(w) {
            return Err(CoreError::Argument(format!(
                "cannot fit {w} features on {} values",
                data.len()
            )));
        }
        let n = (data.len() / w) as f64;
        let mean: Vec<f64> = (0..w)
            .map(|k| data.iter().skip(k).step_by(w).sum::<f64>() / n)
            .collect();
        let raw: Vec<f64> = (0..w)
            .map(|k| {
                let v = data
                    .iter()
                    .skip(k)
                    .step_by(w)
                    .map(|x| (x - mean[k]).powi(2))
                    .sum::<f64>();
                (v / n).sqrt()
            })
            .collect();
        let top = raw.iter().copied().fold(0.0, f64::max);
        let scale = mean.iter().fold(1.0_f64, |a, m| a.max(m.abs()));
        if !(top > 1e-12 * scale) {
            return Err(CoreError::Data(format!(
                "feature '{}' has zero variance",
                names[0]
            )));
        }
        let std = raw
            .iter()
            .map(|&s| if s < 1e-9 * top { top } else { s })
            .collect();
        Ok(Self {
            names: names.iter().map(|s| s.to_string()).collect(),
            mean,
            std,
        })
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: &[f64]) -> Vec<f64> {
        let w = self.width();
        data.iter()
            .enumerate()
            .map(|(i, x)| (x - self.mean[i % w]) / self.std[i % w])
            .collect()
    }

    pub fn invert(&self, data: &[f64]) -> Vec<f64> {
        let w = self.width();
        data.iter()
            .enumerate()
            .map(|(i, x)| x * self.std[i % w] + self.mean[i % w])
            .collect()
    }

    /// Rescales normalized differences back to raw units (no mean shift).
    pub fn invert_scale(&self, data: &[f64]) -> Vec<f64> {
        let w = self.width();
        data.iter()
            .enumerate()
            .map(|(i, x)| x * self.std[i % w])
            .collect()
    }
}

pub(crate) fn flatten(points: &[Vec3]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}
