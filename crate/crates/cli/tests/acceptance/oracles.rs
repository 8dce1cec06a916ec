//! Independent reference implementations used by the structural and
//! simulator checks.

use edo_core::model::HopMode;
use edo_diffnum::{Array, ParamStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected graph: a random spanning tree plus `extra` chords.
pub fn random_edges(n: usize, extra: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Array::new(vec![rows, cols], data).unwrap()
}

/// 1-hop and exactly-2-hop neighbour lists from the adjacency matrix.
fn hop_sets(n: usize, edges: &[(usize, usize)]) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut adj = vec![vec![false; n]; n];
    for &(a, b) in edges {
        adj[a][b] = true;
        adj[b][a] = true;
    }
    let mut one = vec![Vec::new(); n];
    let mut two = vec![Vec::new(); n];
    for v in 0..n {
        for u in 0..n {
            if adj[v][u] {
                one[v].push(u);
            } else if u != v && (0..n).any(|w| adj[v][w] && adj[w][u]) {
                two[v].push(u);
            }
        }
    }
    (one, two)
}

fn mat_vec(w: &Array, x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (w.shape()[0], w.shape()[1]);
    assert_eq!(cols, x.len());
    (0..rows)
        .map(|r| (0..cols).map(|c| w.data()[r * cols + c] * x[c]).sum())
        .collect()
}

fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn dense(s: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let mut y = mat_vec(s.get(&format!("{name}.w")).unwrap(), x);
    add(&mut y, s.get(&format!("{name}.b")).unwrap().data());
    y
}

fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// One message-passing step written as a double loop over nodes and their
/// neighbours.
pub fn propagate_naive(
    s: &ParamStore,
    n: usize,
    edges: &[(usize, usize)],
    mode: HopMode,
    nodes: &Array,
    h: &Array,
    cond: Option<&[f64]>,
) -> Vec<f64> {
    let get = |k: &str| s.get(k).unwrap();
    let (one, two) = hop_sets(n, edges);
    let sets = match mode {
        HopMode::Separate => vec![one, two],
        HopMode::Union => vec![one
            .iter()
            .zip(&two)
            .map(|(a, b)| [a.clone(), b.clone()].concat())
            .collect()],
    };
    let mut out = Vec::new();
    for v in 0..n {
        let mut input = h.row(v).to_vec();
        for set in &sets {
            let mut acc = vec![0.0; h.cols()];
            for &u in &set[v] {
                let (pu, pv) = (nodes.row(u), nodes.row(v));
                let d = [pu[0] - pv[0], pu[1] - pv[1], pu[2] - pv[2]];
                let geo = [
                    d[0],
                    d[1],
                    d[2],
                    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(),
                ];
                let mut pre = mat_vec(get("dyn.psi.w_self"), h.row(v));
                add(&mut pre, &mat_vec(get("dyn.psi.w_nbr"), h.row(u)));
                add(&mut pre, &mat_vec(get("dyn.psi.w_geo"), &geo));
                add(&mut pre, get("dyn.psi.b1").data());
                if let Some(z) = cond {
                    add(&mut pre, &mat_vec(get("dyn.psi.w_cond"), z));
                }
                let mut msg = mat_vec(get("dyn.psi.w2"), &relu(pre));
                add(&mut msg, get("dyn.psi.b2").data());
                add(&mut acc, &msg);
            }
            input.extend(acc);
        }
        out.extend(dense(s, "dyn.phi2", &relu(dense(s, "dyn.phi1", &input))));
    }
    out
}

/// Value at `at` of the least-squares polynomial of `order` through the
/// points, from the normal equations.
pub fn least_squares_at(t: &[f64], y: &[f64], order: usize, at: f64) -> f64 {
    let m = order + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (ti, yi) in t.iter().zip(y) {
        let x = ti - at;
        for r in 0..m {
            for c in 0..m {
                a[r][c] += x.powi((r + c) as i32);
            }
            a[r][m] += yi * x.powi(r as i32);
        }
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    a[0][m] / a[0][0]
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
