//! Recovering a grid graph from an unordered cloth point cloud.
//!
//! Each pair of corresponding gripper nodes defines a slicing plane that
//! contains both nodes and is orthogonal to the gripper axis. Cloud points
//! close to the plane are projected onto it, ordered by nearest-neighbour
//! chaining from the first gripper node and turned into a polyline, along
//! which the interior nodes are placed at equal arc length.

use edo_clothsim::Vec3;

use crate::error::{CoreError, Result};
use crate::graph::{grid_graph, GraphState};

/// Interior nodes produced per slice.
pub const INTERIOR_NODES: usize = 6;
/// Half-width of the moving average that straightens the chained polyline.
const SMOOTH_HALF_WINDOW: usize = 2;

/// Builds a `(INTERIOR_NODES + 2) × k` graph from a point cloud and the two
/// grippers, each given as `k` equidistant nodes. Row 0 is the first gripper.
pub fn pointcloud_to_graph(cloud: &[Vec3], grippers: [&[Vec3]; 2]) -> Result<GraphState> {
    let [ga, gb] = grippers;
    let k = ga.len();
    if k < 2 || gb.len() != k {
        return Err(CoreError::Argument(format!(
            "grippers need the same number (>= 2) of nodes, got {} and {}",
            ga.len(),
            gb.len()
        )));
    }
    let axis = sub(ga[k - 1], ga[0]);
    let gap = norm(axis) / (k - 1) as f64;
    let eps = gap / 2.0;
    let rows = INTERIOR_NODES + 2;
    let mut g = grid_graph(rows, k)?;
    for j in 0..k {
        let nodes = slice(cloud, ga[j], gb[j], axis, eps).map_err(|count| {
            CoreError::Data(format!(
                "slice {j} holds {count} points, need at least {INTERIOR_NODES}"
            ))
        })?;
        g.positions[j] = ga[j];
        g.positions[(rows - 1) * k + j] = gb[j];
        for (r, p) in nodes.into_iter().enumerate() {
            g.positions[(r + 1) * k + j] = p;
        }
    }
    Ok(g)
}

/// Interior nodes of one slice, or the number of points found if too few.
fn slice(
    cloud: &[Vec3],
    a: Vec3,
    b: Vec3,
    axis: Vec3,
    eps: f64,
) -> std::result::Result<Vec<Vec3>, usize> {
    let u = sub(b, a);
    let uu = dot(u, u);
    let mut n = axis;
    if uu > 0.0 {
        n = sub(n, scale(u, dot(n, u) / uu));
    }
    let nn = norm(n);
    if nn == 0.0 {
        return Err(0);
    }
    let n = scale(n, 1.0 / nn);
    let mut pts: Vec<Vec3> = cloud
        .iter()
        .filter_map(|&p| {
            let d = dot(sub(p, a), n);
            (d.abs() <= eps).then(|| sub(p, scale(n, d)))
        })
        .collect();
    if pts.len() < INTERIOR_NODES {
        return Err(pts.len());
    }
    // Nearest-neighbour chain starting at the first gripper node.
    let mut chain = Vec::with_capacity(pts.len());
    let mut cur = a;
    while !pts.is_empty() {
        let (best, _) = pts
            .iter()
            .enumerate()
            .map(|(i, p)| (i, dot(sub(*p, cur), sub(*p, cur))))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            );
        cur = pts.swap_remove(best);
        chain.push(cur);
    }
    let smoothed: Vec<Vec3> = (0..chain.len())
        .map(|i| {
            let lo = i.saturating_sub(SMOOTH_HALF_WINDOW);
            let hi = (i + SMOOTH_HALF_WINDOW + 1).min(chain.len());
            let mut c = [0.0; 3];
            for p in &chain[lo..hi] {
                for d in 0..3 {
                    c[d] += p[d];
                }
            }
            scale(c, 1.0 / (hi - lo) as f64)
        })
        .collect();
    let mut line = Vec::with_capacity(smoothed.len() + 2);
    line.push(a);
    line.extend(smoothed);
    line.push(b);
    let mut cum = vec![0.0];
    for w in line.windows(2) {
        cum.push(cum.last().unwrap() + norm(sub(w[1], w[0])));
    }
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(INTERIOR_NODES);
    let mut seg = 0;
    for i in 1..=INTERIOR_NODES {
        let s = total * i as f64 / (INTERIOR_NODES + 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        let (p, q) = (line[seg], line[seg + 1]);
        out.push([
            p[0] + t * (q[0] - p[0]),
            p[1] + t * (q[1] - p[1]),
            p[2] + t * (q[2] - p[2]),
        ]);
    }
    Ok(out)
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
