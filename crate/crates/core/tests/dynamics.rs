mod common;

use common::{dense, fill, linear, matrix, max_diff, relu};
use edo_core::graph::NeighborTable;
use edo_core::model::{
    init_dynamics, init_inverse, inverse_forward, BatchIndex, DynNet, HopMode, ModelConfig,
    Topology, NODE_WIDTH,
};
use edo_diffnum::{Array, ParamStore, Tape};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(mode: HopMode) -> ModelConfig {
    ModelConfig {
        hop_mode: mode,
        ..ModelConfig::default()
    }
}

fn dyn_store(mode: HopMode, cond: usize, seed: u64) -> ParamStore {
    let mut s = ParamStore::new(seed);
    init_dynamics(&mut s, &cfg(mode), cond).unwrap();
    s
}

fn random_graph(n: usize, extra: usize, seed: u64) -> NeighborTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !edges.contains(&(a.min(b), a.max(b))) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    NeighborTable::from_edges(n, &edges).unwrap()
}

fn grid_table(rows: usize, cols: usize) -> NeighborTable {
    let g = edo_core::graph::grid_graph(rows, cols).unwrap();
    edo_core::graph::neighbor_table(&g).unwrap()
}

/// One propagation step via the tape.
fn step_tape(
    s: &ParamStore,
    table: &NeighborTable,
    mode: HopMode,
    nodes: &Array,
    h: &Array,
    cond: Option<&Array>,
) -> Array {
    let idx = BatchIndex::new(&Topology::new(table, mode), 1);
    let mut t = Tape::new();
    let net = DynNet::load(&mut t, s).unwrap();
    let c = cond.map(|c| t.constant(c.clone()).unwrap());
    let terms = net.edge_terms(&mut t, &idx, nodes, c).unwrap();
    let hv = t.constant(h.clone()).unwrap();
    let out = net.propagate(&mut t, &idx, hv, &terms).unwrap();
    t.value(out).clone()
}

/// The same step written node by node.
fn step_naive(
    s: &ParamStore,
    table: &NeighborTable,
    mode: HopMode,
    nodes: &Array,
    h: &Array,
    cond: Option<&[f64]>,
) -> Vec<f64> {
    let n = table.num_nodes();
    let get = |k: &str| s.get(k).unwrap();
    let sets: Vec<Vec<Vec<usize>>> = match mode {
        HopMode::Separate => vec![table.hop1.clone(), table.hop2.clone()],
        HopMode::Union => vec![(0..n)
            .map(|v| {
                table.hop1[v]
                    .iter()
                    .chain(&table.hop2[v])
                    .copied()
                    .collect()
            })
            .collect()],
    };
    let hid = h.cols();
    let mut out = Vec::new();
    for v in 0..n {
        let mut input = h.row(v).to_vec();
        for set in &sets {
            let mut acc = vec![0.0; hid];
            for &u in &set[v] {
                let (pu, pv) = (nodes.row(u), nodes.row(v));
                let off = [pu[0] - pv[0], pu[1] - pv[1], pu[2] - pv[2]];
                let geo = [
                    off[0],
                    off[1],
                    off[2],
                    (off[0] * off[0] + off[1] * off[1] + off[2] * off[2]).sqrt(),
                ];
                let mut pre = linear(get("dyn.psi.w_self"), h.row(v));
                let parts = [
                    linear(get("dyn.psi.w_nbr"), h.row(u)),
                    linear(get("dyn.psi.w_geo"), &geo),
                    get("dyn.psi.b1").data().to_vec(),
                ];
                for p in parts.iter() {
                    for (a, b) in pre.iter_mut().zip(p) {
                        *a += b;
                    }
                }
                if let Some(z) = cond {
                    for (a, b) in pre.iter_mut().zip(linear(get("dyn.psi.w_cond"), z)) {
                        *a += b;
                    }
                }
                let msg = linear(get("dyn.psi.w2"), &relu(pre));
                for ((a, m), b) in acc.iter_mut().zip(msg).zip(get("dyn.psi.b2").data()) {
                    *a += m + b;
                }
            }
            input.extend(acc);
        }
        out.extend(dense(s, "dyn.phi2", &relu(dense(s, "dyn.phi1", &input))));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn propagate_matches_naive_loops(seed in 0u64..10_000, extra in 0usize..15, union in any::<bool>(), with_cond in any::<bool>()) {
        let mode = if union { HopMode::Union } else { HopMode::Separate };
        let cw = if with_cond { 32 } else { 0 };
        let s = dyn_store(mode, cw, seed);
        let table = random_graph(10, extra, seed);
        let nodes = matrix(10, NODE_WIDTH, seed);
        let h = matrix(10, 32, seed + 7);
        let z = matrix(1, 32, seed + 3);
        let cond = with_cond.then_some(&z);
        let a = step_tape(&s, &table, mode, &nodes, &h, cond);
        let b = step_naive(&s, &table, mode, &nodes, &h, cond.map(|c| c.data()));
        prop_assert!(max_diff(a.data(), &b) < 1e-12);
    }
}

fn forward(
    s: &ParamStore,
    table: &NeighborTable,
    nodes: &Array,
    cond: Option<&Array>,
    graphs: usize,
) -> Array {
    let idx = BatchIndex::new(&Topology::new(table, HopMode::Separate), graphs);
    let mut t = Tape::new();
    let net = DynNet::load(&mut t, s).unwrap();
    let c = cond.map(|c| t.constant(c.clone()).unwrap());
    let out = net.forward(&mut t, &idx, 4, nodes, c).unwrap();
    t.value(out).clone()
}

#[test]
fn forward_is_permutation_equivariant() {
    let n = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    edges.extend([(0, 5), (2, 9), (4, 11)]);
    let perm: Vec<usize> = vec![5, 2, 11, 0, 7, 3, 9, 1, 10, 4, 8, 6];
    // Node i of the original becomes node perm[i].
    let pedges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let t1 = NeighborTable::from_edges(n, &edges).unwrap();
    let t2 = NeighborTable::from_edges(n, &pedges).unwrap();
    let s = dyn_store(HopMode::Separate, 32, 5);
    let nodes = matrix(n, NODE_WIDTH, 2);
    let mut pnodes = vec![0.0; n * NODE_WIDTH];
    for i in 0..n {
        pnodes[perm[i] * NODE_WIDTH..(perm[i] + 1) * NODE_WIDTH].copy_from_slice(nodes.row(i));
    }
    let pnodes = Array::new(vec![n, NODE_WIDTH], pnodes).unwrap();
    let z = matrix(1, 32, 8);
    let a = forward(&s, &t1, &nodes, Some(&z), 1);
    let b = forward(&s, &t2, &pnodes, Some(&z), 1);
    for i in 0..n {
        assert!(max_diff(a.row(i), b.row(perm[i])) < 1e-12);
    }
}

#[test]
fn ring_with_equal_nodes_keeps_states_equal() {
    let n = 8;
    let edges: Vec<(usize, usize)> = (0..n)
        .map(|i| (i.min((i + 1) % n), i.max((i + 1) % n)))
        .collect();
    let table = NeighborTable::from_edges(n, &edges).unwrap();
    let s = dyn_store(HopMode::Separate, 0, 6);
    let row = [0.1, -0.3, 0.2, 0.7, 1.0];
    let nodes = Array::new(vec![n, NODE_WIDTH], row.repeat(n)).unwrap();
    let h = Array::new(vec![n, 32], matrix(1, 32, 1).data().repeat(n)).unwrap();
    let out = step_tape(&s, &table, HopMode::Separate, &nodes, &h, None);
    for v in 1..n {
        assert!(max_diff(out.row(0), out.row(v)) < 1e-12);
    }
    let full = forward(&s, &table, &nodes, None, 1);
    for v in 1..n {
        assert!(max_diff(full.row(0), full.row(v)) < 1e-12);
    }
}

#[test]
fn zero_message_net_feeds_zeros_to_update() {
    let mut s = dyn_store(HopMode::Separate, 32, 7);
    fill(&mut s, "dyn.psi.", 0.0);
    let table = grid_table(4, 4);
    let nodes = matrix(16, NODE_WIDTH, 3);
    let h = matrix(16, 32, 4);
    let z = matrix(1, 32, 5);
    let out = step_tape(&s, &table, HopMode::Separate, &nodes, &h, Some(&z));
    for v in 0..16 {
        let mut input = h.row(v).to_vec();
        input.extend(vec![0.0; 64]);
        let expect = dense(&s, "dyn.phi2", &relu(dense(&s, "dyn.phi1", &input)));
        assert!(max_diff(out.row(v), &expect) < 1e-12);
    }
}

#[test]
fn zeroed_decoder_predicts_no_motion() {
    let mut s = dyn_store(HopMode::Separate, 32, 8);
    fill(&mut s, "dyn.dec2", 0.0);
    let table = grid_table(8, 8);
    let out = forward(
        &s,
        &table,
        &matrix(128, NODE_WIDTH, 1),
        Some(&matrix(2, 32, 2)),
        2,
    );
    assert_eq!(out.shape(), &[128, 3]);
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_latent_leaves_only_geometry() {
    let with = dyn_store(HopMode::Separate, 32, 9);
    let mut without = ParamStore::new(0);
    for (name, slot) in with.iter() {
        if name != "dyn.psi.w_cond" {
            without.insert(name, slot.value.clone(), true).unwrap();
        }
    }
    assert_eq!(
        with.get("dyn.psi.w_geo").unwrap().shape()[1]
            + with.get("dyn.psi.w_cond").unwrap().shape()[1],
        36
    );
    let table = grid_table(8, 8);
    let nodes = matrix(64, NODE_WIDTH, 3);
    let a = forward(&with, &table, &nodes, Some(&Array::zeros(&[1, 32])), 1);
    let b = forward(&without, &table, &nodes, None, 1);
    assert_eq!(a, b);
}

#[test]
fn conditioning_mismatch_is_rejected() {
    let s = dyn_store(HopMode::Separate, 0, 1);
    let table = grid_table(3, 3);
    let idx = BatchIndex::new(&Topology::new(&table, HopMode::Separate), 1);
    let mut t = Tape::new();
    let net = DynNet::load(&mut t, &s).unwrap();
    let z = t.constant(matrix(1, 32, 0)).unwrap();
    assert!(net
        .forward(&mut t, &idx, 2, &matrix(9, NODE_WIDTH, 0), Some(z))
        .is_err());
    assert!(net
        .forward(&mut t, &idx, 2, &matrix(8, NODE_WIDTH, 0), None)
        .is_err());
}

fn inverse(
    s: &ParamStore,
    pairs: &Array,
    cond: Option<&Array>,
    n: usize,
    graphs: usize,
) -> Vec<f64> {
    let table = grid_table(2, n / 2);
    let idx = BatchIndex::new(&Topology::new(&table, HopMode::Separate), graphs);
    let mut t = Tape::new();
    let c = cond.map(|c| t.constant(c.clone()).unwrap());
    let out = inverse_forward(&mut t, s, &idx, pairs, c).unwrap();
    t.value(out).data().to_vec()
}

#[test]
fn inverse_with_zero_projection_returns_bias() {
    let mut s = ParamStore::new(2);
    init_inverse(&mut s, &ModelConfig::default(), 32).unwrap();
    fill(&mut s, "inv.proj2.w", 0.0);
    s.slot_mut("inv.proj2.b").unwrap().value.data_mut()[0] = 0.37;
    let out = inverse(&s, &matrix(24, 6, 1), Some(&matrix(3, 32, 2)), 8, 3);
    assert_eq!(out.len(), 3);
    for v in out {
        assert!((v - 0.37).abs() < 1e-15);
    }
}

#[test]
fn inverse_is_invariant_to_node_order() {
    let mut s = ParamStore::new(3);
    init_inverse(&mut s, &ModelConfig::default(), 0).unwrap();
    let pairs = matrix(8, 6, 4);
    let order = [3, 0, 7, 1, 6, 2, 5, 4];
    let rows: Vec<&[f64]> = order.iter().map(|&i| pairs.row(i)).collect();
    let shuffled = Array::from_rows(&rows).unwrap();
    let a = inverse(&s, &pairs, None, 8, 1);
    let b = inverse(&s, &shuffled, None, 8, 1);
    assert!((a[0] - b[0]).abs() < 1e-12);
    // Identical before and after states still give a finite action.
    let still = Array::new(
        vec![8, 6],
        (0..8)
            .flat_map(|i| {
                let p = [i as f64 * 0.1, 0.2, -0.1];
                [p, p].concat()
            })
            .collect(),
    )
    .unwrap();
    assert!(inverse(&s, &still, None, 8, 1)[0].is_finite());
}
