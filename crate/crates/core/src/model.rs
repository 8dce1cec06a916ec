//! Network definitions: the adaptation module, the graph forward-dynamics
//! model, the inverse-dynamics head and the physical-property regressor.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use edo_diffnum::{Activation, Array, ParamStore, Tape, Var};

use crate::error::{CoreError, Result};
use crate::graph::NeighborTable;

/// Per-node observation features: position and sensed force.
pub const OBS_WIDTH: usize = 6;
/// Per-node dynamics input: position, action and gripper flag.
pub const NODE_WIDTH: usize = 5;
/// Edge geometry: offset to the neighbour and its length.
pub const GEO_WIDTH: usize = 4;
/// Ground-truth parameter vector used by the oracles.
pub const PARAM_WIDTH: usize = 2;
/// Hidden width of the property regressor.
pub const DECODE_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopMode {
    /// 1-hop and 2-hop messages are summed separately and both fed to Φ.
    Separate,
    /// One sum over the union of 1-hop and 2-hop neighbours.
    Union,
}

impl fmt::Display for HopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HopMode::Separate => "separate",
            HopMode::Union => "union",
        })
    }
}

impl FromStr for HopMode {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "separate" => Ok(HopMode::Separate),
            "union" => Ok(HopMode::Union),
            _ => Err(CoreError::Argument(format!("unknown hop mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Latent size p.
    pub latent: usize,
    pub hidden: usize,
    /// Message-passing steps M.
    pub steps: usize,
    pub hop_mode: HopMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent: 32,
            hidden: 32,
            steps: 4,
            hop_mode: HopMode::Separate,
        }
    }
}

/// Model families compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    /// Dynamics conditioned on the adapted latent.
    EdoNet,
    /// No conditioning at all.
    Nc,
    /// Adapted from a single exploratory observation.
    Edo1,
    /// Latent additionally supervised with the true parameters.
    Os,
    /// Forward model fed the true parameters.
    Of,
    /// Inverse model fed the true parameters.
    Oi,
}

/// What the dynamics or inverse model is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    None,
    Latent,
    Params,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::EdoNet,
        Variant::Nc,
        Variant::Edo1,
        Variant::Os,
        Variant::Of,
        Variant::Oi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::EdoNet => "edonet",
            Variant::Nc => "nc",
            Variant::Edo1 => "edo1",
            Variant::Os => "os",
            Variant::Of => "of",
            Variant::Oi => "oi",
        }
    }

    pub fn conditioning(self) -> Conditioning {
        match self {
            Variant::Nc => Conditioning::None,
            Variant::Of | Variant::Oi => Conditioning::Params,
            _ => Conditioning::Latent,
        }
    }

    pub fn has_adaptation(self) -> bool {
        self.conditioning() == Conditioning::Latent
    }

    /// Width of the conditioning vector attached to every edge.
    pub fn cond_width(self, cfg: &ModelConfig) -> usize {
        match self.conditioning() {
            Conditioning::None => 0,
            Conditioning::Latent => cfg.latent,
            Conditioning::Params => PARAM_WIDTH,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| CoreError::Argument(format!("unknown variant '{s}'")))
    }
}

fn add_dense(store: &mut ParamStore, name: &str, n_in: usize, n_out: usize) -> Result<()> {
    store.add_uniform(&format!("{name}.w"), &[n_out, n_in], n_in)?;
    store.add_uniform(&format!("{name}.b"), &[n_out], n_in)?;
    Ok(())
}

/// Weight and bias of one fully connected layer.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub w: Var,
    pub b: Var,
}

impl Dense {
    pub fn load(tape: &mut Tape, store: &ParamStore, name: &str) -> Result<Self> {
        Ok(Self {
            w: tape.param(store, &format!("{name}.w"))?,
            b: tape.param(store, &format!("{name}.b"))?,
        })
    }

    pub fn apply(&self, tape: &mut Tape, x: Var, act: Activation) -> Result<Var> {
        Ok(tape.dense(x, self.w, self.b, act)?)
    }
}

fn mlp2(tape: &mut Tape, a: &Dense, b: &Dense, x: Var) -> Result<Var> {
    let h = a.apply(tape, x, Activation::Relu)?;
    b.apply(tape, h, Activation::Identity)
}

// ---------------------------------------------------------------------------
// Adaptation module

pub fn init_adapt(store: &mut ParamStore, cfg: &ModelConfig) -> Result<()> {
    let (h, p) = (cfg.hidden, cfg.latent);
    add_dense(store, "adapt.enc1", OBS_WIDTH, h)?;
    add_dense(store, "adapt.enc2", h, p)?;
    store.add_uniform("adapt.att.w", &[1, p], p)?;
    store.add_uniform("adapt.rnn.wx", &[p, p], p)?;
    store.add_uniform("adapt.rnn.wz", &[p, p], p)?;
    store.add_uniform("adapt.rnn.b", &[p], p)?;
    store.add_zeros("adapt.z0", &[1, p])?;
    Ok(())
}

/// Adaptation parameters recorded on a tape.
pub struct AdaptNet {
    enc1: Dense,
    enc2: Dense,
    att: Var,
    wx: Var,
    wz: Var,
    b: Var,
    z0: Var,
}

impl AdaptNet {
    pub fn load(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        Ok(Self {
            enc1: Dense::load(tape, store, "adapt.enc1")?,
            enc2: Dense::load(tape, store, "adapt.enc2")?,
            att: tape.param(store, "adapt.att.w")?,
            wx: tape.param(store, "adapt.rnn.wx")?,
            wz: tape.param(store, "adapt.rnn.wz")?,
            b: tape.param(store, "adapt.rnn.b")?,
            z0: tape.param(store, "adapt.z0")?,
        })
    }

    /// Per-node embeddings of observation rows `[R, OBS_WIDTH]`.
    pub fn encode_observation(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        mlp2(tape, &self.enc1, &self.enc2, x)
    }

    /// Attention-weighted sum of the embeddings within each segment.
    pub fn attend_aggregate(
        &self,
        tape: &mut Tape,
        o: Var,
        seg: Arc<[usize]>,
        n_seg: usize,
    ) -> Result<Var> {
        let scores = tape.matmul_nt(o, self.att)?;
        let alpha = tape.segment_softmax(scores, seg.clone())?;
        let weighted = tape.mul_rows(o, alpha)?;
        Ok(tape.scatter_add_rows(weighted, seg, n_seg)?)
    }

    /// Elman recurrence over `t` steps for `s` sequences. Row `i * t + j` of
    /// `zhat` is step `j` of sequence `i`. Returns `[s, p]`.
    pub fn rnn_adapt(&self, tape: &mut Tape, zhat: Option<Var>, s: usize, t: usize) -> Result<Var> {
        let mut z = tape.gather_rows(self.z0, vec![0; s].into())?;
        for j in 0..t {
            let zhat = zhat.ok_or_else(|| CoreError::Argument("missing observations".into()))?;
            let rows: Arc<[usize]> = (0..s).map(|i| i * t + j).collect();
            let x = tape.gather_rows(zhat, rows)?;
            let a = tape.matmul_nt(x, self.wx)?;
            let r = tape.matmul_nt(z, self.wz)?;
            let pre = tape.add(a, r)?;
            let pre = tape.add_bias(pre, self.b)?;
            z = tape.tanh(pre)?;
        }
        Ok(z)
    }

    /// Full adaptation for `s` sequences of `t` frames of `n` nodes. `obs`
    /// rows are ordered sequence-major, then frame, then node.
    pub fn f_phi(&self, tape: &mut Tape, obs: &Array, s: usize, t: usize, n: usize) -> Result<Var> {
        if t == 0 {
            return self.rnn_adapt(tape, None, s, 0);
        }
        if obs.shape() != [s * t * n, OBS_WIDTH] {
            return Err(CoreError::Argument(format!(
                "observation block {:?} does not match {s}x{t}x{n} nodes",
                obs.shape()
            )));
        }
        let x = tape.constant(obs.clone())?;
        let o = self.encode_observation(tape, x)?;
        let seg: Arc<[usize]> = (0..s * t * n).map(|r| r / n).collect();
        let zhat = self.attend_aggregate(tape, o, seg, s * t)?;
        self.rnn_adapt(tape, Some(zhat), s, t)
    }
}

// ---------------------------------------------------------------------------
// Forward dynamics

pub fn init_dynamics(store: &mut ParamStore, cfg: &ModelConfig, cond_width: usize) -> Result<()> {
    let h = cfg.hidden;
    add_dense(store, "dyn.enc1", NODE_WIDTH, h)?;
    add_dense(store, "dyn.enc2", h, h)?;
    let fan = 2 * h + GEO_WIDTH + cond_width;
    store.add_uniform("dyn.psi.w_self", &[h, h], fan)?;
    store.add_uniform("dyn.psi.w_nbr", &[h, h], fan)?;
    store.add_uniform("dyn.psi.w_geo", &[h, GEO_WIDTH], fan)?;
    if cond_width > 0 {
        store.add_uniform("dyn.psi.w_cond", &[h, cond_width], fan)?;
    }
    store.add_uniform("dyn.psi.b1", &[h], fan)?;
    store.add_uniform("dyn.psi.w2", &[h, h], h)?;
    store.add_uniform("dyn.psi.b2", &[h], h)?;
    let hops = match cfg.hop_mode {
        HopMode::Separate => 2,
        HopMode::Union => 1,
    };
    add_dense(store, "dyn.phi1", (1 + hops) * h, h)?;
    add_dense(store, "dyn.phi2", h, h)?;
    add_dense(store, "dyn.dec1", h, h)?;
    add_dense(store, "dyn.dec2", h, 3)?;
    Ok(())
}

/// Directed message pairs of one graph: `(src, dst)` per hop set.
#[derive(Debug, Clone)]
pub struct Topology {
    pub n: usize,
    pub hops: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    pub fn new(table: &NeighborTable, mode: HopMode) -> Self {
        let n = table.num_nodes();
        let pairs = |sets: &[&Vec<Vec<usize>>]| -> Vec<(usize, usize)> {
            let mut out = Vec::new();
            for v in 0..n {
                for set in sets {
                    out.extend(set[v].iter().map(|&s| (s, v)));
                }
            }
            out
        };
        let hops = match mode {
            HopMode::Separate => vec![pairs(&[&table.hop1]), pairs(&[&table.hop2])],
            HopMode::Union => vec![pairs(&[&table.hop1, &table.hop2])],
        };
        Self { n, hops }
    }
}

#[derive(Debug, Clone)]
struct HopIndex {
    src: Arc<[usize]>,
    dst: Arc<[usize]>,
    graph: Arc<[usize]>,
    deg: Array,
}

/// Gather/scatter indices for a batch of identical-topology graphs.
#[derive(Debug, Clone)]
pub struct BatchIndex {
    pub graphs: usize,
    pub n: usize,
    hops: Vec<HopIndex>,
    node_graph: Arc<[usize]>,
}

impl BatchIndex {
    pub fn new(topo: &Topology, graphs: usize) -> Self {
        let n = topo.n;
        let hops = topo
            .hops
            .iter()
            .map(|pairs| {
                let mut src = Vec::with_capacity(pairs.len() * graphs);
                let mut dst = Vec::with_capacity(pairs.len() * graphs);
                let mut graph = Vec::with_capacity(pairs.len() * graphs);
                let mut deg = vec![0.0; n * graphs];
                for g in 0..graphs {
                    for &(s, v) in pairs {
                        src.push(g * n + s);
                        dst.push(g * n + v);
                        graph.push(g);
                        deg[g * n + v] += 1.0;
                    }
                }
                HopIndex {
                    src: src.into(),
                    dst: dst.into(),
                    graph: graph.into(),
                    deg: Array::vector(deg),
                }
            })
            .collect();
        Self {
            graphs,
            n,
            hops,
            node_graph: (0..graphs * n).map(|r| r / n).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.graphs * self.n
    }

    pub fn node_graph(&self) -> Arc<[usize]> {
        self.node_graph.clone()
    }
}

/// Caches batch indices per batch size.
#[derive(Debug, Clone)]
pub struct IndexCache {
    topo: Topology,
    by_size: std::collections::BTreeMap<usize, Arc<BatchIndex>>,
}

impl IndexCache {
    pub fn new(topo: Topology) -> Self {
        Self {
            topo,
            by_size: Default::default(),
        }
    }

    pub fn get(&mut self, graphs: usize) -> Arc<BatchIndex> {
        self.by_size
            .entry(graphs)
            .or_insert_with(|| Arc::new(BatchIndex::new(&self.topo, graphs)))
            .clone()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }
}

/// Dynamics parameters recorded on a tape.
pub struct DynNet {
    enc1: Dense,
    enc2: Dense,
    w_self: Var,
    w_nbr: Var,
    w_geo: Var,
    w_cond: Option<Var>,
    b1: Var,
    w2: Var,
    b2: Var,
    phi1: Dense,
    phi2: Dense,
    dec1: Dense,
    dec2: Dense,
}

impl DynNet {
    pub fn load(tape: &mut Tape, store: &ParamStore) -> Result<Self> {
        let w_cond = if store.contains("dyn.psi.w_cond") {
            Some(tape.param(store, "dyn.psi.w_cond")?)
        } else {
            None
        };
        Ok(Self {
            enc1: Dense::load(tape, store, "dyn.enc1")?,
            enc2: Dense::load(tape, store, "dyn.enc2")?,
            w_self: tape.param(store, "dyn.psi.w_self")?,
            w_nbr: tape.param(store, "dyn.psi.w_nbr")?,
            w_geo: tape.param(store, "dyn.psi.w_geo")?,
            w_cond,
            b1: tape.param(store, "dyn.psi.b1")?,
            w2: tape.param(store, "dyn.psi.w2")?,
            b2: tape.param(store, "dyn.psi.b2")?,
            phi1: Dense::load(tape, store, "dyn.phi1")?,
            phi2: Dense::load(tape, store, "dyn.phi2")?,
            dec1: Dense::load(tape, store, "dyn.dec1")?,
            dec2: Dense::load(tape, store, "dyn.dec2")?,
        })
    }

    /// h⁰ from node features `[rows, NODE_WIDTH]`.
    pub fn encode_nodes(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        mlp2(tape, &self.enc1, &self.enc2, x)
    }

    /// The part of Ψ's first layer that does not depend on node states:
    /// edge geometry, the conditioning vector and the bias. One entry per
    /// hop set.
    pub fn edge_terms(
        &self,
        tape: &mut Tape,
        idx: &BatchIndex,
        nodes: &Array,
        cond: Option<Var>,
    ) -> Result<Vec<Var>> {
        let zc = match (cond, self.w_cond) {
            (Some(c), Some(w)) => Some(tape.matmul_nt(c, w)?),
            (None, None) => None,
            _ => {
                return Err(CoreError::Compat(
                    "conditioning input does not match the model".into(),
                ))
            }
        };
        let mut out = Vec::with_capacity(idx.hops.len());
        for hop in &idx.hops {
            let geo = tape.constant(edge_geometry(nodes, &hop.src, &hop.dst))?;
            let mut e = tape.matmul_nt(geo, self.w_geo)?;
            if let Some(zc) = zc {
                let per_edge = tape.gather_rows(zc, hop.graph.clone())?;
                e = tape.add(e, per_edge)?;
            }
            out.push(tape.add_bias(e, self.b1)?);
        }
        Ok(out)
    }

    /// One message-passing step. Ψ's second layer is linear, so it is applied
    /// after summing the hidden activations of each hop set.
    pub fn propagate(
        &self,
        tape: &mut Tape,
        idx: &BatchIndex,
        h: Var,
        edge_terms: &[Var],
    ) -> Result<Var> {
        let rows = idx.rows();
        let a = tape.matmul_nt(h, self.w_self)?;
        let b = tape.matmul_nt(h, self.w_nbr)?;
        let mut parts = vec![h];
        for (hop, &e) in idx.hops.iter().zip(edge_terms) {
            let summed = tape.edge_relu_sum(a, b, e, hop.src.clone(), hop.dst.clone(), rows)?;
            let msg = tape.matmul_nt(summed, self.w2)?;
            let deg = tape.constant(hop.deg.clone())?;
            let bias = tape.outer(deg, self.b2)?;
            parts.push(tape.add(msg, bias)?);
        }
        let cat = tape.concat_cols(&parts)?;
        mlp2(tape, &self.phi1, &self.phi2, cat)
    }

    pub fn decode(&self, tape: &mut Tape, h: Var) -> Result<Var> {
        mlp2(tape, &self.dec1, &self.dec2, h)
    }

    /// Normalized displacement `[rows, 3]` for a batch of graphs. `cond`
    /// holds one conditioning row per graph.
    pub fn forward(
        &self,
        tape: &mut Tape,
        idx: &BatchIndex,
        steps: usize,
        nodes: &Array,
        cond: Option<Var>,
    ) -> Result<Var> {
        if nodes.shape() != [idx.rows(), NODE_WIDTH] {
            return Err(CoreError::Argument(format!(
                "node block {:?} does not match {} graphs of {} nodes",
                nodes.shape(),
                idx.graphs,
                idx.n
            )));
        }
        let x = tape.constant(nodes.clone())?;
        let mut h = self.encode_nodes(tape, x)?;
        let terms = self.edge_terms(tape, idx, nodes, cond)?;
        for _ in 0..steps {
            h = self.propagate(tape, idx, h, &terms)?;
        }
        self.decode(tape, h)
    }
}

/// `[pos_src − pos_dst, ‖pos_src − pos_dst‖]` per directed pair, read from
/// the first three columns of `nodes`.
pub fn edge_geometry(nodes: &Array, src: &[usize], dst: &[usize]) -> Array {
    let w = nodes.cols();
    let d = nodes.data();
    let mut out = Vec::with_capacity(src.len() * GEO_WIDTH);
    for (&s, &v) in src.iter().zip(dst) {
        let off = [
            d[s * w] - d[v * w],
            d[s * w + 1] - d[v * w + 1],
            d[s * w + 2] - d[v * w + 2],
        ];
        let len = (off[0] * off[0] + off[1] * off[1] + off[2] * off[2]).sqrt();
        out.extend_from_slice(&[off[0], off[1], off[2], len]);
    }
    Array::new(vec![src.len(), GEO_WIDTH], out).expect("geometry shape")
}

// ---------------------------------------------------------------------------
// Inverse dynamics

pub fn init_inverse(store: &mut ParamStore, cfg: &ModelConfig, cond_width: usize) -> Result<()> {
    let h = cfg.hidden;
    add_dense(store, "inv.node1", 2 * 3, h)?;
    add_dense(store, "inv.node2", h, h)?;
    let proj_in = if cond_width > 0 {
        add_dense(store, "inv.cond1", cond_width, h)?;
        2 * h
    } else {
        h
    };
    add_dense(store, "inv.proj1", proj_in, h)?;
    add_dense(store, "inv.proj2", h, 1)?;
    Ok(())
}

/// Predicts the normalized action of each graph pair from per-node
/// `[pos_before, pos_after]` rows, averaging per-node projections.
pub fn inverse_forward(
    tape: &mut Tape,
    store: &ParamStore,
    idx: &BatchIndex,
    pairs: &Array,
    cond: Option<Var>,
) -> Result<Var> {
    let node1 = Dense::load(tape, store, "inv.node1")?;
    let node2 = Dense::load(tape, store, "inv.node2")?;
    let proj1 = Dense::load(tape, store, "inv.proj1")?;
    let proj2 = Dense::load(tape, store, "inv.proj2")?;
    let x = tape.constant(pairs.clone())?;
    let e = mlp2(tape, &node1, &node2, x)?;
    let feat = match cond {
        Some(c) => {
            let cond1 = Dense::load(tape, store, "inv.cond1")?;
            let ce = cond1.apply(tape, c, Activation::Relu)?;
            let per_node = tape.gather_rows(ce, idx.node_graph())?;
            tape.concat_cols(&[e, per_node])?
        }
        None => e,
    };
    let p = proj1.apply(tape, feat, Activation::Relu)?;
    let out = proj2.apply(tape, p, Activation::Identity)?;
    let summed = tape.scatter_add_rows(out, idx.node_graph(), idx.graphs)?;
    Ok(tape.scale(summed, 1.0 / idx.n as f64)?)
}

// ---------------------------------------------------------------------------
// Property regressor and supervision head

pub fn init_decoder(store: &mut ParamStore, cfg: &ModelConfig) -> Result<()> {
    add_dense(store, "decode.l1", cfg.latent, DECODE_HIDDEN)?;
    add_dense(store, "decode.l2", DECODE_HIDDEN, DECODE_HIDDEN)?;
    add_dense(store, "decode.l3", DECODE_HIDDEN, DECODE_HIDDEN)?;
    add_dense(store, "decode.out", DECODE_HIDDEN, PARAM_WIDTH)?;
    Ok(())
}

/// Three ReLU hidden layers mapping latents to normalized parameters.
pub fn decoder_forward(tape: &mut Tape, store: &ParamStore, z: Var) -> Result<Var> {
    let mut h = z;
    for name in ["decode.l1", "decode.l2", "decode.l3"] {
        h = Dense::load(tape, store, name)?.apply(tape, h, Activation::Relu)?;
    }
    Dense::load(tape, store, "decode.out")?.apply(tape, h, Activation::Identity)
}

pub fn init_supervision(store: &mut ParamStore, cfg: &ModelConfig) -> Result<()> {
    add_dense(store, "sup.head", cfg.latent, PARAM_WIDTH)
}

/// Creates every slot a forward-dynamics variant needs.
pub fn init_forward_model(variant: Variant, cfg: &ModelConfig, seed: u64) -> Result<ParamStore> {
    if variant == Variant::Oi {
        return Err(CoreError::Argument(
            "the inverse oracle has no forward model".into(),
        ));
    }
    let mut store = ParamStore::new(seed);
    if variant.has_adaptation() {
        init_adapt(&mut store, cfg)?;
    }
    if variant == Variant::Os {
        init_supervision(&mut store, cfg)?;
    }
    init_dynamics(&mut store, cfg, variant.cond_width(cfg))?;
    Ok(store)
}
