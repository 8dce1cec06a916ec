//! Dataset generation over the parameter grid, storage, splitting and the
//! normalized tensors the networks consume.
//!
//! On disk a dataset is a directory holding `manifest.json` and
//! `samples.jsonl`. The manifest records the grid, the split, the data hash
//! of the generating configuration and the SHA-256 of the samples file. Each
//! line of the samples file is one [`SampleRecord`]; every float is written
//! in scientific notation with 17 significant digits.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use edo_clothsim::{
    action_grid, run_bandage, run_lifting, run_pulling_ea, PhysicalParams, SimConfig, Vec3,
};
use edo_diffnum::Array;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{CoreError, Result};
use crate::graph::{
    downsample_cloth, downsample_grid, flatten, neighbor_table, GraphState, NeighborTable,
    Normalizer,
};
use crate::model::{NODE_WIDTH, OBS_WIDTH};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_FILE: &str = "samples.jsonl";
pub const DATASET_FORMAT: &str = "edonet-dataset";
pub const DATASET_VERSION: u32 = 1;

/// Task environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Env {
    Bandage,
    Lifting,
}

impl Env {
    pub const ALL: [Env; 2] = [Env::Bandage, Env::Lifting];
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Env::Bandage => "bandage",
            Env::Lifting => "lifting",
        })
    }
}

impl FromStr for Env {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandage" => Ok(Env::Bandage),
            "lifting" => Ok(Env::Lifting),
            _ => Err(CoreError::Argument(format!("unknown environment '{s}'"))),
        }
    }
}

/// Parameter grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// 5 × 5 cells spanning the full ranges.
    Desk,
    /// 13 stiffness × 11 bending values, 143 cells.
    Full,
}

impl GridKind {
    /// Stiffness and bending values of the grid.
    pub fn values(self) -> (Vec<f64>, Vec<f64>) {
        match self {
            GridKind::Desk => (
                (0..5).map(|i| 10.0 + 9.0 * i as f64).collect(),
                (0..5).map(|i| 0.01 + 1.25 * i as f64).collect(),
            ),
            GridKind::Full => (
                (0..13).map(|i| 10.0 + 3.0 * i as f64).collect(),
                (0..11).map(|i| 0.01 + 0.5 * i as f64).collect(),
            ),
        }
    }

    /// Cells in stiffness-major order.
    pub fn params(self) -> Vec<PhysicalParams> {
        let (ks, bs) = self.values();
        ks.iter()
            .flat_map(|&k| bs.iter().map(move |&b| PhysicalParams::new(k, b)))
            .collect()
    }
}

impl fmt::Display for GridKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridKind::Desk => "desk",
            GridKind::Full => "full",
        })
    }
}

impl FromStr for GridKind {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(GridKind::Desk),
            "full" => Ok(GridKind::Full),
            _ => Err(CoreError::Argument(format!(
                "unknown grid '{s}' (expected desk or full)"
            ))),
        }
    }
}

/// One frame of the exploratory action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Simulation frame index within the pulling action.
    pub t: usize,
    pub graph: GraphState,
    /// Sensed gripper force (N, or normalized units once normalized).
    pub force: Vec3,
    #[serde(skip)]
    pub normalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub stiffness: f64,
    pub bending: f64,
}

impl From<PhysicalParams> for ParamsRecord {
    fn from(p: PhysicalParams) -> Self {
        Self {
            stiffness: p.stiffness,
            bending: p.bending,
        }
    }
}

impl From<ParamsRecord> for PhysicalParams {
    fn from(p: ParamsRecord) -> Self {
        PhysicalParams::new(p.stiffness, p.bending)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub action: f64,
    /// Per-node displacement `G_after − G_before` (m).
    pub delta: Vec<Vec3>,
}

/// All interactions of one sample in one environment; the initial state is
/// shared by every action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvRecord {
    pub before: GraphState,
    pub interactions: Vec<Interaction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub params: ParamsRecord,
    pub ea: Vec<Observation>,
    pub bandage: EnvRecord,
    pub lifting: EnvRecord,
}

impl SampleRecord {
    pub fn env(&self, env: Env) -> &EnvRecord {
        match env {
            Env::Bandage => &self.bandage,
            Env::Lifting => &self.lifting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Samples not used for fitting: validation and test.
    pub fn unseen(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.val.iter().chain(&self.test).copied().collect();
        v.sort_unstable();
        v
    }
}

/// Splits `n` samples by the given fractions. Counts use largest-remainder
/// rounding (ties go to the earlier part); membership is a seeded shuffle.
pub fn split(n: usize, fractions: [f64; 3], seed: u64) -> Result<Split> {
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 || fractions.iter().any(|f| *f < 0.0) {
        return Err(CoreError::Argument(format!(
            "split fractions {fractions:?} do not sum to 1"
        )));
    }
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    if counts.contains(&0) {
        return Err(CoreError::Data(format!(
            "{n} samples cannot fill train/val/test (counts {counts:?})"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |c: usize, from: usize| {
        let mut v = perm[from..from + c].to_vec();
        v.sort_unstable();
        v
    };
    Ok(Split {
        train: take(counts[0], 0),
        val: take(counts[1], counts[0]),
        test: take(counts[2], counts[0] + counts[1]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub grid: String,
    pub seed: u64,
    pub n_samples: usize,
    pub stiffness: Vec<f64>,
    pub bending: Vec<f64>,
    pub graph_rows: usize,
    pub graph_cols: usize,
    pub ea_frames: usize,
    pub actions_per_env: usize,
    pub bandage_actions: Vec<f64>,
    pub lifting_actions: Vec<f64>,
    /// Data hash of the generating configuration.
    pub config_hash: String,
    pub samples_file: String,
    pub samples_sha256: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<SampleRecord>,
}

fn diff(a: &[Vec3], b: &[Vec3]) -> Vec<Vec3> {
    a.iter()
        .zip(b)
        .map(|(p, q)| [p[0] - q[0], p[1] - q[1], p[2] - q[2]])
        .collect()
}

fn generate_sample(index: usize, params: PhysicalParams, cfg: &RunConfig) -> Result<SampleRecord> {
    let sim: &SimConfig = &cfg.sim;
    let (rows, cols) = (cfg.data.graph_rows, cfg.data.graph_cols);
    let obs = run_pulling_ea(params, sim, sim.ea_raw_steps, cfg.data.ea_frames)?;
    let mut mask = vec![false; sim.rows * sim.cols];
    for i in (0..sim.cols).chain((sim.rows - 1) * sim.cols..sim.rows * sim.cols) {
        mask[i] = true;
    }
    let ea = obs
        .into_iter()
        .map(|o| {
            Ok(Observation {
                t: o.t,
                graph: downsample_grid(sim.rows, sim.cols, &o.positions, &mask, rows, cols)?,
                force: o.force,
                normalized: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut envs = Vec::with_capacity(2);
    for env in Env::ALL {
        let (max, run): (f64, fn(_, _, _) -> _) = match env {
            Env::Bandage => (sim.bandage_f_max, run_bandage),
            Env::Lifting => (sim.lifting_d_max, run_lifting),
        };
        let mut before = None;
        let mut interactions = Vec::with_capacity(sim.action_count);
        for a in action_grid(max, sim.action_count) {
            let (b, after) = run(params, a, sim)?;
            let b = downsample_cloth(&b, rows, cols)?;
            let after = downsample_cloth(&after, rows, cols)?;
            interactions.push(Interaction {
                action: a,
                delta: diff(&after.positions, &b.positions),
            });
            before.get_or_insert(b);
        }
        envs.push(EnvRecord {
            before: before.expect("action grid is never empty"),
            interactions,
        });
    }
    let lifting = envs.pop().unwrap();
    let bandage = envs.pop().unwrap();
    Ok(SampleRecord {
        index,
        params: params.into(),
        ea,
        bandage,
        lifting,
    })
}

/// Simulates every grid cell. `jobs` worker threads share the cells; the
/// output does not depend on `jobs`.
pub fn gen_dataset(cfg: &RunConfig, jobs: usize) -> Result<Dataset> {
    cfg.validate()?;
    let cells = cfg.data.grid.params();
    let work = |(i, p): (usize, &PhysicalParams)| {
        generate_sample(i, *p, cfg).map_err(|e| {
            CoreError::Numerical(format!(
                "generation failed for cell {i} (stiffness {}, bending {}): {e}",
                p.stiffness, p.bending
            ))
        })
    };
    let samples: Vec<SampleRecord> = if jobs <= 1 {
        cells.iter().enumerate().map(work).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CoreError::Argument(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(|| {
            cells
                .par_iter()
                .enumerate()
                .map(work)
                .collect::<Result<_>>()
        })?
    };
    let d = &cfg.data;
    let split = split(
        samples.len(),
        [d.train_frac, d.val_frac, d.test_frac],
        d.seed,
    )?;
    let (stiffness, bending) = d.grid.values();
    let bytes = encode_samples(&samples)?;
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        grid: d.grid.to_string(),
        seed: d.seed,
        n_samples: samples.len(),
        stiffness,
        bending,
        graph_rows: d.graph_rows,
        graph_cols: d.graph_cols,
        ea_frames: d.ea_frames,
        actions_per_env: cfg.sim.action_count,
        bandage_actions: action_grid(cfg.sim.bandage_f_max, cfg.sim.action_count),
        lifting_actions: action_grid(cfg.sim.lifting_d_max, cfg.sim.action_count),
        config_hash: cfg.data_hash(),
        samples_file: SAMPLES_FILE.into(),
        samples_sha256: sha256_hex(&bytes),
        split,
    };
    Ok(Dataset { manifest, samples })
}

/// Writes floats with 17 significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn encode_samples(samples: &[SampleRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for s in samples {
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
        s.serialize(&mut ser)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn write_dataset(dir: &Path, ds: &Dataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let bytes = encode_samples(&ds.samples)?;
    std::fs::write(dir.join(&ds.manifest.samples_file), bytes)?;
    let mut manifest = serde_json::to_vec_pretty(&ds.manifest)?;
    manifest.push(b'\n');
    std::fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CoreError::Data(format!("cannot read {}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CoreError::Data(format!("malformed {}: {e}", path.display())))?;
    if m.format != DATASET_FORMAT || m.version != DATASET_VERSION {
        return Err(CoreError::Data(format!(
            "unsupported dataset format {} v{}",
            m.format, m.version
        )));
    }
    Ok(m)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(&manifest.samples_file);
    let bytes = std::fs::read(&path)
        .map_err(|e| CoreError::Data(format!("cannot read {}: {e}", path.display())))?;
    if sha256_hex(&bytes) != manifest.samples_sha256 {
        return Err(CoreError::Data(format!(
            "{} does not match its manifest digest",
            path.display()
        )));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CoreError::Data(format!("{} is not utf-8", path.display())))?;
    let samples = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<SampleRecord>(line)
                .map_err(|e| CoreError::Data(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.len() != manifest.n_samples {
        return Err(CoreError::Data(format!(
            "manifest lists {} samples, file holds {}",
            manifest.n_samples,
            samples.len()
        )));
    }
    for s in &samples {
        for g in
            s.ea.iter()
                .map(|o| &o.graph)
                .chain([&s.bandage.before, &s.lifting.before])
        {
            g.validate()?;
        }
    }
    Ok(Dataset { manifest, samples })
}

/// Indices of `t` of `stored` frames spread uniformly from the first to the
/// last; a single frame is the first one.
pub fn frame_indices(stored: usize, t: usize) -> Result<Vec<usize>> {
    if t > stored {
        return Err(CoreError::Argument(format!(
            "{t} observations requested but only {stored} stored"
        )));
    }
    Ok(match t {
        0 => Vec::new(),
        1 => vec![0],
        _ => (0..t)
            .map(|j| ((j * (stored - 1)) as f64 / (t - 1) as f64).round() as usize)
            .collect(),
    })
}

/// Training-split statistics for every normalized quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub ea_position: Normalizer,
    pub force: Normalizer,
    pub params: Normalizer,
    pub position: Normalizer,
    pub action: Normalizer,
    pub delta: Normalizer,
}

impl NormStats {
    pub fn fit(ds: &Dataset, env: Env, train: &[usize]) -> Result<Self> {
        let xyz = ["x", "y", "z"];
        let mut ea_pos = Vec::new();
        let mut force = Vec::new();
        let mut params = Vec::new();
        let mut pos = Vec::new();
        let mut action = Vec::new();
        let mut delta = Vec::new();
        for &i in train {
            let s = &ds.samples[i];
            for o in &s.ea {
                ea_pos.extend(flatten(&o.graph.positions));
                force.extend_from_slice(&o.force);
            }
            params.extend([s.params.stiffness, s.params.bending]);
            let rec = s.env(env);
            pos.extend(flatten(&rec.before.positions));
            for it in &rec.interactions {
                action.push(it.action);
                delta.extend(flatten(&it.delta));
                for (p, d) in rec.before.positions.iter().zip(&it.delta) {
                    pos.extend([p[0] + d[0], p[1] + d[1], p[2] + d[2]]);
                }
            }
        }
        let named =
            |prefix: &str| -> Vec<String> { xyz.iter().map(|a| format!("{prefix}.{a}")).collect() };
        let fit3 = |prefix: &str, data: &[f64]| {
            let names = named(prefix);
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            Normalizer::fit_vector(&refs, data)
        };
        Ok(Self {
            ea_position: fit3("ea_position", &ea_pos)?,
            force: fit3("force", &force)?,
            params: Normalizer::fit(&["stiffness", "bending"], &params)?,
            position: fit3(&format!("{env}.position"), &pos)?,
            action: Normalizer::fit(&[&format!("{env}.action")], &action)?,
            delta: fit3(&format!("{env}.delta"), &delta)?,
        })
    }

    pub fn normalize_observation(&self, o: &Observation) -> Observation {
        let mut out = o.clone();
        let p = self.ea_position.apply(&flatten(&o.graph.positions));
        for (dst, src) in out.graph.positions.iter_mut().zip(p.chunks(3)) {
            dst.copy_from_slice(src);
        }
        let f = self.force.apply(&o.force);
        out.force.copy_from_slice(&f);
        out.normalized = true;
        out
    }
}

/// Per-node `[position, force]` rows of normalized observations, frame
/// after frame.
pub fn observation_features(obs: &[Observation]) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for o in obs {
        if !o.normalized {
            return Err(CoreError::Argument(format!(
                "observation at frame {} is not normalized",
                o.t
            )));
        }
        for p in &o.graph.positions {
            out.extend_from_slice(p);
            out.extend_from_slice(&o.force);
        }
    }
    Ok(out)
}

/// One sample, normalized for one environment.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub index: usize,
    pub params: PhysicalParams,
    pub params_norm: [f64; 2],
    /// Observation features per stored frame, `n × OBS_WIDTH` each.
    pub ea: Vec<Vec<f64>>,
    /// Normalized initial positions, `n × 3`.
    pub before: Vec<f64>,
    pub before_raw: Vec<Vec3>,
    pub gripper: Vec<f64>,
    pub actions: Vec<f64>,
    pub actions_norm: Vec<f64>,
    /// Normalized displacements per action, `n × 3` each.
    pub deltas: Vec<Vec<f64>>,
    /// Normalized final positions per action, `n × 3` each.
    pub after: Vec<Vec<f64>>,
    pub deltas_raw: Vec<Vec<Vec3>>,
}

/// A dataset restricted to one environment with normalized features.
#[derive(Debug, Clone)]
pub struct EnvData {
    pub env: Env,
    pub n_nodes: usize,
    pub table: NeighborTable,
    pub stats: NormStats,
    pub split: Split,
    pub action_grid: Vec<f64>,
    pub data_hash: String,
    pub samples: Vec<PreparedSample>,
}

/// `(sample, action index)` of one interaction.
pub type Item = (usize, usize);

impl EnvData {
    pub fn prepare(ds: &Dataset, env: Env) -> Result<Self> {
        let split = ds.manifest.split.clone();
        let stats = NormStats::fit(ds, env, &split.train)?;
        let first = ds
            .samples
            .first()
            .ok_or_else(|| CoreError::Data("empty dataset".into()))?;
        let table = neighbor_table(&first.env(env).before)?;
        let n_nodes = first.env(env).before.num_nodes();
        let mut samples = Vec::with_capacity(ds.samples.len());
        for s in &ds.samples {
            let rec = s.env(env);
            if rec.before.num_nodes() != n_nodes
                || s.ea.iter().any(|o| o.graph.num_nodes() != n_nodes)
            {
                return Err(CoreError::Data(format!(
                    "sample {} has inconsistent node counts",
                    s.index
                )));
            }
            let ea =
                s.ea.iter()
                    .map(|o| {
                        observation_features(std::slice::from_ref(&stats.normalize_observation(o)))
                    })
                    .collect::<Result<Vec<_>>>()?;
            let pn = stats.params.apply(&[s.params.stiffness, s.params.bending]);
            let actions: Vec<f64> = rec.interactions.iter().map(|i| i.action).collect();
            let after = rec
                .interactions
                .iter()
                .map(|it| {
                    let raw: Vec<f64> = rec
                        .before
                        .positions
                        .iter()
                        .zip(&it.delta)
                        .flat_map(|(p, d)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
                        .collect();
                    stats.position.apply(&raw)
                })
                .collect();
            samples.push(PreparedSample {
                index: s.index,
                params: s.params.into(),
                params_norm: [pn[0], pn[1]],
                ea,
                before: stats.position.apply(&flatten(&rec.before.positions)),
                before_raw: rec.before.positions.clone(),
                gripper: rec
                    .before
                    .gripper_mask
                    .iter()
                    .map(|&g| g as u8 as f64)
                    .collect(),
                actions_norm: stats.action.apply(&actions),
                actions,
                deltas: rec
                    .interactions
                    .iter()
                    .map(|it| stats.delta.apply(&flatten(&it.delta)))
                    .collect(),
                after,
                deltas_raw: rec.interactions.iter().map(|it| it.delta.clone()).collect(),
            });
        }
        let action_grid = match env {
            Env::Bandage => ds.manifest.bandage_actions.clone(),
            Env::Lifting => ds.manifest.lifting_actions.clone(),
        };
        Ok(Self {
            env,
            n_nodes,
            table,
            stats,
            split,
            action_grid,
            data_hash: ds.manifest.config_hash.clone(),
            samples,
        })
    }

    pub fn stored_frames(&self) -> usize {
        self.samples.first().map_or(0, |s| s.ea.len())
    }

    /// Every interaction of the given samples.
    pub fn items(&self, samples: &[usize]) -> Vec<Item> {
        samples
            .iter()
            .flat_map(|&s| (0..self.samples[s].actions.len()).map(move |a| (s, a)))
            .collect()
    }

    /// Dynamics input rows for one graph with an explicit normalized action.
    pub fn node_rows(&self, sample: usize, action_norm: f64, out: &mut Vec<f64>) {
        let s = &self.samples[sample];
        for v in 0..self.n_nodes {
            out.extend_from_slice(&s.before[3 * v..3 * v + 3]);
            out.push(action_norm);
            out.push(s.gripper[v]);
        }
    }

    /// Dynamics input `[items · n, NODE_WIDTH]`.
    pub fn node_block(&self, items: &[Item]) -> Array {
        let mut out = Vec::with_capacity(items.len() * self.n_nodes * NODE_WIDTH);
        for &(s, a) in items {
            self.node_rows(s, self.samples[s].actions_norm[a], &mut out);
        }
        Array::new(vec![items.len() * self.n_nodes, NODE_WIDTH], out).expect("node block")
    }

    /// Normalized displacement targets `[items · n, 3]`.
    pub fn target_block(&self, items: &[Item]) -> Array {
        let mut out = Vec::with_capacity(items.len() * self.n_nodes * 3);
        for &(s, a) in items {
            out.extend_from_slice(&self.samples[s].deltas[a]);
        }
        Array::new(vec![items.len() * self.n_nodes, 3], out).expect("target block")
    }

    /// Inverse-model input `[items · n, 6]`: normalized positions before and after.
    pub fn pair_block(&self, items: &[Item]) -> Array {
        let mut out = Vec::with_capacity(items.len() * self.n_nodes * 6);
        for &(s, a) in items {
            let smp = &self.samples[s];
            for v in 0..self.n_nodes {
                out.extend_from_slice(&smp.before[3 * v..3 * v + 3]);
                out.extend_from_slice(&smp.after[a][3 * v..3 * v + 3]);
            }
        }
        Array::new(vec![items.len() * self.n_nodes, 6], out).expect("pair block")
    }

    /// Observation rows `[samples · t · n, OBS_WIDTH]` using `t` frames.
    pub fn ea_block(&self, samples: &[usize], t: usize) -> Result<Array> {
        let frames = frame_indices(self.stored_frames(), t)?;
        let mut out = Vec::with_capacity(samples.len() * t * self.n_nodes * OBS_WIDTH);
        for &s in samples {
            for &f in &frames {
                out.extend_from_slice(&self.samples[s].ea[f]);
            }
        }
        Ok(Array::new(
            vec![samples.len() * t * self.n_nodes, OBS_WIDTH],
            out,
        )?)
    }

    /// Ground-truth normalized parameters `[samples, 2]`.
    pub fn param_block(&self, samples: &[usize]) -> Array {
        let rows: Vec<[f64; 2]> = samples
            .iter()
            .map(|&s| self.samples[s].params_norm)
            .collect();
        Array::from_rows(&rows).expect("param block")
    }
}
