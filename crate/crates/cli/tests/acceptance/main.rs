//! Acceptance suite. Runs every criterion at desk scale and prints one
//! pass/fail line per criterion; exits non-zero if any fails.
//!
//! Trained checkpoints are kept in `EDONET_ACCEPT_DIR` when it is set, so a
//! rerun skips training.

mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use edo_clothsim::{
    bandage_initial, lifting_initial, make_cloth, pulling_initial, run_bandage, run_lifting,
    savgol_smooth, ClothState, Constraint, PhysicalParams, SimConfig, Spring, SpringKind,
};
use edo_core::config::RunConfig;
use edo_core::data::{gen_dataset, Dataset, Env, EnvData};
use edo_core::eval::{
    action_prediction, decode_params, eval_action, eval_inverse, eval_state_prediction,
    frozen_identical, predicted_states, transfer_bandage2lifting,
};
use edo_core::graph::NeighborTable;
use edo_core::model::{
    init_forward_model, AdaptNet, BatchIndex, DynNet, HopMode, ModelConfig, Topology, Variant,
    NODE_WIDTH,
};
use edo_core::train::{train_forward, train_inverse, ForwardModel, ForwardRunner, ADAPT_PREFIX};
use edo_core::CoreError;
use edo_diffnum::{grad_check, Array, Checkpoint, GradCheckOptions, ParamStore, Tape};
use oracles::{least_squares_at, max_diff, propagate_naive, random_edges, random_matrix};

type Outcome = Result<String, String>;

fn verdict(pass: bool, detail: String) -> Outcome {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

/// Desk-scale artefacts shared by the learning criteria.
struct Desk {
    cfg: RunConfig,
    hash: String,
    gen_time: Duration,
    data: BTreeMap<Env, EnvData>,
    models: BTreeMap<(Env, Variant), (ForwardModel, Duration)>,
    cache: Option<PathBuf>,
}

impl Desk {
    fn new() -> Result<Self, String> {
        let cfg = RunConfig::default();
        let started = Instant::now();
        let ds: Dataset = gen_dataset(&cfg, 1).map_err(fail)?;
        let gen_time = started.elapsed();
        let mut data = BTreeMap::new();
        for env in Env::ALL {
            data.insert(env, EnvData::prepare(&ds, env).map_err(fail)?);
        }
        let cache = std::env::var_os("EDONET_ACCEPT_DIR").map(PathBuf::from);
        if let Some(dir) = &cache {
            std::fs::create_dir_all(dir).map_err(fail)?;
        }
        Ok(Self {
            hash: cfg.hash(),
            cfg,
            gen_time,
            data,
            models: BTreeMap::new(),
            cache,
        })
    }

    fn data(&self, env: Env) -> &EnvData {
        &self.data[&env]
    }

    fn cached(&self, path: &Path) -> Option<(ForwardModel, Duration)> {
        let ck = Checkpoint::load(path).ok()?;
        if ck.meta.get("config_hash") != Some(&self.hash) {
            return None;
        }
        let secs: f64 = ck.meta.get("train_seconds")?.parse().ok()?;
        let model = ForwardModel::from_checkpoint(&ck).ok()?;
        Some((model, Duration::from_secs_f64(secs)))
    }

    /// Trained forward model with its training wall time.
    fn model(&mut self, env: Env, variant: Variant) -> Result<&(ForwardModel, Duration), String> {
        if !self.models.contains_key(&(env, variant)) {
            let path = self
                .cache
                .as_ref()
                .map(|d| d.join(format!("{variant}_{env}.ckpt")));
            let entry = match path.as_deref().and_then(|p| self.cached(p)) {
                Some(hit) => hit,
                None => {
                    let started = Instant::now();
                    let out = train_forward(
                        variant,
                        self.data(env),
                        &self.cfg.model,
                        &self.cfg.train,
                        self.cfg.train.epochs,
                        None,
                        None,
                    )
                    .map_err(fail)?;
                    let took = started.elapsed();
                    if let Some(p) = &path {
                        let extra = BTreeMap::from([
                            ("config_hash".to_string(), self.hash.clone()),
                            ("train_seconds".to_string(), took.as_secs_f64().to_string()),
                        ]);
                        out.model
                            .to_checkpoint(out.steps, &extra)
                            .save(p)
                            .map_err(fail)?;
                    }
                    (out.model, took)
                }
            };
            self.models.insert((env, variant), entry);
        }
        Ok(&self.models[&(env, variant)])
    }

    /// Mean state-prediction error on the test split and the time it took.
    fn test_mse(&mut self, env: Env, variant: Variant) -> Result<(f64, Duration), String> {
        let model = self.model(env, variant)?.0.clone();
        let data = self.data(env);
        let started = Instant::now();
        let r =
            eval_state_prediction(&model, data, &data.split.test, 1, &self.hash).map_err(fail)?;
        Ok((r.mean, started.elapsed()))
    }
}

fn residual_checks(detail: &mut Vec<String>) -> Result<bool, String> {
    let cfg = SimConfig::default();
    let p = PhysicalParams::new(28.0, 2.5);
    let mut worst: f64 = 0.0;
    let pull = pulling_initial(p, &cfg).map_err(fail)?;
    worst = worst.max(pull.residual(cfg.gravity));
    for a in [0.0, 0.5, 1.0] {
        let (b0, b1) = run_bandage(p, a, &cfg).map_err(fail)?;
        worst = worst.max(b0.residual(0.0)).max(b1.residual(0.0));
        let (l0, l1) = run_lifting(p, a * cfg.lifting_d_max, &cfg).map_err(fail)?;
        worst = worst
            .max(l0.residual(cfg.gravity))
            .max(l1.residual(cfg.gravity));
    }
    worst = worst
        .max(bandage_initial(p, &cfg).map_err(fail)?.residual(0.0))
        .max(
            lifting_initial(p, &cfg)
                .map_err(fail)?
                .residual(cfg.gravity),
        );
    detail.push(format!("max residual {worst:.2e} N"));
    Ok(worst < 1e-4)
}

fn energy_check(detail: &mut Vec<String>) -> Result<bool, String> {
    let cfg = SimConfig::default();
    let mut s: ClothState = make_cloth(
        cfg.rows,
        cfg.cols,
        cfg.spacing,
        PhysicalParams::new(46.0, 5.01),
    )
    .map_err(fail)?;
    s.node_mass = cfg.node_mass;
    for (i, p) in s.positions.iter_mut().enumerate() {
        let y = p[1];
        p[1] = 0.0;
        p[2] = -y - 0.002 * (i / cfg.cols) as f64;
        p[0] += 0.001 * ((i * 7) % 5) as f64;
    }
    let top = s.rows - 1;
    s.set_row_constraint(top, Constraint::Fixed);
    let energy = |s: &ClothState| s.staggered_energy(cfg.dt, cfg.gravity, cfg.damping);
    let mut e = energy(&s);
    let mut rises = 0;
    for _ in 0..3000 {
        s.step_mut(cfg.dt, cfg.gravity, cfg.damping).map_err(fail)?;
        let next = energy(&s);
        if next > e + 1e-12 {
            rises += 1;
        }
        e = next;
    }
    detail.push(format!("energy rises {rises}/3000"));
    Ok(rises == 0)
}

fn hooke_check(detail: &mut Vec<String>) -> Result<bool, String> {
    let mut s = make_cloth(2, 2, 1.0, PhysicalParams::new(10.0, 1.0)).map_err(fail)?;
    s.positions[0] = [0.0, 0.0, 0.0];
    s.positions[1] = [1.5, 0.0, 0.0];
    s.springs = vec![Spring {
        i: 0,
        j: 1,
        rest: 1.0,
        stiffness: 10.0,
        kind: SpringKind::Structural,
    }];
    let f = s.spring_forces();
    let exact = f[0] == [5.0, 0.0, 0.0] && f[1] == [-5.0, 0.0, 0.0];
    detail.push(format!("hooke {}", if exact { "exact" } else { "inexact" }));
    Ok(exact)
}

fn savgol_checks(detail: &mut Vec<String>) -> Result<bool, String> {
    let cubic: Vec<f64> = (0..60)
        .map(|i| {
            let t = i as f64 * 0.1 - 3.0;
            t * t * t - 2.0 * t
        })
        .collect();
    let smoothed = savgol_smooth(&cubic, 21, 3).map_err(fail)?;
    let cubic_err = max_diff(&smoothed, &cubic);
    let noise = random_matrix(1, 50, 7);
    let sig = noise.data();
    let out = savgol_smooth(sig, 21, 3).map_err(fail)?;
    let mut window_err: f64 = 0.0;
    for (i, v) in out.iter().enumerate() {
        let lo = i.saturating_sub(10);
        let hi = (i + 11).min(sig.len());
        let t: Vec<f64> = (lo..hi).map(|j| j as f64).collect();
        window_err = window_err.max((v - least_squares_at(&t, &sig[lo..hi], 3, i as f64)).abs());
    }
    detail.push(format!(
        "savgol cubic {cubic_err:.1e}, windows {window_err:.1e}"
    ));
    Ok(cubic_err < 1e-9 && window_err < 1e-8)
}

fn criterion_simulator() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for check in [residual_checks, energy_check, hooke_check, savgol_checks] {
        pass &= check(&mut detail)?;
    }
    verdict(pass, detail.join("; "))
}

fn attention(store: &ParamStore, o: &Array) -> Result<Vec<f64>, String> {
    let mut t = Tape::new();
    let net = AdaptNet::load(&mut t, store).map_err(fail)?;
    let ov = t.constant(o.clone()).map_err(fail)?;
    let seg: Arc<[usize]> = vec![0; o.rows()].into();
    let z = net.attend_aggregate(&mut t, ov, seg, 1).map_err(fail)?;
    Ok(t.value(z).data().to_vec())
}

fn permute_rows(a: &Array, perm: &[usize]) -> Array {
    let mut out = vec![0.0; a.data().len()];
    let c = a.cols();
    for (i, &p) in perm.iter().enumerate() {
        out[p * c..(p + 1) * c].copy_from_slice(a.row(i));
    }
    Array::new(vec![a.rows(), c], out).unwrap()
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    perm
}

fn dynamics(
    store: &ParamStore,
    table: &NeighborTable,
    nodes: &Array,
    cond: &Array,
) -> Result<Array, String> {
    let idx = BatchIndex::new(&Topology::new(table, HopMode::Separate), 1);
    let mut t = Tape::new();
    let net = DynNet::load(&mut t, store).map_err(fail)?;
    let c = t.constant(cond.clone()).map_err(fail)?;
    let out = net.forward(&mut t, &idx, 4, nodes, Some(c)).map_err(fail)?;
    Ok(t.value(out).clone())
}

fn propagate(
    store: &ParamStore,
    table: &NeighborTable,
    mode: HopMode,
    nodes: &Array,
    h: &Array,
    cond: Option<&Array>,
) -> Result<Vec<f64>, String> {
    let idx = BatchIndex::new(&Topology::new(table, mode), 1);
    let mut t = Tape::new();
    let net = DynNet::load(&mut t, store).map_err(fail)?;
    let c = match cond {
        Some(c) => Some(t.constant(c.clone()).map_err(fail)?),
        None => None,
    };
    let terms = net.edge_terms(&mut t, &idx, nodes, c).map_err(fail)?;
    let hv = t.constant(h.clone()).map_err(fail)?;
    let out = net.propagate(&mut t, &idx, hv, &terms).map_err(fail)?;
    Ok(t.value(out).data().to_vec())
}

fn criterion_structure() -> Outcome {
    let cfg = ModelConfig::default();
    let mut attn: f64 = 0.0;
    let mut equi: f64 = 0.0;
    let mut naive: f64 = 0.0;
    for seed in 0..20u64 {
        let store = init_forward_model(Variant::EdoNet, &cfg, seed).map_err(fail)?;
        let o = random_matrix(64, cfg.hidden, seed);
        let perm = shuffled(64, seed);
        attn = attn.max(max_diff(
            &attention(&store, &o)?,
            &attention(&store, &permute_rows(&o, &perm))?,
        ));

        let n = 12;
        let edges = random_edges(n, 6, seed);
        let perm = shuffled(n, seed + 100);
        let pedges: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
            .collect();
        let t1 = NeighborTable::from_edges(n, &edges).map_err(fail)?;
        let t2 = NeighborTable::from_edges(n, &pedges).map_err(fail)?;
        let nodes = random_matrix(n, NODE_WIDTH, seed + 1);
        let z = random_matrix(1, cfg.latent, seed + 2);
        let a = dynamics(&store, &t1, &nodes, &z)?;
        let b = dynamics(&store, &t2, &permute_rows(&nodes, &perm), &z)?;
        for (i, &p) in perm.iter().enumerate() {
            equi = equi.max(max_diff(a.row(i), b.row(p)));
        }

        let edges = random_edges(10, (seed % 12) as usize, seed + 3);
        let table = NeighborTable::from_edges(10, &edges).map_err(fail)?;
        let nodes = random_matrix(10, NODE_WIDTH, seed + 4);
        let h = random_matrix(10, cfg.hidden, seed + 5);
        for mode in [HopMode::Separate, HopMode::Union] {
            for with_cond in [false, true] {
                let variant = if with_cond {
                    Variant::EdoNet
                } else {
                    Variant::Nc
                };
                let s = init_forward_model(
                    variant,
                    &ModelConfig {
                        hop_mode: mode,
                        ..cfg.clone()
                    },
                    seed,
                )
                .map_err(fail)?;
                let cond = with_cond.then_some(&z);
                let fast = propagate(&s, &table, mode, &nodes, &h, cond)?;
                let slow =
                    propagate_naive(&s, 10, &edges, mode, &nodes, &h, cond.map(|c| c.data()));
                naive = naive.max(max_diff(&fast, &slow));
            }
        }
    }
    verdict(
        attn < 1e-12 && equi < 1e-12 && naive < 1e-12,
        format!("attention {attn:.1e}, equivariance {equi:.1e}, propagate vs naive {naive:.1e}"),
    )
}

fn criterion_gradients(desk: &Desk) -> Outcome {
    let data = desk.data(Env::Bandage);
    let cfg = ModelConfig::default();
    let items = vec![(data.split.train[0], 10), (data.split.train[1], 25)];
    let store = init_forward_model(Variant::EdoNet, &cfg, 11).map_err(fail)?;
    let started = Instant::now();
    let worst = grad_check(
        |tape, s| {
            let mut runner = ForwardRunner::new(data, Variant::EdoNet, &cfg, desk.cfg.train.obs_t);
            runner.loss_batch(tape, s, &items).map_err(|e| match e {
                CoreError::Diff(d) => d,
                other => panic!("{other}"),
            })
        },
        &store,
        GradCheckOptions::default(),
    )
    .map_err(fail)?;
    let took = started.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && took < 60.0,
        format!("max relative error {worst:.2e} in {took:.1} s"),
    )
}

fn criterion_conditioning(desk: &mut Desk) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for env in Env::ALL {
        let mut spent = desk.gen_time;
        let mut mse = BTreeMap::new();
        for v in [Variant::EdoNet, Variant::Nc, Variant::Edo1] {
            spent += desk.model(env, v)?.1;
            let (m, t) = desk.test_mse(env, v)?;
            spent += t;
            mse.insert(v, m);
        }
        let (edo, nc, one) = (
            mse[&Variant::EdoNet],
            mse[&Variant::Nc],
            mse[&Variant::Edo1],
        );
        let minutes = spent.as_secs_f64() / 60.0;
        pass &= edo <= nc / 5.0 && edo <= one && minutes < 45.0;
        parts.push(format!(
            "{env}: edonet {edo:.4}, nc {nc:.4} ({:.1}x), edo1 {one:.4}, run {minutes:.1} min",
            nc / edo
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_oracle(desk: &mut Desk) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for env in Env::ALL {
        let edo = desk.test_mse(env, Variant::EdoNet)?.0;
        let of = desk.test_mse(env, Variant::Of)?.0;
        pass &= edo <= 2.0 * of;
        parts.push(format!("{env}: edonet {edo:.4}, of {of:.4}"));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_decoding(desk: &mut Desk) -> Outcome {
    let model = desk.model(Env::Bandage, Variant::EdoNet)?.0.clone();
    let data = desk.data(Env::Bandage);
    let reports = decode_params(
        &model,
        data,
        &[1, 5],
        &desk.cfg.model,
        &desk.cfg.train,
        desk.cfg.eval.decode_steps,
        &desk.hash,
    )
    .map_err(fail)?;
    let unseen = |t: usize| {
        reports
            .iter()
            .find(|r| r.experiment == "decode" && r.t == t)
            .map(|r| r.mean)
            .ok_or_else(|| format!("no decode report for T={t}"))
    };
    let (one, five) = (unseen(1)?, unseen(5)?);
    verdict(
        five <= one && one < 0.9 && five < 0.9,
        format!("unseen decode T=1 {one:.4}, T=5 {five:.4}"),
    )
}

fn criterion_transfer(desk: &mut Desk) -> Outcome {
    let source = desk.model(Env::Bandage, Variant::EdoNet)?.0.clone();
    let nc = desk.test_mse(Env::Lifting, Variant::Nc)?.0;
    let native = desk.test_mse(Env::Lifting, Variant::EdoNet)?.0;
    let lifting = desk.data(Env::Lifting);
    let t = transfer_bandage2lifting(
        &source,
        lifting,
        &desk.cfg.train,
        desk.cfg.eval.transfer_epochs,
        1,
        &desk.hash,
    )
    .map_err(fail)?;
    let frozen = frozen_identical(&source.store, &t.outcome.model.store, ADAPT_PREFIX);
    let tr = t.report.mean;
    verdict(
        nc / tr >= 3.0 && tr <= 5.0 * native && frozen,
        format!(
            "transfer {tr:.4}, nc {nc:.4} ({:.1}x), native edonet {native:.4} ({:.2}x), adaptation {}",
            nc / tr,
            tr / native,
            if frozen { "unchanged" } else { "modified" }
        ),
    )
}

fn criterion_inverse(desk: &mut Desk) -> Outcome {
    let source = desk.model(Env::Bandage, Variant::EdoNet)?.0.clone();
    let data = desk.data(Env::Bandage);
    let epochs = desk.cfg.eval.inverse_epochs;
    let mut mse = BTreeMap::new();
    for (variant, src) in [(Variant::EdoNet, Some(&source)), (Variant::Nc, None)] {
        let m = train_inverse(variant, data, src, &desk.cfg.model, &desk.cfg.train, epochs)
            .map_err(fail)?;
        let r = eval_inverse(&m, data, &data.split.test, 1, &desk.hash).map_err(fail)?;
        mse.insert(variant, r.mean);
    }
    let (edo, nc) = (mse[&Variant::EdoNet], mse[&Variant::Nc]);
    verdict(
        edo <= nc / 5.0,
        format!("edonet {edo:.4}, nc {nc:.4} ({:.1}x)", nc / edo),
    )
}

fn criterion_actions(desk: &mut Desk) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for env in Env::ALL {
        let edo = desk.model(env, Variant::EdoNet)?.0.clone();
        let nc = desk.model(env, Variant::Nc)?.0.clone();
        let data = desk.data(env);
        let mut mismatches = 0;
        for &s in &data.split.test {
            let states = predicted_states(&edo, data, s).map_err(fail)?;
            for (j, goal) in states.iter().enumerate() {
                let got = action_prediction(&data.action_grid, goal, |_| Ok(states.clone()))
                    .map_err(fail)?;
                if got != data.action_grid[j] {
                    mismatches += 1;
                }
            }
        }
        let e = eval_action(&edo, data, &data.split.test, 1, &desk.hash)
            .map_err(fail)?
            .mean;
        let n = eval_action(&nc, data, &data.split.test, 1, &desk.hash)
            .map_err(fail)?
            .mean;
        pass &= mismatches == 0 && e < n;
        parts.push(format!("{env}: self-consistency mismatches {mismatches}, action error edonet {e:.4} vs nc {n:.4}"));
    }
    verdict(pass, parts.join("; "))
}

const PIPELINE_CONFIG: &str = "train.epochs = 3\neval.decode_steps = 100\n";

fn edonet(args: &[&Path]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_edonet"))
        .args(args)
        .env_remove("EDONET_OUT")
        .env_remove("EDONET_JOBS")
        .output()
        .map_err(fail)?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

/// Runs gen, train, eval and report into `root`; returns the artefacts to
/// compare.
fn pipeline(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    std::fs::remove_dir_all(root).ok();
    std::fs::create_dir_all(root).map_err(fail)?;
    let cfg = root.join("run.cfg");
    std::fs::write(&cfg, PIPELINE_CONFIG).map_err(fail)?;
    let (data, models, reports, summary) = (
        root.join("data"),
        root.join("models"),
        root.join("reports"),
        root.join("summary"),
    );
    let p = Path::new;
    edonet(&[
        p("gen"),
        p("--config"),
        &cfg,
        p("--out"),
        &data,
        p("--jobs"),
        p("1"),
    ])?;
    for variant in ["edonet", "nc"] {
        edonet(&[
            p("train"),
            p("--config"),
            &cfg,
            p("--data"),
            &data,
            p("--variant"),
            p(variant),
            p("--out"),
            &models,
        ])?;
    }
    for (exp, variant) in [("state", "edonet"), ("state", "nc"), ("decode", "edonet")] {
        let ck = models.join(format!("{variant}_bandage.ckpt"));
        edonet(&[
            p("eval"),
            p("--experiment"),
            p(exp),
            p("--checkpoint"),
            &ck,
            p("--data"),
            &data,
            p("--out"),
            &reports,
            p("--jobs"),
            p("1"),
        ])?;
    }
    edonet(&[p("report"), p("--in"), &reports, p("--out"), &summary])?;
    let mut files = Vec::new();
    for dir in [&data, &models, &reports, &summary] {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(fail)?
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for f in entries {
            let name = f.strip_prefix(root).unwrap().display().to_string();
            files.push((name, std::fs::read(&f).map_err(fail)?));
        }
    }
    Ok(files)
}

fn criterion_reproducibility() -> Outcome {
    let base = std::env::temp_dir().join(format!("edonet-accept-{}", std::process::id()));
    let a = pipeline(&base.join("a"))?;
    let b = pipeline(&base.join("b"))?;
    std::fs::remove_dir_all(&base).ok();
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let required = [
        "data/manifest.json",
        "models/edonet_bandage.ckpt",
        "summary/report.csv",
    ];
    let complete = required.iter().all(|r| names.contains(r));
    verdict(
        a.len() == b.len() && differing.is_empty() && complete,
        format!("{} files compared, differing {:?}", a.len(), differing),
    )
}

fn main() {
    let started = Instant::now();
    let mut lines = Vec::new();
    let mut record = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        let line = format!("criterion {n:>2} ({name}): {tag} {detail}");
        println!("{line}");
        lines.push((tag == "PASS", line));
    };

    record(7, "simulator physics", criterion_simulator());
    record(8, "structural properties", criterion_structure());
    match Desk::new() {
        Ok(mut desk) => {
            record(1, "gradient integrity", criterion_gradients(&desk));
            record(2, "conditioning helps", criterion_conditioning(&mut desk));
            record(3, "oracle proximity", criterion_oracle(&mut desk));
            record(4, "decoding trend", criterion_decoding(&mut desk));
            record(5, "transfer", criterion_transfer(&mut desk));
            record(6, "inverse dynamics", criterion_inverse(&mut desk));
            record(10, "action selection", criterion_actions(&mut desk));
        }
        Err(e) => {
            for (n, name) in [
                (1, "gradient integrity"),
                (2, "conditioning helps"),
                (3, "oracle proximity"),
                (4, "decoding trend"),
                (5, "transfer"),
                (6, "inverse dynamics"),
                (10, "action selection"),
            ] {
                record(n, name, Err(format!("dataset generation failed: {e}")));
            }
        }
    }
    record(9, "reproducibility", criterion_reproducibility());

    lines.sort_by_key(|(_, l)| l[10..12].trim().parse::<usize>().unwrap_or(0));
    let passed = lines.iter().filter(|(ok, _)| *ok).count();
    println!(
        "\nacceptance summary ({:.1} min)",
        started.elapsed().as_secs_f64() / 60.0
    );
    for (_, line) in &lines {
        println!("{line}");
    }
    println!("{passed}/{} criteria passed", lines.len());
    if passed != lines.len() {
        std::process::exit(1);
    }
}
