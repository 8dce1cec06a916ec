//! Losses and training loops.
//!
//! The forward loss is the mean squared error between predicted and true
//! normalized displacements over every node and coordinate of the batch.
//! Latent-conditioned variants recompute each sample's latent from its
//! exploratory observations inside the differentiated graph, unless the
//! adaptation slots are frozen, in which case latents are computed once.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use edo_diffnum::{Adam, AdamConfig, Array, Checkpoint, DiffError, ParamStore, Tape, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::data::{Env, EnvData, Item};
use crate::error::{CoreError, Result};
use crate::model::{
    decoder_forward, init_decoder, init_forward_model, init_inverse, inverse_forward, AdaptNet,
    Conditioning, Dense, DynNet, IndexCache, ModelConfig, Topology, Variant, PARAM_WIDTH,
};

/// Weight of the parameter-supervision term of the supervised oracle.
pub const SUPERVISION_WEIGHT: f64 = 1.0;
/// Prefix of every adaptation slot.
pub const ADAPT_PREFIX: &str = "adapt.";

/// Observations fed to the adaptation module for a variant.
pub fn effective_t(variant: Variant, obs_t: usize) -> usize {
    match variant {
        Variant::Edo1 => 1,
        v if v.has_adaptation() => obs_t,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.17e},{:.17e}", r.epoch, r.train_loss, r.val_loss);
        }
        s
    }
}

/// A trained forward model with everything needed to reuse it.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub variant: Variant,
    pub env: Env,
    pub cfg: ModelConfig,
    pub obs_t: usize,
    pub store: ParamStore,
}

/// Outcome of a training run; `model.store` holds the best-validation weights.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ForwardModel,
    pub history: History,
    pub best_epoch: usize,
    pub best_val: f64,
    pub steps: u64,
}

fn numerical(context: String) -> impl Fn(CoreError) -> CoreError {
    move |e| match e {
        CoreError::Diff(DiffError::NonFinite { .. } | DiffError::NonFiniteGradient(_)) => {
            CoreError::Numerical(format!("{context}: {e}"))
        }
        other => other,
    }
}

fn unique_samples(items: &[Item]) -> (Vec<usize>, std::sync::Arc<[usize]>) {
    let mut uniq: Vec<usize> = items.iter().map(|&(s, _)| s).collect();
    uniq.sort_unstable();
    uniq.dedup();
    let pos = items
        .iter()
        .map(|(s, _)| uniq.binary_search(s).unwrap())
        .collect();
    (uniq, pos)
}

/// Evaluates a forward model on batches of interactions.
pub struct ForwardRunner<'a> {
    pub data: &'a EnvData,
    pub variant: Variant,
    pub cfg: ModelConfig,
    pub obs_t: usize,
    cache: IndexCache,
    /// Latents per sample when the adaptation module is frozen.
    fixed: Option<Vec<Vec<f64>>>,
}

impl<'a> ForwardRunner<'a> {
    pub fn new(data: &'a EnvData, variant: Variant, cfg: &ModelConfig, obs_t: usize) -> Self {
        Self {
            data,
            variant,
            cfg: cfg.clone(),
            obs_t: effective_t(variant, obs_t),
            cache: IndexCache::new(Topology::new(&data.table, cfg.hop_mode)),
            fixed: None,
        }
    }

    /// Computes every sample's latent once from `store` and reuses it.
    pub fn freeze_latents(&mut self, store: &ParamStore) -> Result<()> {
        let all: Vec<usize> = (0..self.data.samples.len()).collect();
        let z = latents(store, self.data, &all, self.obs_t)?;
        self.fixed = Some(all.iter().map(|&i| z.row(i).to_vec()).collect());
        Ok(())
    }

    /// Conditioning rows for the batch, plus the per-item latents when they
    /// come from the adaptation module.
    fn condition(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[Item],
    ) -> Result<Option<Var>> {
        match self.variant.conditioning() {
            Conditioning::None => Ok(None),
            Conditioning::Params => {
                let samples: Vec<usize> = items.iter().map(|&(s, _)| s).collect();
                Ok(Some(tape.constant(self.data.param_block(&samples))?))
            }
            Conditioning::Latent => {
                if let Some(fixed) = &self.fixed {
                    let rows: Vec<&[f64]> =
                        items.iter().map(|&(s, _)| fixed[s].as_slice()).collect();
                    return Ok(Some(tape.constant(Array::from_rows(&rows)?)?));
                }
                let (uniq, pos) = unique_samples(items);
                let obs = self.data.ea_block(&uniq, self.obs_t)?;
                let net = AdaptNet::load(tape, store)?;
                let z = net.f_phi(tape, &obs, uniq.len(), self.obs_t, self.data.n_nodes)?;
                Ok(Some(tape.gather_rows(z, pos)?))
            }
        }
    }

    /// Normalized displacement predictions `[items · n, 3]` recorded on `tape`.
    pub fn predict(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[Item],
    ) -> Result<(Var, Option<Var>)> {
        let nodes = self.data.node_block(items);
        self.predict_nodes(tape, store, items, &nodes)
    }

    /// Like [`ForwardRunner::predict`] with explicit node inputs.
    pub fn predict_nodes(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[Item],
        nodes: &Array,
    ) -> Result<(Var, Option<Var>)> {
        let cond = self.condition(tape, store, items)?;
        let idx = self.cache.get(items.len());
        let net = DynNet::load(tape, store)?;
        let out = net.forward(tape, &idx, self.cfg.steps, nodes, cond)?;
        Ok((out, cond))
    }

    /// Training loss of a batch.
    pub fn loss_batch(
        &mut self,
        tape: &mut Tape,
        store: &ParamStore,
        items: &[Item],
    ) -> Result<Var> {
        let (pred, cond) = self.predict(tape, store, items)?;
        let target = tape.constant(self.data.target_block(items))?;
        let mut loss = tape.mse(pred, target)?;
        if self.variant == Variant::Os {
            let z = cond.expect("supervised variant is conditioned");
            let head = Dense::load(tape, store, "sup.head")?;
            let guess = head.apply(tape, z, edo_diffnum::Activation::Identity)?;
            let samples: Vec<usize> = items.iter().map(|&(s, _)| s).collect();
            let truth = tape.constant(self.data.param_block(&samples))?;
            let sup = tape.mse(guess, truth)?;
            let sup = tape.scale(sup, SUPERVISION_WEIGHT)?;
            loss = tape.add(loss, sup)?;
        }
        Ok(loss)
    }

    /// Mean loss over `items` without gradients, weighted by batch size.
    pub fn mean_loss(&mut self, store: &ParamStore, items: &[Item], batch: usize) -> Result<f64> {
        let mut total = 0.0;
        for chunk in items.chunks(batch.max(1)) {
            let mut tape = Tape::new();
            let l = self.loss_batch(&mut tape, store, chunk)?;
            total += tape.value(l).item() * chunk.len() as f64;
        }
        Ok(total / items.len().max(1) as f64)
    }

    /// Normalized displacement predictions for each item, `n × 3` values each.
    pub fn predictions(
        &mut self,
        store: &ParamStore,
        items: &[Item],
        batch: usize,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(items.len());
        let per = self.data.n_nodes * 3;
        for chunk in items.chunks(batch.max(1)) {
            let mut tape = Tape::new();
            let (pred, _) = self.predict(&mut tape, store, chunk)?;
            out.extend(tape.value(pred).data().chunks(per).map(<[f64]>::to_vec));
        }
        Ok(out)
    }
}

/// Latents `[samples, p]` of the given samples using `t` observations.
pub fn latents(store: &ParamStore, data: &EnvData, samples: &[usize], t: usize) -> Result<Array> {
    let mut tape = Tape::new();
    let net = AdaptNet::load(&mut tape, store)?;
    let obs = data.ea_block(samples, t)?;
    let z = net.f_phi(&mut tape, &obs, samples.len(), t, data.n_nodes)?;
    Ok(tape.value(z).clone())
}

fn adam(cfg: &TrainConfig) -> Adam {
    Adam::new(AdamConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        ..AdamConfig::default()
    })
}

/// Generic epoch loop: shuffles `items` every epoch, steps Adam on each
/// batch, and keeps the weights with the lowest validation loss.
fn fit<L, V>(
    store: &mut ParamStore,
    cfg: &TrainConfig,
    epochs: usize,
    mut items: Vec<Item>,
    mut batch_loss: L,
    mut val_loss: V,
) -> Result<(ParamStore, History, usize, f64, u64)>
where
    L: FnMut(&mut Tape, &ParamStore, &[Item]) -> Result<Var>,
    V: FnMut(&ParamStore) -> Result<f64>,
{
    let mut opt = adam(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut history = History::default();
    let mut best = (store.clone(), 0usize, f64::INFINITY);
    for epoch in 1..=epochs {
        items.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in items.chunks(cfg.batch).enumerate() {
            let ctx = format!("epoch {epoch}, batch {b}");
            let mut tape = Tape::new();
            let loss = batch_loss(&mut tape, store, chunk).map_err(numerical(ctx.clone()))?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(CoreError::Numerical(format!("{ctx}: loss is {value}")));
            }
            total += value * chunk.len() as f64;
            let grads = tape
                .backward(loss, store)
                .map_err(|e| numerical(ctx.clone())(e.into()))?;
            opt.step(store, &grads)
                .map_err(|e| numerical(ctx.clone())(e.into()))?;
        }
        let train_loss = total / items.len().max(1) as f64;
        let val = val_loss(store).map_err(numerical(format!("epoch {epoch}, validation")))?;
        history.rows.push(HistoryRow {
            epoch,
            train_loss,
            val_loss: val,
        });
        if val < best.2 {
            best = (store.clone(), epoch, val);
        }
    }
    if epochs == 0 {
        let val = val_loss(store)?;
        best.2 = val;
    }
    Ok((best.0, history, best.1, best.2, opt.steps()))
}

/// Trains a forward-dynamics variant on the training split of `data`.
///
/// `init` continues from existing weights (missing slots are created);
/// slots under `frozen_prefix` are not updated and, for the adaptation
/// module, their latents are computed once up front.
pub fn train_forward(
    variant: Variant,
    data: &EnvData,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    epochs: usize,
    init: Option<ParamStore>,
    frozen_prefix: Option<&str>,
) -> Result<TrainOutcome> {
    let fresh = init_forward_model(variant, model_cfg, cfg.seed)?;
    let mut store = match init {
        Some(mut s) => {
            for (name, slot) in fresh.iter() {
                if !s.contains(name) {
                    s.insert(name, slot.value.clone(), true)?;
                }
            }
            s
        }
        None => fresh,
    };
    let mut runner = ForwardRunner::new(data, variant, model_cfg, cfg.obs_t);
    if let Some(prefix) = frozen_prefix {
        if store.set_trainable(prefix, false) == 0 {
            return Err(CoreError::Compat(format!(
                "variant {variant} has no '{prefix}' slots to freeze"
            )));
        }
        if prefix == ADAPT_PREFIX {
            runner.freeze_latents(&store)?;
        }
    }
    let train_items = data.items(&data.split.train);
    let val_items = data.items(&data.split.val);
    let batch = cfg.batch;
    let runner = std::cell::RefCell::new(runner);
    let (best, history, best_epoch, best_val, steps) = fit(
        &mut store,
        cfg,
        epochs,
        train_items,
        |tape, s, items| runner.borrow_mut().loss_batch(tape, s, items),
        |s| runner.borrow_mut().mean_loss(s, &val_items, batch),
    )?;
    let obs_t = runner.borrow().obs_t;
    Ok(TrainOutcome {
        model: ForwardModel {
            variant,
            env: data.env,
            cfg: model_cfg.clone(),
            obs_t,
            store: best,
        },
        history,
        best_epoch,
        best_val,
        steps,
    })
}

impl ForwardModel {
    /// Checkpoint with the metadata needed to rebuild the model.
    pub fn to_checkpoint(&self, steps: u64, extra: &BTreeMap<String, String>) -> Checkpoint {
        let mut ck = Checkpoint::new(self.store.clone(), steps);
        let m = &mut ck.meta;
        m.insert("kind".into(), "forward".into());
        m.insert("variant".into(), self.variant.to_string());
        m.insert("env".into(), self.env.to_string());
        m.insert("obs_t".into(), self.obs_t.to_string());
        m.insert("model.latent".into(), self.cfg.latent.to_string());
        m.insert("model.hidden".into(), self.cfg.hidden.to_string());
        m.insert("model.steps".into(), self.cfg.steps.to_string());
        m.insert("model.hop_mode".into(), self.cfg.hop_mode.to_string());
        for (k, v) in extra {
            m.insert(k.clone(), v.clone());
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |k: &str| -> Result<&String> {
            ck.meta
                .get(k)
                .ok_or_else(|| CoreError::Compat(format!("checkpoint lacks '{k}'")))
        };
        if get("kind")? != "forward" {
            return Err(CoreError::Compat("not a forward-model checkpoint".into()));
        }
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| CoreError::Compat(format!("checkpoint field '{k}' is malformed")))
        };
        Ok(Self {
            variant: get("variant")?
                .parse()
                .map_err(|_| CoreError::Compat("bad variant".into()))?,
            env: get("env")?
                .parse()
                .map_err(|_| CoreError::Compat("bad env".into()))?,
            obs_t: num("obs_t")?,
            cfg: ModelConfig {
                latent: num("model.latent")?,
                hidden: num("model.hidden")?,
                steps: num("model.steps")?,
                hop_mode: get("model.hop_mode")?
                    .parse()
                    .map_err(|_| CoreError::Compat("bad hop mode".into()))?,
            },
            store: ck.store.clone(),
        })
    }
}

// ---------------------------------------------------------------------------
// Inverse dynamics

/// Inverse head together with the conditioning it was trained with.
#[derive(Debug, Clone)]
pub struct InverseModel {
    pub variant: Variant,
    pub store: ParamStore,
    /// Conditioning row per sample (empty rows for the unconditioned head).
    pub cond: Vec<Vec<f64>>,
    pub history: History,
}

/// Per-sample conditioning for an inverse variant. Latent variants need the
/// forward model whose (frozen) adaptation module provides `z`.
pub fn inverse_conditioning(
    variant: Variant,
    data: &EnvData,
    source: Option<&ForwardModel>,
) -> Result<Vec<Vec<f64>>> {
    let n = data.samples.len();
    match variant.conditioning() {
        Conditioning::None => Ok(vec![Vec::new(); n]),
        Conditioning::Params => Ok(data
            .samples
            .iter()
            .map(|s| s.params_norm.to_vec())
            .collect()),
        Conditioning::Latent => {
            let src = source.ok_or_else(|| {
                CoreError::Compat(format!(
                    "inverse variant {variant} needs an adaptation module"
                ))
            })?;
            if !src.variant.has_adaptation() {
                return Err(CoreError::Compat(format!(
                    "checkpoint variant {} has no adaptation module",
                    src.variant
                )));
            }
            let all: Vec<usize> = (0..n).collect();
            let z = latents(&src.store, data, &all, src.obs_t)?;
            Ok(all.iter().map(|&i| z.row(i).to_vec()).collect())
        }
    }
}

impl InverseModel {
    fn cond_var(&self, tape: &mut Tape, items: &[Item]) -> Result<Option<Var>> {
        if self.cond.first().is_none_or(|c| c.is_empty()) {
            return Ok(None);
        }
        let rows: Vec<&[f64]> = items
            .iter()
            .map(|&(s, _)| self.cond[s].as_slice())
            .collect();
        Ok(Some(tape.constant(Array::from_rows(&rows)?)?))
    }

    /// Normalized action predictions `[items, 1]` recorded on `tape`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        data: &EnvData,
        cache: &mut IndexCache,
        items: &[Item],
    ) -> Result<Var> {
        let cond = self.cond_var(tape, items)?;
        let idx = cache.get(items.len());
        inverse_forward(tape, store, &idx, &data.pair_block(items), cond)
    }

    fn loss(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        data: &EnvData,
        cache: &mut IndexCache,
        items: &[Item],
    ) -> Result<Var> {
        let pred = self.forward(tape, store, data, cache, items)?;
        let target: Vec<f64> = items
            .iter()
            .map(|&(s, a)| data.samples[s].actions_norm[a])
            .collect();
        let target = tape.constant(Array::new(vec![items.len(), 1], target)?)?;
        Ok(tape.mse(pred, target)?)
    }

    /// Normalized action predictions, one per item.
    pub fn predict(&self, data: &EnvData, items: &[Item], batch: usize) -> Result<Vec<f64>> {
        let mut cache =
            IndexCache::new(Topology::new(&data.table, crate::model::HopMode::Separate));
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(batch.max(1)) {
            let mut tape = Tape::new();
            let p = self.forward(&mut tape, &self.store, data, &mut cache, chunk)?;
            out.extend_from_slice(tape.value(p).data());
        }
        Ok(out)
    }
}

/// Trains an inverse-dynamics head; any adaptation module stays frozen.
pub fn train_inverse(
    variant: Variant,
    data: &EnvData,
    source: Option<&ForwardModel>,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<InverseModel> {
    let cond = inverse_conditioning(variant, data, source)?;
    let width = cond.first().map_or(0, Vec::len);
    let mut store = ParamStore::new(cfg.seed);
    init_inverse(&mut store, model_cfg, width)?;
    let mut model = InverseModel {
        variant,
        store: store.clone(),
        cond,
        history: History::default(),
    };
    let cache = std::cell::RefCell::new(IndexCache::new(Topology::new(
        &data.table,
        crate::model::HopMode::Separate,
    )));
    let val_items = data.items(&data.split.val);
    let batch = cfg.batch;
    let (best, history, _, _, _) = fit(
        &mut store,
        cfg,
        epochs,
        data.items(&data.split.train),
        |tape, s, items| model.loss(tape, s, data, &mut cache.borrow_mut(), items),
        |s| {
            let mut total = 0.0;
            for chunk in val_items.chunks(batch) {
                let mut tape = Tape::new();
                let l = model.loss(&mut tape, s, data, &mut cache.borrow_mut(), chunk)?;
                total += tape.value(l).item() * chunk.len() as f64;
            }
            Ok(total / val_items.len().max(1) as f64)
        },
    )?;
    model.store = best;
    model.history = history;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Property regressor

/// Standardizes each column of `z` with the mean and population std of the
/// given rows. Columns that are constant on those rows are only centred.
pub fn standardize_columns(z: &Array, rows: &[usize]) -> Result<Array> {
    if rows.is_empty() || rows.iter().any(|&r| r >= z.rows()) {
        return Err(CoreError::Argument(
            "no valid rows to standardize on".into(),
        ));
    }
    let cols = z.cols();
    let n = rows.len() as f64;
    let mut out = z.clone();
    for c in 0..cols {
        let mean = rows.iter().map(|&r| z.row(r)[c]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|&r| (z.row(r)[c] - mean).powi(2))
            .sum::<f64>()
            / n;
        let scale = if var > 1e-24 { var.sqrt() } else { 1.0 };
        for r in 0..z.rows() {
            out.data_mut()[r * cols + c] = (z.row(r)[c] - mean) / scale;
        }
    }
    Ok(out)
}

/// Fits the property regressor on `(z, normalized params)` pairs with
/// full-batch Adam for `steps` iterations.
pub fn train_decoder(
    z: &Array,
    targets: &Array,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    steps: usize,
) -> Result<ParamStore> {
    if z.rows() != targets.rows() || targets.cols() != PARAM_WIDTH {
        return Err(CoreError::Argument(
            "latents and targets do not line up".into(),
        ));
    }
    let mut store = ParamStore::new(cfg.seed);
    init_decoder(&mut store, model_cfg)?;
    let mut opt = adam(cfg);
    for step in 0..steps {
        let mut tape = Tape::new();
        let zi = tape.constant(z.clone())?;
        let pred = decoder_forward(&mut tape, &store, zi)?;
        let t = tape.constant(targets.clone())?;
        let loss = tape.mse(pred, t)?;
        let grads = tape
            .backward(loss, &store)
            .map_err(|e| numerical(format!("decoder step {step}"))(e.into()))?;
        opt.step(&mut store, &grads)?;
    }
    Ok(store)
}

pub fn decoder_predict(store: &ParamStore, z: &Array) -> Result<Array> {
    let mut tape = Tape::new();
    let zi = tape.constant(z.clone())?;
    let pred = decoder_forward(&mut tape, store, zi)?;
    Ok(tape.value(pred).clone())
}
