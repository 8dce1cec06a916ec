//! Run configuration: `key = value` lines with `#` comments.
//!
//! Every setting has a default, so an empty file is a valid configuration.
//! The canonical form lists all keys sorted, one `key = value` per line; its
//! SHA-256 digest is the config hash embedded in every artifact. The data
//! hash covers only the `sim.*` and `data.*` keys, i.e. everything that
//! determines a generated dataset.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;

use edo_clothsim::SimConfig;
use sha2::{Digest, Sha256};

use crate::data::{Env, GridKind};
use crate::error::{CoreError, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub grid: GridKind,
    /// Seed of the train/validation/test split.
    pub seed: u64,
    pub graph_rows: usize,
    pub graph_cols: usize,
    /// Exploratory frames stored per sample.
    pub ea_frames: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            grid: GridKind::Desk,
            seed: 7,
            graph_rows: 8,
            graph_cols: 8,
            ea_frames: 10,
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: Env,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Exploratory observations T fed to the adaptation module.
    pub obs_t: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: Env::Bandage,
            epochs: 300,
            batch: 8,
            lr: 1e-3,
            weight_decay: 1e-5,
            seed: 0,
            obs_t: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Full-batch Adam steps for the property regressor.
    pub decode_steps: usize,
    pub decode_t: Vec<usize>,
    pub inverse_epochs: usize,
    pub transfer_epochs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            decode_steps: 3000,
            decode_t: vec![1, 3, 5, 10],
            inverse_epochs: 300,
            transfer_epochs: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

fn put<T: Display>(m: &mut BTreeMap<String, String>, k: &str, v: T) {
    m.insert(k.to_string(), v.to_string());
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CoreError::Argument(format!("invalid value '{value}' for '{key}'")))
}

fn join(v: &[usize]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// All settings as canonical strings, keyed by name.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let s = &self.sim;
        put(&mut m, "sim.rows", s.rows);
        put(&mut m, "sim.cols", s.cols);
        put(&mut m, "sim.spacing", s.spacing);
        put(&mut m, "sim.node_mass", s.node_mass);
        put(&mut m, "sim.dt", s.dt);
        put(&mut m, "sim.damping", s.damping);
        put(&mut m, "sim.settle_damping", s.settle_damping);
        put(&mut m, "sim.settle_tol", s.settle_tol);
        put(&mut m, "sim.settle_max_steps", s.settle_max_steps);
        put(&mut m, "sim.gravity", s.gravity);
        put(&mut m, "sim.contact_stiffness", s.contact_stiffness);
        put(&mut m, "sim.ea_settle_tol", s.ea_settle_tol);
        put(&mut m, "sim.ea_raw_steps", s.ea_raw_steps);
        put(&mut m, "sim.ea_pull_speed", s.ea_pull_speed);
        put(&mut m, "sim.arm_radius", s.arm_radius);
        put(&mut m, "sim.bandage_f_max", s.bandage_f_max);
        put(&mut m, "sim.sphere_radius", s.sphere_radius);
        put(&mut m, "sim.sphere_mass", s.sphere_mass);
        put(&mut m, "sim.lifting_d_max", s.lifting_d_max);
        put(&mut m, "sim.lifting_speed", s.lifting_speed);
        put(&mut m, "sim.action_count", s.action_count);
        let d = &self.data;
        put(&mut m, "data.grid", d.grid);
        put(&mut m, "data.seed", d.seed);
        put(&mut m, "data.graph_rows", d.graph_rows);
        put(&mut m, "data.graph_cols", d.graph_cols);
        put(&mut m, "data.ea_frames", d.ea_frames);
        put(&mut m, "data.train_frac", d.train_frac);
        put(&mut m, "data.val_frac", d.val_frac);
        put(&mut m, "data.test_frac", d.test_frac);
        let md = &self.model;
        put(&mut m, "model.latent", md.latent);
        put(&mut m, "model.hidden", md.hidden);
        put(&mut m, "model.steps", md.steps);
        put(&mut m, "model.hop_mode", md.hop_mode);
        let t = &self.train;
        put(&mut m, "train.env", t.env);
        put(&mut m, "train.epochs", t.epochs);
        put(&mut m, "train.batch", t.batch);
        put(&mut m, "train.lr", t.lr);
        put(&mut m, "train.weight_decay", t.weight_decay);
        put(&mut m, "train.seed", t.seed);
        put(&mut m, "train.obs_t", t.obs_t);
        let e = &self.eval;
        put(&mut m, "eval.decode_steps", e.decode_steps);
        put(&mut m, "eval.decode_t", join(&e.decode_t));
        put(&mut m, "eval.inverse_epochs", e.inverse_epochs);
        put(&mut m, "eval.transfer_epochs", e.transfer_epochs);
        m
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.sim;
        match key {
            "sim.rows" => s.rows = parse(key, v)?,
            "sim.cols" => s.cols = parse(key, v)?,
            "sim.spacing" => s.spacing = parse(key, v)?,
            "sim.node_mass" => s.node_mass = parse(key, v)?,
            "sim.dt" => s.dt = parse(key, v)?,
            "sim.damping" => s.damping = parse(key, v)?,
            "sim.settle_damping" => s.settle_damping = parse(key, v)?,
            "sim.settle_tol" => s.settle_tol = parse(key, v)?,
            "sim.settle_max_steps" => s.settle_max_steps = parse(key, v)?,
            "sim.gravity" => s.gravity = parse(key, v)?,
            "sim.contact_stiffness" => s.contact_stiffness = parse(key, v)?,
            "sim.ea_settle_tol" => s.ea_settle_tol = parse(key, v)?,
            "sim.ea_raw_steps" => s.ea_raw_steps = parse(key, v)?,
            "sim.ea_pull_speed" => s.ea_pull_speed = parse(key, v)?,
            "sim.arm_radius" => s.arm_radius = parse(key, v)?,
            "sim.bandage_f_max" => s.bandage_f_max = parse(key, v)?,
            "sim.sphere_radius" => s.sphere_radius = parse(key, v)?,
            "sim.sphere_mass" => s.sphere_mass = parse(key, v)?,
            "sim.lifting_d_max" => s.lifting_d_max = parse(key, v)?,
            "sim.lifting_speed" => s.lifting_speed = parse(key, v)?,
            "sim.action_count" => s.action_count = parse(key, v)?,
            "data.grid" => self.data.grid = v.parse()?,
            "data.seed" => self.data.seed = parse(key, v)?,
            "data.graph_rows" => self.data.graph_rows = parse(key, v)?,
            "data.graph_cols" => self.data.graph_cols = parse(key, v)?,
            "data.ea_frames" => self.data.ea_frames = parse(key, v)?,
            "data.train_frac" => self.data.train_frac = parse(key, v)?,
            "data.val_frac" => self.data.val_frac = parse(key, v)?,
            "data.test_frac" => self.data.test_frac = parse(key, v)?,
            "model.latent" => self.model.latent = parse(key, v)?,
            "model.hidden" => self.model.hidden = parse(key, v)?,
            "model.steps" => self.model.steps = parse(key, v)?,
            "model.hop_mode" => self.model.hop_mode = v.parse()?,
            "train.env" => self.train.env = v.parse()?,
            "train.epochs" => self.train.epochs = parse(key, v)?,
            "train.batch" => self.train.batch = parse(key, v)?,
            "train.lr" => self.train.lr = parse(key, v)?,
            "train.weight_decay" => self.train.weight_decay = parse(key, v)?,
            "train.seed" => self.train.seed = parse(key, v)?,
            "train.obs_t" => self.train.obs_t = parse(key, v)?,
            "eval.decode_steps" => self.eval.decode_steps = parse(key, v)?,
            "eval.decode_t" => {
                self.eval.decode_t = v
                    .split(',')
                    .map(|x| parse(key, x.trim()))
                    .collect::<Result<_>>()?
            }
            "eval.inverse_epochs" => self.eval.inverse_epochs = parse(key, v)?,
            "eval.transfer_epochs" => self.eval.transfer_epochs = parse(key, v)?,
            _ => return Err(CoreError::Argument(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses configuration text; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CoreError::Argument(format!("line {}: expected 'key = value'", n + 1))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(CoreError::Argument(format!(
                    "line {}: duplicate key '{k}'",
                    n + 1
                )));
            }
            cfg.set(k, v)
                .map_err(|e| CoreError::Argument(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = self.data.train_frac + self.data.val_frac + self.data.test_frac;
        if (fr - 1.0).abs() > 1e-9 {
            return Err(CoreError::Argument(format!(
                "split fractions sum to {fr}, not 1"
            )));
        }
        if self.data.ea_frames == 0 || self.train.obs_t > self.data.ea_frames {
            return Err(CoreError::Argument(format!(
                "train.obs_t = {} needs at least as many stored frames (data.ea_frames = {})",
                self.train.obs_t, self.data.ea_frames
            )));
        }
        if let Some(t) = self
            .eval
            .decode_t
            .iter()
            .find(|&&t| t > self.data.ea_frames)
        {
            return Err(CoreError::Argument(format!(
                "eval.decode_t entry {t} exceeds data.ea_frames"
            )));
        }
        if self.train.batch == 0 || self.sim.action_count < 2 {
            return Err(CoreError::Argument(
                "batch and action count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        self.to_map()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    /// Digest of the settings that determine the generated dataset.
    pub fn data_hash(&self) -> String {
        let text: String = self
            .to_map()
            .iter()
            .filter(|(k, _)| k.starts_with("sim.") || k.starts_with("data."))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        sha256_hex(text.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
