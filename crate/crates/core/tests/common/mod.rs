#![allow(dead_code)]

use std::sync::OnceLock;

use edo_core::config::RunConfig;
use edo_core::data::{gen_dataset, Dataset};
use edo_diffnum::{Array, ParamStore};

/// Desk grid with few actions and a short exploratory pull.
pub fn tiny_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.sim.action_count = 3;
    cfg.sim.ea_raw_steps = 120;
    cfg.model.latent = 8;
    cfg.model.hidden = 8;
    cfg.model.steps = 2;
    cfg.train.epochs = 3;
    cfg.train.obs_t = 3;
    cfg
}

pub fn tiny_dataset() -> &'static Dataset {
    static DS: OnceLock<Dataset> = OnceLock::new();
    DS.get_or_init(|| gen_dataset(&tiny_config(), 1).unwrap())
}

/// Sets every value of the slots under `prefix` to `v`.
pub fn fill(store: &mut ParamStore, prefix: &str, v: f64) {
    let names: Vec<String> = store
        .iter()
        .filter(|(n, _)| n.starts_with(prefix))
        .map(|(n, _)| n.to_string())
        .collect();
    assert!(!names.is_empty(), "no slots under {prefix}");
    for n in names {
        store.slot_mut(&n).unwrap().value.data_mut().fill(v);
    }
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Array {
    let data = (0..rows * cols)
        .map(|i| ((i as f64 + 1.0) * 0.731 + seed as f64 * 1.37).sin())
        .collect();
    Array::new(vec![rows, cols], data).unwrap()
}

/// `W x + b` with `W` stored `[out, in]`.
pub fn dense(store: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let w = store.get(&format!("{name}.w")).unwrap();
    let b = store.get(&format!("{name}.b")).unwrap();
    linear(w, x)
        .iter()
        .zip(b.data())
        .map(|(y, b)| y + b)
        .collect()
}

pub fn linear(w: &Array, x: &[f64]) -> Vec<f64> {
    let (out, inp) = (w.shape()[0], w.shape()[1]);
    assert_eq!(inp, x.len());
    (0..out)
        .map(|o| (0..inp).map(|i| w.data()[o * inp + i] * x[i]).sum())
        .collect()
}

pub fn relu(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
