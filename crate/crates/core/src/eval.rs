//! Experiments on trained models and their reports.
//!
//! Every error reported here is a mean squared error in normalized units,
//! computed per test sample first. A report's mean and standard deviation
//! are taken over those per-sample values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use edo_diffnum::{Array, ParamStore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::data::{Env, EnvData, Item};
use crate::error::{CoreError, Result};
use crate::model::{ModelConfig, PARAM_WIDTH};
use crate::train::{
    decoder_predict, latents, standardize_columns, train_decoder, train_forward, ForwardModel,
    ForwardRunner, InverseModel, TrainOutcome, ADAPT_PREFIX,
};

/// Header of the aggregated report table.
pub const CSV_HEADER: &str = "experiment,variant,env,T,mean_mse,std_mse,n_samples,config_hash";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub experiment: String,
    pub variant: String,
    pub env: String,
    /// Exploratory observations used (0 for unconditioned variants).
    pub t: usize,
    pub sample_ids: Vec<usize>,
    pub per_sample: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
    pub config_hash: String,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl MetricReport {
    pub fn new(
        experiment: &str,
        variant: &str,
        env: &str,
        t: usize,
        sample_ids: Vec<usize>,
        per_sample: Vec<f64>,
        config_hash: &str,
    ) -> Result<Self> {
        if per_sample.is_empty() || per_sample.len() != sample_ids.len() {
            return Err(CoreError::Argument(format!(
                "report '{experiment}' needs one value per sample"
            )));
        }
        let (mean, std) = mean_std(&per_sample);
        Ok(Self {
            experiment: experiment.into(),
            variant: variant.into(),
            env: env.into(),
            t,
            n_samples: per_sample.len(),
            sample_ids,
            per_sample,
            mean,
            std,
            config_hash: config_hash.into(),
        })
    }

    /// Checks the summary statistics against the per-sample values.
    pub fn verify(&self) -> Result<()> {
        if self.per_sample.is_empty() || self.per_sample.len() != self.n_samples {
            return Err(CoreError::Data(format!(
                "report '{}' has {} values for {} samples",
                self.experiment,
                self.per_sample.len(),
                self.n_samples
            )));
        }
        let (mean, std) = mean_std(&self.per_sample);
        let tol = 1e-12 * mean.abs().max(1.0);
        if (mean - self.mean).abs() > tol || (std - self.std).abs() > tol {
            return Err(CoreError::Data(format!(
                "report '{}' statistics do not match its samples",
                self.experiment
            )));
        }
        Ok(())
    }
}

/// Runs `f` on every sample, on `jobs` threads when `jobs > 1`.
fn per_sample<F>(samples: &[usize], jobs: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    if jobs <= 1 {
        return samples.iter().map(|&s| f(s)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CoreError::Argument(format!("cannot start {jobs} workers: {e}")))?;
    pool.install(|| samples.par_iter().map(|&s| f(s)).collect())
}

fn sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Per-sample state-prediction MSE with an arbitrary predictor mapping
/// interactions to normalized displacements.
pub fn state_mse_with<P>(
    data: &EnvData,
    samples: &[usize],
    jobs: usize,
    predict: P,
) -> Result<Vec<f64>>
where
    P: Fn(&[Item]) -> Result<Vec<Vec<f64>>> + Sync,
{
    per_sample(samples, jobs, |s| {
        let items = data.items(&[s]);
        let pred = predict(&items)?;
        let total: f64 = items
            .iter()
            .zip(&pred)
            .map(|(&(s, a), p)| sq_err(p, &data.samples[s].deltas[a]))
            .sum();
        Ok(total / items.len() as f64)
    })
}

fn check_env(model: &ForwardModel, data: &EnvData) -> Result<()> {
    if model.env != data.env {
        return Err(CoreError::Compat(format!(
            "model was trained on {} but the data is {}",
            model.env, data.env
        )));
    }
    Ok(())
}

fn model_predictor<'a>(
    model: &'a ForwardModel,
    data: &'a EnvData,
) -> impl Fn(&[Item]) -> Result<Vec<Vec<f64>>> + Sync + 'a {
    move |items| {
        let mut runner = ForwardRunner::new(data, model.variant, &model.cfg, model.obs_t);
        runner.predictions(&model.store, items, items.len())
    }
}

/// State prediction on `samples` (normally the test split).
pub fn eval_state_prediction(
    model: &ForwardModel,
    data: &EnvData,
    samples: &[usize],
    jobs: usize,
    config_hash: &str,
) -> Result<MetricReport> {
    check_env(model, data)?;
    let mse = state_mse_with(data, samples, jobs, model_predictor(model, data))?;
    MetricReport::new(
        "state",
        model.variant.name(),
        &data.env.to_string(),
        model.obs_t,
        samples.to_vec(),
        mse,
        config_hash,
    )
}

fn require_adaptation(model: &ForwardModel, what: &str) -> Result<()> {
    if !model.variant.has_adaptation() {
        return Err(CoreError::Compat(format!(
            "{what} needs an adaptation module, which variant {} does not have",
            model.variant
        )));
    }
    Ok(())
}

/// Property decoding: for each `T`, latents of every sample are computed with
/// the frozen adaptation module and standardized with training-split
/// statistics, a regressor is fit on the training split, and per-sample
/// errors are reported for unseen (`decode`) and training (`decode-seen`)
/// samples.
pub fn decode_params(
    model: &ForwardModel,
    data: &EnvData,
    t_values: &[usize],
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    steps: usize,
    config_hash: &str,
) -> Result<Vec<MetricReport>> {
    require_adaptation(model, "property decoding")?;
    let all: Vec<usize> = (0..data.samples.len()).collect();
    let targets: Vec<[f64; PARAM_WIDTH]> = data.samples.iter().map(|s| s.params_norm).collect();
    let rows_of = |z: &Array, idx: &[usize]| -> Result<Array> {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| z.row(i)).collect();
        Ok(Array::from_rows(&rows)?)
    };
    let train = &data.split.train;
    let unseen = data.split.unseen();
    let mut reports = Vec::new();
    for &t in t_values {
        let z = standardize_columns(&latents(&model.store, data, &all, t)?, train)?;
        let ztrain = rows_of(&z, train)?;
        let ttrain = Array::from_rows(&train.iter().map(|&i| targets[i]).collect::<Vec<_>>())?;
        let dec = train_decoder(&ztrain, &ttrain, model_cfg, cfg, steps)?;
        let pred = decoder_predict(&dec, &z)?;
        for (name, idx) in [("decode", &unseen), ("decode-seen", train)] {
            let mse = idx
                .iter()
                .map(|&i| sq_err(pred.row(i), &targets[i]))
                .collect();
            reports.push(MetricReport::new(
                name,
                model.variant.name(),
                &data.env.to_string(),
                t,
                idx.clone(),
                mse,
                config_hash,
            )?);
        }
    }
    Ok(reports)
}

/// Result of fine-tuning a bandage model on lifting.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub outcome: TrainOutcome,
    pub report: MetricReport,
}

/// Fine-tunes the dynamics of a bandage model on lifting with the adaptation
/// module frozen, then evaluates state prediction on the lifting test split.
pub fn transfer_bandage2lifting(
    source: &ForwardModel,
    lifting: &EnvData,
    cfg: &TrainConfig,
    epochs: usize,
    jobs: usize,
    config_hash: &str,
) -> Result<Transfer> {
    require_adaptation(source, "transfer with a frozen adaptation module")?;
    if source.env != Env::Bandage || lifting.env != Env::Lifting {
        return Err(CoreError::Compat(format!(
            "transfer goes from bandage to lifting, got {} to {}",
            source.env, lifting.env
        )));
    }
    let cfg = TrainConfig {
        obs_t: source.obs_t,
        ..cfg.clone()
    };
    let outcome = train_forward(
        source.variant,
        lifting,
        &source.cfg,
        &cfg,
        epochs,
        Some(source.store.clone()),
        Some(ADAPT_PREFIX),
    )?;
    if !frozen_identical(&source.store, &outcome.model.store, ADAPT_PREFIX) {
        return Err(CoreError::Numerical(
            "frozen adaptation weights changed".into(),
        ));
    }
    let mut report = eval_state_prediction(
        &outcome.model,
        lifting,
        &lifting.split.test,
        jobs,
        config_hash,
    )?;
    report.experiment = "transfer".into();
    Ok(Transfer { outcome, report })
}

/// Whether every slot under `prefix` holds bit-identical values in both stores.
pub fn frozen_identical(a: &ParamStore, b: &ParamStore, prefix: &str) -> bool {
    let pick = |s: &ParamStore| -> Vec<(String, Vec<u64>)> {
        s.iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(n, slot)| {
                (
                    n.to_string(),
                    slot.value.data().iter().map(|v| v.to_bits()).collect(),
                )
            })
            .collect()
    };
    let (x, y) = (pick(a), pick(b));
    !x.is_empty() && x == y
}

/// Per-sample inverse-dynamics MSE with an arbitrary predictor mapping
/// interactions to normalized actions.
pub fn inverse_mse_with<P>(data: &EnvData, samples: &[usize], predict: P) -> Result<Vec<f64>>
where
    P: Fn(&[Item]) -> Result<Vec<f64>>,
{
    samples
        .iter()
        .map(|&s| {
            let items = data.items(&[s]);
            let pred = predict(&items)?;
            let truth = &data.samples[s].actions_norm;
            Ok(sq_err(&pred, truth))
        })
        .collect()
}

pub fn eval_inverse(
    model: &InverseModel,
    data: &EnvData,
    samples: &[usize],
    t: usize,
    config_hash: &str,
) -> Result<MetricReport> {
    let mse = inverse_mse_with(data, samples, |items| {
        model.predict(data, items, items.len())
    })?;
    MetricReport::new(
        "inverse",
        model.variant.name(),
        &data.env.to_string(),
        t,
        samples.to_vec(),
        mse,
        config_hash,
    )
}

/// Index of the candidate with the smallest error; ties go to the smaller
/// action value.
pub fn select_action(actions: &[f64], errors: &[f64]) -> Result<usize> {
    if actions.is_empty() || actions.len() != errors.len() {
        return Err(CoreError::Argument(
            "action grid is empty or mismatched".into(),
        ));
    }
    let mut best = 0;
    for j in 1..actions.len() {
        let (e, b) = (errors[j], errors[best]);
        if e < b || (e == b && actions[j] < actions[best]) {
            best = j;
        }
    }
    Ok(best)
}

/// Chooses the action whose predicted next state is closest to `goal`.
///
/// `predict` maps the candidate actions to predicted next states; the error
/// of a candidate is the squared distance to `goal`.
pub fn action_prediction<P>(grid: &[f64], goal: &[f64], predict: P) -> Result<f64>
where
    P: FnOnce(&[f64]) -> Result<Vec<Vec<f64>>>,
{
    if grid.is_empty() {
        return Err(CoreError::Argument("action grid is empty".into()));
    }
    let states = predict(grid)?;
    let errors: Vec<f64> = states
        .iter()
        .map(|s| s.iter().zip(goal).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect();
    Ok(grid[select_action(grid, &errors)?])
}

/// Predicted next states (metres, flattened) of sample `s` for every action
/// of the dataset grid.
pub fn predicted_states(model: &ForwardModel, data: &EnvData, s: usize) -> Result<Vec<Vec<f64>>> {
    let items: Vec<Item> = (0..data.action_grid.len()).map(|j| (s, j)).collect();
    let mut runner = ForwardRunner::new(data, model.variant, &model.cfg, model.obs_t);
    let pred = runner.predictions(&model.store, &items, items.len())?;
    let before = &data.samples[s].before_raw;
    Ok(pred
        .iter()
        .map(|d| {
            let d = data.stats.delta.invert(d);
            before
                .iter()
                .zip(d.chunks(3))
                .flat_map(|(p, q)| [p[0] + q[0], p[1] + q[1], p[2] + q[2]])
                .collect()
        })
        .collect())
}

/// Action selection against simulated goals: every interaction of a sample
/// serves as a goal, and the per-sample error is the mean squared difference
/// between the selected and the true action in normalized units.
pub fn eval_action(
    model: &ForwardModel,
    data: &EnvData,
    samples: &[usize],
    jobs: usize,
    config_hash: &str,
) -> Result<MetricReport> {
    check_env(model, data)?;
    if data.action_grid.is_empty() {
        return Err(CoreError::Argument("action grid is empty".into()));
    }
    let err = per_sample(samples, jobs, |s| {
        let states = predicted_states(model, data, s)?;
        let smp = &data.samples[s];
        let mut total = 0.0;
        for (k, delta) in smp.deltas_raw.iter().enumerate() {
            let goal: Vec<f64> = smp
                .before_raw
                .iter()
                .zip(delta)
                .flat_map(|(p, d)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]])
                .collect();
            let chosen = action_prediction(&data.action_grid, &goal, |_| Ok(states.clone()))?;
            let a = data.stats.action.apply(&[chosen])[0];
            total += (a - smp.actions_norm[k]).powi(2);
        }
        Ok(total / smp.deltas_raw.len() as f64)
    })?;
    MetricReport::new(
        "action",
        model.variant.name(),
        &data.env.to_string(),
        model.obs_t,
        samples.to_vec(),
        err,
        config_hash,
    )
}

/// Aggregated table plus plot-data files keyed by file name.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub csv: String,
    pub plots: BTreeMap<String, String>,
}

/// One row of the aggregated table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub variant: String,
    pub env: String,
    pub t: usize,
    pub mean: f64,
    pub std: f64,
    pub n_samples: usize,
    pub config_hash: String,
}

/// Builds the table (rows sorted by experiment, variant, environment and T)
/// and one decode-versus-T curve per experiment and variant.
pub fn aggregate_report(reports: &[MetricReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(CoreError::Argument("no reports to aggregate".into()));
    }
    let mut rows: BTreeMap<(String, String, String, usize, String), &MetricReport> =
        BTreeMap::new();
    for r in reports {
        r.verify()?;
        let key = (
            r.experiment.clone(),
            r.variant.clone(),
            r.env.clone(),
            r.t,
            r.config_hash.clone(),
        );
        if rows.insert(key, r).is_some() {
            return Err(CoreError::Data(format!(
                "duplicate report for experiment '{}', variant '{}', env '{}', T {}",
                r.experiment, r.variant, r.env, r.t
            )));
        }
    }
    let mut csv = format!("{CSV_HEADER}\n");
    let mut plots: BTreeMap<String, String> = BTreeMap::new();
    for r in rows.values() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.experiment, r.variant, r.env, r.t, r.mean, r.std, r.n_samples, r.config_hash
        );
        if r.experiment.starts_with("decode") {
            let file = format!("{}_{}_{}.dat", r.experiment, r.variant, r.env);
            let body = plots.entry(file).or_default();
            let tag = format!("# config hash {}", r.config_hash);
            if body.lines().rfind(|l| l.starts_with('#')) != Some(tag.as_str()) {
                let _ = writeln!(body, "{tag}");
            }
            let _ = writeln!(body, "{} {}", r.t, r.mean);
        }
    }
    Ok(Aggregate { csv, plots })
}

/// Parses an aggregated table.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(CoreError::Data(
            "report table has an unexpected header".into(),
        ));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || CoreError::Data(format!("malformed report row {}", i + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            Ok(ReportRow {
                experiment: f[0].into(),
                variant: f[1].into(),
                env: f[2].into(),
                t: f[3].parse().map_err(|_| bad())?,
                mean: f[4].parse().map_err(|_| bad())?,
                std: f[5].parse().map_err(|_| bad())?,
                n_samples: f[6].parse().map_err(|_| bad())?,
                config_hash: f[7].into(),
            })
        })
        .collect()
}
