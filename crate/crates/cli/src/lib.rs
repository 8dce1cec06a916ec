//! The `edonet` pipeline: `gen`, `train`, `eval` and `report`.
//!
//! Every command resolves one [`RunConfig`]: the `--config` file if given,
//! otherwise the `config.txt` stored next to the dataset, otherwise the
//! defaults. Its hash is written into every artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use edo_core::config::RunConfig;
use edo_core::data::{gen_dataset, load_dataset, write_dataset, Dataset, Env, EnvData, GridKind};
use edo_core::eval::{
    aggregate_report, decode_params, eval_action, eval_inverse, eval_state_prediction,
    transfer_bandage2lifting, MetricReport,
};
use edo_core::model::{Conditioning, Variant};
use edo_core::train::{train_forward, train_inverse, ForwardModel};
use edo_core::{CoreError, Result};
use edo_diffnum::Checkpoint;

/// File holding the effective configuration of a generated dataset.
pub const DATASET_CONFIG: &str = "config.txt";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Parser)]
#[command(
    name = "edonet",
    version,
    about = "Cloth dynamics with exploratory adaptation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the parameter grid and write a dataset directory.
    Gen(GenArgs),
    /// Train one forward-model variant.
    Train(TrainArgs),
    /// Run one experiment on a trained checkpoint.
    Eval(EvalArgs),
    /// Aggregate report files into one table and plot data.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "EDONET_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = ["desk", "full"])]
    pub grid: Option<String>,
    /// Seed of the train/validation/test split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    #[arg(long, env = "EDONET_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory written by `gen`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = ["edonet", "nc", "edo1", "os", "of"])]
    pub variant: String,
    /// Environment; defaults to `train.env` of the configuration.
    #[arg(long, value_parser = ["bandage", "lifting"])]
    pub env: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_parser = ["state", "decode", "transfer", "inverse", "action"])]
    pub experiment: String,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, env = "EDONET_JOBS", default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of `*.json` report files written by `eval`.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, env = "EDONET_OUT")]
    pub out: PathBuf,
}

fn arg_err(msg: String) -> CoreError {
    CoreError::Argument(msg)
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| arg_err(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| arg_err(format!("{}: {e}", path.display())))
}

fn resolve_config(explicit: Option<&Path>, data: Option<&Path>) -> Result<RunConfig> {
    if let Some(p) = explicit {
        return read_config(p);
    }
    if let Some(stored) = data.map(|d| d.join(DATASET_CONFIG)).filter(|p| p.exists()) {
        return read_config(&stored);
    }
    Ok(RunConfig::default())
}

fn open_dataset(dir: &Path, cfg: &RunConfig) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(arg_err(format!(
            "dataset directory {} does not exist",
            dir.display()
        )));
    }
    let ds = load_dataset(dir)?;
    if ds.manifest.config_hash != cfg.data_hash() {
        return Err(CoreError::Compat(format!(
            "dataset {} was generated with data hash {}, but the configuration expects {}",
            dir.display(),
            ds.manifest.config_hash,
            cfg.data_hash()
        )));
    }
    Ok(ds)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| CoreError::Data(format!("cannot write {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| arg_err(format!("cannot create {}: {e}", dir.display())))
}

/// Runs one command and returns its summary line.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Report(a) => cmd_report(a),
    }
}

pub fn cmd_gen(a: GenArgs) -> Result<String> {
    let mut cfg = resolve_config(a.common.config.as_deref(), None)?;
    if let Some(g) = &a.grid {
        cfg.data.grid = g.parse::<GridKind>()?;
    }
    if let Some(s) = a.seed {
        cfg.data.seed = s;
    }
    let out = &a.common.out;
    if out.is_dir() && !a.force && fs::read_dir(out)?.next().is_some() {
        return Err(arg_err(format!(
            "{} is not empty (use --force to overwrite)",
            out.display()
        )));
    }
    let ds = gen_dataset(&cfg, a.jobs.max(1))?;
    write_dataset(out, &ds)?;
    write(
        &out.join(DATASET_CONFIG),
        format!("# config hash {}\n{}", cfg.hash(), cfg.canonical()),
    )?;
    let s = &ds.manifest.split;
    Ok(format!(
        "generated {} samples ({} grid) into {}: {} train, {} val, {} test",
        ds.manifest.n_samples,
        ds.manifest.grid,
        out.display(),
        s.train.len(),
        s.val.len(),
        s.test.len()
    ))
}

/// File stem of a checkpoint and its history.
pub fn artifact_stem(variant: Variant, env: Env) -> String {
    format!("{variant}_{env}")
}

fn history_csv(history: &edo_core::train::History, hash: &str) -> String {
    format!("# config hash {hash}\n{}", history.to_csv())
}

pub fn cmd_train(a: TrainArgs) -> Result<String> {
    let mut cfg = resolve_config(a.common.config.as_deref(), Some(&a.data))?;
    if let Some(e) = &a.env {
        cfg.train.env = e.parse()?;
    }
    let variant: Variant = a.variant.parse()?;
    let ds = open_dataset(&a.data, &cfg)?;
    let data = EnvData::prepare(&ds, cfg.train.env)?;
    let outcome = train_forward(
        variant,
        &data,
        &cfg.model,
        &cfg.train,
        cfg.train.epochs,
        None,
        None,
    )?;
    let hash = cfg.hash();
    let mut meta = BTreeMap::new();
    meta.insert("config_hash".to_string(), hash.clone());
    meta.insert("data_hash".to_string(), ds.manifest.config_hash.clone());
    meta.insert("epochs".to_string(), cfg.train.epochs.to_string());
    meta.insert("best_epoch".to_string(), outcome.best_epoch.to_string());
    meta.insert("best_val".to_string(), outcome.best_val.to_string());
    let out = &a.common.out;
    ensure_dir(out)?;
    let stem = artifact_stem(variant, data.env);
    let ckpt = out.join(format!("{stem}.ckpt"));
    outcome
        .model
        .to_checkpoint(outcome.steps, &meta)
        .save(&ckpt)?;
    write(
        &out.join(format!("{stem}_history.csv")),
        history_csv(&outcome.history, &hash),
    )?;
    Ok(format!(
        "trained {variant} on {}: best val loss {:.6e} at epoch {}/{} -> {}",
        data.env,
        outcome.best_val,
        outcome.best_epoch,
        cfg.train.epochs,
        ckpt.display()
    ))
}

/// Loads a forward-model checkpoint and checks it belongs to `ds`.
fn load_model(path: &Path, ds: &Dataset) -> Result<ForwardModel> {
    if !path.is_file() {
        return Err(arg_err(format!(
            "checkpoint {} does not exist",
            path.display()
        )));
    }
    let ck = Checkpoint::load(path)?;
    if let Some(h) = ck.meta.get("data_hash") {
        if *h != ds.manifest.config_hash {
            return Err(CoreError::Compat(format!(
                "checkpoint {} was trained on data {h}, not on {}",
                path.display(),
                ds.manifest.config_hash
            )));
        }
    }
    ForwardModel::from_checkpoint(&ck)
}

/// The inverse variant matching a forward checkpoint.
fn inverse_variant(v: Variant) -> Variant {
    match v.conditioning() {
        Conditioning::Params => Variant::Oi,
        _ => v,
    }
}

/// Writes each report as a JSON dump plus a CSV of this run.
fn write_reports(out: &Path, reports: &[MetricReport]) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let mut written = Vec::new();
    for r in reports {
        let path = out.join(format!(
            "{}_{}_{}_T{}.json",
            r.experiment, r.variant, r.env, r.t
        ));
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        write(&path, text)?;
        written.push(path);
    }
    let first = &reports[0];
    let csv = aggregate_report(reports)?.csv;
    write(
        &out.join(format!(
            "{}_{}_{}.csv",
            first.experiment, first.variant, first.env
        )),
        csv,
    )?;
    Ok(written)
}

pub fn cmd_eval(a: EvalArgs) -> Result<String> {
    let cfg = resolve_config(a.common.config.as_deref(), Some(&a.data))?;
    let ds = open_dataset(&a.data, &cfg)?;
    let model = load_model(&a.checkpoint, &ds)?;
    let hash = cfg.hash();
    let jobs = a.jobs.max(1);
    let out = &a.common.out;
    let reports = match a.experiment.as_str() {
        "state" | "action" => {
            let data = EnvData::prepare(&ds, model.env)?;
            let test = &data.split.test;
            vec![if a.experiment == "state" {
                eval_state_prediction(&model, &data, test, jobs, &hash)?
            } else {
                eval_action(&model, &data, test, jobs, &hash)?
            }]
        }
        "decode" => {
            let data = EnvData::prepare(&ds, model.env)?;
            decode_params(
                &model,
                &data,
                &cfg.eval.decode_t,
                &cfg.model,
                &cfg.train,
                cfg.eval.decode_steps,
                &hash,
            )?
        }
        "transfer" => {
            let lifting = EnvData::prepare(&ds, Env::Lifting)?;
            let t = transfer_bandage2lifting(
                &model,
                &lifting,
                &cfg.train,
                cfg.eval.transfer_epochs,
                jobs,
                &hash,
            )?;
            let mut meta = BTreeMap::new();
            meta.insert("config_hash".to_string(), hash.clone());
            meta.insert("data_hash".to_string(), ds.manifest.config_hash.clone());
            meta.insert("transfer_from".to_string(), Env::Bandage.to_string());
            ensure_dir(out)?;
            let ck = t.outcome.model.to_checkpoint(t.outcome.steps, &meta);
            ck.save(&out.join(format!("{}_bandage2lifting.ckpt", model.variant)))?;
            vec![t.report]
        }
        "inverse" => {
            let data = EnvData::prepare(&ds, model.env)?;
            let variant = inverse_variant(model.variant);
            let source = variant.has_adaptation().then_some(&model);
            let inv = train_inverse(
                variant,
                &data,
                source,
                &model.cfg,
                &cfg.train,
                cfg.eval.inverse_epochs,
            )?;
            vec![eval_inverse(
                &inv,
                &data,
                &data.split.test,
                model.obs_t,
                &hash,
            )?]
        }
        other => return Err(arg_err(format!("unknown experiment '{other}'"))),
    };
    let files = write_reports(out, &reports)?;
    let summary: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "{} {} {} T={}: {:.6e} ± {:.6e}",
                r.experiment, r.variant, r.env, r.t, r.mean, r.std
            )
        })
        .collect();
    Ok(format!(
        "{}\nwrote {} report(s) to {}",
        summary.join("\n"),
        files.len(),
        out.display()
    ))
}

pub fn cmd_report(a: ReportArgs) -> Result<String> {
    if !a.input.is_dir() {
        return Err(arg_err(format!("{} is not a directory", a.input.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&a.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(arg_err(format!("no report files in {}", a.input.display())));
    }
    let reports = files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            let r: MetricReport = serde_json::from_str(&text)
                .map_err(|e| CoreError::Data(format!("malformed report {}: {e}", p.display())))?;
            r.verify()
                .map_err(|e| CoreError::Data(format!("{}: {e}", p.display())))?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let agg = aggregate_report(&reports)?;
    ensure_dir(&a.out)?;
    write(&a.out.join(REPORT_CSV), &agg.csv)?;
    for (name, body) in &agg.plots {
        write(&a.out.join(name), body)?;
    }
    Ok(format!(
        "aggregated {} report(s) into {} rows and {} plot file(s) in {}",
        files.len(),
        agg.csv.lines().count() - 1,
        agg.plots.len(),
        a.out.display()
    ))
}
