use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::Value;

use super::config::{EnvironmentConfig, ExperimentConfig, RunTask};
use super::{mean_sd, HarnessError};
use crate::bandit::{run_policy, ArmSpace, History, PolicyConfig, PolicyError, PolicyKind};
use crate::bridge::bridge_connect;
use crate::env::{EnvError, Environment, ReplayEnv, ReplaySpec, SyntheticEnv, TestFunctionEnv};
use crate::gp::GpHyperparams;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Environment,
    Numerical,
    InvalidArgument,
}

#[derive(Debug)]
pub struct RunResult {
    pub task: RunTask,
    pub file: PathBuf,
    /// `None` when the environment could not be initialized.
    pub history: Option<History>,
    /// Hyperparameters in effect after each interaction (GP-TS only).
    pub fitted: Vec<Option<GpHyperparams>>,
    pub failure: Option<(FailureKind, String)>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    /// 0 when every run completed, otherwise the code of the most serious
    /// failure: 3 for environment, 2 for invalid input, 4 for numerical.
    pub fn exit_code(&self) -> i32 {
        let kinds: Vec<_> = self.runs.iter().filter_map(|r| r.failure.as_ref().map(|f| f.0)).collect();
        if kinds.contains(&FailureKind::Environment) {
            3
        } else if kinds.contains(&FailureKind::InvalidArgument) {
            2
        } else if kinds.contains(&FailureKind::Numerical) {
            4
        } else {
            0
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(|r| r.failure.is_some())
    }
}

pub fn run_file_name(policy: &PolicyKind, seed: u64) -> String {
    format!("run_{}_seed{seed}.csv", policy.label())
}

/// Runs every configured (policy, seed) pair in parallel and writes the run
/// CSVs, `summary.csv` and `manifest.csv` into the output directory. A failing
/// run is recorded and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let tasks = cfg.validate()?;
    let space = cfg.arm_space()?;
    let replay = match &cfg.environment {
        EnvironmentConfig::Replay { path } => {
            Some(ReplaySpec::from_path(path).map_err(|e| HarnessError::Environment(e.to_string()))?)
        }
        _ => None,
    };
    let gp_initial = cfg.gp_defaults();
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(HarnessError::io(&out))?;

    let runs = tasks
        .par_iter()
        .map(|task| {
            let result = execute(cfg, &space, replay.as_ref(), *task, &out);
            let file = out.join(run_file_name(&task.policy, task.seed));
            write_run_csv(&file, &space, &gp_initial, &result).map(|_| result)
        })
        .collect::<Result<Vec<_>, _>>()?;

    write_summary(&out.join(SUMMARY_FILE), &runs)?;
    write_manifest(&out.join(MANIFEST_FILE), &runs)?;
    Ok(ExperimentReport { output_dir: out, runs })
}

fn make_env(
    cfg: &ExperimentConfig,
    space: &ArmSpace,
    replay: Option<&ReplaySpec>,
    seed: u64,
) -> Result<Box<dyn Environment>, EnvError> {
    Ok(match &cfg.environment {
        EnvironmentConfig::Synthetic(spec) => Box::new(SyntheticEnv::new(spec.clone(), seed)?),
        EnvironmentConfig::TestFunction(spec) => Box::new(TestFunctionEnv::new(spec.clone(), seed)?),
        EnvironmentConfig::Replay { .. } => Box::new(ReplayEnv::new(replay.expect("loaded replay log").clone())),
        EnvironmentConfig::Bridge { transport, timeout_s, init_config } => {
            let mut config = init_config.clone();
            config.insert("seed".into(), Value::from(seed));
            Box::new(bridge_connect(transport, *timeout_s, space.names(), config)?)
        }
    })
}

fn execute(
    cfg: &ExperimentConfig,
    space: &ArmSpace,
    replay: Option<&ReplaySpec>,
    task: RunTask,
    out: &Path,
) -> RunResult {
    let file = out.join(run_file_name(&task.policy, task.seed));
    let failed = |kind, msg: String| RunResult {
        task,
        file: file.clone(),
        history: None,
        fitted: Vec::new(),
        failure: Some((kind, msg)),
    };
    let mut env = match make_env(cfg, space, replay, task.seed) {
        Ok(env) => env,
        Err(e) => return failed(FailureKind::Environment, e.to_string()),
    };
    let policy = PolicyConfig {
        kind: task.policy,
        gp_defaults: cfg.gp_defaults(),
        fit_budget: cfg.fit.clone(),
        seed: task.seed,
    };
    match run_policy(space, &policy, env.as_mut(), cfg.interactions, cfg.updates) {
        Ok(outcome) => RunResult {
            task,
            file: file.clone(),
            history: Some(outcome.history),
            fitted: outcome.fitted,
            failure: outcome.failure.map(classify),
        },
        Err(e) => {
            let (kind, msg) = classify(e);
            failed(kind, msg)
        }
    }
}

fn classify(e: PolicyError) -> (FailureKind, String) {
    let kind = match &e {
        PolicyError::Environment(_) => FailureKind::Environment,
        PolicyError::Numerical(_) => FailureKind::Numerical,
        PolicyError::Bandit(_) => FailureKind::InvalidArgument,
    };
    (kind, e.to_string())
}

fn num(v: f64) -> String {
    v.to_string()
}

fn run_header(space: &ArmSpace) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "policy", "interaction", "arm_index"].map(String::from).to_vec();
    h.extend(space.names());
    h.extend(
        ["val_loss", "reward", "cumulative_reward", "gp_mean", "gp_output_scale", "gp_noise_variance"]
            .map(String::from),
    );
    h.extend(space.names().iter().map(|n| format!("gp_ls_{n}")));
    h
}

fn gp_fields(hp: Option<&GpHyperparams>, dim: usize) -> Vec<String> {
    match hp {
        Some(hp) => {
            let mut f = vec![num(hp.mean.constant_value), num(hp.kernel.output_scale), num(hp.noise_variance)];
            f.extend(hp.kernel.lengthscales.iter().map(|l| num(*l)));
            f
        }
        None => vec![String::new(); 3 + dim],
    }
}

/// Row 0 holds the initial loss with empty arm and reward fields. GP columns
/// hold the hyperparameters in effect after each interaction; row 0 shows the
/// initial ones.
fn write_run_csv(
    path: &Path,
    space: &ArmSpace,
    gp_initial: &GpHyperparams,
    run: &RunResult,
) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| HarnessError::Data { path: path.to_path_buf(), detail: e.to_string() };
    w.write_record(run_header(space)).map_err(csv_err)?;
    let dim = space.dim();
    let seed = run.task.seed.to_string();
    let label = run.task.policy.label();
    let gp_initial = (run.task.policy == PolicyKind::GpTs).then_some(gp_initial);
    if let Some(h) = &run.history {
        let mut row = vec![seed.clone(), label.clone(), "0".into(), String::new()];
        row.extend(vec![String::new(); dim]);
        row.extend([num(h.initial_loss()), String::new(), num(0.0)]);
        row.extend(gp_fields(gp_initial, dim));
        w.write_record(&row).map_err(csv_err)?;
        let mut cumulative = 0.0;
        for (k, r) in h.records().iter().enumerate() {
            cumulative += r.reward;
            let mut row = vec![seed.clone(), label.clone(), r.interaction.to_string(), r.arm_index.to_string()];
            row.extend(r.arm.coords().iter().map(|c| num(*c)));
            row.extend([num(r.loss_after), num(r.reward), num(cumulative)]);
            row.extend(gp_fields(run.fitted.get(k).and_then(|f| f.as_ref()), dim));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush().map_err(HarnessError::io(path))
}

/// Per (policy, interaction): number of runs reaching it, and the sample mean
/// and standard deviation of validation loss and cumulative reward.
fn write_summary(path: &Path, runs: &[RunResult]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| HarnessError::Data { path: path.to_path_buf(), detail: e.to_string() };
    w.write_record([
        "policy",
        "interaction",
        "n",
        "mean_val_loss",
        "sd_val_loss",
        "mean_cumulative_reward",
        "sd_cumulative_reward",
    ])
    .map_err(csv_err)?;
    let mut policies: Vec<PolicyKind> = Vec::new();
    for r in runs {
        if !policies.contains(&r.task.policy) {
            policies.push(r.task.policy);
        }
    }
    for policy in policies {
        let traces: Vec<(Vec<f64>, Vec<f64>)> =
            runs.iter().filter(|r| r.task.policy == policy).filter_map(|r| r.history.as_ref()).map(trace).collect();
        let longest = traces.iter().map(|t| t.0.len()).max().unwrap_or(0);
        for t in 0..longest {
            let losses: Vec<f64> = traces.iter().filter_map(|tr| tr.0.get(t).copied()).collect();
            let rewards: Vec<f64> = traces.iter().filter_map(|tr| tr.1.get(t).copied()).collect();
            let (ml, sl) = mean_sd(&losses);
            let (mr, sr) = mean_sd(&rewards);
            w.write_record([
                policy.label(),
                t.to_string(),
                losses.len().to_string(),
                num(ml),
                num(sl),
                num(mr),
                num(sr),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(HarnessError::io(path))
}

/// Losses and running reward sums indexed by interaction, starting at 0.
fn trace(h: &History) -> (Vec<f64>, Vec<f64>) {
    let mut losses = vec![h.initial_loss()];
    let mut sums = vec![0.0];
    let mut cumulative = 0.0;
    for r in h.records() {
        cumulative += r.reward;
        losses.push(r.loss_after);
        sums.push(cumulative);
    }
    (losses, sums)
}

fn write_manifest(path: &Path, runs: &[RunResult]) -> Result<(), HarnessError> {
    let file = File::create(path).map_err(HarnessError::io(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| HarnessError::Data { path: path.to_path_buf(), detail: e.to_string() };
    w.write_record(["policy", "seed", "file", "interactions_completed", "status", "error"]).map_err(csv_err)?;
    for r in runs {
        let name = r.file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let done = r.history.as_ref().map_or(0, |h| h.len());
        let (status, error) = match &r.failure {
            None => ("ok", String::new()),
            Some((FailureKind::Environment, m)) => ("environment_error", m.clone()),
            Some((FailureKind::Numerical, m)) => ("numerical_error", m.clone()),
            Some((FailureKind::InvalidArgument, m)) => ("invalid_argument", m.clone()),
        };
        w.write_record([r.task.policy.label(), r.task.seed.to_string(), name, done.to_string(), status.into(), error])
            .map_err(csv_err)?;
    }
    w.flush().map_err(HarnessError::io(path))
}
