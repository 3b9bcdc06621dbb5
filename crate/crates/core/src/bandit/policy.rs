use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvError, Environment};
use crate::gp::{fit_type2_mle, posterior, FitBudget, GpHyperparams, PosteriorGp, RegressionData};
use crate::rng::{stream_rng, Stream};

use super::arms::{Arm, ArmSpace};
use super::history::{reward_from_losses, History};
use super::{BanditError, PolicyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    GpTs,
    FixedArm { index: usize },
    UniformRandom,
}

impl PolicyKind {
    /// Stable label used in file names and CSV columns.
    pub fn label(&self) -> String {
        match self {
            PolicyKind::GpTs => "gp_ts".into(),
            PolicyKind::FixedArm { index } => format!("fixed_arm_{index}"),
            PolicyKind::UniformRandom => "uniform_random".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub gp_defaults: GpHyperparams,
    pub fit_budget: FitBudget,
    pub seed: u64,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, dim: usize, seed: u64) -> Self {
        Self { kind, gp_defaults: GpHyperparams::default_for_dim(dim), fit_budget: FitBudget::default(), seed }
    }
}

/// Result of one run. `failure` is set when the run stopped early; `history`
/// then holds every interaction completed before the failure.
#[derive(Debug)]
pub struct RunOutcome {
    pub history: History,
    /// GP hyperparameters fitted after each interaction (GP-TS only).
    pub fitted: Vec<Option<GpHyperparams>>,
    pub failure: Option<PolicyError>,
}

/// Draws one joint posterior sample over every arm and plays its argmax.
/// Ties go to the lowest arm index.
pub fn ts_select_arm<'a, R: Rng + ?Sized>(
    space: &'a ArmSpace,
    post: &PosteriorGp,
    rng: &mut R,
) -> Result<Arm<'a>, PolicyError> {
    if space.is_empty() {
        return Err(BanditError::InvalidArgument("empty arm space".into()).into());
    }
    let sample = post.sample_joint(space.arms(), rng)?;
    let index = argmax_lowest(&sample);
    Ok(space.arm(index).expect("argmax within arm space"))
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs `interactions` rounds of select, train for `updates` steps, observe,
/// reward, and (for GP-TS) refit.
pub fn run_policy(
    space: &ArmSpace,
    cfg: &PolicyConfig,
    env: &mut dyn Environment,
    interactions: u64,
    updates: u64,
) -> Result<RunOutcome, PolicyError> {
    if interactions < 1 || updates < 1 {
        return Err(BanditError::InvalidArgument("need at least one interaction and one update".into()).into());
    }
    if space.is_empty() {
        return Err(BanditError::InvalidArgument("empty arm space".into()).into());
    }
    if let PolicyKind::FixedArm { index } = cfg.kind {
        if index >= space.len() {
            return Err(BanditError::InvalidArgument(format!(
                "fixed arm {index} outside arm space of {} arms",
                space.len()
            ))
            .into());
        }
    }
    if cfg.kind == PolicyKind::GpTs {
        cfg.gp_defaults.validate()?;
        if cfg.gp_defaults.dim() != space.dim() {
            return Err(BanditError::InvalidArgument(format!(
                "GP has {} lengthscales but the arm space has {} dimensions",
                cfg.gp_defaults.dim(),
                space.dim()
            ))
            .into());
        }
    }

    let initial = env.init()?;
    if initial.interaction != 0 {
        return Err(EnvError::Protocol(format!("init reported interaction {}", initial.interaction)).into());
    }
    let mut history = History::new(initial.validation_loss);
    let mut fitted = Vec::with_capacity(interactions as usize);
    let mut rng = stream_rng(cfg.seed, Stream::Policy);
    let mut theta = cfg.gp_defaults.clone();
    let mut data = RegressionData::empty();

    for t in 1..=interactions {
        let step = (|| -> Result<Option<GpHyperparams>, PolicyError> {
            let arm = match cfg.kind {
                PolicyKind::GpTs => {
                    let post = posterior(&theta, &data)?;
                    ts_select_arm(space, &post, &mut rng)?
                }
                PolicyKind::FixedArm { index } => space.arm(index).expect("checked above"),
                PolicyKind::UniformRandom => space.arm(rng.random_range(0..space.len())).expect("in range"),
            };
            let obs = env.step(arm, updates)?;
            let record = reward_from_losses(history.last_observation(), obs, arm)
                .map_err(|e| EnvError::Protocol(e.to_string()))?;
            let reward = record.reward;
            history.push(record)?;
            if cfg.kind != PolicyKind::GpTs {
                return Ok(None);
            }
            data.push(arm.point.clone(), reward)?;
            let budget = FitBudget { seed: fit_seed(cfg, t), ..cfg.fit_budget.clone() };
            // A failed refit keeps the previous hyperparameters.
            if let Ok(next) = fit_type2_mle(&data, &theta, &budget) {
                theta = next;
            }
            Ok(Some(theta.clone()))
        })();
        match step {
            Ok(snapshot) => fitted.push(snapshot),
            Err(e) => return Ok(RunOutcome { history, fitted, failure: Some(e) }),
        }
    }
    Ok(RunOutcome { history, fitted, failure: None })
}

fn fit_seed(cfg: &PolicyConfig, t: u64) -> u64 {
    cfg.fit_budget.seed.wrapping_add(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::arms::{make_grid, GridDim};
    use crate::bandit::history::{cumulative_reward, LossObservation};
    use crate::gp::{GpError, KernelFamily, KernelSpec, MeanSpec, NOISE_FLOOR};

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax_lowest(&[0.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(argmax_lowest(&[3.0, 3.0]), 0);
        assert_eq!(argmax_lowest(&[-1.0]), 0);
    }

    #[test]
    fn degenerate_posterior_picks_its_peak() {
        let space = make_grid(vec![GridDim::new("x", 0.0, 1.0, 0.2)]).unwrap();
        let hp = GpHyperparams {
            mean: MeanSpec::zero(),
            kernel: KernelSpec::new(KernelFamily::Matern52, vec![0.05], 1.0).unwrap(),
            noise_variance: NOISE_FLOOR,
        };
        let targets = vec![0.0, 5.0, 0.0, 0.0];
        let data = RegressionData::new(space.arms().to_vec(), targets).unwrap();
        let post = posterior(&hp, &data).unwrap();
        for seed in 0..50 {
            let arm = ts_select_arm(&space, &post, &mut stream_rng(seed, Stream::Policy)).unwrap();
            assert_eq!(arm.index, 1);
        }
    }

    /// Deterministic environment: the loss drops by the arm coordinate.
    struct Linear {
        t: u64,
        loss: f64,
        fail_at: Option<u64>,
    }

    impl Environment for Linear {
        fn init(&mut self) -> Result<LossObservation, EnvError> {
            Ok(LossObservation::new(0, self.loss))
        }
        fn step(&mut self, arm: Arm<'_>, _updates: u64) -> Result<LossObservation, EnvError> {
            self.t += 1;
            if Some(self.t) == self.fail_at {
                return Err(EnvError::Failed("trainer died".into()));
            }
            self.loss -= arm.point.coords()[0];
            Ok(LossObservation::new(self.t, self.loss))
        }
    }

    fn space() -> ArmSpace {
        make_grid(vec![GridDim::new("rho", 0.0, 0.5, 0.05)]).unwrap()
    }

    #[test]
    fn fixed_arm_is_reproducible() {
        let cfg = PolicyConfig::new(PolicyKind::FixedArm { index: 2 }, 1, 0);
        let run = |seed| {
            let cfg = PolicyConfig { seed, ..cfg.clone() };
            let mut env = Linear { t: 0, loss: 10.0, fail_at: None };
            run_policy(&space(), &cfg, &mut env, 5, 1).unwrap().history
        };
        assert_eq!(run(0), run(0));
        assert_eq!(run(0), run(99));
        let h = run(0);
        assert!(h.records().iter().all(|r| r.arm_index == 2));
        assert!((cumulative_reward(&h) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_interaction_gp_ts_skips_refit() {
        let cfg = PolicyConfig::new(PolicyKind::GpTs, 1, 4);
        let mut env = Linear { t: 0, loss: 10.0, fail_at: None };
        let out = run_policy(&space(), &cfg, &mut env, 1, 1).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(env.t, 1);
        assert_eq!(out.fitted, vec![Some(cfg.gp_defaults.clone())]);
    }

    #[test]
    fn environment_failure_returns_partial_history() {
        let cfg = PolicyConfig::new(PolicyKind::UniformRandom, 1, 4);
        let mut env = Linear { t: 0, loss: 10.0, fail_at: Some(4) };
        let out = run_policy(&space(), &cfg, &mut env, 10, 1).unwrap();
        assert_eq!(out.history.len(), 3);
        assert!(matches!(out.failure, Some(PolicyError::Environment(_))));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut env = Linear { t: 0, loss: 10.0, fail_at: None };
        let bad_arm = PolicyConfig::new(PolicyKind::FixedArm { index: 9 }, 1, 0);
        assert!(run_policy(&space(), &bad_arm, &mut env, 3, 1).is_err());
        let bad_dim = PolicyConfig::new(PolicyKind::GpTs, 2, 0);
        assert!(run_policy(&space(), &bad_dim, &mut env, 3, 1).is_err());
        let ok = PolicyConfig::new(PolicyKind::UniformRandom, 1, 0);
        assert!(run_policy(&space(), &ok, &mut env, 0, 1).is_err());
        assert!(run_policy(&space(), &ok, &mut env, 1, 0).is_err());
    }

    #[test]
    fn gp_errors_convert() {
        let e: PolicyError = GpError::Numerical("x".into()).into();
        assert!(matches!(e, PolicyError::Numerical(_)));
    }
}
