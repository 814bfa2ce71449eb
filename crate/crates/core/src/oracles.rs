//! Policy learning and policy evaluation oracles behind a metered,
//! opaque environment handle.
//!
//! Algorithms only ever see an [`EnvHandle`]: they can run episodes and read
//! the episode counter, nothing else. The model itself stays private.
//!
//! ```compile_fail
//! use pcelab_core::mdp::{RewardNoise, TabularMdp};
//! use pcelab_core::oracles::EnvHandle;
//! use pcelab_core::rng::derive_stream;
//! let mdp = TabularMdp::bandit(&[0.5], RewardNoise::Bernoulli).unwrap();
//! let env = EnvHandle::new(std::sync::Arc::new(mdp), derive_stream(0, 0));
//! let _peek = env.model;
//! ```

use rand::Rng;
use std::cell::OnceCell;
use std::sync::Arc;
use thiserror::Error;

use crate::mdp::{
    exact_value, optimal_policy, simulate_episode, MdpError, Policy, Shape, TabularMdp, Trajectory,
};
use crate::omerm::OptimisticLearner;
use crate::rng::Stream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("accuracy must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("confidence term log(1/delta) must be positive, got {0}")]
    Confidence(f64),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// A hidden environment: run episodes, count them.
#[derive(Debug, Clone)]
pub struct EnvHandle {
    model: Arc<TabularMdp>,
    episodes: u64,
    rng: Stream,
    optimum: OnceCell<f64>,
}

impl EnvHandle {
    pub fn new(model: Arc<TabularMdp>, rng: Stream) -> Self {
        Self {
            model,
            episodes: 0,
            rng,
            optimum: OnceCell::new(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.model.shape()
    }

    pub fn initial_state(&self) -> usize {
        self.model.initial_state()
    }

    pub fn episodes_used(&self) -> u64 {
        self.episodes
    }

    pub fn run_episode(&mut self, policy: &Policy) -> Result<Trajectory, OracleError> {
        let t = simulate_episode(&self.model, policy, &mut self.rng)?;
        self.episodes += 1;
        Ok(t)
    }

    /// Measurement only: `V*` of the hidden model.
    pub fn optimal_value(&self) -> f64 {
        *self.optimum.get_or_init(|| {
            let (_, v) = optimal_policy(&self.model);
            v.v(0, self.model.initial_state())
        })
    }

    /// Measurement only: `V^pi` of the hidden model.
    pub fn policy_value(&self, policy: &Policy) -> Result<f64, OracleError> {
        Ok(exact_value(&self.model, policy)?.v(0, self.model.initial_state()))
    }

    /// Measurement only: `V* - V^pi`.
    pub fn suboptimality(&self, policy: &Policy) -> Result<f64, OracleError> {
        Ok(self.optimal_value() - self.policy_value(policy)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    /// Exact planning and evaluation with zero episodes. For tests and
    /// controlled experiments only.
    pub white_box: bool,
    /// Scale of the learning oracle's episode budget.
    pub c_o: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            white_box: false,
            c_o: 1.0,
        }
    }
}

impl OracleSettings {
    pub fn white_box() -> Self {
        Self {
            white_box: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBudgetReport {
    pub episodes_used: u64,
    pub epsilon: f64,
    pub log_inv_delta: f64,
}

fn check(epsilon: f64, log_inv_delta: f64) -> Result<(), OracleError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(OracleError::Epsilon(epsilon));
    }
    if !(log_inv_delta > 0.0 && log_inv_delta.is_finite()) {
        return Err(OracleError::Confidence(log_inv_delta));
    }
    Ok(())
}

/// `ceil(2 (ln 2 + log_inv_delta) / eps^2)`
pub fn evaluation_episodes(epsilon: f64, log_inv_delta: f64) -> u64 {
    (2.0 * (std::f64::consts::LN_2 + log_inv_delta) / (epsilon * epsilon)).ceil() as u64
}

/// `ceil(C_o S^2 A H^2 ln(SAH/eps) (log_inv_delta + 1) / eps^2)`
pub fn learning_episodes(shape: Shape, epsilon: f64, log_inv_delta: f64, c_o: f64) -> u64 {
    let s = shape.states as f64;
    let a = shape.actions as f64;
    let h = shape.horizon as f64;
    let log_term = (s * a * h / epsilon).ln().max(1.0);
    (c_o * s * s * a * h * h * log_term * (log_inv_delta + 1.0) / (epsilon * epsilon))
        .ceil()
        .max(1.0) as u64
}

/// Monte Carlo estimate of `V^pi` to accuracy `epsilon`.
pub fn evaluate_policy(
    env: &mut EnvHandle,
    policy: &Policy,
    epsilon: f64,
    log_inv_delta: f64,
    settings: &OracleSettings,
) -> Result<(f64, OracleBudgetReport), OracleError> {
    check(epsilon, log_inv_delta)?;
    let start = env.episodes_used();
    let value = if settings.white_box {
        env.policy_value(policy)?
    } else {
        let n = evaluation_episodes(epsilon, log_inv_delta);
        let mut total = 0.0;
        for _ in 0..n {
            total += env.run_episode(policy)?.total_return;
        }
        total / n as f64
    };
    Ok((
        value,
        OracleBudgetReport {
            episodes_used: env.episodes_used() - start,
            epsilon,
            log_inv_delta,
        },
    ))
}

/// Returns an `epsilon`-optimal policy with probability `1 - delta`.
///
/// Runs optimistic value iteration for [`learning_episodes`] episodes, keeps
/// `ceil(log_inv_delta)` uniformly drawn iterates and returns the one with the
/// best Monte Carlo value.
pub fn learn_policy(
    env: &mut EnvHandle,
    epsilon: f64,
    log_inv_delta: f64,
    settings: &OracleSettings,
) -> Result<(Policy, OracleBudgetReport), OracleError> {
    check(epsilon, log_inv_delta)?;
    let start = env.episodes_used();
    let policy = if settings.white_box {
        optimal_policy(&env.model).0
    } else {
        learn_by_optimism(env, epsilon, log_inv_delta, settings.c_o)?
    };
    Ok((
        policy,
        OracleBudgetReport {
            episodes_used: env.episodes_used() - start,
            epsilon,
            log_inv_delta,
        },
    ))
}

fn learn_by_optimism(
    env: &mut EnvHandle,
    epsilon: f64,
    log_inv_delta: f64,
    c_o: f64,
) -> Result<Policy, OracleError> {
    let k = learning_episodes(env.shape(), epsilon, log_inv_delta, c_o);
    let m = (log_inv_delta.ceil() as usize).max(1);
    let mut picks: Vec<u64> = (0..m).map(|_| env.rng.random_range(0..k)).collect();
    picks.sort_unstable();
    let mut learner = OptimisticLearner::new(env.shape(), env.initial_state(), k);
    let mut kept = Vec::with_capacity(m);
    let mut next_pick = 0;
    for iter in 0..k {
        let policy = learner.policy();
        while next_pick < m && picks[next_pick] == iter {
            kept.push(policy.clone());
            next_pick += 1;
        }
        let t = env.run_episode(&policy)?;
        learner.observe(&t);
    }
    if kept.len() == 1 {
        return Ok(kept.pop().expect("one candidate"));
    }
    let log_term = log_inv_delta + (kept.len() as f64).ln();
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, candidate) in kept.iter().enumerate() {
        let (v, _) = evaluate_policy(
            env,
            candidate,
            epsilon / 4.0,
            log_term,
            &OracleSettings::default(),
        )?;
        if v > best_value {
            best_value = v;
            best = i;
        }
    }
    Ok(kept.swap_remove(best))
}
