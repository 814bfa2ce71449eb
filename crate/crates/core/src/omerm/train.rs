use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::improve::{average_value, improve_policy, ImproveMode};
use super::model::{BonusSizes, EmpiricalModel};
use super::OmermError;
use crate::distributions::MdpDistribution;
use crate::mdp::{Policy, Shape};
use crate::oracles::EnvHandle;
use crate::rng::{fork, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmermConfig {
    pub c2: f64,
    /// Replaces the computed iteration count.
    pub iterations: Option<u64>,
    pub mode: ImproveMode,
    pub record_log: bool,
}

impl Default for OmermConfig {
    fn default() -> Self {
        Self {
            c2: 1.0,
            iterations: None,
            mode: ImproveMode::default(),
            record_log: false,
        }
    }
}

/// `ceil(C2 S^2 A H^2 ln(SAH/eps) / eps^2)`
pub fn omerm_iterations(shape: Shape, epsilon: f64, c2: f64) -> u64 {
    let s = shape.states as f64;
    let a = shape.actions as f64;
    let h = shape.horizon as f64;
    let log_term = (s * a * h / epsilon).ln().max(1.0);
    (c2 * s * s * a * h * h * log_term / (epsilon * epsilon))
        .ceil()
        .max(1.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmermLogRow {
    pub iter_k: u64,
    pub mdp_index: usize,
    pub avg_optimistic_value: f64,
    pub episode_return: f64,
}

#[derive(Debug, Clone)]
pub struct OmermOutput {
    pub policy: Policy,
    pub iterations: u64,
    /// 1-based index of the returned iterate.
    pub selected_iteration: u64,
    pub log: Vec<OmermLogRow>,
}

fn check_epsilon(epsilon: f64) -> Result<(), OmermError> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(OmermError::Parameter(format!(
            "epsilon {epsilon} must lie in (0, 1]"
        )))
    }
}

/// Optimistic multi-task training on `handles`; returns a uniformly drawn
/// iterate.
pub fn omerm_train(
    handles: &mut [EnvHandle],
    epsilon: f64,
    config: &OmermConfig,
    rng: &mut Stream,
) -> Result<OmermOutput, OmermError> {
    check_epsilon(epsilon)?;
    if handles.is_empty() {
        return Err(OmermError::NoTasks);
    }
    let shape = handles[0].shape();
    if let Some(h) = handles.iter().find(|h| h.shape() != shape) {
        return Err(OmermError::Parameter(format!(
            "tasks have shapes {shape} and {}",
            h.shape()
        )));
    }
    let k_total = config
        .iterations
        .unwrap_or_else(|| omerm_iterations(shape, epsilon, config.c2))
        .max(1);
    let selected = rng.random_range(1..=k_total);
    let sizes = BonusSizes::new(shape, handles.len(), k_total);
    let mut models: Vec<EmpiricalModel> = handles
        .iter()
        .map(|h| EmpiricalModel::new(shape, h.initial_state()))
        .collect();
    let mut prev = Policy::uniform(shape);
    let mut chosen = None;
    let mut log = Vec::new();
    for k in 1..=k_total {
        let estimates: Vec<_> = models.iter().map(|m| m.estimate(&sizes)).collect();
        let policy = improve_policy(&estimates, &prev, config.mode)?;
        let avg = if config.record_log {
            average_value(
                &estimates,
                &policy.as_deterministic().expect("deterministic iterate"),
            )
        } else {
            0.0
        };
        for (i, (handle, model)) in handles.iter_mut().zip(models.iter_mut()).enumerate() {
            let t = handle.run_episode(&policy)?;
            model.observe(&t);
            if config.record_log {
                log.push(OmermLogRow {
                    iter_k: k,
                    mdp_index: i,
                    avg_optimistic_value: avg,
                    episode_return: t.total_return,
                });
            }
        }
        if k == selected {
            chosen = Some(policy.clone());
        }
        prev = policy;
    }
    Ok(OmermOutput {
        policy: chosen.expect("selected iterate lies in 1..=K"),
        iterations: k_total,
        selected_iteration: selected,
        log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighProbConfig {
    pub c1: f64,
    pub c2: f64,
    /// Replaces the computed number of sampled tasks.
    pub tasks: Option<usize>,
    /// Replaces the computed per-run iteration count.
    pub iterations: Option<u64>,
    pub mode: ImproveMode,
    /// `ln` of the policy covering number; `S H A ln(12 H / eps)` when unset.
    pub log_cover: Option<f64>,
}

impl Default for HighProbConfig {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 1.0,
            tasks: None,
            iterations: None,
            mode: ImproveMode::default(),
            log_cover: None,
        }
    }
}

/// `ceil(ln(2/delta) / ln 6)` independent training runs.
pub fn high_prob_runs(delta: f64) -> usize {
    ((2.0 / delta).ln() / 6f64.ln()).ceil().max(1.0) as usize
}

pub fn default_log_cover(shape: Shape, epsilon: f64) -> f64 {
    (shape.states * shape.horizon * shape.actions) as f64
        * (12.0 * shape.horizon as f64 / epsilon).ln()
}

/// `ceil(C1 (log_cover + ln(1/delta)) / eps^2)`
pub fn high_prob_tasks(log_cover: f64, epsilon: f64, delta: f64, c1: f64) -> usize {
    (c1 * (log_cover - delta.ln()) / (epsilon * epsilon))
        .ceil()
        .max(1.0) as usize
}

/// `ceil(C2 ln(N N1 / delta) / eps^2)`
pub fn high_prob_eval_episodes(
    tasks: usize,
    runs: usize,
    epsilon: f64,
    delta: f64,
    c2: f64,
) -> u64 {
    (c2 * ((tasks * runs) as f64 / delta).ln() / (epsilon * epsilon))
        .ceil()
        .max(1.0) as u64
}

#[derive(Debug, Clone)]
pub struct HighProbOutput {
    pub policy: Policy,
    pub candidates: Vec<Policy>,
    pub empirical_values: Vec<f64>,
    pub selected: usize,
    pub task_indices: Vec<usize>,
    pub runs: usize,
    pub eval_episodes: u64,
    pub iterations: u64,
}

/// Boosts [`omerm_train`] to high probability: several runs on one task
/// sample, then the candidate with the best Monte Carlo average wins.
pub fn omerm_high_prob(
    dist: &MdpDistribution,
    epsilon: f64,
    delta: f64,
    config: &HighProbConfig,
    rng: &mut Stream,
) -> Result<HighProbOutput, OmermError> {
    check_epsilon(epsilon)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(OmermError::Parameter(format!(
            "delta {delta} must lie in (0, 1)"
        )));
    }
    let shape = dist.shape();
    let log_cover = config
        .log_cover
        .unwrap_or_else(|| default_log_cover(shape, epsilon));
    let n = config
        .tasks
        .unwrap_or_else(|| high_prob_tasks(log_cover, epsilon, delta, config.c1));
    let runs = high_prob_runs(delta);
    let n2 = high_prob_eval_episodes(n, runs, epsilon, delta, config.c2);
    let task_indices: Vec<usize> = (0..n).map(|_| dist.sample_index(rng)).collect();
    let models: Vec<Arc<_>> = task_indices
        .iter()
        .map(|&i| dist.member(i).clone())
        .collect();
    let train_config = OmermConfig {
        c2: config.c2,
        iterations: config.iterations,
        mode: config.mode,
        record_log: false,
    };
    let mut candidates = Vec::with_capacity(runs);
    let mut iterations = 0;
    for run in 0..runs {
        let mut handles: Vec<EnvHandle> = models
            .iter()
            .enumerate()
            .map(|(i, m)| EnvHandle::new(m.clone(), fork(rng, (run * n + i) as u64)))
            .collect();
        let mut train_rng = fork(rng, u64::MAX - run as u64);
        let out = omerm_train(&mut handles, epsilon / 2.0, &train_config, &mut train_rng)?;
        iterations = out.iterations;
        candidates.push(out.policy);
    }
    let mut values = Vec::with_capacity(runs);
    for (c, policy) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for (i, m) in models.iter().enumerate() {
            let mut env = EnvHandle::new(m.clone(), fork(rng, ((runs + c) * n + i) as u64));
            let mut sum = 0.0;
            for _ in 0..n2 {
                sum += env.run_episode(policy)?.total_return;
            }
            total += sum / n2 as f64;
        }
        values.push(total / n as f64);
    }
    let mut selected = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[selected] {
            selected = i;
        }
    }
    Ok(HighProbOutput {
        policy: candidates[selected].clone(),
        candidates,
        empirical_values: values,
        selected,
        task_indices,
        runs,
        eval_episodes: n2,
        iterations,
    })
}
