use serde::{Deserialize, Serialize};

use super::pretrain::PolicyValueSet;
use super::PceError;
use crate::omerm::OptimisticLearner;
use crate::oracles::EnvHandle;

/// `4 eps + sqrt(2 ln(4K/delta) / n)`
pub fn elimination_threshold(epsilon: f64, delta: f64, k_total: u64, n: u64) -> f64 {
    4.0 * epsilon + (2.0 * (4.0 * k_total as f64 / delta).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EliminationEvent {
    pub episode: u64,
    pub pair_index: usize,
    pub mean: f64,
    pub threshold: f64,
}

/// Optimistic selection with elimination over a list of claimed values.
///
/// The active candidate is the one with the largest claimed value (lowest
/// index on ties). Returns observed since it became active are averaged; once
/// the average strays from the claim by the threshold it is dropped.
#[derive(Debug, Clone)]
pub struct Elimination {
    values: Vec<f64>,
    active: Vec<bool>,
    epsilon: f64,
    delta: f64,
    k_total: u64,
    current: Option<usize>,
    phase: usize,
    sum: f64,
    count: u64,
}

impl Elimination {
    pub fn new(values: Vec<f64>, epsilon: f64, delta: f64, k_total: u64) -> Self {
        let active = vec![true; values.len()];
        let mut state = Self {
            values,
            active,
            epsilon,
            delta,
            k_total,
            current: None,
            phase: 1,
            sum: 0.0,
            count: 0,
        };
        state.current = state.argmax();
        state
    }

    fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, v) in self.values.iter().enumerate() {
            if self.active[i] && best.is_none_or(|b| *v > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Candidate to play now; `None` once every candidate is eliminated.
    pub fn current(&self) -> Option<usize> {
        self.current
    }

    /// 1-based phase counter; increases with each elimination.
    pub fn phase(&self) -> usize {
        self.phase
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Feeds the return of one episode played with [`Self::current`].
    pub fn record(&mut self, episode: u64, ret: f64) -> Option<EliminationEvent> {
        let idx = self.current?;
        self.sum += ret;
        self.count += 1;
        let mean = self.sum / self.count as f64;
        let threshold = elimination_threshold(self.epsilon, self.delta, self.k_total, self.count);
        if (mean - self.values[idx]).abs() >= threshold {
            self.active[idx] = false;
            self.phase += 1;
            self.sum = 0.0;
            self.count = 0;
            self.current = self.argmax();
            Some(EliminationEvent {
                episode,
                pair_index: idx,
                mean,
                threshold,
            })
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub phase: usize,
    /// `None` while the fallback learner is in control.
    pub pair_index: Option<usize>,
    pub ret: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallbackEvent {
    /// First episode played by the fallback learner.
    pub episode: u64,
    pub remaining: u64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegretTrace {
    pub records: Vec<EpisodeRecord>,
    pub eliminations: Vec<EliminationEvent>,
    pub fallback: Option<FallbackEvent>,
}

impl RegretTrace {
    pub fn total_regret(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn phases(&self) -> usize {
        self.records.last().map_or(0, |r| r.phase)
    }
}

/// Test stage: play the most optimistic surviving pair, eliminate pairs whose
/// observed returns contradict their value, and fall back to single-task
/// optimistic learning if none survive.
///
/// Instantaneous regret is measured with [`EnvHandle::suboptimality`] and is
/// never fed back to the algorithm.
pub fn finetune(
    set: &PolicyValueSet,
    env: &mut EnvHandle,
    k_total: u64,
    delta: f64,
    epsilon: f64,
) -> Result<RegretTrace, PceError> {
    if set.pairs.is_empty() {
        return Err(PceError::EmptySet);
    }
    if let Some(p) = set.pairs.iter().find(|p| p.policy.shape() != env.shape()) {
        return Err(PceError::Parameter(format!(
            "pair policy has shape {}, environment has {}",
            p.policy.shape(),
            env.shape()
        )));
    }
    let mut elim = Elimination::new(
        set.pairs.iter().map(|p| p.v).collect(),
        epsilon,
        delta,
        k_total,
    );
    let mut pair_regret: Vec<Option<f64>> = vec![None; set.pairs.len()];
    let mut trace = RegretTrace::default();
    let mut cum = 0.0;
    let mut fallback: Option<OptimisticLearner> = None;
    for k in 1..=k_total {
        let phase = elim.phase();
        let (pair_index, ret, inst) = match elim.current() {
            Some(idx) => {
                let policy = &set.pairs[idx].policy;
                let t = env.run_episode(policy)?;
                let inst = match pair_regret[idx] {
                    Some(r) => r,
                    None => {
                        let r = env.suboptimality(policy)?;
                        pair_regret[idx] = Some(r);
                        r
                    }
                };
                if let Some(event) = elim.record(k, t.total_return) {
                    trace.eliminations.push(event);
                }
                (Some(idx), t.total_return, inst)
            }
            None => {
                let learner = fallback.get_or_insert_with(|| {
                    let remaining = k_total - k + 1;
                    trace.fallback = Some(FallbackEvent {
                        episode: k,
                        remaining,
                        epsilon: 1.0 / (remaining as f64).sqrt(),
                    });
                    OptimisticLearner::new(env.shape(), env.initial_state(), remaining)
                });
                let policy = learner.policy();
                let t = env.run_episode(&policy)?;
                learner.observe(&t);
                (None, t.total_return, env.suboptimality(&policy)?)
            }
        };
        cum += inst;
        trace.records.push(EpisodeRecord {
            episode: k,
            phase,
            pair_index,
            ret,
            inst_regret: inst,
            cum_regret: cum,
        });
    }
    Ok(trace)
}
