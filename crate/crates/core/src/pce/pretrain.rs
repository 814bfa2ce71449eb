use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cover::{greedy_cover, CoverMatrix};
use super::PceError;
use crate::distributions::MdpDistribution;
use crate::mdp::{Policy, PolicyDocument};
use crate::oracles::{evaluate_policy, learn_policy, EnvHandle, OracleSettings};
use crate::rng::{fork, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValuePair {
    pub policy: Policy,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainProvenance {
    pub final_tasks: usize,
    pub phases: usize,
    /// Tasks sampled in each phase.
    pub phase_tasks: Vec<usize>,
    /// Cover size found in each phase.
    pub phase_sizes: Vec<usize>,
    pub pretraining_episodes: u64,
    /// `n_cap` shortened the doubling schedule.
    pub capped: bool,
    pub stopping_rule_met: bool,
    pub stopping_statistic: f64,
}

/// Output of pre-training: the policy-value pairs in pick order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValueSet {
    pub epsilon: f64,
    pub delta: f64,
    pub pairs: Vec<PolicyValuePair>,
    pub provenance: Option<PretrainProvenance>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairDocument {
    pub v: f64,
    pub policy: PolicyDocument,
}

/// `{epsilon, delta, pairs: [{v, policy}]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyValueSetDocument {
    pub epsilon: f64,
    pub delta: f64,
    pub pairs: Vec<PairDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<PretrainProvenance>,
}

impl From<&PolicyValueSet> for PolicyValueSetDocument {
    fn from(set: &PolicyValueSet) -> Self {
        Self {
            epsilon: set.epsilon,
            delta: set.delta,
            pairs: set
                .pairs
                .iter()
                .map(|p| PairDocument {
                    v: p.v,
                    policy: p.policy.to_document(),
                })
                .collect(),
            provenance: set.provenance.clone(),
        }
    }
}

impl PolicyValueSetDocument {
    pub fn to_set(&self) -> Result<PolicyValueSet, PceError> {
        let pairs = self
            .pairs
            .iter()
            .map(|p| {
                Ok(PolicyValuePair {
                    policy: Policy::from_document(&p.policy)?,
                    v: p.v,
                })
            })
            .collect::<Result<Vec<_>, PceError>>()?;
        Ok(PolicyValueSet {
            epsilon: self.epsilon,
            delta: self.delta,
            pairs,
            provenance: self.provenance.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Upper limit on tasks sampled per phase.
    pub n_cap: Option<usize>,
}

/// `1 / sqrt(K)`, used for both `delta` and `epsilon`.
pub fn default_accuracy(k: u64) -> f64 {
    1.0 / (k as f64).sqrt()
}

/// `ceil(ln(1/delta) / delta^2)`
pub fn initial_tasks(delta: f64) -> usize {
    ((1.0 / delta).ln() / (delta * delta)).ceil() as usize
}

/// `sqrt(|U| ln(2N/delta) / (N - |U|))`
pub fn stopping_statistic(cover: usize, tasks: usize, delta: f64) -> f64 {
    (cover as f64 * (2.0 * tasks as f64 / delta).ln() / (tasks - cover) as f64).sqrt()
}

/// Pre-training: collect a small set of policy-value pairs covering most of
/// the distribution's mass, doubling the task sample until the estimation
/// error of the cover is below `delta`.
pub fn pretrain(
    dist: &MdpDistribution,
    k: u64,
    settings: &OracleSettings,
    config: &PretrainConfig,
    rng: &mut Stream,
) -> Result<PolicyValueSet, PceError> {
    if k < 2 {
        return Err(PceError::Parameter(format!(
            "episode budget K = {k} must be >= 2"
        )));
    }
    let delta = default_accuracy(k);
    let epsilon = delta;
    let mut scheduled = initial_tasks(delta);
    let mut provenance = PretrainProvenance {
        final_tasks: 0,
        phases: 0,
        phase_tasks: Vec::new(),
        phase_sizes: Vec::new(),
        pretraining_episodes: 0,
        capped: false,
        stopping_rule_met: false,
        stopping_statistic: f64::INFINITY,
    };
    loop {
        let n = match config.n_cap {
            Some(cap) if scheduled > cap => {
                provenance.capped = true;
                cap
            }
            _ => scheduled,
        };
        let at_cap = config.n_cap.is_some_and(|cap| n >= cap);
        let phase = run_phase(dist, n, epsilon, delta, settings, rng)?;
        provenance.phases += 1;
        provenance.phase_tasks.push(n);
        provenance.phase_sizes.push(phase.picks.len());
        provenance.pretraining_episodes += phase.episodes;
        provenance.final_tasks = n;
        let size = phase.picks.len();
        if size >= n {
            return Err(PceError::DegenerateCover {
                cover: size,
                tasks: n,
            });
        }
        let stat = stopping_statistic(size, n, delta);
        provenance.stopping_statistic = stat;
        provenance.stopping_rule_met = stat <= delta;
        if !provenance.stopping_rule_met && at_cap {
            provenance.capped = true;
        }
        if provenance.stopping_rule_met || at_cap {
            let pairs = phase
                .picks
                .iter()
                .map(|&j| PolicyValuePair {
                    policy: phase.policies[j].clone(),
                    v: phase.values[j * n + j],
                })
                .collect();
            return Ok(PolicyValueSet {
                epsilon,
                delta,
                pairs,
                provenance: Some(provenance),
            });
        }
        scheduled = n * 2;
    }
}

struct Phase {
    policies: Vec<Policy>,
    values: Vec<f64>,
    picks: Vec<usize>,
    episodes: u64,
}

fn run_phase(
    dist: &MdpDistribution,
    n: usize,
    epsilon: f64,
    delta: f64,
    settings: &OracleSettings,
    rng: &mut Stream,
) -> Result<Phase, PceError> {
    let mut handles: Vec<EnvHandle> = (0..n)
        .map(|i| {
            let idx = dist.sample_index(rng);
            EnvHandle::new(dist.member(idx).clone(), fork(rng, i as u64))
        })
        .collect();
    let learn_log = (n as f64 / delta).ln();
    let policies = handles
        .par_iter_mut()
        .map(|h| learn_policy(h, epsilon / 2.0, learn_log, settings).map(|(p, _)| p))
        .collect::<Result<Vec<_>, _>>()?;
    let eval_log = ((n * n) as f64 / delta).ln();
    let rows = handles
        .par_iter_mut()
        .map(|h| {
            policies
                .iter()
                .map(|p| evaluate_policy(h, p, epsilon / 2.0, eval_log, settings).map(|(v, _)| v))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let matrix = CoverMatrix::from_values(n, &values, epsilon);
    let picks = greedy_cover(&matrix, delta);
    Ok(Phase {
        policies,
        values,
        picks,
        episodes: handles.iter().map(EnvHandle::episodes_used).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gen_proposition1_instance;
    use crate::mdp::{RewardNoise, TabularMdp};
    use crate::rng::derive_stream;

    #[test]
    fn initialization_formulas() {
        assert_eq!(default_accuracy(100), 0.1);
        assert_eq!(initial_tasks(0.1), 231);
        assert_eq!(initial_tasks(0.1), ((10f64).ln() / 0.01).ceil() as usize);
    }

    #[test]
    fn single_mdp_gives_single_pair() {
        let m = TabularMdp::bandit(&[0.2, 0.9], RewardNoise::Deterministic).unwrap();
        let d = MdpDistribution::uniform(vec![m]).unwrap();
        let set = pretrain(
            &d,
            100,
            &OracleSettings::white_box(),
            &PretrainConfig::default(),
            &mut derive_stream(1, 0),
        )
        .unwrap();
        assert_eq!(set.pairs.len(), 1);
        assert_eq!(set.pairs[0].v, 0.9);
        let prov = set.provenance.unwrap();
        // First phase stops iff sqrt(ln(2N/delta)/(N-1)) <= delta.
        let n = 231;
        assert_eq!(prov.phases == 1, stopping_statistic(1, n, 0.1) <= 0.1);
        assert!(prov.stopping_rule_met);
    }

    #[test]
    fn proposition1_cover_is_identity() {
        let d = gen_proposition1_instance(4).unwrap();
        let set = pretrain(
            &d,
            100,
            &OracleSettings::white_box(),
            &PretrainConfig { n_cap: Some(231) },
            &mut derive_stream(2, 0),
        )
        .unwrap();
        // v_ij = 1[i = j], so no pair covers another task: each pick adds
        // exactly the tasks equal to it, and 3 of 4 arms reach 70% coverage
        // unless one arm was sampled unusually often.
        assert!(set.pairs.len() >= 3 && set.pairs.len() <= 4);
        assert!(set.pairs.iter().all(|p| p.v == 1.0));
        let arms: Vec<usize> = set
            .pairs
            .iter()
            .map(|p| p.policy.greedy_action(0, 0))
            .collect();
        let mut dedup = arms.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), arms.len());
        assert!(set.provenance.unwrap().capped);
    }

    #[test]
    fn cap_returns_flagged_set() {
        let d = gen_proposition1_instance(4).unwrap();
        let set = pretrain(
            &d,
            100,
            &OracleSettings::white_box(),
            &PretrainConfig { n_cap: Some(64) },
            &mut derive_stream(3, 0),
        )
        .unwrap();
        let prov = set.provenance.unwrap();
        assert_eq!(prov.final_tasks, 64);
        assert!(prov.capped && !prov.stopping_rule_met);
        assert_eq!(prov.phases, 1);
    }

    #[test]
    fn budget_too_small() {
        let d = gen_proposition1_instance(2).unwrap();
        let r = pretrain(
            &d,
            1,
            &OracleSettings::white_box(),
            &PretrainConfig::default(),
            &mut derive_stream(4, 0),
        );
        assert!(r.is_err());
    }

    #[test]
    fn document_round_trip() {
        let d = gen_proposition1_instance(2).unwrap();
        let set = pretrain(
            &d,
            16,
            &OracleSettings::white_box(),
            &PretrainConfig { n_cap: Some(32) },
            &mut derive_stream(5, 0),
        )
        .unwrap();
        let json = serde_json::to_string(&PolicyValueSetDocument::from(&set)).unwrap();
        let back: PolicyValueSetDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_set().unwrap(), set);
    }

    #[test]
    fn learned_oracles_on_small_instance() {
        let d = gen_proposition1_instance(2).unwrap();
        let set = pretrain(
            &d,
            4,
            &OracleSettings::default(),
            &PretrainConfig { n_cap: Some(8) },
            &mut derive_stream(6, 0),
        )
        .unwrap();
        assert!(!set.pairs.is_empty());
        assert!(set.provenance.unwrap().pretraining_episodes > 0);
    }
}
