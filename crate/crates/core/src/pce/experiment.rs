use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::finetune::{finetune, EpisodeRecord, RegretTrace};
use super::pretrain::{default_accuracy, pretrain, PolicyValueSet, PretrainConfig};
use super::PceError;
use crate::distributions::MdpDistribution;
use crate::omerm::OptimisticLearner;
use crate::oracles::{EnvHandle, OracleSettings};
use crate::rng::{derive_stream, fork};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PceConfig {
    pub pretrain: PretrainConfig,
    /// Test-stage accuracy; `1/sqrt(K)` when unset.
    pub epsilon: Option<f64>,
    /// Test-stage confidence; `1/sqrt(K)` when unset.
    pub delta: Option<f64>,
}

/// One fine-tuning run, keyed by `(seed, test_draw)`.
#[derive(Debug, Clone)]
pub struct PceRun {
    pub seed: u64,
    pub test_draw: usize,
    pub task_index: usize,
    pub trace: RegretTrace,
}

#[derive(Debug, Clone)]
pub struct PceExperimentResult {
    /// Pre-trained set per seed, in seed order.
    pub sets: Vec<(u64, PolicyValueSet)>,
    /// Runs sorted by `(seed, test_draw)`.
    pub runs: Vec<PceRun>,
    /// Mean cumulative regret after each episode, over all runs.
    pub mean_cum_regret: Vec<f64>,
    pub stderr_cum_regret: Vec<f64>,
    pub pretraining_episodes: u64,
}

/// Stream ids: 0 for pre-training, `1 + d` for test draw `d`.
pub fn run_pce_experiment(
    dist: &MdpDistribution,
    k: u64,
    num_test_draws: usize,
    seeds: &[u64],
    settings: &OracleSettings,
    config: &PceConfig,
) -> Result<PceExperimentResult, PceError> {
    let epsilon = config.epsilon.unwrap_or_else(|| default_accuracy(k));
    let delta = config.delta.unwrap_or_else(|| default_accuracy(k));
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let set = pretrain(
                dist,
                k,
                settings,
                &config.pretrain,
                &mut derive_stream(seed, 0),
            )?;
            let runs = (0..num_test_draws)
                .into_par_iter()
                .map(|d| {
                    let mut rng = derive_stream(seed, 1 + d as u64);
                    let task_index = dist.sample_index(&mut rng);
                    let mut env =
                        EnvHandle::new(dist.member(task_index).clone(), fork(&mut rng, 0));
                    let trace = finetune(&set, &mut env, k, delta, epsilon)?;
                    Ok(PceRun {
                        seed,
                        test_draw: d,
                        task_index,
                        trace,
                    })
                })
                .collect::<Result<Vec<_>, PceError>>()?;
            Ok((seed, set, runs))
        })
        .collect::<Result<Vec<_>, PceError>>()?;
    let mut sets = Vec::with_capacity(per_seed.len());
    let mut runs = Vec::new();
    for (seed, set, seed_runs) in per_seed {
        sets.push((seed, set));
        runs.extend(seed_runs);
    }
    runs.sort_by_key(|r| (r.seed, r.test_draw));
    let curves: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| r.trace.records.iter().map(|x| x.cum_regret).collect())
        .collect();
    let (mean_cum_regret, stderr_cum_regret) = mean_and_stderr(&curves);
    let pretraining_episodes = sets
        .iter()
        .filter_map(|(_, s)| s.provenance.as_ref())
        .map(|p| p.pretraining_episodes)
        .sum();
    Ok(PceExperimentResult {
        sets,
        runs,
        mean_cum_regret,
        stderr_cum_regret,
        pretraining_episodes,
    })
}

/// Single-task optimistic learning from scratch for `k` episodes. Every
/// record has phase 1 and no pair index.
pub fn optimistic_baseline(env: &mut EnvHandle, k: u64) -> Result<RegretTrace, PceError> {
    let mut learner = OptimisticLearner::new(env.shape(), env.initial_state(), k);
    let mut trace = RegretTrace::default();
    let mut cum = 0.0;
    for episode in 1..=k {
        let policy = learner.policy();
        let t = env.run_episode(&policy)?;
        learner.observe(&t);
        let inst = env.suboptimality(&policy)?;
        cum += inst;
        trace.records.push(EpisodeRecord {
            episode,
            phase: 1,
            pair_index: None,
            ret: t.total_return,
            inst_regret: inst,
            cum_regret: cum,
        });
    }
    Ok(trace)
}

/// [`optimistic_baseline`] on the same test draws and environment streams
/// as [`run_pce_experiment`] with the same seeds.
pub fn run_baseline_experiment(
    dist: &MdpDistribution,
    k: u64,
    num_test_draws: usize,
    seeds: &[u64],
) -> Result<Vec<PceRun>, PceError> {
    let keys: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..num_test_draws).map(move |d| (s, d)))
        .collect();
    let mut runs = keys
        .par_iter()
        .map(|&(seed, d)| {
            let mut rng = derive_stream(seed, 1 + d as u64);
            let task_index = dist.sample_index(&mut rng);
            let mut env = EnvHandle::new(dist.member(task_index).clone(), fork(&mut rng, 0));
            Ok(PceRun {
                seed,
                test_draw: d,
                task_index,
                trace: optimistic_baseline(&mut env, k)?,
            })
        })
        .collect::<Result<Vec<_>, PceError>>()?;
    runs.sort_by_key(|r| (r.seed, r.test_draw));
    Ok(runs)
}

/// Pointwise mean and standard error (sample standard deviation over
/// `sqrt(n)`; zero for a single curve) of equal-length curves.
pub fn mean_and_stderr(curves: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let Some(len) = curves.first().map(Vec::len) else {
        return (Vec::new(), Vec::new());
    };
    let n = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut stderr = vec![0.0; len];
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / n;
        mean[t] = m;
        if curves.len() > 1 {
            let var = curves.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
            stderr[t] = (var / n).sqrt();
        }
    }
    (mean, stderr)
}

/// CSV with columns
/// `seed,test_draw,episode,phase,pair_index,return,inst_regret,cum_regret`;
/// `pair_index` is `-1` for fallback episodes.
pub fn write_regret_csv<W: Write>(out: W, runs: &[PceRun]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "seed",
        "test_draw",
        "episode",
        "phase",
        "pair_index",
        "return",
        "inst_regret",
        "cum_regret",
    ])?;
    for run in runs {
        for r in &run.trace.records {
            let pair = r.pair_index.map_or(-1, |i| i as i64);
            w.write_record([
                run.seed.to_string(),
                run.test_draw.to_string(),
                r.episode.to_string(),
                r.phase.to_string(),
                pair.to_string(),
                r.ret.to_string(),
                r.inst_regret.to_string(),
                r.cum_regret.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gen_proposition1_instance;
    use crate::mdp::{RewardNoise, TabularMdp};

    #[test]
    fn single_mdp_regret_within_cover_slack() {
        let m = TabularMdp::bandit(&[0.3, 0.9, 0.5], RewardNoise::Deterministic).unwrap();
        let d = MdpDistribution::uniform(vec![m]).unwrap();
        let k = 400;
        let cfg = PceConfig {
            pretrain: PretrainConfig { n_cap: Some(256) },
            ..PceConfig::default()
        };
        let r = run_pce_experiment(&d, k, 3, &[1, 2], &OracleSettings::white_box(), &cfg).unwrap();
        assert_eq!(r.runs.len(), 6);
        let eps = default_accuracy(k);
        assert!(r
            .runs
            .iter()
            .all(|run| run.trace.total_regret() <= 2.0 * eps * k as f64));
        assert_eq!(r.pretraining_episodes, 0);
    }

    #[test]
    fn baseline_shares_test_draws() {
        let d = gen_proposition1_instance(3).unwrap();
        let cfg = PceConfig {
            pretrain: PretrainConfig { n_cap: Some(32) },
            ..PceConfig::default()
        };
        let pce = run_pce_experiment(&d, 60, 3, &[5, 6], &OracleSettings::white_box(), &cfg).unwrap();
        let base = run_baseline_experiment(&d, 60, 3, &[5, 6]).unwrap();
        assert_eq!(base.len(), pce.runs.len());
        for (a, b) in base.iter().zip(&pce.runs) {
            assert_eq!((a.seed, a.test_draw, a.task_index), (b.seed, b.test_draw, b.task_index));
            assert_eq!(a.trace.records.len(), 60);
            assert!(a.trace.records.iter().all(|r| r.pair_index.is_none()));
        }
        // A learner that has to try arms pays for it on deterministic arms.
        assert!(base.iter().any(|r| r.trace.total_regret() > 0.0));
    }

    #[test]
    fn zero_draws() {
        let d = gen_proposition1_instance(2).unwrap();
        let cfg = PceConfig {
            pretrain: PretrainConfig { n_cap: Some(16) },
            ..PceConfig::default()
        };
        let r = run_pce_experiment(&d, 100, 0, &[7], &OracleSettings::white_box(), &cfg).unwrap();
        assert!(r.runs.is_empty());
        assert!(r.mean_cum_regret.is_empty());
        assert_eq!(r.sets.len(), 1);
    }

    #[test]
    fn stderr_of_single_curve_is_zero() {
        let (m, s) = mean_and_stderr(&[vec![1.0, 2.0]]);
        assert_eq!(m, vec![1.0, 2.0]);
        assert_eq!(s, vec![0.0, 0.0]);
        let (m, s) = mean_and_stderr(&[vec![0.0], vec![2.0]]);
        assert_eq!(m, vec![1.0]);
        assert_eq!(s, vec![1.0]);
    }

    #[test]
    fn csv_is_reproducible() {
        let d = gen_proposition1_instance(3).unwrap();
        let cfg = PceConfig {
            pretrain: PretrainConfig { n_cap: Some(32) },
            ..PceConfig::default()
        };
        let run = || {
            let r =
                run_pce_experiment(&d, 50, 2, &[3, 4], &OracleSettings::white_box(), &cfg).unwrap();
            let mut buf = Vec::new();
            write_regret_csv(&mut buf, &r.runs).unwrap();
            buf
        };
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(
            "seed,test_draw,episode,phase,pair_index,return,inst_regret,cum_regret\n"
        ));
        assert_eq!(text.lines().count(), 1 + 2 * 2 * 50);
    }
}
