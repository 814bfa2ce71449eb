//! Gaussian multi-armed bandits: an asymptotically optimal UCB rule, exact
//! regret instrumentation, and a distribution-aware elimination baseline.

use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

use crate::distributions::MdpDistribution;
use crate::mdp::simulate::sample_reward;
use crate::mdp::{MdpError, RewardNoise, TabularMdp};
use crate::pce::Elimination;
use crate::rng::{derive_stream, fork, Stream};

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("a bandit needs at least one arm")]
    NoArms,
    #[error("arm mean {0} outside [0, 1]")]
    Mean(f64),
    #[error("horizon T = {steps} is shorter than the {arms} arms")]
    Horizon { steps: u64, arms: usize },
    #[error("pull record is inconsistent: {0}")]
    Inconsistent(String),
    #[error("invalid support: {0}")]
    Support(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Arm means with unit-variance Gaussian rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    means: Vec<f64>,
}

impl BanditInstance {
    pub fn new(means: Vec<f64>) -> Result<Self, BanditError> {
        if means.is_empty() {
            return Err(BanditError::NoArms);
        }
        if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(BanditError::Mean(*m));
        }
        Ok(Self { means })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn best_mean(&self) -> f64 {
        self.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index optimal arm.
    pub fn best_arm(&self) -> usize {
        let best = self.best_mean();
        self.means.iter().position(|m| *m == best).expect("non-empty")
    }

    pub fn gaps(&self) -> Vec<f64> {
        let best = self.best_mean();
        self.means.iter().map(|m| best - m).collect()
    }

    /// One-state, one-step MDP with the same arms and noise.
    pub fn to_mdp(&self) -> Result<TabularMdp, BanditError> {
        Ok(TabularMdp::bandit(&self.means, RewardNoise::Gaussian { sigma: 1.0 })?)
    }

    #[inline]
    fn pull(&self, arm: usize, rng: &mut Stream) -> f64 {
        sample_reward(RewardNoise::Gaussian { sigma: 1.0 }, self.means[arm], rng)
    }
}

/// Chosen arms, realized rewards, and per-arm totals.
#[derive(Debug, Clone, PartialEq)]
pub struct PullRecord {
    pub arms: Vec<usize>,
    pub rewards: Vec<f64>,
    pub counts: Vec<u64>,
    pub sums: Vec<f64>,
}

impl PullRecord {
    pub fn new(num_arms: usize) -> Self {
        Self {
            arms: Vec::new(),
            rewards: Vec::new(),
            counts: vec![0; num_arms],
            sums: vec![0.0; num_arms],
        }
    }

    pub fn push(&mut self, arm: usize, reward: f64) {
        self.arms.push(arm);
        self.rewards.push(reward);
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }

    pub fn steps(&self) -> usize {
        self.arms.len()
    }

    fn check(&self, arms: usize) -> Result<(), BanditError> {
        if self.counts.len() != arms {
            return Err(BanditError::Inconsistent(format!(
                "{} counters for {arms} arms",
                self.counts.len()
            )));
        }
        if self.rewards.len() != self.arms.len() {
            return Err(BanditError::Inconsistent("arm and reward logs differ in length".into()));
        }
        let mut tally = vec![0u64; arms];
        for &a in &self.arms {
            if a >= arms {
                return Err(BanditError::Inconsistent(format!("arm {a} out of range")));
            }
            tally[a] += 1;
        }
        if tally != self.counts {
            return Err(BanditError::Inconsistent("counts do not match the log".into()));
        }
        Ok(())
    }
}

/// Compensated (Neumaier) summation.
fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in values {
        let t = sum + x;
        if f64::abs(sum) >= f64::abs(x) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `sum_k Delta_k S_k`
pub fn pseudo_regret(record: &PullRecord, bandit: &BanditInstance) -> Result<f64, BanditError> {
    record.check(bandit.arms())?;
    let gaps = bandit.gaps();
    Ok(neumaier_sum(
        gaps.iter().zip(&record.counts).map(|(d, n)| d * *n as f64),
    ))
}

/// `sum_t (r* - r_{a_t})`
pub fn stepwise_regret(record: &PullRecord, bandit: &BanditInstance) -> Result<f64, BanditError> {
    record.check(bandit.arms())?;
    let gaps = bandit.gaps();
    Ok(neumaier_sum(record.arms.iter().map(|a| gaps[*a])))
}

/// `1 + t ln^2 t`
pub fn ucb_f(t: u64) -> f64 {
    let t = t as f64;
    let l = t.ln();
    1.0 + t * l * l
}

/// `mean + sqrt(2 ln f(t) / pulls)`
pub fn ucb_index(mean: f64, pulls: u64, t: u64) -> f64 {
    mean + (2.0 * ucb_f(t).ln() / pulls as f64).sqrt()
}

/// UCB state for one run; `t` counts its own rounds from 1.
struct Ucb {
    counts: Vec<u64>,
    sums: Vec<f64>,
    t: u64,
}

impl Ucb {
    fn new(arms: usize) -> Self {
        Self {
            counts: vec![0; arms],
            sums: vec![0.0; arms],
            t: 0,
        }
    }

    fn choose(&mut self) -> usize {
        self.t += 1;
        if let Some(a) = self.counts.iter().position(|n| *n == 0) {
            return a;
        }
        let bonus_num = 2.0 * ucb_f(self.t).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for (a, (&n, &s)) in self.counts.iter().zip(&self.sums).enumerate() {
            let index = s / n as f64 + (bonus_num / n as f64).sqrt();
            if index > best_index {
                best_index = index;
                best = a;
            }
        }
        best
    }

    fn observe(&mut self, arm: usize, reward: f64) {
        self.counts[arm] += 1;
        self.sums[arm] += reward;
    }
}

/// Pulls every arm once in index order, then the arm with the largest index
/// (lowest arm on ties).
pub fn ucb_run(bandit: &BanditInstance, steps: u64, rng: &mut Stream) -> Result<PullRecord, BanditError> {
    if steps < bandit.arms() as u64 {
        return Err(BanditError::Horizon {
            steps,
            arms: bandit.arms(),
        });
    }
    let mut record = PullRecord::new(bandit.arms());
    let mut ucb = Ucb::new(bandit.arms());
    for _ in 0..steps {
        let arm = ucb.choose();
        let y = bandit.pull(arm, rng);
        ucb.observe(arm, y);
        record.push(arm, y);
    }
    Ok(record)
}

/// A finite distribution over bandit instances with a common arm count.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditSupport {
    pub instances: Vec<BanditInstance>,
    pub probs: Vec<f64>,
}

impl BanditSupport {
    pub fn new(instances: Vec<BanditInstance>, probs: Vec<f64>) -> Result<Self, BanditError> {
        if instances.is_empty() || instances.len() != probs.len() {
            return Err(BanditError::Support(format!(
                "{} instances with {} probabilities",
                instances.len(),
                probs.len()
            )));
        }
        let arms = instances[0].arms();
        if instances.iter().any(|b| b.arms() != arms) {
            return Err(BanditError::Support("instances differ in arm count".into()));
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| *p < 0.0 || !p.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(BanditError::Support(format!("probabilities sum to {sum}")));
        }
        Ok(Self { instances, probs })
    }

    /// Reads one-state, one-step members as bandits.
    pub fn from_distribution(dist: &MdpDistribution) -> Result<Self, BanditError> {
        let shape = dist.shape();
        if shape.states != 1 || shape.horizon != 1 {
            return Err(BanditError::Support(format!("{shape} is not a bandit shape")));
        }
        let instances = dist
            .support()
            .iter()
            .map(|m| BanditInstance::new(m.rewards().to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(instances, dist.probs().to_vec())
    }

    pub fn sample_index(&self, rng: &mut Stream) -> usize {
        use rand::Rng;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

/// Reference support for the ratio experiment: instance `i` has arm `i` at
/// 0.9 and the rest at 0.4; instance 0 carries most of the mass.
pub fn reference_ratio_support(arms: usize, head_mass: f64) -> Result<BanditSupport, BanditError> {
    if arms < 2 || !(0.0..=1.0).contains(&head_mass) {
        return Err(BanditError::Support(format!(
            "need >= 2 arms and head mass in [0, 1], got {arms} and {head_mass}"
        )));
    }
    let instances = (0..arms)
        .map(|i| BanditInstance::new((0..arms).map(|a| if a == i { 0.9 } else { 0.4 }).collect()))
        .collect::<Result<Vec<_>, _>>()?;
    let tail = (1.0 - head_mass) / (arms - 1) as f64;
    let probs = (0..arms).map(|i| if i == 0 { head_mass } else { tail }).collect();
    BanditSupport::new(instances, probs)
}

/// Elimination over `(best arm, best mean)` of every support instance, in
/// descending value order, with `eps = delta = 1/sqrt(T)`. Falls back to UCB
/// for the remaining steps if every pair is eliminated. Without knowledge of
/// the support this is plain UCB.
pub fn informed_elimination_run(
    support: &BanditSupport,
    true_dist_known: bool,
    bandit: &BanditInstance,
    steps: u64,
    rng: &mut Stream,
) -> Result<PullRecord, BanditError> {
    if !true_dist_known {
        return ucb_run(bandit, steps, rng);
    }
    if support.instances[0].arms() != bandit.arms() {
        return Err(BanditError::Support("support and test instance differ in arm count".into()));
    }
    let mut pairs: Vec<(usize, f64)> = support
        .instances
        .iter()
        .zip(&support.probs)
        .filter(|(_, p)| **p > 0.0)
        .map(|(b, _)| (b.best_arm(), b.best_mean()))
        .collect();
    pairs.sort_by(|x, y| y.1.total_cmp(&x.1));
    let acc = 1.0 / (steps.max(1) as f64).sqrt();
    let mut elim = Elimination::new(pairs.iter().map(|p| p.1).collect(), acc, acc, steps);
    let mut record = PullRecord::new(bandit.arms());
    let mut fallback: Option<Ucb> = None;
    for t in 1..=steps {
        match elim.current() {
            Some(idx) => {
                let arm = pairs[idx].0;
                let y = bandit.pull(arm, rng);
                elim.record(t, y);
                record.push(arm, y);
            }
            None => {
                let ucb = fallback.get_or_insert_with(|| Ucb::new(bandit.arms()));
                let arm = ucb.choose();
                let y = bandit.pull(arm, rng);
                ucb.observe(arm, y);
                record.push(arm, y);
            }
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub steps: u64,
    pub seed: u64,
    pub algorithm: &'static str,
    pub pseudo_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub steps: u64,
    pub mean_informed: f64,
    pub mean_ucb: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub runs: Vec<RegretRow>,
    pub ratios: Vec<RatioRow>,
}

/// Mean pseudo-regret of the informed baseline and of UCB for each horizon.
/// Illustrative only: the informed baseline stands in for an optimal
/// distribution-aware algorithm, which cannot be simulated.
pub fn asymptotic_ratio_experiment(
    support: &BanditSupport,
    t_grid: &[u64],
    seeds: &[u64],
) -> Result<RatioTable, BanditError> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(BanditError::Support("horizon grid must be ascending".into()));
    }
    let keys: Vec<(u64, u64)> = t_grid
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let results = keys
        .par_iter()
        .map(|&(t, seed)| {
            let mut rng = derive_stream(seed, t);
            let bandit = &support.instances[support.sample_index(&mut rng)];
            let informed = informed_elimination_run(support, true, bandit, t, &mut fork(&mut rng, 1))?;
            let ucb = ucb_run(bandit, t, &mut fork(&mut rng, 2))?;
            Ok((
                t,
                seed,
                pseudo_regret(&informed, bandit)?,
                pseudo_regret(&ucb, bandit)?,
            ))
        })
        .collect::<Result<Vec<_>, BanditError>>()?;
    let mut runs = Vec::with_capacity(results.len() * 2);
    for &(t, seed, inf, ucb) in &results {
        runs.push(RegretRow {
            steps: t,
            seed,
            algorithm: "informed",
            pseudo_regret: inf,
        });
        runs.push(RegretRow {
            steps: t,
            seed,
            algorithm: "ucb",
            pseudo_regret: ucb,
        });
    }
    let ratios = t_grid
        .iter()
        .map(|&t| {
            let rows: Vec<_> = results.iter().filter(|r| r.0 == t).collect();
            let n = rows.len().max(1) as f64;
            let mean_informed = rows.iter().map(|r| r.2).sum::<f64>() / n;
            let mean_ucb = rows.iter().map(|r| r.3).sum::<f64>() / n;
            let ratio = if mean_ucb > 0.0 {
                mean_informed / mean_ucb
            } else if mean_informed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            RatioRow {
                steps: t,
                mean_informed,
                mean_ucb,
                ratio,
            }
        })
        .collect();
    Ok(RatioTable { runs, ratios })
}

/// `T,seed,algorithm,pseudo_regret`
pub fn write_regret_rows<W: Write>(out: W, rows: &[RegretRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "seed", "algorithm", "pseudo_regret"])?;
    for r in rows {
        w.write_record([
            r.steps.to_string(),
            r.seed.to_string(),
            r.algorithm.to_string(),
            r.pseudo_regret.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `T,mean_informed,mean_ucb,ratio`
pub fn write_ratio_rows<W: Write>(out: W, rows: &[RatioRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["T", "mean_informed", "mean_ucb", "ratio"])?;
    for r in rows {
        w.write_record([
            r.steps.to_string(),
            r.mean_informed.to_string(),
            r.mean_ucb.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
