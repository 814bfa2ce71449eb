//! Task distributions over a finite MDP support, the complexity measure
//! `C(D)`, and instance generators.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::mdp::{validate_mdp, MdpDocument, MdpError, RewardNoise, Shape, TabularMdp, PROB_TOL};

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("support is empty")]
    EmptySupport,
    #[error("{probs} probabilities for {support} support members")]
    LengthMismatch { probs: usize, support: usize },
    #[error("probabilities must be non-negative and sum to 1 (sum = {sum})")]
    BadProbabilities { sum: f64 },
    #[error("support member {index} has shape {found}, expected {expected}")]
    MixedShapes {
        index: usize,
        expected: Shape,
        found: Shape,
    },
    #[error("support member {index} is invalid: {source}")]
    InvalidMember { index: usize, source: MdpError },
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("malformed distribution document: {0}")]
    Document(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A distribution over a finite, ordered MDP support sharing one shape.
#[derive(Debug, Clone)]
pub struct MdpDistribution {
    support: Vec<Arc<TabularMdp>>,
    probs: Vec<f64>,
}

impl MdpDistribution {
    pub fn new(support: Vec<TabularMdp>, probs: Vec<f64>) -> Result<Self, DistributionError> {
        Self::from_shared(support.into_iter().map(Arc::new).collect(), probs)
    }

    pub fn uniform(support: Vec<TabularMdp>) -> Result<Self, DistributionError> {
        let n = support.len().max(1);
        Self::new(support, vec![1.0 / n as f64; n])
    }

    pub fn from_shared(
        support: Vec<Arc<TabularMdp>>,
        probs: Vec<f64>,
    ) -> Result<Self, DistributionError> {
        if support.is_empty() {
            return Err(DistributionError::EmptySupport);
        }
        if probs.len() != support.len() {
            return Err(DistributionError::LengthMismatch {
                probs: probs.len(),
                support: support.len(),
            });
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > PROB_TOL {
            return Err(DistributionError::BadProbabilities { sum });
        }
        let shape = support[0].shape();
        for (index, mdp) in support.iter().enumerate() {
            if mdp.shape() != shape {
                return Err(DistributionError::MixedShapes {
                    index,
                    expected: shape,
                    found: mdp.shape(),
                });
            }
            let report = validate_mdp(mdp);
            if !report.is_valid() {
                return Err(DistributionError::InvalidMember {
                    index,
                    source: MdpError::Invalid(report),
                });
            }
        }
        Ok(Self { support, probs })
    }

    /// Same support, new probabilities.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self, DistributionError> {
        Self::from_shared(self.support.clone(), probs)
    }

    pub fn shape(&self) -> Shape {
        self.support[0].shape()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn member(&self, index: usize) -> &Arc<TabularMdp> {
        &self.support[index]
    }

    pub fn support(&self) -> &[Arc<TabularMdp>] {
        &self.support
    }

    /// Draws a support index according to `probs`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_mdp(self, rng)
    }
}

/// Draws a support index according to the distribution's probabilities.
pub fn sample_mdp<R: Rng + ?Sized>(dist: &MdpDistribution, rng: &mut R) -> usize {
    if dist.probs.len() == 1 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in dist.probs.iter().enumerate() {
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

/// Slack for comparing accumulated probability mass against `1 - delta`.
pub const MASS_TOL: f64 = 1e-12;

/// Size of the smallest sub-support carrying mass at least `1 - delta`.
///
/// Taking the largest probabilities first is optimal, so this is the
/// shortest prefix of the descending sort reaching `1 - delta`.
pub fn complexity_measure(probs: &[f64], delta: f64) -> usize {
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let target = 1.0 - delta - MASS_TOL;
    let mut acc = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        acc += p;
        if acc >= target {
            return i + 1;
        }
    }
    sorted.len()
}

impl MdpDistribution {
    pub fn complexity_measure(&self, delta: f64) -> usize {
        complexity_measure(&self.probs, delta)
    }
}

/// `M` one-step MDPs; in member `i` action `i` pays 1 and every other action 0.
pub fn gen_proposition1_instance(m: usize) -> Result<MdpDistribution, DistributionError> {
    if m < 2 {
        return Err(DistributionError::Parameter(format!(
            "M = {m} must be >= 2"
        )));
    }
    let support = (0..m)
        .map(|i| {
            let means: Vec<f64> = (0..m).map(|a| if a == i { 1.0 } else { 0.0 }).collect();
            TabularMdp::bandit(&means, RewardNoise::Bernoulli)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DistributionError::InvalidMember {
            index: 0,
            source: e,
        })?;
    MdpDistribution::uniform(support)
}

/// Uniform mixture of `M` Gaussian(1) bandits; in member `i` arm `i` has mean
/// `1/2 + gap` and every other arm `1/2`.
pub fn gen_theorem3_instance(m: usize, gap: f64) -> Result<MdpDistribution, DistributionError> {
    if m < 2 {
        return Err(DistributionError::Parameter(format!(
            "M = {m} must be >= 2"
        )));
    }
    if !(gap > 0.0 && gap <= 0.5) {
        return Err(DistributionError::Parameter(format!(
            "gap {gap} must lie in (0, 1/2]"
        )));
    }
    let support = (0..m)
        .map(|i| {
            let means: Vec<f64> = (0..m)
                .map(|a| if a == i { 0.5 + gap } else { 0.5 })
                .collect();
            TabularMdp::bandit(&means, RewardNoise::Gaussian { sigma: 1.0 })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| DistributionError::InvalidMember {
            index: 0,
            source: e,
        })?;
    MdpDistribution::uniform(support)
}

/// Weights `probs[i] ∝ exp(-lambda * i)` over `family`.
pub fn gen_exponential_tail(
    family: Vec<TabularMdp>,
    lambda: f64,
) -> Result<MdpDistribution, DistributionError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(DistributionError::Parameter(format!(
            "decay rate {lambda} must be positive"
        )));
    }
    if family.is_empty() {
        return Err(DistributionError::EmptySupport);
    }
    MdpDistribution::new(family.clone(), exponential_weights(family.len(), lambda))
}

/// Normalized `exp(-lambda * i)` for `i < n`.
pub fn exponential_weights(n: usize, lambda: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|i| (-lambda * i as f64).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

/// Members needed so an infinite `exp(-lambda * i)` family loses at most
/// `tail_mass` when truncated.
pub fn exponential_truncation_len(lambda: f64, tail_mass: f64) -> usize {
    // Tail from index n on, relative to the total: exp(-lambda * n).
    (tail_mass.ln() / -lambda).ceil().max(1.0) as usize
}

/// Random tabular MDP. Transitions are symmetric Dirichlet(1) per `(h, s, a)`;
/// mean rewards are uniform on reachable cells (zero elsewhere) and rescaled
/// so the maximum total mean reward from `s1` is exactly one.
pub fn random_tabular_mdp<R: Rng + ?Sized>(
    shape: Shape,
    noise: RewardNoise,
    rng: &mut R,
) -> TabularMdp {
    let Shape {
        states,
        actions,
        horizon,
    } = shape;
    let mut p = Vec::with_capacity(shape.num_sa() * states);
    for _ in 0..shape.num_sa() {
        let raw: Vec<f64> = (0..states).map(|_| Exp1.sample(rng)).collect();
        let z: f64 = raw.iter().sum();
        p.extend(raw.into_iter().map(|x: f64| x / z));
    }
    let mut r: Vec<f64> = (0..shape.num_sa()).map(|_| rng.random::<f64>()).collect();
    let mdp = TabularMdp::new(shape, 0, p, r.clone(), noise).expect("sizes are consistent");
    let reach = mdp.reachable();
    for h in 0..horizon {
        for s in 0..states {
            if !reach[h][s] {
                for a in 0..actions {
                    r[shape.sa(h, s, a)] = 0.0;
                }
            }
        }
    }
    let unscaled = TabularMdp::new(shape, 0, mdp.transitions().to_vec(), r.clone(), noise)
        .expect("sizes are consistent");
    let bound = unscaled.reward_path_bound();
    if bound > 0.0 {
        r.iter_mut().for_each(|x| *x /= bound);
    }
    TabularMdp::new(shape, 0, unscaled.transitions().to_vec(), r, noise)
        .expect("sizes are consistent")
}

/// `num_mdps` random tabular MDPs (Bernoulli rewards), uniform weights.
pub fn gen_random_tabular<R: Rng + ?Sized>(
    shape: Shape,
    num_mdps: usize,
    rng: &mut R,
) -> Result<MdpDistribution, DistributionError> {
    if shape.states == 0 || shape.actions == 0 || shape.horizon == 0 || num_mdps == 0 {
        return Err(DistributionError::Parameter("sizes must be >= 1".into()));
    }
    let support = (0..num_mdps)
        .map(|_| random_tabular_mdp(shape, RewardNoise::Bernoulli, rng))
        .collect();
    MdpDistribution::uniform(support)
}

/// Entry of the `mdps` array of a distribution document: inline or a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MdpEntry {
    Inline(Box<MdpDocument>),
    File(String),
}

/// `{probs: [...], mdps: [MDP document | "path"]}`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionDocument {
    pub probs: Vec<f64>,
    pub mdps: Vec<MdpEntry>,
}

impl From<&MdpDistribution> for DistributionDocument {
    fn from(dist: &MdpDistribution) -> Self {
        Self {
            probs: dist.probs.clone(),
            mdps: dist
                .support
                .iter()
                .map(|m| MdpEntry::Inline(Box::new(MdpDocument::from(m.as_ref()))))
                .collect(),
        }
    }
}

impl DistributionDocument {
    /// Resolves file entries relative to `base_dir`.
    pub fn to_distribution(
        &self,
        base_dir: &std::path::Path,
    ) -> Result<MdpDistribution, DistributionError> {
        let mut support = Vec::with_capacity(self.mdps.len());
        for (index, entry) in self.mdps.iter().enumerate() {
            let doc = match entry {
                MdpEntry::Inline(doc) => (**doc).clone(),
                MdpEntry::File(path) => {
                    let full = base_dir.join(path);
                    let text =
                        std::fs::read_to_string(&full).map_err(|source| DistributionError::Io {
                            path: full.display().to_string(),
                            source,
                        })?;
                    MdpDocument::from_json(&text)
                        .map_err(|source| DistributionError::InvalidMember { index, source })?
                }
            };
            let mdp = doc
                .to_mdp()
                .map_err(|source| DistributionError::InvalidMember { index, source })?;
            support.push(mdp);
        }
        MdpDistribution::new(support, self.probs.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DistributionError> {
        serde_json::from_str(text).map_err(|e| DistributionError::Document(e.to_string()))
    }
}
