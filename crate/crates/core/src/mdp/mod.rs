//! Tabular episodic MDPs, tabular policies, exact dynamic programming and
//! episode simulation.
//!
//! Steps are 0-based internally (`h = 0..H`); user-facing documents and
//! reports follow the same convention.

mod document;
pub(crate) mod dp;
mod policy;
pub(crate) mod simulate;

pub use document::{MdpDocument, NoiseDocument, PolicyDocument};
pub use dp::{exact_value, optimal_policy, ValueTable};
pub use policy::{policy_distance, Policy};
pub use simulate::{simulate_episode, Step, Trajectory};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-9;

/// Rows off by more than rounding noise but within [`PROB_TOL`] get rescaled.
/// Rescaling is idempotent, so documents round-trip exactly.
pub(crate) fn needs_renormalizing(sum: f64) -> bool {
    let err = (sum - 1.0).abs();
    err > 1e-12 && err <= PROB_TOL
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("wrong buffer length for {what}: expected {expected}, got {found}")]
    BufferLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("state, action and horizon counts must all be positive")]
    EmptyShape,
    #[error("initial state {state} out of range for {states} states")]
    InitialState { state: usize, states: usize },
    #[error("invalid policy at step {step}, state {state}: {reason}")]
    InvalidPolicy {
        step: usize,
        state: usize,
        reason: String,
    },
    #[error("invalid MDP:\n{0}")]
    Invalid(ValidationReport),
    #[error("malformed document: {0}")]
    Document(String),
}

/// `(S, A, H)` shared by MDPs and the policies run on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Self {
        Self {
            states,
            actions,
            horizon,
        }
    }

    /// Flat index of `(h, s, a)`.
    #[inline]
    pub fn sa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    /// Flat index of `(h, s)`.
    #[inline]
    pub fn hs(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }

    pub fn num_sa(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    pub fn num_hs(&self) -> usize {
        self.horizon * self.states
    }

    /// Number of deterministic policies, `A^(S*H)`, saturating at `u128::MAX`.
    pub fn deterministic_policy_count(&self) -> u128 {
        let mut n: u128 = 1;
        for _ in 0..self.num_hs() {
            n = n.saturating_mul(self.actions as u128);
        }
        n
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(S={}, A={}, H={})",
            self.states, self.actions, self.horizon
        )
    }
}

/// Reward noise around the mean reward of each `(h, s, a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardNoise {
    Deterministic,
    Gaussian { sigma: f64 },
    Bernoulli,
}

/// A finite-horizon tabular MDP with a fixed initial state.
///
/// Transitions are stored densely as `P[h][s][a][s']` and mean rewards as
/// `r[h][s][a]`, both flattened in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    shape: Shape,
    initial_state: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    noise: RewardNoise,
}

impl TabularMdp {
    /// Builds an MDP from flat buffers.
    ///
    /// Only buffer sizes and the initial state are checked here. Transition
    /// rows whose sum is within [`PROB_TOL`] of one are renormalized; every
    /// other invariant is left to [`validate_mdp`].
    pub fn new(
        shape: Shape,
        initial_state: usize,
        mut transitions: Vec<f64>,
        rewards: Vec<f64>,
        noise: RewardNoise,
    ) -> Result<Self, MdpError> {
        if shape.states == 0 || shape.actions == 0 || shape.horizon == 0 {
            return Err(MdpError::EmptyShape);
        }
        if initial_state >= shape.states {
            return Err(MdpError::InitialState {
                state: initial_state,
                states: shape.states,
            });
        }
        let n_sa = shape.num_sa();
        if transitions.len() != n_sa * shape.states {
            return Err(MdpError::BufferLength {
                what: "transitions",
                expected: n_sa * shape.states,
                found: transitions.len(),
            });
        }
        if rewards.len() != n_sa {
            return Err(MdpError::BufferLength {
                what: "rewards",
                expected: n_sa,
                found: rewards.len(),
            });
        }
        for row in transitions.chunks_exact_mut(shape.states) {
            let sum: f64 = row.iter().sum();
            if needs_renormalizing(sum) && row.iter().all(|p| *p >= 0.0) {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        Ok(Self {
            shape,
            initial_state,
            transitions,
            rewards,
            noise,
        })
    }

    /// Like [`TabularMdp::new`], but rejects MDPs that fail validation.
    pub fn validated(
        shape: Shape,
        initial_state: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        noise: RewardNoise,
    ) -> Result<Self, MdpError> {
        let mdp = Self::new(shape, initial_state, transitions, rewards, noise)?;
        let report = validate_mdp(&mdp);
        if report.is_valid() {
            Ok(mdp)
        } else {
            Err(MdpError::Invalid(report))
        }
    }

    /// One-state, one-step MDP whose actions are bandit arms.
    pub fn bandit(means: &[f64], noise: RewardNoise) -> Result<Self, MdpError> {
        let shape = Shape::new(1, means.len(), 1);
        Self::validated(shape, 0, vec![1.0; means.len()], means.to_vec(), noise)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn noise(&self) -> RewardNoise {
        self.noise
    }

    /// `P[h][s][a][.]`
    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.shape.sa(h, s, a) * self.shape.states;
        &self.transitions[start..start + self.shape.states]
    }

    /// `r[h][s][a]`
    #[inline]
    pub fn mean_reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.shape.sa(h, s, a)]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Maximum total mean reward over positive-probability trajectories.
    pub fn reward_path_bound(&self) -> f64 {
        let Shape {
            states,
            actions,
            horizon,
        } = self.shape;
        let mut next = vec![0.0; states];
        let mut cur = vec![0.0; states];
        for h in (0..horizon).rev() {
            for s in 0..states {
                let mut best = f64::NEG_INFINITY;
                for a in 0..actions {
                    let row = self.transition_row(h, s, a);
                    let tail = row
                        .iter()
                        .zip(&next)
                        .filter(|(p, _)| **p > 0.0)
                        .map(|(_, u)| *u)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let tail = if tail.is_finite() { tail } else { 0.0 };
                    best = best.max(self.mean_reward(h, s, a) + tail);
                }
                cur[s] = best;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        next[self.initial_state]
    }

    /// States reachable with positive probability at each step.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        let Shape {
            states,
            actions,
            horizon,
        } = self.shape;
        let mut out = vec![vec![false; states]; horizon];
        out[0][self.initial_state] = true;
        for h in 0..horizon.saturating_sub(1) {
            for s in 0..states {
                if !out[h][s] {
                    continue;
                }
                for a in 0..actions {
                    for (s2, p) in self.transition_row(h, s, a).iter().enumerate() {
                        if *p > 0.0 {
                            out[h + 1][s2] = true;
                        }
                    }
                }
            }
        }
        out
    }
}

/// One failed invariant, located at `(h, s, a)` where that applies.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite {
        h: usize,
        s: usize,
        a: usize,
    },
    NegativeProbability {
        h: usize,
        s: usize,
        a: usize,
        next: usize,
    },
    TransitionSum {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },
    NegativeReward {
        h: usize,
        s: usize,
        a: usize,
        reward: f64,
    },
    BernoulliRange {
        h: usize,
        s: usize,
        a: usize,
        reward: f64,
    },
    TotalRewardBound {
        bound: f64,
    },
    NoiseScale {
        sigma: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { h, s, a } => {
                write!(f, "non-finite entry at (h={h}, s={s}, a={a})")
            }
            Violation::NegativeProbability { h, s, a, next } => write!(
                f,
                "negative transition probability at (h={h}, s={s}, a={a}) -> {next}"
            ),
            Violation::TransitionSum { h, s, a, sum } => {
                write!(f, "transition row at (h={h}, s={s}, a={a}) sums to {sum}")
            }
            Violation::NegativeReward { h, s, a, reward } => {
                write!(f, "negative mean reward {reward} at (h={h}, s={s}, a={a})")
            }
            Violation::BernoulliRange { h, s, a, reward } => write!(
                f,
                "Bernoulli mean {reward} outside [0, 1] at (h={h}, s={s}, a={a})"
            ),
            Violation::TotalRewardBound { bound } => write!(
                f,
                "total mean reward along some trajectory reaches {bound} > 1"
            ),
            Violation::NoiseScale { sigma } => {
                write!(f, "Gaussian noise scale {sigma} must be finite and >= 0")
            }
        }
    }
}

/// Outcome of [`validate_mdp`]; empty means valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks every model invariant and reports each violation found.
pub fn validate_mdp(mdp: &TabularMdp) -> ValidationReport {
    let Shape {
        states,
        actions,
        horizon,
    } = mdp.shape;
    let mut violations = Vec::new();
    let mut finite = true;
    for h in 0..horizon {
        for s in 0..states {
            for a in 0..actions {
                let row = mdp.transition_row(h, s, a);
                let r = mdp.mean_reward(h, s, a);
                if !r.is_finite() || row.iter().any(|p| !p.is_finite()) {
                    violations.push(Violation::NonFinite { h, s, a });
                    finite = false;
                    continue;
                }
                for (next, p) in row.iter().enumerate() {
                    if *p < 0.0 {
                        violations.push(Violation::NegativeProbability { h, s, a, next });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    violations.push(Violation::TransitionSum { h, s, a, sum });
                }
                if r < 0.0 {
                    violations.push(Violation::NegativeReward { h, s, a, reward: r });
                }
                if mdp.noise == RewardNoise::Bernoulli && !(0.0..=1.0).contains(&r) {
                    violations.push(Violation::BernoulliRange { h, s, a, reward: r });
                }
            }
        }
    }
    if let RewardNoise::Gaussian { sigma } = mdp.noise {
        if !sigma.is_finite() || sigma < 0.0 {
            violations.push(Violation::NoiseScale { sigma });
        }
    }
    if finite {
        let bound = mdp.reward_path_bound();
        if bound > 1.0 + PROB_TOL {
            violations.push(Violation::TotalRewardBound { bound });
        }
    }
    ValidationReport { violations }
}
