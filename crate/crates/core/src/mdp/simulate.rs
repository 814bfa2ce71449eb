use rand::Rng;
use rand_distr::StandardNormal;

use super::{MdpError, Policy, RewardNoise, TabularMdp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

/// One episode: exactly `H` steps, plus the state reached after the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub terminal_state: usize,
    pub total_return: f64,
}

impl Trajectory {
    /// State observed after step `h` (the next state of that transition).
    pub fn next_state(&self, h: usize) -> usize {
        self.steps
            .get(h + 1)
            .map(|s| s.state)
            .unwrap_or(self.terminal_state)
    }
}

/// Samples an index from a probability row. Point masses consume no
/// randomness.
#[inline]
pub(crate) fn sample_categorical<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let mut first = usize::MAX;
    for (i, p) in row.iter().enumerate() {
        if *p > 0.0 {
            first = i;
            break;
        }
    }
    debug_assert!(first != usize::MAX, "empty distribution");
    if row[first] >= 1.0 {
        return first;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = first;
    for (i, p) in row.iter().enumerate().skip(first) {
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

#[inline]
pub(crate) fn sample_reward<R: Rng + ?Sized>(noise: RewardNoise, mean: f64, rng: &mut R) -> f64 {
    match noise {
        RewardNoise::Deterministic => mean,
        RewardNoise::Gaussian { sigma } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + sigma * z
        }
        RewardNoise::Bernoulli => {
            if mean <= 0.0 {
                0.0
            } else if mean >= 1.0 {
                1.0
            } else if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Rolls out one episode of `policy` from the initial state.
pub fn simulate_episode<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    rng: &mut R,
) -> Result<Trajectory, MdpError> {
    let shape = mdp.shape();
    policy.check_shape(shape)?;
    let mut steps = Vec::with_capacity(shape.horizon);
    let mut state = mdp.initial_state();
    let mut total = 0.0;
    for h in 0..shape.horizon {
        let action = sample_categorical(policy.row(h, state), rng);
        let reward = sample_reward(mdp.noise(), mdp.mean_reward(h, state, action), rng);
        total += reward;
        steps.push(Step {
            state,
            action,
            reward,
        });
        state = sample_categorical(mdp.transition_row(h, state, action), rng);
    }
    Ok(Trajectory {
        steps,
        terminal_state: state,
        total_return: total,
    })
}
