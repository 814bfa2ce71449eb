//! Fixtures shared by the benchmarks.

use pcelab_core::distributions::random_tabular_mdp;
use pcelab_core::mdp::{Policy, RewardNoise, Shape, TabularMdp};
use pcelab_core::omerm::ModelEstimate;
use pcelab_core::pce::CoverMatrix;
use pcelab_core::rng::derive_stream;

pub fn mdp(shape: Shape, seed: u64) -> TabularMdp {
    random_tabular_mdp(shape, RewardNoise::Bernoulli, &mut derive_stream(seed, 0))
}

/// Optimistic estimates with zero bonus, one per random MDP.
pub fn estimates(shape: Shape, count: usize) -> Vec<ModelEstimate> {
    (0..count as u64)
        .map(|i| ModelEstimate::from_mdp(&mdp(shape, i)))
        .collect()
}

/// Cover matrix of `n` tasks drawn from `m` clusters of equal values.
pub fn clustered_cover(n: usize, m: usize) -> CoverMatrix {
    let values: Vec<f64> = (0..n * n)
        .map(|c| if (c / n) % m == (c % n) % m { 1.0 } else { 0.0 })
        .collect();
    CoverMatrix::from_values(n, &values, 0.1)
}

pub fn uniform_policy(shape: Shape) -> Policy {
    Policy::uniform(shape)
}
