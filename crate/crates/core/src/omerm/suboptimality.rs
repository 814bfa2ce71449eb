use super::improve::exhaustive_argmax;
use super::model::ModelEstimate;
use super::OmermError;
use crate::distributions::MdpDistribution;
use crate::mdp::{exact_value, Policy};

/// Largest `A^(S H)` accepted by the measurement utilities.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// `E_{M~D} V^pi_M(s1)` with exact values.
pub fn expected_value(dist: &MdpDistribution, policy: &Policy) -> Result<f64, OmermError> {
    let mut total = 0.0;
    for (mdp, p) in dist.support().iter().zip(dist.probs()) {
        if *p > 0.0 {
            total += p * exact_value(mdp, policy)?.v(0, mdp.initial_state());
        }
    }
    Ok(total)
}

/// `pi*(D)`, the deterministic policy maximizing the expected value, and its
/// value. Ties go to the lexicographically smallest action table.
pub fn distribution_optimum(dist: &MdpDistribution) -> Result<(Policy, f64), OmermError> {
    let shape = dist.shape();
    if shape.deterministic_policy_count() > ENUMERATION_CAP {
        return Err(OmermError::ExhaustiveTooLarge {
            policies: shape.deterministic_policy_count(),
            cap: ENUMERATION_CAP,
        });
    }
    let (estimates, weights): (Vec<_>, Vec<_>) = dist
        .support()
        .iter()
        .zip(dist.probs())
        .filter(|(_, p)| **p > 0.0)
        .map(|(m, p)| (ModelEstimate::from_mdp(m), *p))
        .unzip();
    let (actions, value) = exhaustive_argmax(&estimates, Some(&weights), false);
    Ok((Policy::deterministic(shape, &actions)?, value))
}

/// `E_{M~D}[V^{pi*(D)} - V^pi]`
pub fn expected_suboptimality(dist: &MdpDistribution, policy: &Policy) -> Result<f64, OmermError> {
    let (_, best) = distribution_optimum(dist)?;
    Ok(best - expected_value(dist, policy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{gen_proposition1_instance, gen_random_tabular};
    use crate::mdp::{optimal_policy, RewardNoise, Shape, TabularMdp};
    use crate::rng::derive_stream;
    use proptest::prelude::*;

    #[test]
    fn proposition1_arms_tie() {
        let d = gen_proposition1_instance(3).unwrap();
        let (pi, v) = distribution_optimum(&d).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(pi.as_deterministic(), Some(vec![0]));
        let a1 = Policy::constant(d.shape(), 1).unwrap();
        assert!(expected_suboptimality(&d, &a1).unwrap().abs() < 1e-12);
        assert_eq!(expected_suboptimality(&d, &pi).unwrap(), 0.0);
    }

    #[test]
    fn single_task_gap_is_instance_gap() {
        let d = gen_random_tabular(Shape::new(3, 2, 3), 1, &mut derive_stream(8, 0)).unwrap();
        let m: &TabularMdp = d.member(0);
        let pi = Policy::uniform(m.shape());
        let (_, opt) = optimal_policy(m);
        let gap = opt.v(0, 0) - exact_value(m, &pi).unwrap().v(0, 0);
        assert!((expected_suboptimality(&d, &pi).unwrap() - gap).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let shape = Shape::new(7, 4, 2);
        let m = TabularMdp::new(
            shape,
            0,
            (0..shape.num_sa())
                .flat_map(|_| {
                    let mut row = vec![0.0; 7];
                    row[0] = 1.0;
                    row
                })
                .collect(),
            vec![0.0; shape.num_sa()],
            RewardNoise::Deterministic,
        )
        .unwrap();
        let d = MdpDistribution::uniform(vec![m]).unwrap();
        assert!(distribution_optimum(&d).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Agrees with a plain loop over every deterministic policy.
        #[test]
        fn optimum_matches_enumeration(seed in 0u64..100_000) {
            let shape = Shape::new(2, 2, 3);
            let mut rng = derive_stream(seed, 0);
            let d = gen_random_tabular(shape, 3, &mut rng).unwrap();
            let d = d.with_probs(vec![0.5, 0.3, 0.2]).unwrap();
            let (_, v) = distribution_optimum(&d).unwrap();
            let mut best = f64::NEG_INFINITY;
            for code in 0..(1usize << shape.num_hs()) {
                let acts: Vec<usize> = (0..shape.num_hs()).map(|i| code >> i & 1).collect();
                let pi = Policy::deterministic(shape, &acts).unwrap();
                best = best.max(expected_value(&d, &pi).unwrap());
            }
            prop_assert!((v - best).abs() < 1e-12);
            // Stochastic policies never beat the deterministic optimum.
            let u = Policy::uniform(shape);
            prop_assert!(expected_value(&d, &u).unwrap() <= v + 1e-12);
        }
    }
}
