use super::{MdpError, Policy, Shape, TabularMdp};

/// `V[h][s]` for `h = 0..=H` (with `V[H] = 0`) and `Q[h][s][a]` for `h < H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    shape: Shape,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    pub(crate) fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            v: vec![0.0; (shape.horizon + 1) * shape.states],
            q: vec![0.0; shape.num_sa()],
        }
    }

    pub(crate) fn from_parts(shape: Shape, v: Vec<f64>, q: Vec<f64>) -> Self {
        debug_assert_eq!(v.len(), (shape.horizon + 1) * shape.states);
        debug_assert_eq!(q.len(), shape.num_sa());
        Self { shape, v, q }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.shape.states + s]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.shape.sa(h, s, a)]
    }

    /// `V[h][.]`
    pub fn v_row(&self, h: usize) -> &[f64] {
        &self.v[h * self.shape.states..(h + 1) * self.shape.states]
    }

    /// `Q[h][s][.]`
    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.sa(h, s, 0);
        &self.q[start..start + self.shape.actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn q_values(&self) -> &[f64] {
        &self.q
    }
}

#[inline]
fn backup(mdp: &TabularMdp, h: usize, s: usize, a: usize, next_v: &[f64]) -> f64 {
    let row = mdp.transition_row(h, s, a);
    let mut acc = mdp.mean_reward(h, s, a);
    for (p, v) in row.iter().zip(next_v) {
        acc += p * v;
    }
    acc
}

/// Exact policy evaluation by backward induction.
pub fn exact_value(mdp: &TabularMdp, policy: &Policy) -> Result<ValueTable, MdpError> {
    let shape = mdp.shape();
    policy.check_shape(shape)?;
    let mut table = ValueTable::zeros(shape);
    let ns = shape.states;
    for h in (0..shape.horizon).rev() {
        let (head, tail) = table.v.split_at_mut((h + 1) * ns);
        let next_v = &tail[..ns];
        let cur_v = &mut head[h * ns..];
        for s in 0..ns {
            let pi = policy.row(h, s);
            let mut v = 0.0;
            for a in 0..shape.actions {
                let q = backup(mdp, h, s, a, next_v);
                table.q[shape.sa(h, s, a)] = q;
                v += pi[a] * q;
            }
            cur_v[s] = v;
        }
    }
    Ok(table)
}

/// Optimal values by backward induction, greedy on `Q*` with ties broken
/// toward the lowest action index.
pub fn optimal_policy(mdp: &TabularMdp) -> (Policy, ValueTable) {
    let shape = mdp.shape();
    let mut table = ValueTable::zeros(shape);
    let mut actions = vec![0usize; shape.num_hs()];
    let ns = shape.states;
    for h in (0..shape.horizon).rev() {
        let (head, tail) = table.v.split_at_mut((h + 1) * ns);
        let next_v = &tail[..ns];
        let cur_v = &mut head[h * ns..];
        for s in 0..ns {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..shape.actions {
                let q = backup(mdp, h, s, a, next_v);
                table.q[shape.sa(h, s, a)] = q;
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            actions[shape.hs(h, s)] = best_a;
            cur_v[s] = best_q;
        }
    }
    let policy = Policy::deterministic(shape, &actions).expect("greedy actions are in range");
    (policy, table)
}


#[cfg(test)]
mod tests {
    use super::fixtures::chain;
    use super::*;
    use crate::mdp::RewardNoise;

    #[test]
    fn one_step_value() {
        let mdp = TabularMdp::bandit(&[0.7], RewardNoise::Deterministic).unwrap();
        let v = exact_value(&mdp, &Policy::uniform(mdp.shape())).unwrap();
        assert_eq!(v.v(0, 0), 0.7);
        assert_eq!(v.v(1, 0), 0.0);
    }

    #[test]
    fn chain_values() {
        let mdp = chain();
        let go = Policy::deterministic(mdp.shape(), &[1, 0, 0, 0]).unwrap();
        let stay = Policy::deterministic(mdp.shape(), &[0, 0, 0, 0]).unwrap();
        assert!((exact_value(&mdp, &go).unwrap().v(0, 0) - 0.7).abs() < 1e-15);
        assert!((exact_value(&mdp, &stay).unwrap().v(0, 0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn value_is_policy_average_of_q() {
        let mdp = chain();
        let pi = Policy::uniform(mdp.shape());
        let t = exact_value(&mdp, &pi).unwrap();
        for h in 0..2 {
            for s in 0..2 {
                let avg: f64 = pi
                    .row(h, s)
                    .iter()
                    .zip(t.q_row(h, s))
                    .map(|(p, q)| p * q)
                    .sum();
                assert!((avg - t.v(h, s)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn chain_optimum_matches_enumeration() {
        let mdp = chain();
        let (pi, table) = optimal_policy(&mdp);
        assert_eq!(pi.greedy_action(0, 0), 1);
        let mut best = f64::NEG_INFINITY;
        for code in 0..16usize {
            let acts: Vec<usize> = (0..4).map(|i| (code >> i) & 1).collect();
            let p = Policy::deterministic(mdp.shape(), &acts).unwrap();
            best = best.max(exact_value(&mdp, &p).unwrap().v(0, 0));
        }
        assert!((table.v(0, 0) - best).abs() < 1e-15);
        assert!((best - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let mdp = TabularMdp::bandit(&[0.4, 0.4, 0.4], RewardNoise::Deterministic).unwrap();
        let (pi, _) = optimal_policy(&mdp);
        assert_eq!(pi.as_deterministic(), Some(vec![0]));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mdp = chain();
        let pi = Policy::uniform(Shape::new(2, 3, 2));
        assert!(matches!(
            exact_value(&mdp, &pi),
            Err(MdpError::ShapeMismatch { .. })
        ));
    }
}
