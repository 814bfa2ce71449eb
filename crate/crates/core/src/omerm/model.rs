use crate::mdp::{Policy, Shape, TabularMdp, Trajectory, ValueTable};

/// Size parameters entering the exploration bonus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusSizes {
    pub states: usize,
    pub actions: usize,
    pub tasks: usize,
    pub horizon: usize,
    pub iterations: u64,
}

impl BonusSizes {
    pub fn new(shape: Shape, tasks: usize, iterations: u64) -> Self {
        Self {
            states: shape.states,
            actions: shape.actions,
            tasks,
            horizon: shape.horizon,
            iterations,
        }
    }
}

/// `sqrt(8 S ln(8 S A N H K) / max(1, count))`
pub fn bonus(count: u64, sizes: &BonusSizes) -> f64 {
    let s = sizes.states as f64;
    let inner = 8.0
        * s
        * sizes.actions as f64
        * sizes.tasks as f64
        * sizes.horizon as f64
        * sizes.iterations as f64;
    (8.0 * s * inner.ln() / count.max(1) as f64).sqrt()
}

/// Visit counts and reward sums for one task.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    shape: Shape,
    initial_state: usize,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    reward_sums: Vec<f64>,
    episodes: u64,
}

impl EmpiricalModel {
    pub fn new(shape: Shape, initial_state: usize) -> Self {
        Self {
            shape,
            initial_state,
            visits: vec![0; shape.num_sa()],
            transitions: vec![0; shape.num_sa() * shape.states],
            reward_sums: vec![0.0; shape.num_sa()],
            episodes: 0,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.shape.sa(h, s, a)]
    }

    pub fn transition_count(&self, h: usize, s: usize, a: usize, next: usize) -> u64 {
        self.transitions[self.shape.sa(h, s, a) * self.shape.states + next]
    }

    pub fn observe(&mut self, trajectory: &Trajectory) {
        let ns = self.shape.states;
        for (h, step) in trajectory.steps.iter().enumerate() {
            let idx = self.shape.sa(h, step.state, step.action);
            self.visits[idx] += 1;
            self.reward_sums[idx] += step.reward;
            self.transitions[idx * ns + trajectory.next_state(h)] += 1;
        }
        self.episodes += 1;
    }

    /// Transition counts sum to visit counts, and every step saw exactly one
    /// visit per episode.
    pub fn is_consistent(&self) -> bool {
        let ns = self.shape.states;
        let rows_ok = self
            .visits
            .iter()
            .enumerate()
            .all(|(i, n)| self.transitions[i * ns..(i + 1) * ns].iter().sum::<u64>() == *n);
        let per_step = ns * self.shape.actions;
        let steps_ok = self
            .visits
            .chunks_exact(per_step)
            .all(|c| c.iter().sum::<u64>() == self.episodes);
        rows_ok && steps_ok
    }

    /// `P_hat`, `R_hat` and bonuses from the current counts.
    pub fn estimate(&self, sizes: &BonusSizes) -> ModelEstimate {
        let ns = self.shape.states;
        let mut p_hat = vec![0.0; self.transitions.len()];
        let mut r_hat = vec![0.0; self.visits.len()];
        let mut bonuses = vec![0.0; self.visits.len()];
        for (i, &n) in self.visits.iter().enumerate() {
            let denom = n.max(1) as f64;
            for s2 in 0..ns {
                p_hat[i * ns + s2] = self.transitions[i * ns + s2] as f64 / denom;
            }
            r_hat[i] = self.reward_sums[i] / denom;
            bonuses[i] = bonus(n, sizes);
        }
        ModelEstimate {
            shape: self.shape,
            initial_state: self.initial_state,
            p_hat,
            r_hat,
            bonus: bonuses,
        }
    }
}

/// Point estimates plus per-`(h, s, a)` bonuses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimate {
    shape: Shape,
    initial_state: usize,
    p_hat: Vec<f64>,
    r_hat: Vec<f64>,
    bonus: Vec<f64>,
}

impl ModelEstimate {
    /// The true model with zero bonus.
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        Self {
            shape: mdp.shape(),
            initial_state: mdp.initial_state(),
            p_hat: mdp.transitions().to_vec(),
            r_hat: mdp.rewards().to_vec(),
            bonus: vec![0.0; mdp.shape().num_sa()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub fn p_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.shape.sa(h, s, a) * self.shape.states;
        &self.p_hat[start..start + self.shape.states]
    }

    pub fn r_hat(&self, h: usize, s: usize, a: usize) -> f64 {
        self.r_hat[self.shape.sa(h, s, a)]
    }

    pub fn bonus(&self, h: usize, s: usize, a: usize) -> f64 {
        self.bonus[self.shape.sa(h, s, a)]
    }

    /// `R_hat + b + P_hat . next_v`, clipped at one when `clip` is set.
    #[inline]
    pub(crate) fn backup(&self, h: usize, s: usize, a: usize, next_v: &[f64], clip: bool) -> f64 {
        let idx = self.shape.sa(h, s, a);
        let row = &self.p_hat[idx * self.shape.states..(idx + 1) * self.shape.states];
        let mut acc = self.r_hat[idx] + self.bonus[idx];
        for (p, v) in row.iter().zip(next_v) {
            acc += p * v;
        }
        if clip {
            acc.min(1.0)
        } else {
            acc
        }
    }

    /// `(h, s)` cells reachable from `s1` through positive `P_hat` entries.
    pub fn reachable(&self) -> Vec<Vec<bool>> {
        reachable_union(std::slice::from_ref(self))
    }
}

/// Cells reachable under any of the estimates.
pub(crate) fn reachable_union(estimates: &[ModelEstimate]) -> Vec<Vec<bool>> {
    let shape = estimates[0].shape;
    let mut out = vec![vec![false; shape.states]; shape.horizon];
    for est in estimates {
        out[0][est.initial_state] = true;
    }
    for h in 0..shape.horizon.saturating_sub(1) {
        for s in 0..shape.states {
            if !out[h][s] {
                continue;
            }
            for est in estimates {
                for a in 0..shape.actions {
                    for (s2, p) in est.p_row(h, s, a).iter().enumerate() {
                        if *p > 0.0 {
                            out[h + 1][s2] = true;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Optimistic values: every entry lies in `[0, 1]`.
pub type OptimisticValueTable = ValueTable;

/// `Q_hat = min{1, R_hat + b + P_hat V_hat}`, `V_hat = pi . Q_hat`.
pub fn optimistic_eval(estimate: &ModelEstimate, policy: &Policy) -> OptimisticValueTable {
    evaluate(estimate, policy, true)
}

pub(crate) fn evaluate(estimate: &ModelEstimate, policy: &Policy, clip: bool) -> ValueTable {
    let shape = estimate.shape;
    debug_assert_eq!(policy.shape(), shape);
    let ns = shape.states;
    let mut v = vec![0.0; (shape.horizon + 1) * ns];
    let mut q = vec![0.0; shape.num_sa()];
    for h in (0..shape.horizon).rev() {
        let (head, tail) = v.split_at_mut((h + 1) * ns);
        let next_v = &tail[..ns];
        for s in 0..ns {
            let pi = policy.row(h, s);
            let mut acc = 0.0;
            for a in 0..shape.actions {
                let qa = estimate.backup(h, s, a, next_v, clip);
                q[shape.sa(h, s, a)] = qa;
                acc += pi[a] * qa;
            }
            head[h * ns + s] = acc;
        }
    }
    ValueTable::from_parts(shape, v, q)
}

/// Greedy backward induction on the clipped optimistic `Q_hat`
/// (lowest action on ties).
pub fn optimistic_greedy(estimate: &ModelEstimate) -> Policy {
    let shape = estimate.shape;
    let ns = shape.states;
    let mut next = vec![0.0; ns];
    let mut cur = vec![0.0; ns];
    let mut actions = vec![0usize; shape.num_hs()];
    for h in (0..shape.horizon).rev() {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..shape.actions {
                let q = estimate.backup(h, s, a, &next, true);
                if q > best {
                    best = q;
                    actions[shape.hs(h, s)] = a;
                }
            }
            cur[s] = best;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Policy::deterministic(shape, &actions).expect("greedy actions are in range")
}

/// Single-task optimistic value iteration: plan greedily on the optimistic
/// model, run one episode, update counts.
#[derive(Debug, Clone)]
pub struct OptimisticLearner {
    model: EmpiricalModel,
    sizes: BonusSizes,
}

impl OptimisticLearner {
    /// `horizon_episodes` sizes the bonus (`K` with `N = 1`).
    pub fn new(shape: Shape, initial_state: usize, horizon_episodes: u64) -> Self {
        Self {
            model: EmpiricalModel::new(shape, initial_state),
            sizes: BonusSizes::new(shape, 1, horizon_episodes.max(1)),
        }
    }

    pub fn policy(&self) -> Policy {
        optimistic_greedy(&self.model.estimate(&self.sizes))
    }

    pub fn observe(&mut self, trajectory: &Trajectory) {
        self.model.observe(trajectory);
    }

    pub fn model(&self) -> &EmpiricalModel {
        &self.model
    }
}
