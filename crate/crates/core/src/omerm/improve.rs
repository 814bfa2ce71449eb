use serde::{Deserialize, Serialize};

use super::model::{reachable_union, ModelEstimate};
use super::OmermError;
use crate::mdp::{Policy, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImproveMode {
    /// Exact argmax over deterministic policies.
    Exhaustive,
    /// Cyclic single-cell improvement from `h = H` down to `1`.
    #[default]
    CoordinateAscent,
}

/// Largest `A^(S H)` the exhaustive mode accepts.
pub const EXHAUSTIVE_CAP: u128 = 100_000;
pub const MAX_SWEEPS: usize = 50;

/// `(1/N) sum_i V_hat_i(s1)` for a deterministic action table.
pub fn average_value(estimates: &[ModelEstimate], actions: &[usize]) -> f64 {
    let mut scratch = Tables::new(estimates);
    scratch.recompute(estimates, actions, true, estimates[0].shape().horizon);
    scratch.objective(estimates)
}

/// Policy improvement on the average optimistic value.
pub fn improve_policy(
    estimates: &[ModelEstimate],
    prev: &Policy,
    mode: ImproveMode,
) -> Result<Policy, OmermError> {
    if estimates.is_empty() {
        return Err(OmermError::NoTasks);
    }
    let shape = estimates[0].shape();
    let actions = match mode {
        ImproveMode::Exhaustive => {
            if shape.deterministic_policy_count() > EXHAUSTIVE_CAP {
                return Err(OmermError::ExhaustiveTooLarge {
                    policies: shape.deterministic_policy_count(),
                    cap: EXHAUSTIVE_CAP,
                });
            }
            exhaustive_argmax(estimates, None, true).0
        }
        ImproveMode::CoordinateAscent => coordinate_ascent(estimates, prev).0,
    };
    Ok(Policy::deterministic(shape, &actions).expect("actions are in range"))
}

/// Per-model value rows `V[h][s]`, `h = 0..=H`.
struct Tables {
    shape: Shape,
    v: Vec<Vec<f64>>,
}

impl Tables {
    fn new(estimates: &[ModelEstimate]) -> Self {
        let shape = estimates[0].shape();
        Self {
            shape,
            v: vec![vec![0.0; (shape.horizon + 1) * shape.states]; estimates.len()],
        }
    }

    /// Backward pass over steps `upto-1, ..., 0`; rows at `>= upto` are kept.
    fn recompute(
        &mut self,
        estimates: &[ModelEstimate],
        actions: &[usize],
        clip: bool,
        upto: usize,
    ) {
        let ns = self.shape.states;
        for (est, v) in estimates.iter().zip(self.v.iter_mut()) {
            for h in (0..upto).rev() {
                let (head, tail) = v.split_at_mut((h + 1) * ns);
                let next = &tail[..ns];
                for s in 0..ns {
                    head[h * ns + s] = est.backup(h, s, actions[self.shape.hs(h, s)], next, clip);
                }
            }
        }
    }

    fn objective(&self, estimates: &[ModelEstimate]) -> f64 {
        let sum: f64 = estimates
            .iter()
            .zip(&self.v)
            .map(|(est, v)| v[est.initial_state()])
            .sum();
        sum / estimates.len() as f64
    }
}

/// Coordinate ascent on the exact average objective.
///
/// Each `(h, s)` cell moves to the action with the highest objective given
/// every other cell; the incumbent is kept on ties. Returns the action table
/// and the objective after each sweep (index 0 is the starting point).
pub fn coordinate_ascent(estimates: &[ModelEstimate], prev: &Policy) -> (Vec<usize>, Vec<f64>) {
    let shape = estimates[0].shape();
    let ns = shape.states;
    let mut actions: Vec<usize> = (0..shape.horizon)
        .flat_map(|h| (0..ns).map(move |s| (h, s)))
        .map(|(h, s)| prev.greedy_action(h, s))
        .collect();
    let mut current = Tables::new(estimates);
    current.recompute(estimates, &actions, true, shape.horizon);
    let mut trace = vec![current.objective(estimates)];
    let mut scratch = Tables::new(estimates);
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for h in (0..shape.horizon).rev() {
            for s in 0..ns {
                let cell = shape.hs(h, s);
                let incumbent = actions[cell];
                let mut best_a = incumbent;
                let mut best_obj = current.objective(estimates);
                for a in 0..shape.actions {
                    if a == incumbent {
                        continue;
                    }
                    actions[cell] = a;
                    for (dst, src) in scratch.v.iter_mut().zip(&current.v) {
                        dst[(h + 1) * ns..].copy_from_slice(&src[(h + 1) * ns..]);
                        dst[h * ns..(h + 1) * ns].copy_from_slice(&src[h * ns..(h + 1) * ns]);
                    }
                    for (est, v) in estimates.iter().zip(scratch.v.iter_mut()) {
                        let (head, tail) = v.split_at_mut((h + 1) * ns);
                        head[h * ns + s] = est.backup(h, s, a, &tail[..ns], true);
                    }
                    scratch.recompute(estimates, &actions, true, h);
                    let obj = scratch.objective(estimates);
                    if obj > best_obj {
                        best_obj = obj;
                        best_a = a;
                    }
                }
                actions[cell] = best_a;
                if best_a != incumbent {
                    changed = true;
                    current.recompute(estimates, &actions, true, h + 1);
                }
            }
        }
        let obj = current.objective(estimates);
        let last = *trace.last().expect("trace starts non-empty");
        assert!(
            obj >= last,
            "coordinate ascent decreased the objective: {last} -> {obj}"
        );
        trace.push(obj);
        if !changed {
            break;
        }
    }
    (actions, trace)
}

/// Exact maximizer of the average value over deterministic policies.
///
/// Only cells reachable under some estimate are enumerated; the others cannot
/// affect the objective and are set to action 0, which also makes the result
/// the lexicographically smallest maximizer of the flat `[h][s]` table.
///
/// `weights` replaces the uniform average with `sum_i w_i V_i(s1)`.
pub(crate) fn exhaustive_argmax(
    estimates: &[ModelEstimate],
    weights: Option<&[f64]>,
    clip: bool,
) -> (Vec<usize>, f64) {
    let shape = estimates[0].shape();
    let reach = reachable_union(estimates);
    let cells: Vec<Vec<usize>> = reach
        .iter()
        .map(|row| (0..shape.states).filter(|s| row[*s]).collect())
        .collect();
    let mut search = Search {
        shape,
        estimates,
        weights,
        clip,
        cells,
        actions: vec![0; shape.num_hs()],
        values: vec![vec![vec![0.0; shape.states]; estimates.len()]; shape.horizon + 1],
        best: None,
    };
    search.level(shape.horizon);
    search.best.expect("at least one policy")
}

struct Search<'a> {
    shape: Shape,
    estimates: &'a [ModelEstimate],
    weights: Option<&'a [f64]>,
    clip: bool,
    cells: Vec<Vec<usize>>,
    actions: Vec<usize>,
    /// `values[h][model][s]`
    values: Vec<Vec<Vec<f64>>>,
    best: Option<(Vec<usize>, f64)>,
}

impl Search<'_> {
    /// Enumerates step `h - 1` given fixed values at step `h`.
    fn level(&mut self, h: usize) {
        if h == 0 {
            let at_start = |i: usize| self.values[0][i][self.estimates[i].initial_state()];
            let obj = match self.weights {
                Some(w) => w
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * at_start(i))
                    .sum::<f64>(),
                None => {
                    (0..self.estimates.len()).map(at_start).sum::<f64>()
                        / self.estimates.len() as f64
                }
            };
            let better = match &self.best {
                None => true,
                Some((acts, best)) => obj > *best || (obj == *best && self.actions < *acts),
            };
            if better {
                self.best = Some((self.actions.clone(), obj));
            }
            return;
        }
        let step = h - 1;
        let cells = self.cells[step].clone();
        let na = self.shape.actions;
        let mut digits = vec![0usize; cells.len()];
        loop {
            for (&s, &a) in cells.iter().zip(&digits) {
                self.actions[self.shape.hs(step, s)] = a;
            }
            let (lower, upper) = self.values.split_at_mut(h);
            let cur = &mut lower[step];
            let next = &upper[0];
            for (i, est) in self.estimates.iter().enumerate() {
                for (&s, &a) in cells.iter().zip(&digits) {
                    cur[i][s] = est.backup(step, s, a, &next[i], self.clip);
                }
            }
            self.level(step);
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    for &s in &cells {
                        self.actions[self.shape.hs(step, s)] = 0;
                    }
                    return;
                }
                digits[pos] += 1;
                if digits[pos] < na {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }
}
