use super::{needs_renormalizing, MdpError, Shape, PROB_TOL};

/// A non-stationary stochastic policy `pi[h][s]`, a distribution over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    shape: Shape,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from flat `[h][s][a]` probabilities.
    pub fn from_probs(shape: Shape, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != shape.num_sa() {
            return Err(MdpError::BufferLength {
                what: "policy",
                expected: shape.num_sa(),
                found: probs.len(),
            });
        }
        let mut policy = Self { shape, probs };
        for h in 0..shape.horizon {
            for s in 0..shape.states {
                let row = policy.row_mut(h, s);
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(MdpError::InvalidPolicy {
                        step: h,
                        state: s,
                        reason: "negative or non-finite probability".into(),
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(MdpError::InvalidPolicy {
                        step: h,
                        state: s,
                        reason: format!("probabilities sum to {sum}"),
                    });
                }
                if needs_renormalizing(sum) {
                    row.iter_mut().for_each(|p| *p /= sum);
                }
            }
        }
        Ok(policy)
    }

    /// Deterministic policy from one action per `(h, s)`, flattened `[h][s]`.
    pub fn deterministic(shape: Shape, actions: &[usize]) -> Result<Self, MdpError> {
        if actions.len() != shape.num_hs() {
            return Err(MdpError::BufferLength {
                what: "deterministic policy",
                expected: shape.num_hs(),
                found: actions.len(),
            });
        }
        let mut probs = vec![0.0; shape.num_sa()];
        for (hs, &a) in actions.iter().enumerate() {
            if a >= shape.actions {
                return Err(MdpError::InvalidPolicy {
                    step: hs / shape.states,
                    state: hs % shape.states,
                    reason: format!("action {a} out of range"),
                });
            }
            probs[hs * shape.actions + a] = 1.0;
        }
        Ok(Self { shape, probs })
    }

    /// Plays `action` at every step and state.
    pub fn constant(shape: Shape, action: usize) -> Result<Self, MdpError> {
        Self::deterministic(shape, &vec![action; shape.num_hs()])
    }

    pub fn uniform(shape: Shape) -> Self {
        let p = 1.0 / shape.actions as f64;
        Self {
            shape,
            probs: vec![p; shape.num_sa()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let start = self.shape.hs(h, s) * self.shape.actions;
        &self.probs[start..start + self.shape.actions]
    }

    fn row_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let start = self.shape.hs(h, s) * self.shape.actions;
        &mut self.probs[start..start + self.shape.actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Most likely action at `(h, s)`, lowest index on ties.
    pub fn greedy_action(&self, h: usize, s: usize) -> usize {
        let row = self.row(h, s);
        let mut best = 0;
        for (a, p) in row.iter().enumerate() {
            if *p > row[best] {
                best = a;
            }
        }
        best
    }

    /// `Some(actions)` if every row is a point mass.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(self.shape.num_hs());
        for h in 0..self.shape.horizon {
            for s in 0..self.shape.states {
                let row = self.row(h, s);
                let a = row.iter().position(|p| *p == 1.0)?;
                out.push(a);
            }
        }
        Some(out)
    }

    pub(crate) fn check_shape(&self, expected: Shape) -> Result<(), MdpError> {
        if self.shape != expected {
            return Err(MdpError::ShapeMismatch {
                expected,
                found: self.shape,
            });
        }
        Ok(())
    }
}

/// `max_{h,s} || p1[h][s] - p2[h][s] ||_1`, in `[0, 2]`.
pub fn policy_distance(p1: &Policy, p2: &Policy) -> Result<f64, MdpError> {
    p2.check_shape(p1.shape)?;
    let a = p1.shape.actions;
    Ok(p1
        .probs
        .chunks_exact(a)
        .zip(p2.probs.chunks_exact(a))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum::<f64>())
        .fold(0.0, f64::max))
}
