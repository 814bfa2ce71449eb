//! JSON documents for MDPs and policies.
//!
//! Floats are written in shortest round-trip form, so a document read back
//! reproduces every probability and reward bit for bit.

use serde::{Deserialize, Serialize};

use super::{MdpError, Policy, RewardNoise, Shape, TabularMdp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDocument {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl From<RewardNoise> for NoiseDocument {
    fn from(noise: RewardNoise) -> Self {
        match noise {
            RewardNoise::Deterministic => Self {
                kind: "deterministic".into(),
                sigma: None,
            },
            RewardNoise::Gaussian { sigma } => Self {
                kind: "gaussian".into(),
                sigma: Some(sigma),
            },
            RewardNoise::Bernoulli => Self {
                kind: "bernoulli".into(),
                sigma: None,
            },
        }
    }
}

impl TryFrom<&NoiseDocument> for RewardNoise {
    type Error = MdpError;

    fn try_from(doc: &NoiseDocument) -> Result<Self, MdpError> {
        match doc.kind.to_ascii_lowercase().as_str() {
            "deterministic" => Ok(RewardNoise::Deterministic),
            "gaussian" => Ok(RewardNoise::Gaussian {
                sigma: doc.sigma.unwrap_or(1.0),
            }),
            "bernoulli" => Ok(RewardNoise::Bernoulli),
            other => Err(MdpError::Document(format!("unknown noise kind {other:?}"))),
        }
    }
}

/// `{S, A, H, s1, noise, P[h][s][a][s'], r[h][s][a]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub s1: usize,
    pub noise: NoiseDocument,
    #[serde(rename = "P")]
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "r")]
    pub rewards: Vec<Vec<Vec<f64>>>,
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), MdpError> {
    if expected == found {
        Ok(())
    } else {
        Err(MdpError::BufferLength {
            what,
            expected,
            found,
        })
    }
}

impl From<&TabularMdp> for MdpDocument {
    fn from(mdp: &TabularMdp) -> Self {
        let shape = mdp.shape();
        let transitions = (0..shape.horizon)
            .map(|h| {
                (0..shape.states)
                    .map(|s| {
                        (0..shape.actions)
                            .map(|a| mdp.transition_row(h, s, a).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..shape.horizon)
            .map(|h| {
                (0..shape.states)
                    .map(|s| {
                        (0..shape.actions)
                            .map(|a| mdp.mean_reward(h, s, a))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            states: shape.states,
            actions: shape.actions,
            horizon: shape.horizon,
            s1: mdp.initial_state(),
            noise: mdp.noise().into(),
            transitions,
            rewards,
        }
    }
}

impl MdpDocument {
    /// Rebuilds the MDP. The result is not validated; see
    /// [`super::validate_mdp`].
    pub fn to_mdp(&self) -> Result<TabularMdp, MdpError> {
        let shape = Shape::new(self.states, self.actions, self.horizon);
        check_len("P steps", shape.horizon, self.transitions.len())?;
        check_len("r steps", shape.horizon, self.rewards.len())?;
        let mut p = Vec::with_capacity(shape.num_sa() * shape.states);
        let mut r = Vec::with_capacity(shape.num_sa());
        for (ph, rh) in self.transitions.iter().zip(&self.rewards) {
            check_len("P states", shape.states, ph.len())?;
            check_len("r states", shape.states, rh.len())?;
            for (ps, rs) in ph.iter().zip(rh) {
                check_len("P actions", shape.actions, ps.len())?;
                check_len("r actions", shape.actions, rs.len())?;
                for row in ps {
                    check_len("P next states", shape.states, row.len())?;
                    p.extend_from_slice(row);
                }
                r.extend_from_slice(rs);
            }
        }
        TabularMdp::new(shape, self.s1, p, r, (&self.noise).try_into()?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MdpError> {
        serde_json::from_str(text).map_err(|e| MdpError::Document(e.to_string()))
    }
}

/// `pi[h][s][a]` as nested arrays.
pub type PolicyDocument = Vec<Vec<Vec<f64>>>;

impl Policy {
    pub fn to_document(&self) -> PolicyDocument {
        let shape = self.shape();
        (0..shape.horizon)
            .map(|h| (0..shape.states).map(|s| self.row(h, s).to_vec()).collect())
            .collect()
    }

    pub fn from_document(doc: &PolicyDocument) -> Result<Self, MdpError> {
        let horizon = doc.len();
        let states = doc.first().map_or(0, Vec::len);
        let actions = doc.first().and_then(|h| h.first()).map_or(0, Vec::len);
        if horizon == 0 || states == 0 || actions == 0 {
            return Err(MdpError::EmptyShape);
        }
        let shape = Shape::new(states, actions, horizon);
        let mut probs = Vec::with_capacity(shape.num_sa());
        for h in doc {
            check_len("policy states", states, h.len())?;
            for row in h {
                check_len("policy actions", actions, row.len())?;
                probs.extend_from_slice(row);
            }
        }
        Policy::from_probs(shape, probs)
    }
}
