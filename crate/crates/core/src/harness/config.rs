use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::bandits::{reference_ratio_support, BanditInstance};
use crate::distributions::{
    gen_exponential_tail, gen_proposition1_instance, gen_random_tabular, gen_theorem3_instance,
    random_tabular_mdp, DistributionDocument, MdpDistribution,
};
use crate::mdp::{MdpDocument, RewardNoise, Shape, TabularMdp};
use crate::omerm::ImproveMode;
use crate::oracles::OracleSettings;
use crate::rng::{derive_stream, mix_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Pce,
    Omerm,
    BanditUcb,
    BanditRatio,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pce => "pce",
            Self::Omerm => "omerm",
            Self::BanditUcb => "bandit-ucb",
            Self::BanditRatio => "bandit-ratio",
            Self::Validate => "validate",
        }
    }
}

/// Where the task distribution comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Proposition1 {
        m: usize,
    },
    Theorem3 {
        m: usize,
        gap: f64,
    },
    RandomTabular {
        states: usize,
        actions: usize,
        horizon: usize,
        count: usize,
        #[serde(default)]
        seed: u64,
    },
    /// `count` random tabular MDPs weighted by `exp(-lambda i)`.
    ExponentialTail {
        states: usize,
        actions: usize,
        horizon: usize,
        count: usize,
        lambda: f64,
        #[serde(default)]
        seed: u64,
    },
    /// A single Gaussian bandit.
    Bandit {
        means: Vec<f64>,
    },
    BanditReference {
        arms: usize,
        head_mass: f64,
    },
    /// An MDP document or a distribution document, relative to the config.
    File {
        path: String,
    },
}

impl InstanceSpec {
    pub fn build(&self, base_dir: &Path) -> Result<MdpDistribution, HarnessError> {
        let cfg = |e: &dyn std::fmt::Display| HarnessError::Config(format!("instance: {e}"));
        match self {
            Self::Proposition1 { m } => gen_proposition1_instance(*m).map_err(|e| cfg(&e)),
            Self::Theorem3 { m, gap } => gen_theorem3_instance(*m, *gap).map_err(|e| cfg(&e)),
            Self::RandomTabular {
                states,
                actions,
                horizon,
                count,
                seed,
            } => gen_random_tabular(
                Shape::new(*states, *actions, *horizon),
                *count,
                &mut derive_stream(*seed, 0),
            )
            .map_err(|e| cfg(&e)),
            Self::ExponentialTail {
                states,
                actions,
                horizon,
                count,
                lambda,
                seed,
            } => {
                let shape = Shape::new(*states, *actions, *horizon);
                if shape.states == 0 || shape.actions == 0 || shape.horizon == 0 {
                    return Err(cfg(&"sizes must be >= 1"));
                }
                let mut rng = derive_stream(*seed, 0);
                let family = (0..*count)
                    .map(|_| random_tabular_mdp(shape, RewardNoise::Bernoulli, &mut rng))
                    .collect();
                gen_exponential_tail(family, *lambda).map_err(|e| cfg(&e))
            }
            Self::Bandit { means } => {
                let b = BanditInstance::new(means.clone()).map_err(|e| cfg(&e))?;
                MdpDistribution::uniform(vec![b.to_mdp().map_err(|e| cfg(&e))?])
                    .map_err(|e| cfg(&e))
            }
            Self::BanditReference { arms, head_mass } => {
                let s = reference_ratio_support(*arms, *head_mass).map_err(|e| cfg(&e))?;
                let members = s
                    .instances
                    .iter()
                    .map(|b| b.to_mdp())
                    .collect::<Result<Vec<TabularMdp>, _>>()
                    .map_err(|e| cfg(&e))?;
                MdpDistribution::new(members, s.probs).map_err(|e| cfg(&e))
            }
            Self::File { path } => load_distribution_file(&base_dir.join(path)),
        }
    }
}

/// Reads a distribution document, or a single MDP document as a point mass.
pub fn load_distribution_file(path: &Path) -> Result<MdpDistribution, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let bad = |e: &dyn std::fmt::Display| HarnessError::Config(format!("{}: {e}", path.display()));
    if value.get("probs").is_some() {
        let doc = DistributionDocument::from_json(&text).map_err(|e| bad(&e))?;
        doc.to_distribution(base).map_err(|e| bad(&e))
    } else {
        let mdp = MdpDocument::from_json(&text)
            .and_then(|d| d.to_mdp())
            .map_err(|e| bad(&e))?;
        MdpDistribution::uniform(vec![mdp]).map_err(|e| bad(&e))
    }
}

/// Explicit seeds or `count` seeds mixed from a master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Master { master: u64, count: usize },
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self::List(vec![0])
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Self::List(s) => s.clone(),
            Self::Master { master, count } => (0..*count as u64).map(|i| mix_seed(*master, i)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub white_box: bool,
    #[serde(default = "one")]
    pub c_o: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            white_box: false,
            c_o: 1.0,
        }
    }
}

impl From<OracleConfig> for OracleSettings {
    fn from(c: OracleConfig) -> Self {
        Self {
            white_box: c.white_box,
            c_o: c.c_o,
        }
    }
}

/// Departures from the algorithms' default schedules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Upper limit on pre-training tasks per phase.
    pub n_cap: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub mode: Option<ImproveMode>,
    /// OMERM iterations per training run.
    pub omerm_iterations: Option<u64>,
    /// OMERM sampled task count.
    pub omerm_tasks: Option<usize>,
    pub log_cover: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub instance: InstanceSpec,
    /// Episodes `K` (pce) or steps `T` (bandit-ucb).
    #[serde(default)]
    pub k: u64,
    /// Horizons for bandit-ratio, ascending.
    #[serde(default)]
    pub t_grid: Vec<u64>,
    #[serde(default)]
    pub num_test_draws: usize,
    /// OMERM accuracy; PCE test-stage accuracy when set.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// OMERM confidence (enables the boosted variant); PCE test-stage
    /// confidence when set.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Also run the single-task optimistic learner on PCE test draws.
    #[serde(default)]
    pub baseline: bool,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default = "default_out")]
    pub out_dir: String,
}

fn default_out() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.seeds().is_empty() {
            return bad("seed list is empty".into());
        }
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v < 1.0) {
                    return bad(format!("{name} = {v} must lie in (0, 1)"));
                }
            }
        }
        match self.experiment {
            ExperimentKind::Pce if self.k < 2 => bad(format!("pce needs k >= 2, got {}", self.k)),
            ExperimentKind::Omerm if self.epsilon.is_none() => bad("omerm needs epsilon".into()),
            ExperimentKind::BanditUcb if self.k == 0 => bad("bandit-ucb needs k (steps) >= 1".into()),
            ExperimentKind::BanditRatio if self.t_grid.is_empty() => bad("bandit-ratio needs t_grid".into()),
            ExperimentKind::BanditRatio if self.t_grid.windows(2).any(|w| w[1] < w[0]) => {
                bad("t_grid must be ascending".into())
            }
            _ => Ok(()),
        }
    }
}

/// A config ready to run: parsed, overridden and validated.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    /// Directory that relative instance paths resolve against.
    pub base_dir: PathBuf,
    /// Command-line overrides as given.
    pub cli_overrides: Vec<String>,
}

impl LoadedConfig {
    pub fn from_config(config: ExperimentConfig, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        config.validate()?;
        Ok(Self {
            config,
            base_dir: base_dir.into(),
            cli_overrides: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.base_dir.join(&self.config.out_dir)
    }
}

/// Sets a dotted path such as `overrides.n_cap` in a JSON object. The
/// value is read as JSON when it parses, else as a string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), HarnessError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| HarnessError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(HarnessError::Config(format!("override path {path:?} has an empty key")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| HarnessError::Config(format!("override path {path:?} crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields a key")
}

/// Reads a config file, applies `--override`, `--seed` and `--out` in that
/// order, and validates the result.
pub fn load_config(
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    overrides: &[String],
) -> Result<LoadedConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(HarnessError::Config("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    if let Some(s) = seed {
        value["seeds"] = Value::from(vec![s]);
    }
    if let Some(o) = out {
        value["out_dir"] = Value::String(o.display().to_string());
    }
    let config: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| HarnessError::Config(e.to_string()))?;
    config.validate()?;
    Ok(LoadedConfig {
        config,
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        cli_overrides: overrides.to_vec(),
    })
}
