//! Experiment configs: a single JSON document per experiment, with scalar
//! overrides applied by dotted path before validation.

use std::path::PathBuf;

use serde::Deserialize;
use serde_json::Value;

use rmab_core::verify::{RewardSpec, VerifyParams};
use rmab_core::{
    BeliefVector, ChannelModel, Horizon, Instance, MyopicPolicy, PolicyTree, RandomPolicy,
    SensingPolicy, SensingModel, TreePolicy,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub p01: f64,
    pub p11: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BeliefSpec {
    Named(String),
    Values(Vec<f64>),
}

impl Default for BeliefSpec {
    fn default() -> Self {
        BeliefSpec::Named("stationary".to_string())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    #[default]
    Myopic,
    Random { seed: u64 },
    Fixed { path: PathBuf },
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Myopic => "myopic".into(),
            PolicySpec::Random { seed } => format!("random({seed})"),
            PolicySpec::Fixed { path } => format!("fixed({})", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FidelitySpec {
    Channel,
    Belief,
    #[default]
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Dotted path into the config document, e.g. `beta` or `channels.0.p11`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Suites to run, in order: axioms, lemma4, lemma5, symmetry, optimality.
    pub suites: Vec<String>,
    #[serde(default)]
    pub params: VerifyParams,
}

fn default_episodes() -> usize {
    100_000
}

/// The one experiment document every subcommand reads.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub id: Option<String>,
    pub channels: Vec<ChannelSpec>,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    /// Number of slots T.
    pub horizon: usize,
    pub beta: f64,
    pub reward: RewardSpec,
    #[serde(default)]
    pub initial_belief: BeliefSpec,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub node_cap: Option<u128>,
    #[serde(default)]
    pub fidelity: FidelitySpec,
    #[serde(default)]
    pub sweep: Vec<SweepGrid>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
}

impl ExperimentConfig {
    pub fn instance_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| "instance".to_string())
    }

    /// Build and validate the embedded instance.
    pub fn build_instance(&self) -> Result<Instance, String> {
        let mut channels = Vec::with_capacity(self.channels.len());
        for (i, spec) in self.channels.iter().enumerate() {
            channels.push(
                ChannelModel::new(spec.p01, spec.p11)
                    .map_err(|e| format!("channels[{i}]: {e}"))?,
            );
        }
        if channels.is_empty() {
            return Err("channels: at least one channel is required".to_string());
        }
        let sensing = SensingModel::new(self.epsilon, self.delta)
            .map_err(|e| format!("epsilon/delta: {e}"))?;
        let horizon =
            Horizon::new(self.horizon, self.beta).map_err(|e| format!("horizon/beta: {e}"))?;
        let reward = self
            .reward
            .build(self.epsilon)
            .map_err(|e| format!("reward: {e}"))?;
        let belief = match &self.initial_belief {
            BeliefSpec::Named(name) if name == "stationary" => {
                BeliefVector::stationary(&channels)
            }
            BeliefSpec::Named(other) => {
                return Err(format!(
                    "initial_belief: expected \"stationary\" or an array, got \"{other}\""
                ));
            }
            BeliefSpec::Values(values) => BeliefVector::new(values.clone())
                .map_err(|e| format!("initial_belief: {e}"))?,
        };
        Instance::new(channels, sensing, self.k, horizon, reward, belief)
            .map_err(|e| format!("instance: {e}"))
    }

    /// Build the configured policy.
    pub fn build_policy(&self, instance: &Instance) -> Result<Box<dyn SensingPolicy>, String> {
        match &self.policy {
            PolicySpec::Myopic => Ok(Box::new(MyopicPolicy::for_instance(instance))),
            PolicySpec::Random { seed } => {
                Ok(Box::new(RandomPolicy::for_instance(instance, *seed)))
            }
            PolicySpec::Fixed { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("policy tree {}: {e}", path.display()))?;
                let tree: PolicyTree = serde_json::from_str(&text)
                    .map_err(|e| format!("policy tree {}: {e}", path.display()))?;
                Ok(Box::new(TreePolicy::new(tree, instance.n())))
            }
        }
    }

    /// Planner cap: RMAB_NODE_CAP env var beats the config, which beats the
    /// library default.
    pub fn node_cap(&self) -> Result<u128, String> {
        if let Ok(raw) = std::env::var("RMAB_NODE_CAP") {
            return raw
                .parse()
                .map_err(|e| format!("RMAB_NODE_CAP: {e}"));
        }
        Ok(self.node_cap.unwrap_or(rmab_core::DEFAULT_NODE_CAP))
    }
}

/// Parse the raw JSON document and apply `--set key=value` overrides.
pub fn load_raw(path: &std::path::Path, overrides: &[String]) -> Result<Value, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| format!("--set needs KEY=VALUE, got '{item}'"))?;
        let parsed = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
        set_path(&mut value, key, parsed)?;
    }
    Ok(value)
}

/// Set a dotted path inside a JSON document; numeric segments index arrays.
pub fn set_path(root: &mut Value, path: &str, new_value: Value) -> Result<(), String> {
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match cursor {
            Value::Object(map) => {
                if last {
                    map.insert(segment.to_string(), new_value);
                    return Ok(());
                }
                cursor = map
                    .get_mut(*segment)
                    .ok_or_else(|| format!("config has no field '{segment}' (in '{path}')"))?;
            }
            Value::Array(items) => {
                let idx: usize = segment
                    .parse()
                    .map_err(|_| format!("'{segment}' is not an array index (in '{path}')"))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| format!("index {idx} out of bounds (in '{path}')"))?;
                if last {
                    *slot = new_value;
                    return Ok(());
                }
                cursor = slot;
            }
            other => {
                return Err(format!(
                    "cannot descend into {other} at '{segment}' (in '{path}')"
                ));
            }
        }
    }
    Err(format!("empty override path '{path}'"))
}

pub fn typed(value: &Value) -> Result<ExperimentConfig, String> {
    serde_json::from_value(value.clone()).map_err(|e| format!("config: {e}"))
}
