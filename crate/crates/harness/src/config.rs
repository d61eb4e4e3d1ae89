//! Scenario configuration. TOML, strict schema: unknown keys are errors.

use pct_core::hpct::Level;
use pct_core::{Mode, NeedKind, PidParams};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub ticks: usize,
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default)]
    pub seeds: SeedRange,
    pub world: WorldConfig,
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub start: u64,
    pub count: u64,
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, count: 1 }
    }
}

impl SeedRange {
    pub fn iter(&self) -> std::ops::Range<u64> {
        self.start..self.start + self.count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorldConfig {
    Thermostat {
        ambient: f64,
        leak: f64,
        heater_gain: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_temp: Option<f64>,
        /// `[tick, value]` pairs; the disturbance holds from each tick on.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        disturbance: Vec<(u64, f64)>,
        #[serde(default)]
        noise_std: f64,
    },
    LightSwitch {
        switches: usize,
    },
    Landscape {
        table: Vec<f64>,
        start: usize,
    },
    Channel {
        alphabet_size: u32,
        substitution_prob: f64,
    },
}

impl WorldConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            WorldConfig::Thermostat { .. } => "thermostat",
            WorldConfig::LightSwitch { .. } => "light_switch",
            WorldConfig::Landscape { .. } => "landscape",
            WorldConfig::Channel { .. } => "channel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomStep {
    pub tick: u64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub id: String,
    #[serde(default = "unit_weights")]
    pub weights: Vec<f64>,
    #[serde(default = "one")]
    pub gain: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<PidParams>,
    #[serde(default)]
    pub reference: f64,
    #[serde(default = "control_mode")]
    pub mode: Mode,
    /// Average the perception over this many ticks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Level>,
}

fn unit_weights() -> Vec<f64> {
    vec![1.0]
}

fn control_mode() -> Mode {
    Mode::Control
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub units: Vec<UnitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    pub levels: Vec<LevelConfig>,
    /// `wiring[k][i][j]`: weight from unit j on level k+1 to the reference
    /// of unit i on level k.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wiring: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConfig {
    SelfAsOther,
    /// Fit the models of the partner from observed pairs, falling back to
    /// the agent's own transforms for anything never observed.
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// `code[k]` is the signal for intention `k`. Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<Vec<u32>>,
    #[serde(default = "self_as_other")]
    pub binding: BindingConfig,
    #[serde(default)]
    pub learn_pairs: usize,
}

fn self_as_other() -> BindingConfig {
    BindingConfig::SelfAsOther
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            code: None,
            binding: BindingConfig::SelfAsOther,
            learn_pairs: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceConfig {
    Squared,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeedConfig {
    pub name: String,
    #[serde(default = "physical")]
    pub kind: NeedKind,
    pub setpoint: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default)]
    pub depletion: f64,
    #[serde(default = "one")]
    pub weight: f64,
    pub intention: u32,
}

fn physical() -> NeedKind {
    NeedKind::Physical
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub base_budget: usize,
    pub base_gain: f64,
    pub arousal_coupling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shock {
    pub tick: u64,
    pub need: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    /// Single PID loop on the thermostat plant.
    Loop {
        reference: f64,
        #[serde(default = "one")]
        feedback_gain: f64,
        pid: PidParams,
        #[serde(default)]
        flip_kp: bool,
        /// Adds a step disturbance whose size is drawn per seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        random_step: Option<RandomStep>,
    },
    /// Random search over unmarked switches.
    LightSwitch {},
    PlanVsGreedy {
        /// Longest constant-direction run considered by the planner.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_run: Option<usize>,
        /// `[index, value]` overrides applied to the planner's model only.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        model_corruption: Vec<(usize, f64)>,
    },
    /// One unit run from a fresh world in each of the four modes.
    HpctModes {
        unit: UnitConfig,
    },
    Hierarchy {
        hierarchy: HierarchyConfig,
    },
    Reorganisation {
        hierarchy: HierarchyConfig,
        window: usize,
        scale: f64,
        max_steps: usize,
        target_fraction: f64,
    },
    InferCause {
        candidates: usize,
        low: f64,
        high: f64,
        noise_std: f64,
        #[serde(default = "squared")]
        distance: DistanceConfig,
    },
    Communication {
        #[serde(default)]
        sender: AgentConfig,
        #[serde(default)]
        receiver: AgentConfig,
        episodes: usize,
        /// Cycle through every intention instead of drawing them.
        #[serde(default)]
        full_alphabet: bool,
        /// Substitution probabilities to run; the world's value when empty.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        noise: Vec<f64>,
        #[serde(default = "one_usize")]
        feedback_rounds: usize,
    },
    NeedsAgent {
        needs: Vec<NeedConfig>,
        policy: PolicyConfig,
        threshold: f64,
        satisfaction: f64,
        #[serde(default)]
        requester: AgentConfig,
        #[serde(default)]
        provider: AgentConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shock: Option<Shock>,
    },
}

fn squared() -> DistanceConfig {
    DistanceConfig::Squared
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Loop { .. } => "loop",
            ExperimentConfig::LightSwitch {} => "light_switch",
            ExperimentConfig::PlanVsGreedy { .. } => "plan_vs_greedy",
            ExperimentConfig::HpctModes { .. } => "hpct_modes",
            ExperimentConfig::Hierarchy { .. } => "hierarchy",
            ExperimentConfig::Reorganisation { .. } => "reorganisation",
            ExperimentConfig::InferCause { .. } => "infer_cause",
            ExperimentConfig::Communication { .. } => "communication",
            ExperimentConfig::NeedsAgent { .. } => "needs_agent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Mean,
    Stddev,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    /// `|actual − value| ≤ tolerance`.
    Within,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub metric: String,
    pub stat: Stat,
    pub op: Comparison,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Cross-section checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.ticks == 0 {
            return bad("ticks", "must be ≥ 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", format!("must be > 0, got {}", self.dt));
        }
        if self.seeds.count == 0 {
            return bad("seeds.count", "must be ≥ 1".into());
        }
        for (i, e) in self.expect.iter().enumerate() {
            if e.op == Comparison::Within && e.tolerance.is_none() {
                return bad(&format!("expect[{i}].tolerance"), "required for op = \"within\"".into());
            }
        }
        let world = self.world.kind();
        let needs_world = |expected: &str| -> Result<(), HarnessError> {
            if world == expected {
                Ok(())
            } else {
                Err(HarnessError::Config(format!(
                    "world.kind: experiment {} needs a {expected} world, got {world}",
                    self.experiment.kind()
                )))
            }
        };
        match &self.experiment {
            ExperimentConfig::Loop { random_step, .. } => {
                needs_world("thermostat")?;
                if let Some(s) = random_step {
                    if !(s.low <= s.high) {
                        return bad("experiment.random_step", "low must not exceed high".into());
                    }
                }
            }
            ExperimentConfig::LightSwitch {} => needs_world("light_switch")?,
            ExperimentConfig::PlanVsGreedy { model_corruption, .. } => {
                needs_world("landscape")?;
                let WorldConfig::Landscape { table, start } = &self.world else { unreachable!() };
                if *start >= table.len() {
                    return bad("world.start", format!("outside table of length {}", table.len()));
                }
                if let Some((i, _)) = model_corruption.iter().find(|(i, _)| *i >= table.len()) {
                    return bad("experiment.model_corruption", format!("index {i} outside table"));
                }
            }
            ExperimentConfig::HpctModes { unit } => {
                needs_world("thermostat")?;
                if unit.weights.len() != 1 {
                    return bad("experiment.unit.weights", "a thermostat exposes one variable".into());
                }
            }
            ExperimentConfig::Hierarchy { hierarchy } | ExperimentConfig::Reorganisation { hierarchy, .. } => {
                needs_world("thermostat")?;
                if hierarchy.levels.first().is_some_and(|l| l.units.iter().any(|u| u.weights.len() != 1)) {
                    return bad(
                        "experiment.hierarchy.levels[0]",
                        "bottom units read the single thermostat variable".into(),
                    );
                }
                if let ExperimentConfig::Reorganisation {
                    window,
                    scale,
                    target_fraction,
                    ..
                } = &self.experiment
                {
                    if *window == 0 || !(*scale > 0.0) || !(*target_fraction > 0.0) {
                        return bad(
                            "experiment",
                            "window, scale and target_fraction must be positive".into(),
                        );
                    }
                }
            }
            ExperimentConfig::InferCause {
                candidates, low, high, ..
            } => {
                if *candidates == 0 || !(low < high) {
                    return bad("experiment", "need ≥ 1 candidate and low < high".into());
                }
            }
            ExperimentConfig::Communication {
                sender,
                receiver,
                noise,
                episodes,
                ..
            } => {
                needs_world("channel")?;
                let WorldConfig::Channel { alphabet_size, .. } = &self.world else { unreachable!() };
                check_agent("experiment.sender", sender, *alphabet_size)?;
                check_agent("experiment.receiver", receiver, *alphabet_size)?;
                if *episodes == 0 {
                    return bad("experiment.episodes", "must be ≥ 1".into());
                }
                if let Some(p) = noise.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return bad("experiment.noise", format!("{p} is not a probability"));
                }
            }
            ExperimentConfig::NeedsAgent {
                needs,
                policy,
                requester,
                provider,
                shock,
                ..
            } => {
                needs_world("channel")?;
                let WorldConfig::Channel { alphabet_size, .. } = &self.world else { unreachable!() };
                check_agent("experiment.requester", requester, *alphabet_size)?;
                check_agent("experiment.provider", provider, *alphabet_size)?;
                // Budgets only grow with urgency, so this covers every episode.
                if policy.base_budget < *alphabet_size as usize {
                    return bad(
                        "experiment.policy.base_budget",
                        format!("must cover the alphabet of size {alphabet_size} for exhaustive signal search"),
                    );
                }
                if let Some(n) = needs.iter().find(|n| n.intention >= *alphabet_size) {
                    return bad(
                        &format!("experiment.needs.{}.intention", n.name),
                        format!("{} outside alphabet of size {alphabet_size}", n.intention),
                    );
                }
                if let Some(s) = shock {
                    if !needs.iter().any(|n| n.name == s.need) {
                        return bad("experiment.shock.need", format!("no need named {}", s.need));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_agent(field: &str, agent: &AgentConfig, alphabet: u32) -> Result<(), HarnessError> {
    if let Some(code) = &agent.code {
        let mut seen = vec![false; alphabet as usize];
        if code.len() != alphabet as usize {
            return Err(HarnessError::Config(format!(
                "{field}.code: length {} does not match alphabet size {alphabet}",
                code.len()
            )));
        }
        for &s in code {
            if s >= alphabet || std::mem::replace(&mut seen[s as usize], true) {
                return Err(HarnessError::Config(format!(
                    "{field}.code: not a permutation of 0..{alphabet}"
                )));
            }
        }
    }
    Ok(())
}

/// Replaces the value at a dotted path (`world.substitution_prob`,
/// `experiment.pid.kp`) and re-validates. Array elements are addressed by
/// index (`expect.0.value`).
pub fn override_param(text: &str, path: &str, value: &str) -> Result<ScenarioConfig, HarnessError> {
    let mut doc: toml::Value = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    let replacement = parse_scalar(value);
    let mut slot = &mut doc;
    for key in path.split('.') {
        slot = match slot {
            toml::Value::Table(t) => t.get_mut(key),
            toml::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| HarnessError::Config(format!("parameter path {path} does not resolve")))?;
    }
    // Keep integers as floats where the schema wants a float.
    *slot = match (&*slot, replacement) {
        (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, r) => r,
    };
    let text = toml::to_string(&doc).map_err(|e| HarnessError::Config(e.to_string()))?;
    ScenarioConfig::parse(&text)
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
