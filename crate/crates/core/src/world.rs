//! Environments: a deterministic state-transition function plus what an
//! agent can observe of the state.
//!
//! Four toy worlds are built in:
//!
//! * thermostat: `temp' = temp + leak·(ambient − temp) + heater_gain·u + d`
//! * light switch: `n` unmarked switches, one (hidden) lights the lamp
//! * landscape: a walk over a fixed error table
//! * channel: a symbol channel with uniform substitution noise
//!
//! The dynamics of all four are implementation choices. Everything outside
//! the modelled variables is folded into a per-tick disturbance schedule.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::Plant;
use crate::rng;
use crate::search::{ActionSpace, BoxSpace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("action {action:?} is outside the action space")]
    InvalidAction { action: Action },
    #[error("invalid world parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(i64),
    Continuous(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StateValue {
    Real(f64),
    Int(i64),
    Flag(bool),
}

impl StateValue {
    pub fn as_f64(self) -> f64 {
        match self {
            StateValue::Real(v) => v,
            StateValue::Int(v) => v as f64,
            StateValue::Flag(b) => f64::from(u8::from(b)),
        }
    }

    fn hash_into<H: Hasher>(self, h: &mut H) {
        match self {
            StateValue::Real(v) => (0u8, v.to_bits()).hash(h),
            StateValue::Int(v) => (1u8, v).hash(h),
            StateValue::Flag(b) => (2u8, b).hash(h),
        }
    }
}

/// Named state variables plus the tick counter. The variable set is fixed
/// for the lifetime of a world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: u64,
    vars: Vec<(&'static str, StateValue)>,
}

impl WorldState {
    fn new(vars: Vec<(&'static str, StateValue)>) -> Self {
        Self { tick: 0, vars }
    }

    pub fn get(&self, name: &str) -> Option<StateValue> {
        self.vars.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.get(name).map(StateValue::as_f64)
    }

    pub fn variables(&self) -> &[(&'static str, StateValue)] {
        &self.vars
    }

    fn set(&mut self, name: &str, value: StateValue) {
        if let Some(slot) = self.vars.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = value;
        }
    }

    /// Stable hash of the full state, hidden variables included.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.tick.hash(&mut h);
        for (name, value) in &self.vars {
            name.hash(&mut h);
            value.hash_into(&mut h);
        }
        h.finish()
    }
}

/// What a world exposes of its state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    entries: Vec<(&'static str, StateValue)>,
}

impl Observation {
    pub fn get(&self, name: &str) -> Option<StateValue> {
        self.entries.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn real(&self, name: &str) -> Option<f64> {
        self.get(name).map(StateValue::as_f64)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.iter().map(|(n, _)| *n)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| v.as_f64()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Piecewise-constant disturbance: each step sets the value from its tick
/// onward. Zero before the first step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSchedule {
    steps: Vec<(u64, f64)>,
}

impl DisturbanceSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            steps: vec![(0, value)],
        }
    }

    pub fn step_at(tick: u64, value: f64) -> Self {
        Self {
            steps: vec![(tick, value)],
        }
    }

    pub fn from_steps(mut steps: Vec<(u64, f64)>) -> Result<Self, WorldError> {
        if steps.iter().any(|(_, v)| !v.is_finite()) {
            return Err(WorldError::InvalidParameter(
                "disturbance values must be finite".into(),
            ));
        }
        steps.sort_by_key(|(t, _)| *t);
        Ok(Self { steps })
    }

    pub fn value_at(&self, tick: u64) -> f64 {
        self.steps
            .iter()
            .take_while(|(t, _)| *t <= tick)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }

    /// Values for ticks `0..len`.
    pub fn series(&self, len: usize) -> Vec<f64> {
        (0..len as u64).map(|t| self.value_at(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermostatWorld {
    pub ambient: f64,
    pub leak: f64,
    pub heater_gain: f64,
    pub initial_temp: f64,
    pub max_power: f64,
    pub disturbance: DisturbanceSchedule,
    pub noise_std: f64,
    pub seed: u64,
}

impl ThermostatWorld {
    pub fn new(ambient: f64, leak: f64, heater_gain: f64) -> Result<Self, WorldError> {
        if !(ambient.is_finite() && leak.is_finite() && heater_gain.is_finite()) {
            return Err(WorldError::InvalidParameter(
                "thermostat parameters must be finite".into(),
            ));
        }
        if !(0.0..1.0).contains(&leak) {
            return Err(WorldError::InvalidParameter(format!(
                "leak must lie in [0, 1), got {leak}"
            )));
        }
        Ok(Self {
            ambient,
            leak,
            heater_gain,
            initial_temp: ambient,
            max_power: 1e9,
            disturbance: DisturbanceSchedule::none(),
            noise_std: 0.0,
            seed: 0,
        })
    }

    pub fn with_initial_temp(mut self, temp: f64) -> Self {
        self.initial_temp = temp;
        self
    }

    pub fn with_disturbance(mut self, schedule: DisturbanceSchedule) -> Self {
        self.disturbance = schedule;
        self
    }

    pub fn with_observation_noise(mut self, std: f64, seed: u64) -> Result<Self, WorldError> {
        if !(std >= 0.0 && std.is_finite()) {
            return Err(WorldError::InvalidParameter("noise std must be ≥ 0".into()));
        }
        self.noise_std = std;
        self.seed = seed;
        Ok(self)
    }

    /// One tick of the heat balance.
    pub fn advance(&self, temp: f64, power: f64, d: f64) -> f64 {
        temp + self.leak * (self.ambient - temp) + self.heater_gain * power + d
    }

    /// The thermostat as a loop plant starting at `initial_temp`.
    pub fn plant(&self) -> ThermostatPlant {
        ThermostatPlant {
            world: self.clone(),
            temperature: self.initial_temp,
        }
    }
}

/// Adapter that lets the control simulator drive a thermostat.
#[derive(Debug, Clone)]
pub struct ThermostatPlant {
    world: ThermostatWorld,
    pub temperature: f64,
}

impl Plant for ThermostatPlant {
    fn output(&self) -> f64 {
        self.temperature
    }

    fn advance(&mut self, u: f64, d: f64) {
        self.temperature = self.world.advance(self.temperature, u, d);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSwitchWorld {
    pub n_switches: usize,
    target_index: usize,
}

impl LightSwitchWorld {
    pub fn new(n_switches: usize, seed: u64) -> Result<Self, WorldError> {
        if n_switches < 2 {
            return Err(WorldError::InvalidParameter(format!(
                "need at least 2 switches, got {n_switches}"
            )));
        }
        let target_index = rng::seeded(seed).random_range(0..n_switches);
        Ok(Self {
            n_switches,
            target_index,
        })
    }

    /// The hidden wiring. Only for building oracles and tests; agents get
    /// nothing but [`WorldTransform::observe`].
    pub fn target_index(&self) -> usize {
        self.target_index
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeWorld {
    pub error_table: Vec<f64>,
    pub start: usize,
}

impl LandscapeWorld {
    pub const MOVES: [i64; 3] = [-1, 0, 1];

    pub fn new(error_table: Vec<f64>) -> Result<Self, WorldError> {
        if error_table.is_empty() {
            return Err(WorldError::InvalidParameter("error table is empty".into()));
        }
        if let Some(i) = error_table.iter().position(|v| !v.is_finite()) {
            return Err(WorldError::InvalidParameter(format!(
                "error table entry {i} is not finite"
            )));
        }
        Ok(Self {
            error_table,
            start: 0,
        })
    }

    pub fn with_start(mut self, start: usize) -> Result<Self, WorldError> {
        if start >= self.error_table.len() {
            return Err(WorldError::InvalidParameter(format!(
                "start {start} is outside a table of {}",
                self.error_table.len()
            )));
        }
        self.start = start;
        Ok(self)
    }

    /// Position after a move, clamped to the table.
    pub fn moved(&self, position: i64, delta: i64) -> i64 {
        (position + delta).clamp(0, self.error_table.len() as i64 - 1)
    }

    pub fn error_at(&self, position: i64) -> f64 {
        self.error_table[position as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWorld {
    pub alphabet_size: u32,
    pub substitution_prob: f64,
    pub seed: u64,
}

impl ChannelWorld {
    pub fn new(alphabet_size: u32, substitution_prob: f64, seed: u64) -> Result<Self, WorldError> {
        if alphabet_size < 2 {
            return Err(WorldError::InvalidParameter(format!(
                "alphabet needs at least 2 symbols, got {alphabet_size}"
            )));
        }
        if !(0.0..=1.0).contains(&substitution_prob) {
            return Err(WorldError::InvalidParameter(format!(
                "substitution probability must lie in [0, 1], got {substitution_prob}"
            )));
        }
        Ok(Self {
            alphabet_size,
            substitution_prob,
            seed,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    /// Received symbol for `sent` at `tick`: kept with probability 1 − p,
    /// otherwise replaced by one of the other symbols uniformly.
    pub fn transmit(&self, sent: u32, tick: u64) -> u32 {
        let mut r = rng::stream_rng(self.seed, tick);
        if r.random::<f64>() < self.substitution_prob {
            let other = r.random_range(0..self.alphabet_size - 1);
            if other >= sent {
                other + 1
            } else {
                other
            }
        } else {
            sent
        }
    }

    /// `P(received | sent)` for the uniform substitution model.
    pub fn likelihood(&self, received: u32, sent: u32) -> f64 {
        if received == sent {
            1.0 - self.substitution_prob
        } else {
            self.substitution_prob / f64::from(self.alphabet_size - 1)
        }
    }
}

/// A world: transition function, action space, observation function and
/// disturbance schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum WorldTransform {
    Thermostat(ThermostatWorld),
    LightSwitch(LightSwitchWorld),
    Landscape(LandscapeWorld),
    Channel(ChannelWorld),
}

pub fn make_thermostat(ambient: f64, leak: f64, heater_gain: f64) -> Result<WorldTransform, WorldError> {
    ThermostatWorld::new(ambient, leak, heater_gain).map(WorldTransform::Thermostat)
}

pub fn make_light_switch(n: usize, seed: u64) -> Result<WorldTransform, WorldError> {
    LightSwitchWorld::new(n, seed).map(WorldTransform::LightSwitch)
}

pub fn make_landscape(error_table: Vec<f64>) -> Result<WorldTransform, WorldError> {
    LandscapeWorld::new(error_table).map(WorldTransform::Landscape)
}

pub fn make_channel(alphabet_size: u32, substitution_prob: f64, seed: u64) -> Result<WorldTransform, WorldError> {
    ChannelWorld::new(alphabet_size, substitution_prob, seed).map(WorldTransform::Channel)
}

impl WorldTransform {
    pub fn initial_state(&self) -> WorldState {
        match self {
            WorldTransform::Thermostat(w) => {
                WorldState::new(vec![("temperature", StateValue::Real(w.initial_temp))])
            }
            WorldTransform::LightSwitch(w) => WorldState::new(vec![
                ("lit", StateValue::Flag(false)),
                ("last_switch", StateValue::Int(-1)),
                ("target_index", StateValue::Int(w.target_index as i64)),
            ]),
            WorldTransform::Landscape(w) => WorldState::new(vec![
                ("position", StateValue::Int(w.start as i64)),
                ("error", StateValue::Real(w.error_table[w.start])),
            ]),
            WorldTransform::Channel(_) => WorldState::new(vec![
                ("sent", StateValue::Int(-1)),
                ("received", StateValue::Int(-1)),
            ]),
        }
    }

    pub fn action_space(&self) -> ActionSpace {
        match self {
            WorldTransform::Thermostat(w) => ActionSpace::Continuous(BoxSpace {
                low: vec![-w.max_power],
                high: vec![w.max_power],
                step: vec![1.0],
            }),
            WorldTransform::LightSwitch(w) => {
                ActionSpace::Discrete((0..w.n_switches as i64).map(Action::Discrete).collect())
            }
            WorldTransform::Landscape(_) => {
                ActionSpace::Discrete(LandscapeWorld::MOVES.iter().map(|m| Action::Discrete(*m)).collect())
            }
            WorldTransform::Channel(w) => {
                ActionSpace::Discrete((0..i64::from(w.alphabet_size)).map(Action::Discrete).collect())
            }
        }
    }

    /// Disturbance applied on arrival at `tick`.
    pub fn disturbance(&self, tick: u64) -> f64 {
        match self {
            WorldTransform::Thermostat(w) => w.disturbance.value_at(tick),
            _ => 0.0,
        }
    }

    /// Advances the world by one tick under `action`.
    pub fn step(&self, state: &WorldState, action: &Action) -> Result<WorldState, WorldError> {
        let invalid = || WorldError::InvalidAction { action: *action };
        let mut next = state.clone();
        next.tick = state.tick + 1;
        match (self, action) {
            (WorldTransform::Thermostat(w), Action::Continuous(power)) => {
                if !power.is_finite() || power.abs() > w.max_power {
                    return Err(invalid());
                }
                let temp = state.real("temperature").unwrap_or(w.initial_temp);
                let d = w.disturbance.value_at(next.tick);
                next.set("temperature", StateValue::Real(w.advance(temp, *power, d)));
            }
            (WorldTransform::LightSwitch(w), Action::Discrete(i)) => {
                if *i < 0 || *i >= w.n_switches as i64 {
                    return Err(invalid());
                }
                next.set("lit", StateValue::Flag(*i as usize == w.target_index));
                next.set("last_switch", StateValue::Int(*i));
            }
            (WorldTransform::Landscape(w), Action::Discrete(delta)) => {
                if !LandscapeWorld::MOVES.contains(delta) {
                    return Err(invalid());
                }
                let position = state.real("position").map_or(w.start as i64, |p| p as i64);
                let moved = w.moved(position, *delta);
                next.set("position", StateValue::Int(moved));
                next.set("error", StateValue::Real(w.error_at(moved)));
            }
            (WorldTransform::Channel(w), Action::Discrete(s)) => {
                if *s < 0 || *s >= i64::from(w.alphabet_size) {
                    return Err(invalid());
                }
                let received = w.transmit(*s as u32, next.tick);
                next.set("sent", StateValue::Int(*s));
                next.set("received", StateValue::Int(i64::from(received)));
            }
            _ => return Err(invalid()),
        }
        Ok(next)
    }

    /// The variables this world exposes. Read-only.
    pub fn observe(&self, state: &WorldState) -> Observation {
        let pick = |names: &[&'static str]| Observation {
            entries: names
                .iter()
                .filter_map(|n| state.get(n).map(|v| (*n, v)))
                .collect(),
        };
        match self {
            WorldTransform::Thermostat(w) => {
                let mut obs = pick(&["temperature"]);
                if w.noise_std > 0.0 {
                    let noise = Normal::new(0.0, w.noise_std)
                        .expect("validated std")
                        .sample(&mut rng::stream_rng(w.seed, state.tick));
                    obs.entries[0].1 = StateValue::Real(obs.entries[0].1.as_f64() + noise);
                }
                obs
            }
            WorldTransform::LightSwitch(_) => pick(&["lit"]),
            WorldTransform::Landscape(_) => pick(&["position", "error"]),
            WorldTransform::Channel(_) => pick(&["received"]),
        }
    }
}
