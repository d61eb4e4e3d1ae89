//! Hierarchical perceptual control.
//!
//! A [`PerceptualControlUnit`] compares a reference with a perception built
//! from lower-level signals and acts on the difference. Two switches decide
//! where the reference comes from and where the perception goes, giving
//! four modes:
//!
//! | memory switch | perceptual switch | mode |
//! |---|---|---|
//! | vertical | vertical | control |
//! | non-vertical | vertical | passive observation |
//! | vertical | non-vertical | automatic |
//! | non-vertical | non-vertical | imagination |
//!
//! A [`Hierarchy`] stacks units in strict layers. Each tick perceptions flow
//! up, then outputs flow down as the next tick's references, so a lower
//! reference lags the upper output that set it by one tick.
//!
//! Reorganisation is a random perturb/keep-if-better search over output
//! gains, scored by the hierarchy's intrinsic error.

use std::collections::{BTreeMap, VecDeque};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{pid_step, ControlError, PidParams, PidState};
use crate::motivation::NeedStack;
use crate::rng;
use crate::search::ActionSpace;
use crate::world::{Action, WorldError, WorldState, WorldTransform};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpctError {
    #[error("unit {unit}: no memory at address {address}")]
    MemoryMiss { unit: String, address: u64 },
    #[error("dimension mismatch at {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid hierarchy: {0}")]
    Invalid(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchPosition {
    Vertical,
    NonVertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Control,
    PassiveObservation,
    Automatic,
    Imagination,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::Control,
        Mode::PassiveObservation,
        Mode::Automatic,
        Mode::Imagination,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchState {
    pub memory: SwitchPosition,
    pub perceptual: SwitchPosition,
}

impl SwitchState {
    pub fn mode(&self) -> Mode {
        use SwitchPosition::*;
        match (self.memory, self.perceptual) {
            (Vertical, Vertical) => Mode::Control,
            (NonVertical, Vertical) => Mode::PassiveObservation,
            (Vertical, NonVertical) => Mode::Automatic,
            (NonVertical, NonVertical) => Mode::Imagination,
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        use SwitchPosition::*;
        let (memory, perceptual) = match mode {
            Mode::Control => (Vertical, Vertical),
            Mode::PassiveObservation => (NonVertical, Vertical),
            Mode::Automatic => (Vertical, NonVertical),
            Mode::Imagination => (NonVertical, NonVertical),
        };
        Self { memory, perceptual }
    }
}

impl Default for SwitchState {
    fn default() -> Self {
        Self::for_mode(Mode::Control)
    }
}

/// The nine orders of perception, lowest first. Used only as a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Intensity,
    Sensation,
    Configuration,
    Transition,
    Sequence,
    Relationship,
    Program,
    Principle,
    SystemConcept,
}

/// Recorded perceptual values keyed by address. Last write wins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    entries: BTreeMap<u64, f64>,
}

impl MemoryStore {
    pub fn put(&mut self, address: u64, value: f64) {
        self.entries.insert(address, value);
    }

    pub fn get(&self, address: u64) -> Option<f64> {
        self.entries.get(&address).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputFunction {
    Proportional { gain: f64 },
    Pid {
        params: PidParams,
        #[serde(skip)]
        state: PidState,
    },
}

impl OutputFunction {
    pub fn gain(&self) -> f64 {
        match self {
            OutputFunction::Proportional { gain } => *gain,
            OutputFunction::Pid { params, .. } => params.kp,
        }
    }

    fn gain_mut(&mut self) -> &mut f64 {
        match self {
            OutputFunction::Proportional { gain } => gain,
            OutputFunction::Pid { params, .. } => &mut params.kp,
        }
    }

    fn apply(&mut self, e: f64, dt: f64) -> Result<f64, ControlError> {
        match self {
            OutputFunction::Proportional { gain } => Ok(*gain * e),
            OutputFunction::Pid { params, state } => {
                let (u, next) = pid_step(params, state, e, dt)?;
                *state = next;
                Ok(u)
            }
        }
    }
}

/// How a unit combines lower-level signals into its perception.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputFunction {
    WeightedSum { weights: Vec<f64> },
    /// Weighted sum averaged over the most recent `window` ticks.
    WindowAverage {
        weights: Vec<f64>,
        window: usize,
        #[serde(skip)]
        history: VecDeque<f64>,
    },
}

impl InputFunction {
    pub fn weights(&self) -> &[f64] {
        match self {
            InputFunction::WeightedSum { weights } | InputFunction::WindowAverage { weights, .. } => weights,
        }
    }

    fn perceive(&mut self, lower: &[f64]) -> f64 {
        let sum: f64 = self.weights().iter().zip(lower).map(|(w, x)| w * x).sum();
        match self {
            InputFunction::WeightedSum { .. } => sum,
            InputFunction::WindowAverage { window, history, .. } => {
                history.push_back(sum);
                while history.len() > (*window).max(1) {
                    history.pop_front();
                }
                history.iter().sum::<f64>() / history.len() as f64
            }
        }
    }
}

/// Where a unit's reference comes from on a given tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceInput {
    Value(f64),
    Address(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitOutput {
    pub output: f64,
    pub upward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptualControlUnit {
    pub id: String,
    pub level_label: Option<Level>,
    pub reference: f64,
    pub perceptual: f64,
    pub error: f64,
    pub output_fn: OutputFunction,
    pub input_fn: InputFunction,
    pub switches: SwitchState,
    pub memory: MemoryStore,
    /// When set, the reference is read from memory at this address instead
    /// of taken from `reference`.
    pub address: Option<u64>,
    pub last_output: f64,
    pub last_upward: Option<f64>,
}

impl PerceptualControlUnit {
    pub fn new(id: impl Into<String>, input_weights: Vec<f64>, gain: f64) -> Self {
        Self {
            id: id.into(),
            level_label: None,
            reference: 0.0,
            perceptual: 0.0,
            error: 0.0,
            output_fn: OutputFunction::Proportional { gain },
            input_fn: InputFunction::WeightedSum {
                weights: input_weights,
            },
            switches: SwitchState::default(),
            memory: MemoryStore::default(),
            address: None,
            last_output: 0.0,
            last_upward: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.switches = SwitchState::for_mode(mode);
        self
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_pid(mut self, params: PidParams) -> Self {
        self.output_fn = OutputFunction::Pid {
            params,
            state: PidState::default(),
        };
        self
    }

    pub fn with_input(mut self, input_fn: InputFunction) -> Self {
        self.input_fn = input_fn;
        self
    }

    pub fn with_label(mut self, level: Level) -> Self {
        self.level_label = Some(level);
        self
    }

    pub fn mode(&self) -> Mode {
        self.switches.mode()
    }

    pub fn memory_put(&mut self, address: u64, value: f64) {
        self.memory.put(address, value);
    }

    pub fn memory_get(&self, address: u64) -> Option<f64> {
        self.memory.get(address)
    }

    fn recall(&self, address: u64) -> Result<f64, HpctError> {
        self.memory.get(address).ok_or_else(|| HpctError::MemoryMiss {
            unit: self.id.clone(),
            address,
        })
    }

    /// One tick of this unit.
    ///
    /// In passive observation with an address, the perception is recorded
    /// at that address; no reference is needed.
    pub fn step(
        &mut self,
        lower_perceptions: &[f64],
        reference: ReferenceInput,
        dt: f64,
    ) -> Result<UnitOutput, HpctError> {
        if !(dt > 0.0) {
            return Err(ControlError::InvalidInput(format!("dt must be > 0, got {dt}")).into());
        }
        let expected = self.input_fn.weights().len();
        let mode = self.mode();
        if mode != Mode::Imagination && lower_perceptions.len() != expected {
            return Err(HpctError::DimensionMismatch {
                context: format!("unit {} inputs", self.id),
                expected,
                got: lower_perceptions.len(),
            });
        }

        let out = match mode {
            Mode::Control | Mode::Automatic => {
                let r = match reference {
                    ReferenceInput::Value(v) => v,
                    ReferenceInput::Address(a) => self.recall(a)?,
                };
                let p = self.input_fn.perceive(lower_perceptions);
                self.reference = r;
                self.perceptual = p;
                self.error = r - p;
                let output = self.output_fn.apply(self.error, dt)?;
                UnitOutput {
                    output,
                    upward: (mode == Mode::Control).then_some(p),
                }
            }
            Mode::PassiveObservation => {
                let p = self.input_fn.perceive(lower_perceptions);
                self.perceptual = p;
                self.error = 0.0;
                match reference {
                    ReferenceInput::Address(a) => self.memory.put(a, p),
                    ReferenceInput::Value(v) => self.reference = v,
                }
                UnitOutput {
                    output: 0.0,
                    upward: Some(p),
                }
            }
            Mode::Imagination => {
                let r = match reference {
                    ReferenceInput::Value(v) => v,
                    ReferenceInput::Address(a) => self.recall(a)?,
                };
                self.reference = r;
                self.perceptual = r;
                self.error = 0.0;
                UnitOutput {
                    output: 0.0,
                    upward: Some(r),
                }
            }
        };
        self.last_output = out.output;
        self.last_upward = out.upward;
        Ok(out)
    }
}

/// Functional form of [`PerceptualControlUnit::step`].
pub fn unit_step(
    unit: &PerceptualControlUnit,
    lower_perceptions: &[f64],
    reference: ReferenceInput,
    dt: f64,
) -> Result<(UnitOutput, PerceptualControlUnit), HpctError> {
    let mut next = unit.clone();
    let out = next.step(lower_perceptions, reference, dt)?;
    Ok((out, next))
}

/// What reorganisation tries to drive to zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum IntrinsicError {
    /// Sum of squared loop errors across all units.
    #[default]
    LoopErrors,
    /// Weighted squared need deficits.
    Needs(NeedStack),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Upper output feeding a lower reference.
    Reference,
    /// Lower perception feeding an upper input.
    Perception,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyOutput {
    pub actions: Vec<f64>,
    /// False when every bottom unit is imagining; the world must not be stepped.
    pub act: bool,
}

/// Strictly layered stack of control units; level 0 faces the world.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    levels: Vec<Vec<PerceptualControlUnit>>,
    /// `down_wiring[k][i][j]`: weight from output `j` of level `k+1` to the
    /// reference of unit `i` on level `k`.
    down_wiring: Vec<Vec<Vec<f64>>>,
    pub intrinsic: IntrinsicError,
    tick: u64,
}

impl Hierarchy {
    pub fn new(
        levels: Vec<Vec<PerceptualControlUnit>>,
        down_wiring: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, HpctError> {
        if levels.is_empty() || levels.iter().any(Vec::is_empty) {
            return Err(HpctError::Invalid("every level needs at least one unit".into()));
        }
        if down_wiring.len() != levels.len() - 1 {
            return Err(HpctError::Invalid(format!(
                "{} levels need {} wiring matrices, got {}",
                levels.len(),
                levels.len() - 1,
                down_wiring.len()
            )));
        }
        for (k, matrix) in down_wiring.iter().enumerate() {
            let rows = levels[k].len();
            let cols = levels[k + 1].len();
            if matrix.len() != rows || matrix.iter().any(|row| row.len() != cols) {
                return Err(HpctError::DimensionMismatch {
                    context: format!("wiring from level {} to level {k}", k + 1),
                    expected: rows * cols,
                    got: matrix.iter().map(Vec::len).sum(),
                });
            }
        }
        for k in 1..levels.len() {
            for unit in &levels[k] {
                if unit.input_fn.weights().len() != levels[k - 1].len() {
                    return Err(HpctError::DimensionMismatch {
                        context: format!("unit {} inputs", unit.id),
                        expected: levels[k - 1].len(),
                        got: unit.input_fn.weights().len(),
                    });
                }
            }
        }
        let width = levels[0][0].input_fn.weights().len();
        if let Some(u) = levels[0].iter().find(|u| u.input_fn.weights().len() != width) {
            return Err(HpctError::DimensionMismatch {
                context: format!("unit {} inputs", u.id),
                expected: width,
                got: u.input_fn.weights().len(),
            });
        }
        Ok(Self {
            levels,
            down_wiring,
            intrinsic: IntrinsicError::default(),
            tick: 0,
        })
    }

    pub fn single(unit: PerceptualControlUnit) -> Self {
        Self::new(vec![vec![unit]], vec![]).expect("a single unit is a valid hierarchy")
    }

    pub fn with_intrinsic(mut self, intrinsic: IntrinsicError) -> Self {
        self.intrinsic = intrinsic;
        self
    }

    pub fn levels(&self) -> &[Vec<PerceptualControlUnit>] {
        &self.levels
    }

    pub fn unit(&self, level: usize, index: usize) -> &PerceptualControlUnit {
        &self.levels[level][index]
    }

    pub fn unit_mut(&mut self, level: usize, index: usize) -> &mut PerceptualControlUnit {
        &mut self.levels[level][index]
    }

    pub fn units(&self) -> impl Iterator<Item = &PerceptualControlUnit> {
        self.levels.iter().flatten()
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn observation_dim(&self) -> usize {
        self.levels[0][0].input_fn.weights().len()
    }

    /// Every non-zero connection in the hierarchy.
    pub fn edges(&self) -> Vec<Edge> {
        let mut edges = vec![];
        for (k, matrix) in self.down_wiring.iter().enumerate() {
            for (i, row) in matrix.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    if *w != 0.0 {
                        edges.push(Edge {
                            from: (k + 1, j),
                            to: (k, i),
                            kind: EdgeKind::Reference,
                        });
                    }
                }
            }
        }
        for k in 1..self.levels.len() {
            for (i, unit) in self.levels[k].iter().enumerate() {
                for (j, w) in unit.input_fn.weights().iter().enumerate() {
                    if *w != 0.0 {
                        edges.push(Edge {
                            from: (k - 1, j),
                            to: (k, i),
                            kind: EdgeKind::Perception,
                        });
                    }
                }
            }
        }
        edges
    }

    /// True when outputs only feed strictly lower references and
    /// perceptions only feed strictly higher inputs.
    pub fn is_strictly_layered(&self) -> bool {
        self.edges().iter().all(|e| match e.kind {
            EdgeKind::Reference => e.from.0 > e.to.0,
            EdgeKind::Perception => e.from.0 < e.to.0,
        })
    }

    pub fn intrinsic_error(&self) -> f64 {
        match &self.intrinsic {
            IntrinsicError::LoopErrors => self.units().map(|u| u.error * u.error).sum(),
            IntrinsicError::Needs(needs) => needs.intrinsic_error(),
        }
    }

    /// One synchronous sweep: perceptions up, then references down for the
    /// next tick.
    pub fn step(&mut self, observation: &[f64], dt: f64) -> Result<HierarchyOutput, HpctError> {
        if observation.len() != self.observation_dim() {
            return Err(HpctError::DimensionMismatch {
                context: "observation".into(),
                expected: self.observation_dim(),
                got: observation.len(),
            });
        }
        let mut lower = observation.to_vec();
        let mut outputs = Vec::with_capacity(self.levels.len());
        for level in &mut self.levels {
            let mut upward = Vec::with_capacity(level.len());
            let mut level_out = Vec::with_capacity(level.len());
            for unit in level.iter_mut() {
                let reference = match unit.address {
                    Some(a) => ReferenceInput::Address(a),
                    None => ReferenceInput::Value(unit.reference),
                };
                let out = unit.step(&lower, reference, dt)?;
                upward.push(out.upward.unwrap_or(0.0));
                level_out.push(out.output);
            }
            lower = upward;
            outputs.push(level_out);
        }
        for (k, matrix) in self.down_wiring.iter().enumerate() {
            for (i, row) in matrix.iter().enumerate() {
                let r: f64 = row.iter().zip(&outputs[k + 1]).map(|(w, o)| w * o).sum();
                self.levels[k][i].reference = r;
            }
        }
        self.tick += 1;
        let act = self.levels[0].iter().any(|u| u.mode() != Mode::Imagination);
        Ok(HierarchyOutput {
            actions: outputs.swap_remove(0),
            act,
        })
    }

    fn perturb_gains(&mut self, scale: f64, seed: u64) {
        let normal = Normal::new(0.0, scale).expect("scale validated by caller");
        let mut r = rng::seeded(seed);
        for unit in self.levels.iter_mut().flatten() {
            *unit.output_fn.gain_mut() += normal.sample(&mut r);
        }
    }

    pub fn set_mode_all(&mut self, mode: Mode) {
        for unit in self.levels.iter_mut().flatten() {
            unit.switches = SwitchState::for_mode(mode);
        }
    }
}

/// Functional form of [`Hierarchy::step`].
pub fn hierarchy_step(
    h: &Hierarchy,
    observation: &[f64],
    dt: f64,
) -> Result<(HierarchyOutput, Hierarchy), HpctError> {
    let mut next = h.clone();
    let out = next.step(observation, dt)?;
    Ok((out, next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitSnapshot {
    pub id: String,
    pub mode: Mode,
    pub reference: f64,
    pub perceptual: f64,
    pub error: f64,
    pub output: f64,
    pub upward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub tick: u64,
    pub units: Vec<UnitSnapshot>,
    pub acted: bool,
    pub world_fingerprint: u64,
    pub intrinsic_error: f64,
}

/// Runs `h` against a world with a one-dimensional continuous action for
/// `ticks` ticks. The world is stepped only on ticks where the hierarchy
/// acts.
pub fn drive(
    h: &mut Hierarchy,
    world: &WorldTransform,
    state: &mut WorldState,
    ticks: usize,
    dt: f64,
) -> Result<Vec<TickRecord>, HpctError> {
    let ActionSpace::Continuous(space) = world.action_space() else {
        return Err(HpctError::Invalid("drive needs a continuous action space".into()));
    };
    let mut records = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        let obs = world.observe(state).to_vec();
        let out = h.step(&obs, dt)?;
        if out.act {
            let u = out.actions[0];
            let u = if u.is_finite() { u.clamp(space.low[0], space.high[0]) } else { u };
            *state = world.step(state, &Action::Continuous(u))?;
        }
        records.push(TickRecord {
            tick: h.tick(),
            units: h
                .units()
                .map(|u| UnitSnapshot {
                    id: u.id.clone(),
                    mode: u.mode(),
                    reference: u.reference,
                    perceptual: u.perceptual,
                    error: u.error,
                    output: u.last_output,
                    upward: u.last_upward,
                })
                .collect(),
            acted: out.act,
            world_fingerprint: state.fingerprint(),
            intrinsic_error: h.intrinsic_error(),
        });
    }
    Ok(records)
}

/// Scores a candidate hierarchy by its mean intrinsic error over a window.
pub trait ReorgEnvironment {
    fn evaluate(&self, h: &Hierarchy, window: usize) -> f64;
}

impl<F: Fn(&Hierarchy, usize) -> f64> ReorgEnvironment for F {
    fn evaluate(&self, h: &Hierarchy, window: usize) -> f64 {
        self(h, window)
    }
}

/// Fresh episode from the world's initial state; errors past `1e150` are
/// capped so that diverging candidates still compare.
#[derive(Debug, Clone)]
pub struct WorldEpisode {
    pub world: WorldTransform,
    pub dt: f64,
}

const INTRINSIC_CAP: f64 = 1e150;

impl ReorgEnvironment for WorldEpisode {
    fn evaluate(&self, h: &Hierarchy, window: usize) -> f64 {
        let mut h = h.clone();
        let mut state = self.world.initial_state();
        match drive(&mut h, &self.world, &mut state, window, self.dt) {
            Ok(records) => {
                let total: f64 = records.iter().map(|r| r.intrinsic_error.min(INTRINSIC_CAP)).sum();
                if total.is_finite() {
                    total / window as f64
                } else {
                    INTRINSIC_CAP
                }
            }
            Err(_) => INTRINSIC_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReorgOutcome {
    pub perturbed: bool,
    pub accepted: bool,
    pub error_before: f64,
    pub error_after: f64,
}

/// One perturb/evaluate/keep-or-revert cycle on the output gains.
pub fn reorganize_step<E: ReorgEnvironment + ?Sized>(
    h: &Hierarchy,
    env: &E,
    eval_window: usize,
    perturb_scale: f64,
    seed: u64,
) -> Result<(Hierarchy, ReorgOutcome), HpctError> {
    if !(perturb_scale > 0.0 && perturb_scale.is_finite()) {
        return Err(HpctError::Invalid("perturb_scale must be > 0".into()));
    }
    if eval_window == 0 {
        return Err(HpctError::Invalid("eval_window must be ≥ 1".into()));
    }
    let before = env.evaluate(h, eval_window);
    Ok(reorganize_from(h, before, env, eval_window, perturb_scale, seed))
}

fn reorganize_from<E: ReorgEnvironment + ?Sized>(
    h: &Hierarchy,
    before: f64,
    env: &E,
    eval_window: usize,
    perturb_scale: f64,
    seed: u64,
) -> (Hierarchy, ReorgOutcome) {
    if before == 0.0 {
        let outcome = ReorgOutcome {
            perturbed: false,
            accepted: false,
            error_before: 0.0,
            error_after: 0.0,
        };
        return (h.clone(), outcome);
    }
    let mut candidate = h.clone();
    candidate.perturb_gains(perturb_scale, seed);
    let after = env.evaluate(&candidate, eval_window);
    let accepted = after < before;
    let outcome = ReorgOutcome {
        perturbed: true,
        accepted,
        error_before: before,
        error_after: after,
    };
    (if accepted { candidate } else { h.clone() }, outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReorgRun {
    pub hierarchy: Hierarchy,
    pub initial_error: f64,
    /// Intrinsic error after each accepted perturbation.
    pub accepted_errors: Vec<f64>,
    pub steps: usize,
    /// Step count at which the error first fell below the target fraction.
    pub recovered_at: Option<usize>,
}

/// Runs `max_steps` rounds of [`reorganize_step`], noting the first step at
/// which the intrinsic error is below `target_fraction` of its start value.
pub fn reorganize<E: ReorgEnvironment + ?Sized>(
    h: &Hierarchy,
    env: &E,
    eval_window: usize,
    perturb_scale: f64,
    seed: u64,
    max_steps: usize,
    target_fraction: f64,
) -> Result<ReorgRun, HpctError> {
    if !(perturb_scale > 0.0 && perturb_scale.is_finite()) {
        return Err(HpctError::Invalid("perturb_scale must be > 0".into()));
    }
    if eval_window == 0 {
        return Err(HpctError::Invalid("eval_window must be ≥ 1".into()));
    }
    let initial_error = env.evaluate(h, eval_window);
    let mut current = h.clone();
    let mut current_error = initial_error;
    let mut accepted_errors = vec![];
    let mut recovered_at = (initial_error == 0.0).then_some(0);
    let mut steps = 0;
    while steps < max_steps {
        let step_seed = rng::derive_seed(seed, steps as u64);
        let (next, outcome) = reorganize_from(&current, current_error, env, eval_window, perturb_scale, step_seed);
        steps += 1;
        if outcome.accepted {
            current = next;
            current_error = outcome.error_after;
            accepted_errors.push(current_error);
        }
        if recovered_at.is_none() && current_error < target_fraction * initial_error {
            recovered_at = Some(steps);
        }
    }
    Ok(ReorgRun {
        hierarchy: current,
        initial_error,
        accepted_errors,
        steps,
        recovered_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(mode: Mode) -> PerceptualControlUnit {
        PerceptualControlUnit::new("u", vec![1.0], 2.0).with_mode(mode)
    }

    #[test]
    fn mode_table() {
        use SwitchPosition::*;
        let cases = [
            ((Vertical, Vertical), Mode::Control),
            ((NonVertical, Vertical), Mode::PassiveObservation),
            ((Vertical, NonVertical), Mode::Automatic),
            ((NonVertical, NonVertical), Mode::Imagination),
        ];
        for ((memory, perceptual), mode) in cases {
            assert_eq!(SwitchState { memory, perceptual }.mode(), mode);
            assert_eq!(SwitchState::for_mode(mode), SwitchState { memory, perceptual });
        }
    }

    #[test]
    fn control_mode_step() {
        let (out, u) = unit_step(&unit(Mode::Control), &[7.0], ReferenceInput::Value(10.0), 1.0).unwrap();
        assert_eq!(out, UnitOutput { output: 6.0, upward: Some(7.0) });
        assert_eq!(u.error, 3.0);
    }

    #[test]
    fn passive_mode_step() {
        let (out, _) =
            unit_step(&unit(Mode::PassiveObservation), &[7.0], ReferenceInput::Value(10.0), 1.0).unwrap();
        assert_eq!(out, UnitOutput { output: 0.0, upward: Some(7.0) });
    }

    #[test]
    fn passive_mode_records_into_memory() {
        let (_, u) =
            unit_step(&unit(Mode::PassiveObservation), &[7.5], ReferenceInput::Address(3), 1.0).unwrap();
        assert_eq!(u.memory_get(3), Some(7.5));
    }

    #[test]
    fn automatic_mode_step() {
        let (out, _) = unit_step(&unit(Mode::Automatic), &[7.0], ReferenceInput::Value(10.0), 1.0).unwrap();
        assert_eq!(out, UnitOutput { output: 6.0, upward: None });
    }

    #[test]
    fn imagination_mode_step() {
        let mut u = unit(Mode::Imagination);
        u.memory_put(9, 4.0);
        let (out, _) = unit_step(&u, &[7.0], ReferenceInput::Address(9), 1.0).unwrap();
        assert_eq!(out, UnitOutput { output: 0.0, upward: Some(4.0) });
    }

    #[test]
    fn memory_miss() {
        let err = unit_step(&unit(Mode::Control), &[1.0], ReferenceInput::Address(5), 1.0).unwrap_err();
        assert_eq!(err, HpctError::MemoryMiss { unit: "u".into(), address: 5 });
        assert!(unit_step(&unit(Mode::Imagination), &[1.0], ReferenceInput::Address(5), 1.0).is_err());
    }

    #[test]
    fn memory_semantics() {
        let mut m = MemoryStore::default();
        m.put(1, 3.5);
        assert_eq!(m.get(1), Some(3.5));
        assert_eq!(m.get(2), None);
        m.put(1, 1.0);
        m.put(1, 2.0);
        assert_eq!(m.get(1), Some(2.0));
    }

    fn two_level() -> Hierarchy {
        let lower = PerceptualControlUnit::new("lower", vec![1.0], 1.0);
        let upper = PerceptualControlUnit::new("upper", vec![1.0], 1.0).with_reference(12.0);
        Hierarchy::new(vec![vec![lower], vec![upper]], vec![vec![vec![1.0]]]).unwrap()
    }

    #[test]
    fn reference_latency_is_one_tick() {
        let mut h = two_level();
        // Upper: r=12, p=lower perception=7 → output 5.
        h.step(&[7.0], 1.0).unwrap();
        assert_eq!(h.unit(1, 0).last_output, 5.0);
        assert_eq!(h.unit(0, 0).reference, 5.0);
        h.step(&[7.0], 1.0).unwrap();
        assert_eq!(h.unit(0, 0).error, 5.0 - 7.0);
    }

    #[test]
    fn zero_error_gives_zero_actions() {
        let lower = PerceptualControlUnit::new("a", vec![1.0, 0.0], 3.0).with_reference(2.0);
        let lower2 = PerceptualControlUnit::new("b", vec![0.0, 1.0], 3.0).with_reference(-1.0);
        let mut h = Hierarchy::new(vec![vec![lower, lower2]], vec![]).unwrap();
        let out = h.step(&[2.0, -1.0], 1.0).unwrap();
        assert_eq!(out.actions, vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_checks() {
        let mut h = two_level();
        assert!(matches!(h.step(&[1.0, 2.0], 1.0), Err(HpctError::DimensionMismatch { .. })));
        let lower = PerceptualControlUnit::new("lower", vec![1.0], 1.0);
        let upper = PerceptualControlUnit::new("upper", vec![1.0, 1.0], 1.0);
        assert!(Hierarchy::new(vec![vec![lower], vec![upper]], vec![vec![vec![1.0]]]).is_err());
    }

    #[test]
    fn layering_holds() {
        let h = two_level();
        assert!(h.is_strictly_layered());
        assert_eq!(h.edges().len(), 2);
    }

    #[test]
    fn reorganisation_no_op_at_zero_error() {
        let h = two_level();
        let env = |_: &Hierarchy, _: usize| 0.0;
        let (next, outcome) = reorganize_step(&h, &env, 10, 0.5, 1).unwrap();
        assert_eq!(next, h);
        assert!(!outcome.perturbed);
    }

    #[test]
    fn reorganisation_reverts_worse_candidates() {
        let h = Hierarchy::single(PerceptualControlUnit::new("u", vec![1.0], 1.0));
        // Any gain other than exactly 1.0 scores worse.
        let env = |h: &Hierarchy, _: usize| 1.0 + (h.unit(0, 0).output_fn.gain() - 1.0).abs();
        for seed in 0..20 {
            let (next, outcome) = reorganize_step(&h, &env, 5, 0.3, seed).unwrap();
            assert!(outcome.perturbed && !outcome.accepted);
            assert_eq!(next.unit(0, 0).output_fn.gain(), 1.0);
        }
    }

    #[test]
    fn reorganisation_rejects_bad_parameters() {
        let h = two_level();
        let env = |_: &Hierarchy, _: usize| 1.0;
        assert!(reorganize_step(&h, &env, 0, 0.5, 1).is_err());
        assert!(reorganize_step(&h, &env, 5, 0.0, 1).is_err());
    }
}
