//! Perceptual control toolkit.
//!
//! Negative-feedback loops, hierarchies of perceptual control units with
//! memory switches, control framed as search over candidate actions,
//! forward models used for planning and for analysis-by-synthesis
//! inference, two-agent signalling with self-as-other models, and a
//! needs-driven motivation layer. Everything is deterministic given its
//! inputs and seeds.

// `!(x > 0.0)` style checks are intended: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod communication;
pub mod control;
pub mod forward_model;
pub mod hpct;
pub mod motivation;
pub mod rng;
pub mod search;
pub mod world;

pub use communication::{AgentTransforms, Binding, CommAgent, CommEpisode, CommError};
pub use control::{
    ClosedLoopSpec, ControlError, Divergence, FirstOrderPlant, LoopSignals, LoopTrace, PidParams,
    PidState, Plant,
};
pub use forward_model::{AffineModel, ExperienceLog, Inversion, ModelError, Predictor, TabularModel};
pub use hpct::{Hierarchy, HpctError, Mode, PerceptualControlUnit, SwitchPosition, SwitchState};
pub use motivation::{Appraisal, DesireSet, EnthusiasmPolicy, Need, NeedKind, NeedStack};
pub use search::{
    Distance, Objective, SearchBudget, SearchError, SearchResult, Strategy, Symbol,
};
pub use world::{Action, Observation, StateValue, WorldError, WorldState, WorldTransform};
