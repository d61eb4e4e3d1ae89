//! Needs → desires → intentions, with appraisal signals.
//!
//! Needs deplete linearly and are topped up by satisfaction events. A need
//! whose deficit exceeds a threshold becomes a desire with urgency
//! `weight·|deficit|`; the most urgent desire supplies the current
//! intention. Appraisal reports valence (negative weighted squared error)
//! and arousal (normalised effort). Enthusiasm scales both the search
//! budget and the loop gain with urgency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::Symbol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotivationError {
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("unknown need {0:?}")]
    UnknownNeed(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeedKind {
    Physical,
    Psychological,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Need {
    pub name: String,
    pub kind: NeedKind,
    pub level: f64,
    pub setpoint: f64,
    pub depletion_rate: f64,
    pub weight: f64,
    /// The outcome this need asks for when it becomes a desire.
    pub intention: Symbol,
    #[serde(default = "neg_inf")]
    pub min_level: f64,
    #[serde(default = "pos_inf")]
    pub max_level: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

impl Need {
    pub fn new(name: impl Into<String>, kind: NeedKind, setpoint: f64, intention: Symbol) -> Self {
        Self {
            name: name.into(),
            kind,
            level: setpoint,
            setpoint,
            depletion_rate: 0.0,
            weight: 1.0,
            intention,
            min_level: f64::NEG_INFINITY,
            max_level: f64::INFINITY,
        }
    }

    pub fn with_depletion(mut self, rate: f64) -> Self {
        self.depletion_rate = rate;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.level = level;
        self
    }

    pub fn with_bounds(mut self, min_level: f64, max_level: f64) -> Self {
        self.min_level = min_level;
        self.max_level = max_level;
        self
    }

    pub fn deficit(&self) -> f64 {
        self.setpoint - self.level
    }

    pub fn urgency(&self) -> f64 {
        self.weight * self.deficit().abs()
    }

    fn validate(&self) -> Result<(), MotivationError> {
        let finite = [self.level, self.setpoint, self.depletion_rate, self.weight];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(MotivationError::NonFinite(format!("need {}", self.name)));
        }
        if self.weight < 0.0 {
            return Err(MotivationError::InvalidParameter(format!(
                "need {} has negative weight",
                self.name
            )));
        }
        if self.min_level > self.max_level {
            return Err(MotivationError::InvalidParameter(format!(
                "need {} has min_level > max_level",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeedStack {
    needs: Vec<Need>,
}

impl NeedStack {
    pub fn new(needs: Vec<Need>) -> Result<Self, MotivationError> {
        for need in &needs {
            need.validate()?;
        }
        Ok(Self { needs })
    }

    pub fn needs(&self) -> &[Need] {
        &self.needs
    }

    pub fn get(&self, name: &str) -> Option<&Need> {
        self.needs.iter().find(|n| n.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Need> {
        self.needs.iter_mut().find(|n| n.name == name)
    }

    /// `Σ weight·deficit²`; equals `−valence` of [`NeedStack::appraise`].
    pub fn intrinsic_error(&self) -> f64 {
        self.needs
            .iter()
            .map(|n| n.weight * n.deficit() * n.deficit())
            .sum()
    }

    pub fn deficits(&self) -> Vec<f64> {
        self.needs.iter().map(Need::deficit).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.needs.iter().map(|n| n.weight).collect()
    }

    pub fn appraise(&self, effort_used: usize, policy: &EnthusiasmPolicy) -> Appraisal {
        appraise(&self.deficits(), &self.weights(), effort_used, policy)
    }

    pub fn all_satisfied(&self) -> bool {
        self.needs.iter().all(|n| n.deficit() == 0.0)
    }
}

/// `level' = level − depletion_rate·dt + satisfaction`, clamped to each
/// need's bounds. Satisfaction is keyed by need name.
pub fn update_needs(
    needs: &NeedStack,
    satisfaction: &BTreeMap<String, f64>,
    dt: f64,
) -> Result<NeedStack, MotivationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(MotivationError::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    for (name, delta) in satisfaction {
        if !delta.is_finite() {
            return Err(MotivationError::NonFinite(format!("satisfaction for {name}")));
        }
        if needs.get(name).is_none() {
            return Err(MotivationError::UnknownNeed(name.clone()));
        }
    }
    let mut next = needs.clone();
    for need in &mut next.needs {
        let delta = satisfaction.get(&need.name).copied().unwrap_or(0.0);
        need.level = (need.level - need.depletion_rate * dt + delta).clamp(need.min_level, need.max_level);
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Desire {
    pub need: String,
    pub outcome: Symbol,
    pub urgency: f64,
}

/// Active desires, most urgent first (ties by need name).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesireSet {
    desires: Vec<Desire>,
}

impl DesireSet {
    pub fn from_desires(mut desires: Vec<Desire>) -> Self {
        desires.sort_by(|a, b| {
            b.urgency
                .total_cmp(&a.urgency)
                .then_with(|| a.need.cmp(&b.need))
        });
        Self { desires }
    }

    pub fn desires(&self) -> &[Desire] {
        &self.desires
    }

    pub fn is_empty(&self) -> bool {
        self.desires.is_empty()
    }

    pub fn len(&self) -> usize {
        self.desires.len()
    }
}

pub fn derive_desires(needs: &NeedStack, threshold: f64) -> DesireSet {
    DesireSet::from_desires(
        needs
            .needs
            .iter()
            .filter(|n| n.deficit().abs() > threshold)
            .map(|n| Desire {
                need: n.name.clone(),
                outcome: n.intention,
                urgency: n.urgency(),
            })
            .collect(),
    )
}

/// The most urgent desire; ties go to the lexicographically first name.
pub fn select_intention(desires: &DesireSet) -> Option<&Desire> {
    desires.desires.first()
}

/// Reverse lookup from an inferred intention to the needs that would
/// produce it. This is one possible reading of "comprehension", not a
/// settled mechanism.
pub fn comprehend(needs: &NeedStack, intention: Symbol) -> Vec<&str> {
    needs
        .needs
        .iter()
        .filter(|n| n.intention == intention)
        .map(|n| n.name.as_str())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Appraisal {
    /// `−Σ wᵢ·eᵢ²`, never positive.
    pub valence: f64,
    /// Normalised effort in `[0, 1]`.
    pub arousal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnthusiasmPolicy {
    pub base_budget: usize,
    pub base_gain: f64,
    pub arousal_coupling: f64,
}

impl EnthusiasmPolicy {
    pub fn new(base_budget: usize, base_gain: f64, arousal_coupling: f64) -> Result<Self, MotivationError> {
        if base_budget == 0 {
            return Err(MotivationError::InvalidParameter("base_budget must be ≥ 1".into()));
        }
        if !base_gain.is_finite() || !(arousal_coupling >= 0.0 && arousal_coupling.is_finite()) {
            return Err(MotivationError::InvalidParameter(
                "base_gain must be finite and arousal_coupling ≥ 0".into(),
            ));
        }
        Ok(Self {
            base_budget,
            base_gain,
            arousal_coupling,
        })
    }
}

pub fn appraise(loop_errors: &[f64], weights: &[f64], effort_used: usize, policy: &EnthusiasmPolicy) -> Appraisal {
    let weighted: f64 = loop_errors
        .iter()
        .enumerate()
        .map(|(i, e)| weights.get(i).copied().unwrap_or(1.0) * e * e)
        .sum();
    let capacity = policy.base_budget as f64 * policy.arousal_coupling;
    let arousal = if capacity > 0.0 {
        (effort_used as f64 / capacity).min(1.0)
    } else if effort_used > 0 {
        1.0
    } else {
        0.0
    };
    Appraisal {
        valence: -weighted,
        arousal,
    }
}

/// `(max(1, ⌈base_budget·m⌉), base_gain·m)` with `m = 1 + coupling·urgency`.
pub fn enthusiasm_to_effort(policy: &EnthusiasmPolicy, urgency: f64) -> Result<(usize, f64), MotivationError> {
    if !(urgency >= 0.0 && urgency.is_finite()) {
        return Err(MotivationError::InvalidParameter(format!(
            "urgency must be finite and ≥ 0, got {urgency}"
        )));
    }
    let multiplier = 1.0 + policy.arousal_coupling * urgency;
    let budget = (policy.base_budget as f64 * multiplier).ceil().max(1.0) as usize;
    Ok((budget, policy.base_gain * multiplier))
}
