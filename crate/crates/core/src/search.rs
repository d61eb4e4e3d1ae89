//! Control framed as search: pick the candidate whose (real or simulated)
//! consequence is closest to what is intended.
//!
//! Three strategies are provided. Exhaustive enumeration finds the global
//! minimum of a discrete space. Seeded random sampling without replacement
//! is what remains when nothing about the consequence can be modelled.
//! Finite-difference gradient descent works over continuous boxes, and
//! stalls in whichever basin it starts in.
//!
//! An [`Objective`] counts every evaluation it performs; a search never
//! spends more than its [`SearchBudget`].

use std::cmp::Ordering;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward_model::{ModelError, Predictor};
use crate::rng;
use crate::world::Action;

/// Relative finite-difference step, as a fraction of each box width.
pub const FD_EPSILON: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("candidate space is empty")]
    EmptySpace,
    #[error("exhaustive search needs {needed} evaluations but the budget allows {available}")]
    BudgetExceeded { needed: usize, available: usize },
    #[error("objective returned {value} (must be finite and non-negative)")]
    InvalidObjective { value: f64 },
    #[error("invalid search setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A discrete symbol drawn from a finite alphabet `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u32);

impl Symbol {
    pub fn alphabet(size: u32) -> Vec<Symbol> {
        (0..size).map(Symbol).collect()
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Mismatch between an intended and a predicted/observed outcome.
///
/// Reals and vectors use squared Euclidean distance, symbols use 0/1.
pub trait Distance {
    fn distance(&self, other: &Self) -> f64;
}

impl Distance for f64 {
    fn distance(&self, other: &Self) -> f64 {
        (self - other).powi(2)
    }
}

impl Distance for Vec<f64> {
    fn distance(&self, other: &Self) -> f64 {
        squared_euclidean(self, other)
    }
}

impl Distance for Symbol {
    fn distance(&self, other: &Self) -> f64 {
        if self == other {
            0.0
        } else {
            1.0
        }
    }
}

impl Distance for i64 {
    fn distance(&self, other: &Self) -> f64 {
        ((self - other) as f64).powi(2)
    }
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Axis-aligned box with a grid resolution per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpace {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub step: Vec<f64>,
}

impl BoxSpace {
    pub fn new(low: Vec<f64>, high: Vec<f64>, step: Vec<f64>) -> Result<Self, SearchError> {
        let d = low.len();
        if d == 0 || high.len() != d || step.len() != d {
            return Err(SearchError::InvalidSetup(
                "box bounds and steps must share a non-zero dimension".into(),
            ));
        }
        for i in 0..d {
            if !(low[i].is_finite() && high[i].is_finite() && low[i] < high[i]) {
                return Err(SearchError::InvalidSetup(format!(
                    "dimension {i}: need finite low < high, got [{}, {}]",
                    low[i], high[i]
                )));
            }
            if !(step[i] > 0.0 && step[i].is_finite()) {
                return Err(SearchError::InvalidSetup(format!(
                    "dimension {i}: step must be positive"
                )));
            }
        }
        Ok(Self { low, high, step })
    }

    pub fn interval(low: f64, high: f64, step: f64) -> Result<Self, SearchError> {
        Self::new(vec![low], vec![high], vec![step])
    }

    pub fn dimension(&self) -> usize {
        self.low.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.high[i] - self.low[i]
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| v.clamp(self.low[i], self.high[i]))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x
                .iter()
                .enumerate()
                .all(|(i, v)| *v >= self.low[i] && *v <= self.high[i])
    }

    /// Grid points `low + k·step` (plus `high`) in row-major order.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dimension())
            .map(|i| {
                let n = (self.width(i) / self.step[i]).floor() as usize;
                let mut axis: Vec<f64> = (0..=n).map(|k| self.low[i] + k as f64 * self.step[i]).collect();
                if axis.last().is_some_and(|v| *v < self.high[i]) {
                    axis.push(self.high[i]);
                }
                axis
            })
            .collect();
        let mut points = vec![vec![]];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// The set of actions available in a world.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSpace {
    Discrete(Vec<Action>),
    Continuous(BoxSpace),
}

impl ActionSpace {
    pub fn dimension(&self) -> usize {
        match self {
            ActionSpace::Discrete(_) => 1,
            ActionSpace::Continuous(b) => b.dimension(),
        }
    }

    pub fn contains(&self, action: &Action) -> bool {
        match (self, action) {
            (ActionSpace::Discrete(list), a) => list.contains(a),
            (ActionSpace::Continuous(b), Action::Continuous(v)) => b.contains(&[*v]),
            _ => false,
        }
    }
}

type EvalFn<'a, C> = Box<dyn FnMut(&C) -> Result<f64, SearchError> + 'a>;

/// Error functional over candidates plus a running evaluation counter.
pub struct Objective<'a, C: ?Sized> {
    eval_fn: EvalFn<'a, C>,
    evaluations_used: usize,
}

impl<'a, C: ?Sized> Objective<'a, C> {
    pub fn new(mut f: impl FnMut(&C) -> f64 + 'a) -> Self {
        Self::fallible(move |c| Ok(f(c)))
    }

    pub fn fallible(f: impl FnMut(&C) -> Result<f64, SearchError> + 'a) -> Self {
        Self {
            eval_fn: Box::new(f),
            evaluations_used: 0,
        }
    }

    pub fn evaluate(&mut self, candidate: &C) -> Result<f64, SearchError> {
        self.evaluations_used += 1;
        let value = (self.eval_fn)(candidate)?;
        if !value.is_finite() || value < 0.0 {
            return Err(SearchError::InvalidObjective { value });
        }
        Ok(value)
    }

    pub fn evaluations_used(&self) -> usize {
        self.evaluations_used
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_evaluations: usize,
    /// A candidate with error at or below this counts as converged.
    pub tolerance: f64,
}

impl SearchBudget {
    pub fn new(max_evaluations: usize, tolerance: f64) -> Result<Self, SearchError> {
        if max_evaluations == 0 {
            return Err(SearchError::InvalidSetup("max_evaluations must be ≥ 1".into()));
        }
        if !(tolerance >= 0.0) {
            return Err(SearchError::InvalidSetup("tolerance must be ≥ 0".into()));
        }
        Ok(Self {
            max_evaluations,
            tolerance,
        })
    }

    pub fn evaluations(max_evaluations: usize) -> Self {
        Self {
            max_evaluations: max_evaluations.max(1),
            tolerance: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Exhausted,
    Tolerance,
    Budget,
    /// Zero gradient or backtracking step shrank below resolution.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<C> {
    pub best_candidate: C,
    /// Position of the best candidate in the discrete candidate list.
    pub best_index: Option<usize>,
    pub best_error: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub tie_broken: bool,
    pub stop: StopReason,
    /// Running best error after each evaluation.
    pub best_so_far: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Exhaustive,
    Random { seed: u64 },
}

/// Tracks the incumbent of a discrete search with lowest-index tie-breaking.
struct Incumbent {
    index: usize,
    error: f64,
    tie: bool,
    history: Vec<f64>,
}

impl Incumbent {
    fn new() -> Self {
        Self {
            index: usize::MAX,
            error: f64::INFINITY,
            tie: false,
            history: vec![],
        }
    }

    fn offer(&mut self, index: usize, error: f64) {
        match error.partial_cmp(&self.error) {
            Some(Ordering::Less) => {
                self.index = index;
                self.error = error;
                self.tie = false;
            }
            Some(Ordering::Equal) => {
                self.tie = true;
                self.index = self.index.min(index);
            }
            _ => {}
        }
        self.history.push(self.error);
    }

    fn finish<C: Clone>(
        self,
        candidates: &[C],
        evaluations: usize,
        tolerance: f64,
        stop: StopReason,
    ) -> SearchResult<C> {
        SearchResult {
            best_candidate: candidates[self.index].clone(),
            best_index: Some(self.index),
            best_error: self.error,
            evaluations,
            converged: self.error <= tolerance,
            tie_broken: self.tie,
            stop,
            best_so_far: self.history,
        }
    }
}

/// Global argmin over a discrete candidate list. Ties go to the lowest index.
pub fn argmin_exhaustive<C: Clone>(
    candidates: &[C],
    obj: &mut Objective<'_, C>,
    budget: &SearchBudget,
) -> Result<SearchResult<C>, SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::EmptySpace);
    }
    if candidates.len() > budget.max_evaluations {
        return Err(SearchError::BudgetExceeded {
            needed: candidates.len(),
            available: budget.max_evaluations,
        });
    }
    let mut best = Incumbent::new();
    for (i, c) in candidates.iter().enumerate() {
        let err = obj.evaluate(c)?;
        best.offer(i, err);
    }
    Ok(best.finish(candidates, candidates.len(), budget.tolerance, StopReason::Exhausted))
}

/// Seeded random search: candidates are visited in a uniform random order
/// without repetition until one meets the tolerance or the budget runs out.
pub fn argmin_random<C: Clone>(
    candidates: &[C],
    obj: &mut Objective<'_, C>,
    budget: &SearchBudget,
    seed: u64,
) -> Result<SearchResult<C>, SearchError> {
    if candidates.is_empty() {
        return Err(SearchError::EmptySpace);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(&mut rng::seeded(seed));

    let mut best = Incumbent::new();
    let mut evaluations = 0;
    let mut stop = StopReason::Exhausted;
    for &i in &order {
        if evaluations == budget.max_evaluations {
            stop = StopReason::Budget;
            break;
        }
        let err = obj.evaluate(&candidates[i])?;
        evaluations += 1;
        best.offer(i, err);
        if err <= budget.tolerance {
            stop = StopReason::Tolerance;
            break;
        }
    }
    Ok(best.finish(candidates, evaluations, budget.tolerance, stop))
}

pub fn search_discrete<C: Clone>(
    candidates: &[C],
    obj: &mut Objective<'_, C>,
    budget: &SearchBudget,
    strategy: Strategy,
) -> Result<SearchResult<C>, SearchError> {
    match strategy {
        Strategy::Exhaustive => argmin_exhaustive(candidates, obj, budget),
        Strategy::Random { seed } => argmin_random(candidates, obj, budget, seed),
    }
}

/// Central-difference gradient with per-dimension step `FD_EPSILON × width`.
/// Probes are clamped to the box and the quotient uses the actual spacing.
pub fn finite_difference_gradient(
    space: &BoxSpace,
    obj: &mut Objective<'_, [f64]>,
    x: &[f64],
) -> Result<Vec<f64>, SearchError> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let eps = FD_EPSILON * space.width(i);
        let hi = (x[i] + eps).min(space.high[i]);
        let lo = (x[i] - eps).max(space.low[i]);
        probe[i] = hi;
        let f_hi = obj.evaluate(&probe)?;
        probe[i] = lo;
        let f_lo = obj.evaluate(&probe)?;
        probe[i] = x[i];
        grad.push((f_hi - f_lo) / (hi - lo));
    }
    Ok(grad)
}

/// Projected gradient descent along the normalised finite-difference
/// gradient, halving the step whenever a move fails to decrease the error
/// and doubling it after a successful move.
pub fn argmin_gradient(
    space: &BoxSpace,
    obj: &mut Objective<'_, [f64]>,
    budget: &SearchBudget,
    start: &[f64],
    step_init: f64,
) -> Result<SearchResult<Vec<f64>>, SearchError> {
    if start.len() != space.dimension() {
        return Err(SearchError::InvalidSetup(format!(
            "start has dimension {}, box has {}",
            start.len(),
            space.dimension()
        )));
    }
    if !(step_init > 0.0 && step_init.is_finite()) {
        return Err(SearchError::InvalidSetup("step_init must be > 0".into()));
    }
    let d = space.dimension();
    let min_step = 1e-12 * (0..d).map(|i| space.width(i)).fold(0.0, f64::max);
    let used_before = obj.evaluations_used();
    let spent = |obj: &Objective<'_, [f64]>| obj.evaluations_used() - used_before;

    let mut x = space.clamp(start);
    let mut fx = obj.evaluate(&x)?;
    let mut history = vec![fx];
    let mut step = step_init;

    let stop = 'outer: loop {
        if fx <= budget.tolerance {
            break StopReason::Tolerance;
        }
        if budget.max_evaluations - spent(obj) < 2 * d + 1 {
            break StopReason::Budget;
        }
        let grad = finite_difference_gradient(space, obj, &x)?;
        history.extend(std::iter::repeat_n(fx, 2 * d));
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 {
            break StopReason::Stationary;
        }
        loop {
            if spent(obj) >= budget.max_evaluations {
                break 'outer StopReason::Budget;
            }
            let candidate: Vec<f64> = space.clamp(
                &x.iter()
                    .zip(&grad)
                    .map(|(xi, gi)| xi - step * gi / norm)
                    .collect::<Vec<_>>(),
            );
            if candidate == x {
                break 'outer StopReason::Stationary;
            }
            let fc = obj.evaluate(&candidate)?;
            if fc < fx {
                x = candidate;
                fx = fc;
                history.push(fx);
                step *= 2.0;
                break;
            }
            history.push(fx);
            step *= 0.5;
            if step < min_step {
                break 'outer StopReason::Stationary;
            }
        }
    };

    Ok(SearchResult {
        best_candidate: x,
        best_index: None,
        best_error: fx,
        evaluations: spent(obj),
        converged: matches!(stop, StopReason::Tolerance | StopReason::Stationary),
        tie_broken: false,
        stop,
        best_so_far: history,
    })
}

/// Chooses the candidate whose predicted consequence under `model` is
/// closest to `intention`. Only the model is consulted; nothing is executed.
pub fn plan_with_forward_model<C, O, M>(
    model: &M,
    intention: &O,
    candidates: &[C],
    budget: &SearchBudget,
    strategy: Strategy,
) -> Result<SearchResult<C>, SearchError>
where
    C: Clone,
    O: Distance,
    M: Predictor<C, O> + ?Sized,
{
    let mut obj = Objective::fallible(|c: &C| {
        let predicted = model.predict(c)?;
        Ok(intention.distance(&predicted))
    });
    search_discrete(candidates, &mut obj, budget, strategy)
}
