//! Forward (generative) models: an agent's estimate of how some transform
//! maps inputs to outputs.
//!
//! Two kinds are supported: tables over discrete inputs and affine maps over
//! real vectors. Either can be fitted from logged experience. Tables can be
//! inverted exactly when the mapping is injective at the queried output;
//! otherwise the cause is recovered by searching over candidate inputs for
//! the best-matching prediction (analysis-by-synthesis, [`infer_cause`]).

use std::collections::BTreeMap;
use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::{
    argmin_gradient, search_discrete, BoxSpace, Distance, Objective, SearchBudget, SearchError,
    SearchResult, Strategy,
};

/// Eigenvalues of the normal matrix below this fraction of the largest are
/// treated as zero when checking an affine fit for rank.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input {0} is not covered by the model")]
    UnknownInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("experience log is empty")]
    EmptyLog,
    #[error("degenerate fit: rank {rank} < {needed}; unconstrained directions over [weights…, bias]: {directions:?}")]
    DegenerateFit {
        rank: usize,
        needed: usize,
        directions: Vec<Vec<f64>>,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Anything that maps an input to a predicted output.
pub trait Predictor<I: ?Sized, O> {
    fn predict(&self, input: &I) -> Result<O, ModelError>;
}

impl<I: ?Sized, O, F> Predictor<I, O> for F
where
    F: Fn(&I) -> Result<O, ModelError>,
{
    fn predict(&self, input: &I) -> Result<O, ModelError> {
        self(input)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience<I, O> {
    pub input: I,
    pub output: O,
    pub tick: u64,
}

/// Append-only record of observed (input, output) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceLog<I, O> {
    pairs: Vec<Experience<I, O>>,
}

impl<I, O> Default for ExperienceLog<I, O> {
    fn default() -> Self {
        Self { pairs: Vec::new() }
    }
}

impl<I, O> ExperienceLog<I, O> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, input: I, output: O, tick: u64) {
        self.pairs.push(Experience {
            input,
            output,
            tick,
        });
    }

    pub fn pairs(&self) -> &[Experience<I, O>] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl<I, O> FromIterator<(I, O)> for ExperienceLog<I, O> {
    fn from_iter<T: IntoIterator<Item = (I, O)>>(iter: T) -> Self {
        let mut log = Self::new();
        for (tick, (i, o)) in iter.into_iter().enumerate() {
            log.record(i, o, tick as u64);
        }
        log
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inversion<K> {
    Unique(K),
    /// Every preimage, in key order.
    Ambiguous(Vec<K>),
    Miss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry<K, V> {
    pub input: K,
    pub output: V,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(
    serialize = "K: Serialize + Clone, V: Serialize + Clone",
    deserialize = "K: Deserialize<'de>, V: Deserialize<'de>"
))]
struct TabularRepr<K, V> {
    entries: Vec<TableEntry<K, V>>,
    #[serde(default)]
    fitted_from: usize,
}

/// Lookup-table model over a discrete input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    into = "TabularRepr<K, V>",
    from = "TabularRepr<K, V>",
    bound(
        serialize = "K: Ord + Serialize + Clone, V: Serialize + Clone",
        deserialize = "K: Ord + Deserialize<'de> + Clone, V: Deserialize<'de> + Clone"
    )
)]
pub struct TabularModel<K: Ord, V> {
    table: BTreeMap<K, V>,
    fitted_from: usize,
}

impl<K: Ord + Clone, V: Clone> From<TabularModel<K, V>> for TabularRepr<K, V> {
    fn from(m: TabularModel<K, V>) -> Self {
        TabularRepr {
            entries: m
                .table
                .into_iter()
                .map(|(input, output)| TableEntry { input, output })
                .collect(),
            fitted_from: m.fitted_from,
        }
    }
}

impl<K: Ord, V> From<TabularRepr<K, V>> for TabularModel<K, V> {
    fn from(r: TabularRepr<K, V>) -> Self {
        TabularModel {
            table: r.entries.into_iter().map(|e| (e.input, e.output)).collect(),
            fitted_from: r.fitted_from,
        }
    }
}

impl<K: Ord, V> Default for TabularModel<K, V> {
    fn default() -> Self {
        Self {
            table: BTreeMap::new(),
            fitted_from: 0,
        }
    }
}

impl<K: Ord, V> FromIterator<(K, V)> for TabularModel<K, V> {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Self {
            table: iter.into_iter().collect(),
            fitted_from: 0,
        }
    }
}

impl<K: Ord + Clone + Debug, V: Clone> TabularModel<K, V> {
    /// Tabulates `f` over `domain`.
    pub fn from_fn(domain: impl IntoIterator<Item = K>, f: impl Fn(&K) -> V) -> Self {
        domain.into_iter().map(|k| {
            let v = f(&k);
            (k, v)
        }).collect()
    }

    /// Last observed output per input.
    pub fn fit(log: &ExperienceLog<K, V>) -> Result<Self, ModelError> {
        if log.is_empty() {
            return Err(ModelError::EmptyLog);
        }
        let mut table = BTreeMap::new();
        for pair in log.pairs() {
            table.insert(pair.input.clone(), pair.output.clone());
        }
        Ok(Self {
            table,
            fitted_from: log.len(),
        })
    }

    pub fn fitted_from(&self) -> usize {
        self.fitted_from
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &K> {
        self.table.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&K, &V)> {
        self.table.iter()
    }

    pub fn get(&self, input: &K) -> Option<&V> {
        self.table.get(input)
    }

    pub fn insert(&mut self, input: K, output: V) -> Option<V> {
        self.table.insert(input, output)
    }

    pub fn remove(&mut self, input: &K) -> Option<V> {
        self.table.remove(input)
    }

    pub fn covers<'a>(&self, domain: impl IntoIterator<Item = &'a K>) -> bool
    where
        K: 'a,
    {
        domain.into_iter().all(|k| self.table.contains_key(k))
    }

    /// All inputs that map to `output`.
    pub fn invert_exact(&self, output: &V) -> Inversion<K>
    where
        V: PartialEq,
    {
        let mut preimages: Vec<K> = self
            .table
            .iter()
            .filter(|(_, v)| *v == output)
            .map(|(k, _)| k.clone())
            .collect();
        match preimages.len() {
            0 => Inversion::Miss,
            1 => Inversion::Unique(preimages.remove(0)),
            _ => Inversion::Ambiguous(preimages),
        }
    }
}

impl<K: Ord + Debug, V: Clone> Predictor<K, V> for TabularModel<K, V> {
    fn predict(&self, input: &K) -> Result<V, ModelError> {
        self.table
            .get(input)
            .cloned()
            .ok_or_else(|| ModelError::UnknownInput(format!("{input:?}")))
    }
}

/// `output = weights · input + bias`
#[derive(Debug, Clone, PartialEq)]
pub struct AffineModel {
    weights: DMatrix<f64>,
    bias: DVector<f64>,
    fitted_from: usize,
}

impl AffineModel {
    pub fn new(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self, ModelError> {
        if weights.nrows() != bias.len() {
            return Err(ModelError::DimensionMismatch {
                expected: weights.nrows(),
                got: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("affine parameters"));
        }
        Ok(Self {
            weights,
            bias,
            fitted_from: 0,
        })
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            weights: DMatrix::identity(dimension, dimension),
            bias: DVector::zeros(dimension),
            fitted_from: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.bias
    }

    pub fn fitted_from(&self) -> usize {
        self.fitted_from
    }

    /// Least-squares fit of weights and bias. Needs at least `input_dim + 1`
    /// affinely independent inputs; otherwise the unconstrained parameter
    /// directions are reported.
    pub fn fit(log: &ExperienceLog<Vec<f64>, Vec<f64>>) -> Result<Self, ModelError> {
        let first = log.pairs().first().ok_or(ModelError::EmptyLog)?;
        let d = first.input.len();
        let m = first.output.len();
        let n = log.len();
        let mut design = DMatrix::zeros(n, d + 1);
        let mut targets = DMatrix::zeros(n, m);
        for (row, pair) in log.pairs().iter().enumerate() {
            if pair.input.len() != d {
                return Err(ModelError::DimensionMismatch {
                    expected: d,
                    got: pair.input.len(),
                });
            }
            if pair.output.len() != m {
                return Err(ModelError::DimensionMismatch {
                    expected: m,
                    got: pair.output.len(),
                });
            }
            if pair.input.iter().chain(&pair.output).any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("experience log"));
            }
            for (col, v) in pair.input.iter().enumerate() {
                design[(row, col)] = *v;
            }
            design[(row, d)] = 1.0;
            for (col, v) in pair.output.iter().enumerate() {
                targets[(row, col)] = *v;
            }
        }

        let normal = design.transpose() * &design;
        let eigen = normal.symmetric_eigen();
        let largest = eigen.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let directions: Vec<Vec<f64>> = eigen
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, lambda)| **lambda <= largest * RANK_TOLERANCE)
            .map(|(i, _)| eigen.eigenvectors.column(i).iter().copied().collect())
            .collect();
        if !directions.is_empty() {
            return Err(ModelError::DegenerateFit {
                rank: d + 1 - directions.len(),
                needed: d + 1,
                directions,
            });
        }

        let solution = design
            .svd(true, true)
            .solve(&targets, 1e-14)
            .map_err(|_| ModelError::NonFinite("least-squares solve"))?;
        let weights = solution.rows(0, d).transpose();
        let bias = solution.row(d).transpose();
        Ok(Self {
            weights,
            bias,
            fitted_from: n,
        })
    }
}

impl Predictor<Vec<f64>, Vec<f64>> for AffineModel {
    fn predict(&self, input: &Vec<f64>) -> Result<Vec<f64>, ModelError> {
        self.predict(input.as_slice())
    }
}

impl Predictor<[f64], Vec<f64>> for AffineModel {
    fn predict(&self, input: &[f64]) -> Result<Vec<f64>, ModelError> {
        if input.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let x = DVector::from_column_slice(input);
        Ok((&self.weights * x + &self.bias).iter().copied().collect())
    }
}

/// Rolls a sequence of actions through a tabular transition model from a
/// fixed start state and predicts the observation at the end.
pub struct RolloutModel<'a, S: Ord, A: Ord, O> {
    pub transition: &'a TabularModel<(S, A), S>,
    pub observation: &'a TabularModel<S, O>,
    pub start: S,
}

impl<S, A, O> Predictor<Vec<A>, O> for RolloutModel<'_, S, A, O>
where
    S: Ord + Clone + Debug,
    A: Ord + Clone + Debug,
    O: Clone,
{
    fn predict(&self, plan: &Vec<A>) -> Result<O, ModelError> {
        let mut state = self.start.clone();
        for action in plan {
            state = self.transition.predict(&(state, action.clone()))?;
        }
        self.observation.predict(&state)
    }
}

/// Analysis-by-synthesis: the candidate cause whose predicted consequence
/// best matches what was observed.
pub fn infer_cause<C, O, M>(
    model: &M,
    observed: &O,
    candidates: &[C],
    budget: &SearchBudget,
    strategy: Strategy,
) -> Result<SearchResult<C>, SearchError>
where
    C: Clone,
    O: Distance,
    M: Predictor<C, O> + ?Sized,
{
    let mut obj = Objective::fallible(|c: &C| Ok(observed.distance(&model.predict(c)?)));
    search_discrete(candidates, &mut obj, budget, strategy)
}

/// Continuous counterpart of [`infer_cause`] for vector-valued models.
pub fn infer_cause_continuous<M>(
    model: &M,
    observed: &[f64],
    space: &BoxSpace,
    budget: &SearchBudget,
    start: &[f64],
    step_init: f64,
) -> Result<SearchResult<Vec<f64>>, SearchError>
where
    M: Predictor<[f64], Vec<f64>> + ?Sized,
{
    let observed = observed.to_vec();
    let mut obj = Objective::fallible(|c: &[f64]| Ok(observed.distance(&model.predict(c)?)));
    argmin_gradient(space, &mut obj, budget, start, step_init)
}
