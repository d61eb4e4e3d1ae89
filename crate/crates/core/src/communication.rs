//! Two-agent signalling.
//!
//! Each agent owns a production transform `g` (intention → signal) and a
//! perception transform `h` (signal → interpretation), plus models of the
//! other agent's transforms. A sender picks the signal that its model of
//! the receiver would interpret as the intention (synthesis-by-analysis).
//! A receiver picks the intention that its model of the sender would have
//! encoded as the observed signal (analysis-by-synthesis). Binding an
//! agent self-as-other makes it use its own transforms as those models.
//!
//! Mind-reading depth is one: no agent models the other's model of itself.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward_model::{ModelError, Predictor, TabularModel};
use crate::rng;
use crate::search::{
    argmin_exhaustive, Distance, Objective, SearchBudget, SearchError, SearchResult, Symbol,
};
use crate::world::{Action, ChannelWorld, WorldError, WorldTransform};

pub type SymbolMap = TabularModel<Symbol, Symbol>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommError {
    #[error("no candidate signals")]
    EmptyCandidates,
    #[error("empty intention alphabet")]
    EmptyAlphabet,
    #[error("transform {name} does not cover symbol {symbol}")]
    NotTotal { name: &'static str, symbol: Symbol },
    #[error("episode needs a channel world")]
    NotAChannel,
    #[error("channel alphabet {channel} does not match signal alphabet {signals}")]
    AlphabetMismatch { channel: u32, signals: u32 },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// An agent's own production and perception transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTransforms {
    pub g: SymbolMap,
    pub h: SymbolMap,
}

impl AgentTransforms {
    /// Checks `g` covers `0..intentions` and `h` covers `0..signals`.
    pub fn new(g: SymbolMap, h: SymbolMap, intentions: u32, signals: u32) -> Result<Self, CommError> {
        for s in Symbol::alphabet(intentions) {
            if g.get(&s).is_none() {
                return Err(CommError::NotTotal { name: "g", symbol: s });
            }
        }
        for s in Symbol::alphabet(signals) {
            if h.get(&s).is_none() {
                return Err(CommError::NotTotal { name: "h", symbol: s });
            }
        }
        Ok(Self { g, h })
    }

    /// Signal `k` for intention `k`, read back as `k`.
    pub fn identity(size: u32) -> Self {
        Self::permuted(&(0..size).collect::<Vec<_>>())
    }

    /// `g(k) = perm[k]` and `h = g⁻¹`, a self-consistent code.
    pub fn permuted(perm: &[u32]) -> Self {
        let g: SymbolMap = perm
            .iter()
            .enumerate()
            .map(|(k, s)| (Symbol(k as u32), Symbol(*s)))
            .collect();
        let h: SymbolMap = perm
            .iter()
            .enumerate()
            .map(|(k, s)| (Symbol(*s), Symbol(k as u32)))
            .collect();
        Self { g, h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Learned,
    SelfAsOther,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommAgent {
    pub own: AgentTransforms,
    /// Model of the other agent's production transform.
    pub other_g_hat: SymbolMap,
    /// Model of the other agent's perception transform.
    pub other_h_hat: SymbolMap,
    pub binding: Binding,
}

impl CommAgent {
    pub fn learned(own: AgentTransforms, other_g_hat: SymbolMap, other_h_hat: SymbolMap) -> Self {
        Self {
            own,
            other_g_hat,
            other_h_hat,
            binding: Binding::Learned,
        }
    }

    pub fn self_as_other(own: AgentTransforms) -> Self {
        bind_self_as_other(Self::learned(own, SymbolMap::default(), SymbolMap::default()))
    }
}

/// Uses the agent's own transforms as its models of the other.
pub fn bind_self_as_other(agent: CommAgent) -> CommAgent {
    CommAgent {
        other_g_hat: agent.own.g.clone(),
        other_h_hat: agent.own.h.clone(),
        binding: Binding::SelfAsOther,
        own: agent.own,
    }
}

/// The signal the sender's model of the receiver would read as `intention`.
/// The receiver itself is not an input.
pub fn sender_select_action(
    agent: &CommAgent,
    intention: Symbol,
    candidate_signals: &[Symbol],
    budget: &SearchBudget,
) -> Result<SearchResult<Symbol>, CommError> {
    if candidate_signals.is_empty() {
        return Err(CommError::EmptyCandidates);
    }
    let mut obj = Objective::fallible(|s: &Symbol| Ok(intention.distance(&agent.other_h_hat.predict(s)?)));
    Ok(argmin_exhaustive(candidate_signals, &mut obj, budget)?)
}

/// The intention the receiver's model of the sender would have encoded as
/// `observed_signal`.
pub fn receiver_infer_intention(
    agent: &CommAgent,
    observed_signal: Symbol,
    intention_alphabet: &[Symbol],
    budget: &SearchBudget,
) -> Result<SearchResult<Symbol>, CommError> {
    if intention_alphabet.is_empty() {
        return Err(CommError::EmptyAlphabet);
    }
    let mut obj =
        Objective::fallible(|i: &Symbol| Ok(observed_signal.distance(&agent.other_g_hat.predict(i)?)));
    Ok(argmin_exhaustive(intention_alphabet, &mut obj, budget)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEpisode {
    pub intention_sent: Symbol,
    pub signal_sent: Symbol,
    pub signal_received: Symbol,
    pub interpretation: Symbol,
    pub success: bool,
    pub sender_search_evals: usize,
    pub receiver_search_evals: usize,
    pub rounds: usize,
}

fn channel_of(channel: &WorldTransform) -> Result<&ChannelWorld, CommError> {
    match channel {
        WorldTransform::Channel(c) => Ok(c),
        _ => Err(CommError::NotAChannel),
    }
}

/// sender selects → channel transmits → receiver infers.
pub fn run_episode(
    sender: &CommAgent,
    receiver: &CommAgent,
    channel: &WorldTransform,
    intention: Symbol,
    budget: &SearchBudget,
    seed: u64,
) -> Result<CommEpisode, CommError> {
    run_episode_with_feedback(sender, receiver, channel, intention, budget, seed, 1)
}

/// Like [`run_episode`], but after a failed round the receiver's overt
/// response (its interpretation) reaches the sender, which retries with its
/// best signal not yet tried. Stops on success or after `rounds` rounds.
pub fn run_episode_with_feedback(
    sender: &CommAgent,
    receiver: &CommAgent,
    channel: &WorldTransform,
    intention: Symbol,
    budget: &SearchBudget,
    seed: u64,
    rounds: usize,
) -> Result<CommEpisode, CommError> {
    let base = channel_of(channel)?;
    let alphabet = Symbol::alphabet(base.alphabet_size);
    if sender.other_h_hat.len() != alphabet.len() {
        return Err(CommError::AlphabetMismatch {
            channel: base.alphabet_size,
            signals: sender.other_h_hat.len() as u32,
        });
    }
    let world = WorldTransform::Channel(base.with_seed(rng::derive_seed(base.seed, seed)));

    let mut state = world.initial_state();
    let mut untried = alphabet.clone();
    let mut sender_evals = 0;
    let mut receiver_evals = 0;
    let mut episode = None;
    for round in 1..=rounds.max(1) {
        let choice = sender_select_action(sender, intention, &untried, budget)?;
        sender_evals += choice.evaluations;
        let signal = choice.best_candidate;
        untried.retain(|s| *s != signal);

        state = world.step(&state, &Action::Discrete(i64::from(signal.0)))?;
        let received = Symbol(world.observe(&state).real("received").unwrap_or(-1.0) as u32);

        let inferred = receiver_infer_intention(receiver, received, &alphabet, budget)?;
        receiver_evals += inferred.evaluations;
        let interpretation = inferred.best_candidate;
        let success = interpretation == intention;
        episode = Some(CommEpisode {
            intention_sent: intention,
            signal_sent: signal,
            signal_received: received,
            interpretation,
            success,
            sender_search_evals: sender_evals,
            receiver_search_evals: receiver_evals,
            rounds: round,
        });
        if success || untried.is_empty() {
            break;
        }
    }
    Ok(episode.expect("at least one round runs"))
}

/// One episode per seed with the intention drawn uniformly from the seed.
pub fn run_batch(
    sender: &CommAgent,
    receiver: &CommAgent,
    channel: &WorldTransform,
    budget: &SearchBudget,
    seeds: Range<u64>,
) -> Result<Vec<CommEpisode>, CommError> {
    let size = channel_of(channel)?.alphabet_size;
    seeds
        .map(|seed| {
            let intention = Symbol(rng::stream_rng(seed, u64::MAX).random_range(0..size));
            run_episode(sender, receiver, channel, intention, budget, seed)
        })
        .collect()
}

/// Exact round-trip accuracy of a sender/receiver pair over a uniform
/// intention prior and every channel outcome, by enumeration.
pub fn enumerated_accuracy(
    sender: &CommAgent,
    receiver: &CommAgent,
    channel: &WorldTransform,
    budget: &SearchBudget,
) -> Result<f64, CommError> {
    let ch = channel_of(channel)?;
    let alphabet = Symbol::alphabet(ch.alphabet_size);
    let mut total = 0.0;
    for &intention in &alphabet {
        let signal = sender_select_action(sender, intention, &alphabet, budget)?.best_candidate;
        for &received in &alphabet {
            let p = ch.likelihood(received.0, signal.0);
            if p == 0.0 {
                continue;
            }
            let guess = receiver_infer_intention(receiver, received, &alphabet, budget)?.best_candidate;
            if guess == intention {
                total += p;
            }
        }
    }
    Ok(total / alphabet.len() as f64)
}
