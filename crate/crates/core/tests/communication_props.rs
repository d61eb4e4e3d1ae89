use pct_core::communication::{
    enumerated_accuracy, receiver_infer_intention, run_batch, run_episode, sender_select_action, SymbolMap,
};
use pct_core::world::make_channel;
use pct_core::{AgentTransforms, CommAgent, ExperienceLog, SearchBudget, Symbol, TabularModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn budget() -> SearchBudget {
    SearchBudget::evaluations(64)
}

fn identity_pair(k: u32) -> (CommAgent, CommAgent) {
    let a = CommAgent::self_as_other(AgentTransforms::identity(k));
    (a.clone(), a)
}

fn substitution(received: u32, sent: u32, k: u32, p: f64) -> f64 {
    if received == sent { 1.0 - p } else { p / f64::from(k - 1) }
}

/// Round-trip accuracy by direct enumeration of (intention, received) with
/// decoders written out from the code tables.
fn oracle_accuracy(sender_code: &[u32], receiver_code: &[u32], p: f64) -> f64 {
    let k = sender_code.len() as u32;
    let mut total = 0.0;
    for i in 0..k {
        // Sender emits the signal its receiver model decodes as i.
        let signal = sender_code[i as usize];
        for received in 0..k {
            let decoded = receiver_code.iter().position(|s| *s == received).unwrap() as u32;
            if decoded == i {
                total += substitution(received, signal, k, p);
            }
        }
    }
    total / f64::from(k)
}

#[test]
fn self_as_other_noiseless_is_perfect() {
    for k in [2u32, 4, 8] {
        let (s, r) = identity_pair(k);
        let channel = make_channel(k, 0.0, 7).unwrap();
        for i in Symbol::alphabet(k) {
            let ep = run_episode(&s, &r, &channel, i, &budget(), 3).unwrap();
            assert!(ep.success, "k={k} i={i}");
        }
        assert_eq!(enumerated_accuracy(&s, &r, &channel, &budget()).unwrap(), 1.0);
    }
}

#[test]
fn certain_flip_always_fails() {
    let (s, r) = identity_pair(2);
    let channel = make_channel(2, 1.0, 0).unwrap();
    for i in Symbol::alphabet(2) {
        for seed in 0..20 {
            assert!(!run_episode(&s, &r, &channel, i, &budget(), seed).unwrap().success);
        }
    }
}

#[test]
fn batch_accuracy_within_three_standard_errors() {
    let (k, n) = (4u32, 10_000u64);
    for p in [0.1, 0.25] {
        let (s, r) = identity_pair(k);
        let channel = make_channel(k, p, 42).unwrap();
        let code: Vec<u32> = (0..k).collect();
        let oracle = oracle_accuracy(&code, &code, p);
        assert!((oracle - (1.0 - p)).abs() < 1e-12);
        assert_eq!(enumerated_accuracy(&s, &r, &channel, &budget()).unwrap(), oracle);
        let eps = run_batch(&s, &r, &channel, &budget(), 0..n).unwrap();
        let acc = eps.iter().filter(|e| e.success).count() as f64 / n as f64;
        let se = (oracle * (1.0 - oracle) / n as f64).sqrt();
        assert!((acc - oracle).abs() < 3.0 * se, "p={p}: {acc} vs {oracle}");
    }
}

#[test]
fn accuracy_degrades_monotonically_with_noise() {
    let (s, r) = identity_pair(4);
    let mut prev = f64::INFINITY;
    for step in 0..=5 {
        let p = f64::from(step) / 10.0;
        let channel = make_channel(4, p, 0).unwrap();
        let acc = enumerated_accuracy(&s, &r, &channel, &budget()).unwrap();
        assert!(acc <= prev + 1e-12, "p={p}");
        prev = acc;
    }
}

#[test]
fn receiver_decisions_match_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let mut perm: Vec<u32> = (0..8).collect();
        perm.shuffle(&mut rng);
        let agent = CommAgent::self_as_other(AgentTransforms::permuted(&perm));
        let alphabet = Symbol::alphabet(8);
        for obs in &alphabet {
            let got = receiver_infer_intention(&agent, *obs, &alphabet, &budget()).unwrap().best_candidate;
            let scan = alphabet
                .iter()
                .find(|i| agent.other_g_hat.get(i) == Some(obs))
                .copied()
                .unwrap();
            assert_eq!(got, scan);
        }
    }
}

#[test]
fn learned_perception_model_drives_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let k = 8u32;
    let mut perm: Vec<u32> = (0..k).collect();
    perm.shuffle(&mut rng);
    // The other agent reads signal s as perm[s].
    let mut log = ExperienceLog::new();
    for t in 0..100u32 {
        let s = t % k;
        log.record(Symbol(s), Symbol(perm[s as usize]), u64::from(t));
    }
    let h_hat: SymbolMap = TabularModel::fit(&log).unwrap();
    let agent = CommAgent::learned(AgentTransforms::identity(k), SymbolMap::default(), h_hat);
    let alphabet = Symbol::alphabet(k);
    for i in &alphabet {
        let chosen = sender_select_action(&agent, *i, &alphabet, &budget()).unwrap().best_candidate;
        let brute = (0..k).find(|s| perm[*s as usize] == i.0).unwrap();
        assert_eq!(chosen, Symbol(brute));
    }
}

#[test]
fn mismatched_self_models_lose_accuracy() {
    let perm = [1u32, 0, 2, 3, 5, 4, 6, 7];
    let sender = CommAgent::self_as_other(AgentTransforms::permuted(&perm));
    let receiver = CommAgent::self_as_other(AgentTransforms::identity(8));
    let channel = make_channel(8, 0.0, 0).unwrap();
    let acc = enumerated_accuracy(&sender, &receiver, &channel, &budget()).unwrap();
    let identity: Vec<u32> = (0..8).collect();
    assert_eq!(acc, oracle_accuracy(&perm, &identity, 0.0));
    assert_eq!(acc, 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuted_codes_match_fixed_point_count(seed in any::<u64>(), p in 0.0..0.6f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<u32> = (0..6).collect();
        perm.shuffle(&mut rng);
        let sender = CommAgent::self_as_other(AgentTransforms::permuted(&perm));
        let receiver = CommAgent::self_as_other(AgentTransforms::identity(6));
        let channel = make_channel(6, p, seed).unwrap();
        let acc = enumerated_accuracy(&sender, &receiver, &channel, &budget()).unwrap();
        let identity: Vec<u32> = (0..6).collect();
        prop_assert!((acc - oracle_accuracy(&perm, &identity, p)).abs() < 1e-12);
    }

    #[test]
    fn episodes_are_deterministic(seed in any::<u64>(), i in 0u32..4) {
        let (s, r) = identity_pair(4);
        let channel = make_channel(4, 0.3, 1).unwrap();
        let a = run_episode(&s, &r, &channel, Symbol(i), &budget(), seed).unwrap();
        let b = run_episode(&s, &r, &channel, Symbol(i), &budget(), seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
