use std::collections::BTreeMap;

use pct_core::control::simulate_closed_loop;
use pct_core::motivation::{appraise, derive_desires, enthusiasm_to_effort, select_intention, update_needs};
use pct_core::{EnthusiasmPolicy, FirstOrderPlant, Need, NeedKind, NeedStack, PidParams, Symbol};
use proptest::prelude::*;

fn stack(levels: &[f64], weights: &[f64]) -> NeedStack {
    NeedStack::new(
        levels
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(i, (l, w))| {
                Need::new(format!("n{i}"), NeedKind::Physical, 1.0, Symbol(i as u32))
                    .with_level(*l)
                    .with_weight(*w)
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn selection_invariant_under_weight_scaling(
        levels in prop::collection::vec(-2.0..2.0f64, 1..6),
        scale in 0.01..100.0f64,
    ) {
        let weights: Vec<f64> = (0..levels.len()).map(|i| 1.0 + i as f64 * 0.37).collect();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let a = derive_desires(&stack(&levels, &weights), 0.0);
        let b = derive_desires(&stack(&levels, &scaled), 0.0);
        prop_assert_eq!(select_intention(&a).map(|d| d.outcome), select_intention(&b).map(|d| d.outcome));
    }

    #[test]
    fn valence_never_positive(
        errors in prop::collection::vec(-10.0..10.0f64, 0..8),
        effort in 0usize..1000,
    ) {
        let weights = vec![0.5; errors.len()];
        let policy = EnthusiasmPolicy::new(50, 1.0, 0.5).unwrap();
        let a = appraise(&errors, &weights, effort, &policy);
        prop_assert!(a.valence <= 0.0);
        prop_assert!((0.0..=1.0).contains(&a.arousal));
        let oracle: f64 = errors.iter().map(|e| 0.5 * e * e).sum();
        prop_assert!((a.valence + oracle).abs() < 1e-9);
    }

    #[test]
    fn effort_grows_with_urgency(u1 in 0.0..10.0f64, du in 0.0..10.0f64) {
        let policy = EnthusiasmPolicy::new(20, 2.0, 0.5).unwrap();
        let (b1, g1) = enthusiasm_to_effort(&policy, u1).unwrap();
        let (b2, g2) = enthusiasm_to_effort(&policy, u1 + du).unwrap();
        prop_assert!(b2 >= b1 && g2 >= g1);
    }
}

#[test]
fn satisfied_needs_raise_no_desires() {
    let needs = stack(&[1.0, 1.0], &[1.0, 2.0]);
    assert!(needs.all_satisfied());
    assert!(derive_desires(&needs, 0.0).is_empty());
    assert_eq!(needs.intrinsic_error(), 0.0);
}

#[test]
fn depletion_then_satisfaction() {
    let needs = NeedStack::new(vec![Need::new("food", NeedKind::Physical, 1.0, Symbol(2))
        .with_depletion(0.1)
        .with_bounds(0.0, 1.0)])
    .unwrap();
    let none = BTreeMap::new();
    let mut s = needs;
    for _ in 0..3 {
        s = update_needs(&s, &none, 1.0).unwrap();
    }
    assert!((s.get("food").unwrap().level - 0.7).abs() < 1e-12);
    let top = derive_desires(&s, 0.05);
    assert_eq!(select_intention(&top).unwrap().outcome, Symbol(2));
    let fed = BTreeMap::from([("food".to_string(), 5.0)]);
    s = update_needs(&s, &fed, 1.0).unwrap();
    assert_eq!(s.get("food").unwrap().level, 1.0);
    assert!(update_needs(&s, &BTreeMap::from([("water".to_string(), 1.0)]), 1.0).is_err());
}

#[test]
fn too_much_enthusiasm_destabilises_the_loop() {
    // c' = 0.9c + 0.1u under u = k·e has closed-loop pole 0.9 − 0.1k,
    // outside the unit circle once k > 19.
    let policy = EnthusiasmPolicy::new(10, 5.0, 1.0).unwrap();
    let run = |urgency: f64| {
        let (_, gain) = enthusiasm_to_effort(&policy, urgency).unwrap();
        let plant = FirstOrderPlant::new(0.0, 0.9, 0.1).unwrap();
        let ticks = 2000;
        let trace = simulate_closed_loop(
            &PidParams::proportional(gain),
            plant,
            1.0,
            &vec![1.0; ticks],
            &vec![0.0; ticks],
            1.0,
            ticks,
        )
        .unwrap();
        (gain, trace.diverged())
    };
    assert_eq!(run(1.0), (10.0, false));
    let (gain, diverged) = run(3.0);
    assert!(gain > 19.0 && diverged);
}
