use pct_core::hpct::{drive, reorganize, InputFunction, IntrinsicError, WorldEpisode};
use pct_core::motivation::appraise;
use pct_core::world::ThermostatWorld;
use pct_core::{
    EnthusiasmPolicy, Hierarchy, Mode, Need, NeedKind, NeedStack, PerceptualControlUnit, PidParams, Symbol,
    WorldTransform,
};
use proptest::prelude::*;

fn thermostat() -> WorldTransform {
    WorldTransform::Thermostat(ThermostatWorld::new(10.0, 0.1, 0.1).unwrap())
}

fn single(mode: Mode, gain: f64) -> Hierarchy {
    Hierarchy::single(
        PerceptualControlUnit::new("temp", vec![1.0], gain)
            .with_reference(20.0)
            .with_mode(mode),
    )
}

#[test]
fn imagination_leaves_world_untouched() {
    let world = thermostat();
    let mut h = single(Mode::Imagination, 5.0);
    let mut state = world.initial_state();
    let before = state.fingerprint();
    let records = drive(&mut h, &world, &mut state, 100, 1.0).unwrap();
    assert!(records.iter().all(|r| !r.acted && r.world_fingerprint == before));
    assert_eq!(state.fingerprint(), before);
    assert!(records.iter().all(|r| r.units[0].upward == Some(20.0)));
}

#[test]
fn passive_observation_emits_nothing() {
    let world = thermostat();
    let mut h = single(Mode::PassiveObservation, 5.0);
    let mut state = world.initial_state();
    let records = drive(&mut h, &world, &mut state, 100, 1.0).unwrap();
    for r in &records {
        assert_eq!(r.units[0].output, 0.0);
        assert_eq!(r.units[0].upward, Some(r.units[0].perceptual));
    }
    // With zero power the room relaxes to ambient.
    assert!((state.real("temperature").unwrap() - 10.0).abs() < 1e-3);
}

#[test]
fn automatic_reduces_error_without_reporting_upward() {
    let world = thermostat();
    let mut h = single(Mode::Automatic, 5.0);
    let mut state = world.initial_state();
    let records = drive(&mut h, &world, &mut state, 100, 1.0).unwrap();
    assert!(records.iter().all(|r| r.units[0].upward.is_none()));
    let errs: Vec<f64> = records.iter().map(|r| r.units[0].error.abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0]));
    assert!(errs.last().unwrap() < &errs[0]);
}

#[test]
fn control_mode_tracks_and_reports() {
    let world = thermostat();
    let mut h = single(Mode::Control, 5.0);
    let mut state = world.initial_state();
    let records = drive(&mut h, &world, &mut state, 100, 1.0).unwrap();
    let last = records.last().unwrap();
    assert!(last.units[0].upward.is_some());
    // Proportional loop: T* = (amb·leak + hg·g·r)/(leak + hg·g)
    let expected = (10.0 * 0.1 + 0.1 * 5.0 * 20.0) / (0.1 + 0.1 * 5.0);
    assert!((state.real("temperature").unwrap() - expected).abs() < 1e-6);
}

#[test]
fn cascade_settles_on_upper_reference() {
    let world = thermostat();
    let lower = PerceptualControlUnit::new("heat", vec![1.0], 5.0);
    let upper = PerceptualControlUnit::new("comfort", vec![1.0], 0.0)
        .with_pid(PidParams::new(0.5, 0.1, 0.0).unwrap())
        .with_input(InputFunction::WindowAverage {
            weights: vec![1.0],
            window: 10,
            history: Default::default(),
        })
        .with_reference(20.0);
    let mut h = Hierarchy::new(vec![vec![lower], vec![upper]], vec![vec![vec![1.0]]]).unwrap();
    assert!(h.is_strictly_layered());
    let mut state = world.initial_state();
    let records = drive(&mut h, &world, &mut state, 1000, 1.0).unwrap();
    assert!(records.last().unwrap().units[1].error.abs() < 1e-6);
    assert!((state.real("temperature").unwrap() - 20.0).abs() < 1e-6);
}

#[test]
fn reference_lags_upper_output_by_one_tick() {
    let lower = PerceptualControlUnit::new("l", vec![1.0], 1.0);
    let upper = PerceptualControlUnit::new("u", vec![1.0], 2.0).with_reference(3.0);
    let mut h = Hierarchy::new(vec![vec![lower], vec![upper]], vec![vec![vec![0.5]]]).unwrap();
    h.step(&[1.0], 1.0).unwrap();
    let upper_out = h.unit(1, 0).last_output;
    assert_eq!(h.unit(0, 0).reference, 0.5 * upper_out);
    // Tick 1 used the initial reference 0.
    assert_eq!(h.unit(0, 0).error, -1.0);
    h.step(&[1.0], 1.0).unwrap();
    assert_eq!(h.unit(0, 0).error, 0.5 * upper_out - 1.0);
}

#[test]
fn malformed_wiring_is_rejected() {
    let a = PerceptualControlUnit::new("a", vec![1.0], 1.0);
    let b = PerceptualControlUnit::new("b", vec![1.0, 1.0], 1.0);
    assert!(Hierarchy::new(vec![vec![a.clone()], vec![b]], vec![vec![vec![1.0]]]).is_err());
    assert!(Hierarchy::new(vec![vec![a.clone()], vec![a.clone()]], vec![]).is_err());
    assert!(Hierarchy::new(vec![vec![a.clone()], vec![a]], vec![vec![vec![1.0, 2.0]]]).is_err());
}

#[test]
fn reorganisation_recovers_from_flipped_gain() {
    let env = WorldEpisode {
        world: thermostat(),
        dt: 1.0,
    };
    let h = single(Mode::Control, -2.0);
    for seed in 0..10 {
        let run = reorganize(&h, &env, 50, 0.5, seed, 100, 0.1).unwrap();
        assert!(run.recovered_at.is_some(), "seed {seed}");
        assert!(run.accepted_errors.windows(2).all(|w| w[1] < w[0]));
        assert!(run.accepted_errors[0] < run.initial_error);
        assert!(run.hierarchy.unit(0, 0).output_fn.gain() > 0.0);
    }
}

#[test]
fn needs_intrinsic_error_is_negative_valence() {
    let needs = NeedStack::new(vec![
        Need::new("food", NeedKind::Physical, 1.0, Symbol(0)).with_level(0.4).with_weight(2.0),
        Need::new("company", NeedKind::Psychological, 1.0, Symbol(1)).with_level(0.9).with_weight(0.5),
    ])
    .unwrap();
    let h = single(Mode::Control, 1.0).with_intrinsic(IntrinsicError::Needs(needs.clone()));
    let policy = EnthusiasmPolicy::new(10, 1.0, 1.0).unwrap();
    let valence = appraise(&needs.deficits(), &needs.weights(), 0, &policy).valence;
    assert_eq!(h.intrinsic_error(), -valence);
    // Oracle: 2·0.6² + 0.5·0.1²
    assert!((h.intrinsic_error() - (2.0 * 0.36 + 0.5 * 0.01)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn built_hierarchies_are_strictly_layered(widths in prop::collection::vec(1usize..4, 1..5)) {
        let levels: Vec<Vec<PerceptualControlUnit>> = widths
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let inputs = if k == 0 { 1 } else { widths[k - 1] };
                (0..w).map(|i| PerceptualControlUnit::new(format!("{k}.{i}"), vec![1.0; inputs], 1.0)).collect()
            })
            .collect();
        let wiring = (0..widths.len() - 1).map(|k| vec![vec![1.0; widths[k + 1]]; widths[k]]).collect();
        let h = Hierarchy::new(levels, wiring).unwrap();
        prop_assert!(h.is_strictly_layered());
        for e in h.edges() {
            prop_assert_eq!(e.from.0.abs_diff(e.to.0), 1);
        }
    }

    #[test]
    fn imagination_never_steps_world(r in -50.0..50.0f64, gain in -10.0..10.0f64) {
        let world = thermostat();
        let mut h = Hierarchy::single(
            PerceptualControlUnit::new("u", vec![1.0], gain).with_reference(r).with_mode(Mode::Imagination),
        );
        let mut state = world.initial_state();
        let fp = state.fingerprint();
        drive(&mut h, &world, &mut state, 20, 1.0).unwrap();
        prop_assert_eq!(state.fingerprint(), fp);
    }
}
