use pct_core::forward_model::{infer_cause, infer_cause_continuous, RolloutModel};
use pct_core::search::{argmin_exhaustive, BoxSpace};
use pct_core::world::LandscapeWorld;
use pct_core::{
    Action, AffineModel, ExperienceLog, Inversion, Objective, Predictor, SearchBudget, Strategy, TabularModel,
    WorldTransform,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn injective_table(outputs: &[i64]) -> TabularModel<u32, i64> {
    outputs.iter().enumerate().map(|(i, o)| (i as u32, *o)).collect()
}

fn brute_force(table: &[(u32, i64)], observed: i64) -> (u32, i64) {
    let mut best = table[0];
    let mut best_d = (observed - best.1).pow(2);
    for &(k, v) in &table[1..] {
        let d = (observed - v).pow(2);
        if d < best_d {
            best = (k, v);
            best_d = d;
        }
    }
    (best.0, best_d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn round_trip_on_injective_tables(outputs in prop::collection::btree_set(-1000i64..1000, 1..64)) {
        let outputs: Vec<i64> = outputs.into_iter().collect();
        let model = injective_table(&outputs);
        for x in 0..outputs.len() as u32 {
            let y = model.predict(&x).unwrap();
            prop_assert_eq!(model.invert_exact(&y), Inversion::Unique(x));
        }
    }

    #[test]
    fn infer_cause_agrees_with_inversion(outputs in prop::collection::btree_set(-1000i64..1000, 1..64), pick in any::<prop::sample::Index>()) {
        let outputs: Vec<i64> = outputs.into_iter().collect();
        let model = injective_table(&outputs);
        let x = pick.index(outputs.len()) as u32;
        let observed = model.predict(&x).unwrap();
        let cands: Vec<u32> = (0..outputs.len() as u32).collect();
        let res = infer_cause(&model, &observed, &cands, &SearchBudget::evaluations(cands.len()), Strategy::Exhaustive).unwrap();
        prop_assert_eq!(Inversion::Unique(res.best_candidate), model.invert_exact(&observed));
        prop_assert_eq!(res.best_error, 0.0);
    }

    #[test]
    fn tabular_refit_reproduces_model(entries in prop::collection::btree_map(0u32..200, -50i64..50, 1..64)) {
        let model: TabularModel<u32, i64> = entries.into_iter().collect();
        let log: ExperienceLog<u32, i64> = model.inputs().map(|k| (*k, model.predict(k).unwrap())).collect();
        let refit = TabularModel::fit(&log).unwrap();
        prop_assert_eq!(refit.entries().collect::<Vec<_>>(), model.entries().collect::<Vec<_>>());
    }

    #[test]
    fn affine_refit_reproduces_model(w in prop::collection::vec(-5.0..5.0f64, 6), b in prop::collection::vec(-5.0..5.0f64, 2)) {
        let model = AffineModel::new(
            nalgebra::DMatrix::from_row_slice(2, 3, &w),
            nalgebra::DVector::from_vec(b),
        ).unwrap();
        let mut log = ExperienceLog::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..12 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-10.0..10.0)).collect();
            let y = model.predict(&x).unwrap();
            log.record(x, y, t);
        }
        let refit = AffineModel::fit(&log).unwrap();
        for (a, b) in refit.weights().iter().zip(model.weights().iter()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        for (a, b) in refit.bias().iter().zip(model.bias().iter()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        prop_assert_eq!(refit.fitted_from(), 12);
    }
}

/// Randomised analysis-by-synthesis instances against an independent scan.
#[test]
fn infer_cause_matches_minimum_distance_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for _ in 0..1000 {
        let size = rng.random_range(1..=64);
        let table: Vec<(u32, i64)> = (0..size).map(|k| (k, rng.random_range(-20..20))).collect();
        let model: TabularModel<u32, i64> = table.iter().copied().collect();
        let observed = rng.random_range(-25..25);
        let cands: Vec<u32> = (0..size).collect();
        let res = infer_cause(&model, &observed, &cands, &SearchBudget::evaluations(64), Strategy::Exhaustive).unwrap();
        let (k, d) = brute_force(&table, observed);
        assert_eq!(res.best_candidate, k);
        assert_eq!(res.best_error, d as f64);
    }
}

#[test]
fn missing_entries_degrade_gracefully() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let size = rng.random_range(4..40u32);
        let mut table: Vec<(u32, i64)> = (0..size).map(|k| (k, i64::from(k) * 3)).collect();
        table.shuffle(&mut rng);
        let dropped = table.pop().unwrap();
        let model: TabularModel<u32, i64> = table.iter().copied().collect();

        // The cause behind the observation is no longer in the table.
        assert_eq!(model.invert_exact(&dropped.1), Inversion::Miss);
        let known: Vec<u32> = model.inputs().copied().collect();
        let res = infer_cause(&model, &dropped.1, &known, &SearchBudget::evaluations(64), Strategy::Exhaustive).unwrap();
        let mut sorted = table.clone();
        sorted.sort();
        let (k, d) = brute_force(&sorted, dropped.1);
        assert_eq!(res.best_candidate, k);
        assert_eq!(res.best_error, d as f64);
        assert!(res.best_error > 0.0);
    }
}

#[test]
fn ambiguous_observation_takes_lowest_index() {
    let model: TabularModel<u32, i64> = [(0, 5), (1, 7), (2, 7), (3, 9)].into_iter().collect();
    let res = infer_cause(&model, &7, &[0, 1, 2, 3], &SearchBudget::evaluations(4), Strategy::Exhaustive).unwrap();
    assert_eq!(res.best_candidate, 1);
    assert!(res.tie_broken);
    assert_eq!(model.invert_exact(&7), Inversion::Ambiguous(vec![1, 2]));
}

#[test]
fn affine_line_recovery() {
    let log: ExperienceLog<Vec<f64>, Vec<f64>> =
        [0.0, 1.0, 2.0, 3.0].iter().map(|&x| (vec![x], vec![2.0 * x + 1.0])).collect();
    let model = AffineModel::fit(&log).unwrap();
    assert!((model.weights()[(0, 0)] - 2.0).abs() < 1e-8);
    assert!((model.bias()[0] - 1.0).abs() < 1e-8);
    let one: ExperienceLog<Vec<f64>, Vec<f64>> = [(vec![1.0], vec![3.0])].into_iter().collect();
    assert!(AffineModel::fit(&one).is_err());
}

#[test]
fn continuous_cause_recovery() {
    let model = AffineModel::new(
        nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -1.0, 1.0]),
        nalgebra::DVector::from_vec(vec![1.0, 0.0]),
    )
    .unwrap();
    let cause = [0.7, -1.2];
    let observed = model.predict(&cause[..]).unwrap();
    let space = BoxSpace::new(vec![-3.0, -3.0], vec![3.0, 3.0], vec![0.1, 0.1]).unwrap();
    let budget = SearchBudget::new(20_000, 1e-16).unwrap();
    let res = infer_cause_continuous(&model, &observed, &space, &budget, &[0.0, 0.0], 0.5).unwrap();
    for (x, c) in res.best_candidate.iter().zip(&cause) {
        assert!((x - c).abs() < 1e-4, "{:?}", res.best_candidate);
    }
}

fn bundled_like_table() -> Vec<f64> {
    let mut t = vec![0.0; 100];
    for (i, v) in t.iter_mut().enumerate() {
        let i = i as f64;
        *v = if i <= 20.0 {
            2.0 + 0.1 * (20.0 - i)
        } else if i <= 45.0 {
            2.0 + 0.12 * (i - 20.0)
        } else if i <= 70.0 {
            5.0 - 0.18 * (i - 45.0)
        } else {
            0.5 + 0.1 * (i - 70.0)
        };
    }
    t
}

#[test]
fn planning_through_rollouts_finds_global_minimum() {
    let table = bundled_like_table();
    let world = LandscapeWorld::new(table.clone()).unwrap().with_start(10).unwrap();
    let positions: Vec<i64> = (0..table.len() as i64).collect();
    let transition = TabularModel::from_fn(
        positions.iter().flat_map(|p| LandscapeWorld::MOVES.iter().map(move |m| (*p, *m))),
        |(p, m)| world.moved(*p, *m),
    );
    let observation = TabularModel::from_fn(positions.iter().copied(), |p| world.error_at(*p));
    let rollout = RolloutModel {
        transition: &transition,
        observation: &observation,
        start: 10i64,
    };
    let plans: Vec<Vec<i64>> = [-1i64, 1]
        .iter()
        .flat_map(|d| (0..table.len()).map(move |n| vec![*d; n]))
        .collect();
    let res = pct_core::search::plan_with_forward_model(
        &rollout,
        &0.0,
        &plans,
        &SearchBudget::evaluations(plans.len()),
        Strategy::Exhaustive,
    )
    .unwrap();

    // Independent oracle: the table's global minimum.
    let (argmin, min) = table
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    assert_eq!((argmin, min), (70, 0.5));

    let w = WorldTransform::Landscape(world);
    let mut state = w.initial_state();
    for m in &res.best_candidate {
        state = w.step(&state, &Action::Discrete(*m)).unwrap();
    }
    assert_eq!(state.real("error"), Some(0.5));
    assert_eq!(state.real("position"), Some(70.0));
}

#[test]
fn corrupted_model_misleads_planning() {
    let table: Vec<f64> = vec![3.0, 2.0, 1.0, 2.0, 3.0];
    let mut wrong = TabularModel::from_fn(0..5u32, |p| table[*p as usize]);
    wrong.insert(4, 0.0);
    let cands: Vec<u32> = (0..5).collect();
    let mut obj = Objective::new(|p: &u32| wrong.predict(p).unwrap().powi(2));
    let planned = argmin_exhaustive(&cands, &mut obj, &SearchBudget::evaluations(5)).unwrap();
    assert_eq!(planned.best_candidate, 4);
    assert_eq!(planned.best_error, 0.0);
    // Executed for real, the plan lands on the worst cell.
    assert_eq!(table[planned.best_candidate as usize], 3.0);
}
