//! Three interactive operations for the browser page: a thermostat loop,
//! greedy descent against model-based planning, and channel accuracy under
//! noise. Plain functions here; the `web` module exports them to JavaScript.

use pct_core::communication::{enumerated_accuracy, run_episode};
use pct_core::control::simulate_closed_loop;
use pct_core::forward_model::RolloutModel;
use pct_core::rng::derive_seed;
use pct_core::search::plan_with_forward_model;
use pct_core::world::{make_channel, DisturbanceSchedule, LandscapeWorld, ThermostatWorld};
use pct_core::{AgentTransforms, CommAgent, PidParams, Predictor, SearchBudget, Strategy, Symbol, TabularModel};

/// Temperature and output per tick of a PID thermostat with a step
/// disturbance. Stops early if the loop diverges.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRun {
    pub temperature: Vec<f64>,
    pub output: Vec<f64>,
    pub diverged: bool,
}

pub fn thermostat_loop(
    pid: PidParams,
    reference: f64,
    disturbance: f64,
    step_tick: u64,
    ticks: usize,
) -> Result<LoopRun, String> {
    let world = ThermostatWorld::new(10.0, 0.1, 0.1)
        .map_err(|e| e.to_string())?
        .with_disturbance(DisturbanceSchedule::step_at(step_tick, disturbance));
    let r = vec![reference; ticks];
    let d = world.disturbance.series(ticks);
    let trace = simulate_closed_loop(&pid, world.plant(), 1.0, &r, &d, 1.0, ticks).map_err(|e| e.to_string())?;
    Ok(LoopRun {
        temperature: trace.signals.iter().map(|s| s.c).collect(),
        output: trace.signals.iter().map(|s| s.u).collect(),
        diverged: trace.diverged(),
    })
}

/// Two basins: a shallow one at 20 (error 2.0) and the deepest at 70
/// (error 0.5), separated by a ridge at 45.
pub fn default_landscape() -> Vec<f64> {
    (0..100)
        .map(|i| {
            let x = f64::from(i);
            let v = match i {
                0..=20 => 4.0 - 0.1 * x,
                21..=45 => 2.0 + 0.12 * (x - 20.0),
                46..=70 => 5.0 - 0.18 * (x - 45.0),
                _ => 0.5 + 0.1 * (x - 70.0),
            };
            (v * 100.0).round() / 100.0
        })
        .collect()
}

/// Positions visited by greedy descent and by executing the best plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanComparison {
    pub greedy: Vec<i64>,
    pub planned: Vec<i64>,
}

pub fn plan_vs_greedy(table: &[f64], start: usize) -> Result<PlanComparison, String> {
    let land = LandscapeWorld::new(table.to_vec())
        .and_then(|l| l.with_start(start))
        .map_err(|e| e.to_string())?;

    let mut greedy = vec![start as i64];
    let mut here = start as i64;
    loop {
        let next = LandscapeWorld::MOVES
            .iter()
            .map(|m| land.moved(here, *m))
            .min_by(|a, b| land.error_at(*a).total_cmp(&land.error_at(*b)))
            .expect("three moves");
        if land.error_at(next) >= land.error_at(here) {
            break;
        }
        here = next;
        greedy.push(here);
    }

    let positions: Vec<i64> = (0..table.len() as i64).collect();
    let transition = TabularModel::from_fn(
        positions.iter().flat_map(|p| LandscapeWorld::MOVES.iter().map(move |m| (*p, *m))),
        |(p, m)| land.moved(*p, *m),
    );
    let observation = TabularModel::from_fn(positions.iter().copied(), |p| land.error_at(*p));
    let rollout = RolloutModel {
        transition: &transition,
        observation: &observation,
        start: start as i64,
    };
    let mut plans: Vec<Vec<i64>> = vec![vec![]];
    for d in [-1i64, 1] {
        plans.extend((1..=table.len()).map(|n| vec![d; n]));
    }
    let best = plan_with_forward_model(&rollout, &0.0, &plans, &SearchBudget::evaluations(plans.len()), Strategy::Exhaustive)
        .map_err(|e| e.to_string())?;
    let mut planned = vec![start as i64];
    for m in &best.best_candidate {
        planned.push(land.moved(*planned.last().expect("non-empty"), *m));
    }
    debug_assert_eq!(rollout.predict(&best.best_candidate).ok(), planned.last().map(|p| land.error_at(*p)));
    Ok(PlanComparison { greedy, planned })
}

/// `(p, sampled accuracy, enumerated accuracy)` for `points` noise levels
/// evenly spaced over `[0, max_p]`, with self-as-other identity agents.
pub fn channel_accuracy_curve(
    alphabet_size: u32,
    max_p: f64,
    points: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>, String> {
    let agent = CommAgent::self_as_other(AgentTransforms::identity(alphabet_size));
    let budget = SearchBudget::evaluations(alphabet_size as usize);
    (0..points)
        .map(|j| {
            let p = if points > 1 { max_p * j as f64 / (points - 1) as f64 } else { max_p };
            let channel = make_channel(alphabet_size, p, derive_seed(seed, j as u64)).map_err(|e| e.to_string())?;
            let mut hits = 0usize;
            for e in 0..episodes {
                let intention = Symbol(e as u32 % alphabet_size);
                let ep = run_episode(&agent, &agent, &channel, intention, &budget, derive_seed(seed, (j * episodes + e) as u64))
                    .map_err(|e| e.to_string())?;
                hits += usize::from(ep.success);
            }
            let oracle = enumerated_accuracy(&agent, &agent, &channel, &budget).map_err(|e| e.to_string())?;
            Ok((p, hits as f64 / episodes.max(1) as f64, oracle))
        })
        .collect()
}

#[cfg(target_arch = "wasm32")]
mod web {
    use wasm_bindgen::prelude::*;

    /// `[temperature..., output..., diverged]`.
    #[wasm_bindgen]
    pub fn thermostat_loop(kp: f64, ki: f64, kd: f64, reference: f64, disturbance: f64, ticks: usize) -> Result<Vec<f64>, JsError> {
        let pid = pct_core::PidParams { kp, ki, kd };
        let run = super::thermostat_loop(pid, reference, disturbance, (ticks / 2) as u64, ticks).map_err(|e| JsError::new(&e))?;
        let mut out = run.temperature;
        out.extend(run.output);
        out.push(f64::from(u8::from(run.diverged)));
        Ok(out)
    }

    #[wasm_bindgen]
    pub fn default_landscape() -> Vec<f64> {
        super::default_landscape()
    }

    /// `[greedy length, greedy positions..., planned positions...]`.
    #[wasm_bindgen]
    pub fn plan_vs_greedy(table: Vec<f64>, start: usize) -> Result<Vec<f64>, JsError> {
        let c = super::plan_vs_greedy(&table, start).map_err(|e| JsError::new(&e))?;
        let mut out = vec![c.greedy.len() as f64];
        out.extend(c.greedy.iter().map(|p| *p as f64));
        out.extend(c.planned.iter().map(|p| *p as f64));
        Ok(out)
    }

    /// Flattened `(p, sampled, enumerated)` triples.
    #[wasm_bindgen]
    pub fn channel_accuracy_curve(alphabet_size: u32, points: usize, episodes: usize, seed: u64) -> Result<Vec<f64>, JsError> {
        let curve = super::channel_accuracy_curve(alphabet_size, 1.0, points, episodes, seed).map_err(|e| JsError::new(&e))?;
        Ok(curve.into_iter().flat_map(|(p, a, o)| [p, a, o]).collect())
    }
}
