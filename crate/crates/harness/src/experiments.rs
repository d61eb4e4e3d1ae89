//! Per-seed execution of each experiment kind.

use std::cell::Cell;
use std::collections::BTreeMap;

use pct_core::communication::{enumerated_accuracy, run_episode, run_episode_with_feedback, SymbolMap};
use pct_core::control::simulate_closed_loop;
use pct_core::forward_model::{infer_cause, RolloutModel};
use pct_core::hpct::{drive, reorganize, InputFunction, TickRecord, WorldEpisode};
use pct_core::motivation::{comprehend, derive_desires, enthusiasm_to_effort, select_intention, update_needs};
use pct_core::rng::{derive_seed, stream_rng};
use pct_core::search::{argmin_exhaustive, argmin_random, plan_with_forward_model, ActionSpace};
use pct_core::world::{
    ChannelWorld, DisturbanceSchedule, LandscapeWorld, LightSwitchWorld, ThermostatWorld,
};
use pct_core::{
    Action, AgentTransforms, CommAgent, Distance, EnthusiasmPolicy, ExperienceLog, Hierarchy, Inversion, Mode,
    Need, NeedStack, Objective, PerceptualControlUnit, Predictor, SearchBudget, Strategy, Symbol, TabularModel,
    WorldTransform,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{
    AgentConfig, BindingConfig, DistanceConfig, ExperimentConfig, HierarchyConfig, ScenarioConfig, UnitConfig,
    WorldConfig,
};
use crate::trace::{format_value, TraceRecord};
use crate::HarnessError;

/// Stand-in for non-finite metric values so summaries stay numeric.
pub const METRIC_CAP: f64 = 1e300;

/// Trace rows and metrics produced by one seed.
#[derive(Debug, Default)]
pub struct SeedOutput {
    pub records: Vec<TraceRecord>,
    pub metrics: Vec<(String, f64)>,
}

impl SeedOutput {
    fn row(&mut self, tick: u64, scope: &str, signal: &str, value: f64) {
        self.records.push(TraceRecord::new(tick, scope, signal, value));
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        let v = if value.is_nan() {
            METRIC_CAP
        } else {
            value.clamp(-METRIC_CAP, METRIC_CAP)
        };
        self.metrics.push((name.into(), v));
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn build_world(config: &WorldConfig, seed: u64) -> Result<WorldTransform, HarnessError> {
    Ok(match config {
        WorldConfig::Thermostat {
            ambient,
            leak,
            heater_gain,
            initial_temp,
            disturbance,
            noise_std,
        } => {
            let mut w = ThermostatWorld::new(*ambient, *leak, *heater_gain)?
                .with_disturbance(DisturbanceSchedule::from_steps(disturbance.clone())?)
                .with_observation_noise(*noise_std, derive_seed(seed, 1))?;
            if let Some(t) = initial_temp {
                w = w.with_initial_temp(*t);
            }
            WorldTransform::Thermostat(w)
        }
        WorldConfig::LightSwitch { switches } => WorldTransform::LightSwitch(LightSwitchWorld::new(*switches, seed)?),
        WorldConfig::Landscape { table, start } => {
            WorldTransform::Landscape(LandscapeWorld::new(table.clone())?.with_start(*start)?)
        }
        WorldConfig::Channel {
            alphabet_size,
            substitution_prob,
        } => WorldTransform::Channel(ChannelWorld::new(*alphabet_size, *substitution_prob, seed)?),
    })
}

pub fn build_unit(cfg: &UnitConfig) -> PerceptualControlUnit {
    let mut unit = PerceptualControlUnit::new(cfg.id.clone(), cfg.weights.clone(), cfg.gain)
        .with_reference(cfg.reference)
        .with_mode(cfg.mode);
    if let Some(pid) = cfg.pid {
        unit = unit.with_pid(pid);
    }
    if let Some(window) = cfg.window {
        unit = unit.with_input(InputFunction::WindowAverage {
            weights: cfg.weights.clone(),
            window,
            history: Default::default(),
        });
    }
    if let Some(level) = cfg.level {
        unit = unit.with_label(level);
    }
    unit
}

pub fn build_hierarchy(cfg: &HierarchyConfig) -> Result<Hierarchy, HarnessError> {
    let levels = cfg
        .levels
        .iter()
        .map(|l| l.units.iter().map(build_unit).collect())
        .collect();
    Ok(Hierarchy::new(levels, cfg.wiring.clone())?)
}

fn thermostat(world: &WorldTransform) -> &ThermostatWorld {
    match world {
        WorldTransform::Thermostat(w) => w,
        _ => unreachable!("validated world kind"),
    }
}

pub fn run_seed(config: &ScenarioConfig, seed: u64) -> Result<SeedOutput, HarnessError> {
    let world = build_world(&config.world, seed)?;
    let scope = format!("s{seed}");
    let mut out = SeedOutput::default();
    match &config.experiment {
        ExperimentConfig::Loop {
            reference,
            feedback_gain,
            pid,
            flip_kp,
            random_step,
        } => {
            let w = thermostat(&world);
            let ticks = config.ticks;
            let mut ds = w.disturbance.series(ticks);
            let mut drawn = 0.0;
            if let Some(step) = random_step {
                drawn = stream_rng(seed, 2).random_range(step.low..=step.high);
                for d in ds.iter_mut().skip(step.tick as usize) {
                    *d += drawn;
                }
            }
            let params = if *flip_kp { pid.with_flipped_kp() } else { *pid };
            let r = vec![*reference; ticks];
            let trace = simulate_closed_loop(&params, w.plant(), *feedback_gain, &r, &ds, config.dt, ticks)?;
            let loop_scope = format!("{scope}/loop");
            for (k, s) in trace.signals.iter().enumerate() {
                for (name, v) in pct_core::LoopSignals::NAMES.iter().zip(s.values()) {
                    out.row(k as u64, &loop_scope, name, v);
                }
            }
            let last = trace.signals.last().expect("ticks ≥ 1");
            out.metric("diverged", flag(trace.diverged()));
            out.metric(
                "divergence_tick",
                trace.divergence.map_or(ticks as f64, |d| d.tick as f64),
            );
            out.metric("final_abs_error", last.e.abs());
            out.metric("final_output", last.c);
            out.metric("random_disturbance", drawn);
            out.metric("ticks_run", trace.signals.len() as f64);
        }

        ExperimentConfig::LightSwitch {} => {
            let start = world.initial_state();
            let ActionSpace::Discrete(actions) = world.action_space() else { unreachable!() };
            let mut tried = vec![];
            let mut obj = Objective::new(|a: &Action| {
                let s = world.step(&start, a).expect("action from the world's own space");
                let lit = world.observe(&s).real("lit") == Some(1.0);
                tried.push((*a, lit));
                flag(!lit)
            });
            let budget = SearchBudget::new(actions.len(), 0.0)?;
            let res = argmin_random(&actions, &mut obj, &budget, derive_seed(seed, 1))?;
            drop(obj);
            let search_scope = format!("{scope}/search");
            for (t, (a, lit)) in tried.iter().enumerate() {
                let Action::Discrete(i) = a else { unreachable!() };
                out.row(t as u64 + 1, &search_scope, "switch", *i as f64);
                out.row(t as u64 + 1, &search_scope, "lit", flag(*lit));
            }
            out.metric("found", flag(res.best_error == 0.0));
            out.metric("trials", res.evaluations as f64);
        }

        ExperimentConfig::PlanVsGreedy {
            max_run,
            model_corruption,
        } => plan_vs_greedy(config, &world, &scope, *max_run, model_corruption, &mut out)?,

        ExperimentConfig::HpctModes { unit } => {
            let switch_table_ok = Mode::ALL
                .iter()
                .all(|m| pct_core::SwitchState::for_mode(*m).mode() == *m);
            out.metric("switch_table_consistent", flag(switch_table_ok));
            for mode in Mode::ALL {
                let name = mode_name(mode);
                let mut h = Hierarchy::single(build_unit(unit).with_mode(mode));
                let mut state = world.initial_state();
                let initial = state.fingerprint();
                let records = drive(&mut h, &world, &mut state, config.ticks, config.dt)?;
                emit_units(&mut out, &format!("{scope}/{name}"), &records);
                let world_scope = format!("{scope}/{name}/world");
                let mut changes = 0;
                for r in &records {
                    if r.world_fingerprint != initial {
                        changes += 1;
                    }
                    out.row(r.tick, &world_scope, "acted", flag(r.acted));
                }
                let errs: Vec<f64> = records.iter().map(|r| r.units[0].error.abs()).collect();
                let upward = records.iter().filter(|r| r.units[0].upward.is_some()).count() as f64;
                let max_out = records.iter().map(|r| r.units[0].output.abs()).fold(0.0, f64::max);
                let acted = records.iter().filter(|r| r.acted).count() as f64;
                out.metric(format!("{name}.world_changes"), changes as f64);
                out.metric(format!("{name}.acted_ticks"), acted);
                out.metric(format!("{name}.upward_ticks"), upward);
                out.metric(format!("{name}.max_abs_output"), max_out);
                out.metric(format!("{name}.final_abs_error"), *errs.last().expect("ticks ≥ 1"));
                out.metric(
                    format!("{name}.error_nonincreasing"),
                    flag(errs.windows(2).all(|w| w[1] <= w[0])),
                );
                out.metric(
                    format!("{name}.error_reduced"),
                    flag(errs.last() < errs.first()),
                );
            }
        }

        ExperimentConfig::Hierarchy { hierarchy } => {
            let mut h = build_hierarchy(hierarchy)?;
            let mut state = world.initial_state();
            let records = drive(&mut h, &world, &mut state, config.ticks, config.dt)?;
            emit_units(&mut out, &scope, &records);
            let last = records.last().expect("ticks ≥ 1");
            for u in &last.units {
                out.metric(format!("{}.final_abs_error", u.id), u.error.abs());
                out.metric(format!("{}.final_perception", u.id), u.perceptual);
            }
            out.metric("final_temperature", state.real("temperature").unwrap_or(f64::NAN));
            out.metric("final_intrinsic_error", last.intrinsic_error);
        }

        ExperimentConfig::Reorganisation {
            hierarchy,
            window,
            scale,
            max_steps,
            target_fraction,
        } => {
            let h = build_hierarchy(hierarchy)?;
            let env = WorldEpisode {
                world: world.clone(),
                dt: config.dt,
            };
            let run = reorganize(&h, &env, *window, *scale, seed, *max_steps, *target_fraction)?;
            let reorg_scope = format!("{scope}/reorg");
            out.row(0, &reorg_scope, "intrinsic_error", run.initial_error);
            for (i, e) in run.accepted_errors.iter().enumerate() {
                out.row(i as u64 + 1, &reorg_scope, "intrinsic_error", *e);
            }
            let final_error = run.accepted_errors.last().copied().unwrap_or(run.initial_error);
            out.metric("initial_error", run.initial_error);
            out.metric("final_error", final_error);
            out.metric("error_ratio", final_error / run.initial_error);
            out.metric("recovered", flag(run.recovered_at.is_some()));
            out.metric(
                "recovered_at",
                run.recovered_at.map_or((*max_steps + 1) as f64, |s| s as f64),
            );
            out.metric("accepted_steps", run.accepted_errors.len() as f64);
            let mut chain = vec![run.initial_error];
            chain.extend(&run.accepted_errors);
            out.metric(
                "accepted_strictly_decreasing",
                flag(chain.windows(2).all(|w| w[1] < w[0])),
            );
            for u in run.hierarchy.units() {
                out.metric(format!("{}.final_gain", u.id), u.output_fn.gain());
            }
        }

        ExperimentConfig::InferCause {
            candidates,
            low,
            high,
            noise_std,
            distance,
        } => {
            let mut rng = stream_rng(seed, 3);
            let outputs: Vec<f64> = (0..*candidates).map(|_| rng.random_range(*low..*high)).collect();
            let cause = rng.random_range(0..*candidates) as u32;
            let noise = Normal::new(0.0, *noise_std).map_err(|e| HarnessError::Config(e.to_string()))?;
            let observed = outputs[cause as usize] + noise.sample(&mut rng);
            let cands: Vec<u32> = (0..*candidates as u32).collect();
            let budget = SearchBudget::evaluations(*candidates);
            let res = match distance {
                DistanceConfig::Squared => {
                    let model: TabularModel<u32, f64> =
                        outputs.iter().enumerate().map(|(i, o)| (i as u32, *o)).collect();
                    out.metric("inversion_hit", flag(model.invert_exact(&observed) != Inversion::Miss));
                    infer_cause(&model, &observed, &cands, &budget, Strategy::Exhaustive)?
                }
                DistanceConfig::Absolute => {
                    let model: TabularModel<u32, Absolute> =
                        outputs.iter().enumerate().map(|(i, o)| (i as u32, Absolute(*o))).collect();
                    out.metric(
                        "inversion_hit",
                        flag(model.invert_exact(&Absolute(observed)) != Inversion::Miss),
                    );
                    infer_cause(&model, &Absolute(observed), &cands, &budget, Strategy::Exhaustive)?
                }
            };
            let table_scope = format!("{scope}/model");
            for (i, o) in outputs.iter().enumerate() {
                out.row(i as u64, &table_scope, "predicted", *o);
            }
            out.row(0, &format!("{scope}/observation"), "observed", observed);
            out.metric("true_cause", f64::from(cause));
            out.metric("inferred_cause", f64::from(res.best_candidate));
            out.metric("correct", flag(res.best_candidate == cause));
            out.metric("best_distance", res.best_error);
            out.metric("evaluations", res.evaluations as f64);
        }

        ExperimentConfig::Communication {
            sender,
            receiver,
            episodes,
            full_alphabet,
            noise,
            feedback_rounds,
        } => {
            let WorldTransform::Channel(base) = &world else { unreachable!() };
            let k = base.alphabet_size;
            let sender_own = transforms(sender, k);
            let receiver_own = transforms(receiver, k);
            let s_agent = make_agent(sender, &sender_own, &receiver_own, derive_seed(seed, 4));
            let r_agent = make_agent(receiver, &receiver_own, &sender_own, derive_seed(seed, 5));
            let ps = if noise.is_empty() { vec![base.substitution_prob] } else { noise.clone() };
            let budget = SearchBudget::evaluations(k as usize);
            let suffix = |name: &str, p: f64| {
                if ps.len() == 1 {
                    name.to_string()
                } else {
                    format!("{name}.p{}", format_value(p))
                }
            };
            let mut oracles = vec![];
            for (j, &p) in ps.iter().enumerate() {
                let channel = WorldTransform::Channel(ChannelWorld::new(k, p, derive_seed(seed, 10 + j as u64))?);
                let mut intention_rng = stream_rng(seed, 20 + j as u64);
                let ep_scope = format!("{scope}/p{}", format_value(p));
                let (mut hits, mut s_evals, mut r_evals) = (0usize, 0usize, 0usize);
                for e in 0..*episodes {
                    let intention = if *full_alphabet {
                        Symbol(e as u32 % k)
                    } else {
                        Symbol(intention_rng.random_range(0..k))
                    };
                    let ep_seed = derive_seed(seed, e as u64);
                    let ep = run_episode_with_feedback(
                        &s_agent,
                        &r_agent,
                        &channel,
                        intention,
                        &budget,
                        ep_seed,
                        *feedback_rounds,
                    )?;
                    hits += usize::from(ep.success);
                    s_evals += ep.sender_search_evals;
                    r_evals += ep.receiver_search_evals;
                    out.row(e as u64, &ep_scope, "success", flag(ep.success));
                }
                let n = *episodes as f64;
                let acc = hits as f64 / n;
                out.metric(suffix("accuracy", p), acc);
                out.metric(suffix("sender_evaluations", p), s_evals as f64 / n);
                out.metric(suffix("receiver_evaluations", p), r_evals as f64 / n);
                if *feedback_rounds == 1 {
                    let oracle = enumerated_accuracy(&s_agent, &r_agent, &channel, &budget)?;
                    let se = (oracle * (1.0 - oracle) / n).sqrt();
                    let z = if se > 0.0 {
                        (acc - oracle) / se
                    } else if acc == oracle {
                        0.0
                    } else {
                        METRIC_CAP
                    };
                    out.metric(suffix("oracle_accuracy", p), oracle);
                    out.metric(suffix("abs_z", p), z.abs());
                    oracles.push((p, oracle));
                }
            }
            if oracles.len() > 1 {
                let mut sorted = oracles.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                out.metric(
                    "oracle_nonincreasing_in_noise",
                    flag(sorted.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)),
                );
            }
        }

        ExperimentConfig::NeedsAgent {
            needs,
            policy,
            threshold,
            satisfaction,
            requester,
            provider,
            shock,
        } => {
            let WorldTransform::Channel(base) = &world else { unreachable!() };
            let k = base.alphabet_size;
            let stack = NeedStack::new(
                needs
                    .iter()
                    .map(|n| {
                        Need::new(n.name.clone(), n.kind, n.setpoint, Symbol(n.intention))
                            .with_level(n.level.unwrap_or(n.setpoint))
                            .with_depletion(n.depletion)
                            .with_weight(n.weight)
                            .with_bounds(f64::NEG_INFINITY, n.setpoint)
                    })
                    .collect(),
            )?;
            let policy = EnthusiasmPolicy::new(policy.base_budget, policy.base_gain, policy.arousal_coupling)?;
            let req_own = transforms(requester, k);
            let prov_own = transforms(provider, k);
            let req_agent = make_agent(requester, &req_own, &prov_own, derive_seed(seed, 4));
            let prov_agent = make_agent(provider, &prov_own, &req_own, derive_seed(seed, 5));
            // The provider reads requests against its own picture of needs.
            let provider_view = stack.clone();
            let mut state = stack;
            let mut pending: BTreeMap<String, f64> = BTreeMap::new();
            let shock_tick = shock.as_ref().map(|s| s.tick);
            let (mut evals, mut idle_evals, mut episodes, mut successes) = (0usize, 0usize, 0usize, 0usize);
            let mut first_intention = -1.0;
            let mut first_gain = 0.0;
            let agent_scope = format!("{scope}/agent");
            let ep_scope = format!("{scope}/episode");
            for t in 0..config.ticks as u64 {
                if let Some(s) = shock.as_ref().filter(|s| s.tick == t) {
                    let need = state.get_mut(&s.need).expect("validated need name");
                    need.level -= s.amount;
                }
                state = update_needs(&state, &std::mem::take(&mut pending), config.dt)?;
                let desires = derive_desires(&state, *threshold);
                let mut tick_evals = 0;
                if let Some(desire) = select_intention(&desires) {
                    let (effort, gain) = enthusiasm_to_effort(&policy, desire.urgency)?;
                    let budget = SearchBudget::evaluations(effort);
                    let ep = run_episode(&req_agent, &prov_agent, &world, desire.outcome, &budget, derive_seed(seed, t))?;
                    tick_evals = ep.sender_search_evals + ep.receiver_search_evals;
                    episodes += 1;
                    if first_intention < 0.0 {
                        first_intention = f64::from(desire.outcome.0);
                        first_gain = gain;
                    }
                    let understood = comprehend(&provider_view, ep.interpretation);
                    if understood.contains(&desire.need.as_str()) {
                        successes += 1;
                    }
                    for name in understood {
                        pending.insert(name.to_string(), *satisfaction);
                    }
                    out.row(t, &ep_scope, "intention", f64::from(ep.intention_sent.0));
                    out.row(t, &ep_scope, "signal", f64::from(ep.signal_sent.0));
                    out.row(t, &ep_scope, "received", f64::from(ep.signal_received.0));
                    out.row(t, &ep_scope, "interpretation", f64::from(ep.interpretation.0));
                    out.row(t, &ep_scope, "success", flag(ep.success));
                }
                evals += tick_evals;
                if shock_tick.is_none_or(|s| t < s) {
                    idle_evals += tick_evals;
                }
                let appraisal = state.appraise(tick_evals, &policy);
                out.row(t, &agent_scope, "intrinsic_error", state.intrinsic_error());
                out.row(t, &agent_scope, "valence", appraisal.valence);
                out.row(t, &agent_scope, "arousal", appraisal.arousal);
                out.row(t, &agent_scope, "evaluations", tick_evals as f64);
            }
            out.metric("idle_evaluations", idle_evals as f64);
            out.metric("total_evaluations", evals as f64);
            out.metric("episodes", episodes as f64);
            out.metric("successful_episodes", successes as f64);
            out.metric("first_intention", first_intention);
            out.metric("first_enthusiasm_gain", first_gain);
            out.metric("final_intrinsic_error", state.intrinsic_error());
            out.metric("needs_satisfied", flag(state.all_satisfied()));
        }
    }
    Ok(out)
}


pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Control => "control",
        Mode::PassiveObservation => "passive_observation",
        Mode::Automatic => "automatic",
        Mode::Imagination => "imagination",
    }
}

fn emit_units(out: &mut SeedOutput, scope: &str, records: &[TickRecord]) {
    for r in records {
        for u in &r.units {
            let s = format!("{scope}/{}", u.id);
            out.row(r.tick, &s, "r", u.reference);
            out.row(r.tick, &s, "p", u.perceptual);
            out.row(r.tick, &s, "e", u.error);
            out.row(r.tick, &s, "o", u.output);
            if let Some(up) = u.upward {
                out.row(r.tick, &s, "up", up);
            }
        }
    }
}

/// Real-valued observation compared by absolute rather than squared
/// difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absolute(pub f64);

impl Distance for Absolute {
    fn distance(&self, other: &Self) -> f64 {
        (self.0 - other.0).abs()
    }
}

pub fn transforms(cfg: &AgentConfig, k: u32) -> AgentTransforms {
    match &cfg.code {
        Some(code) => AgentTransforms::permuted(code),
        None => AgentTransforms::identity(k),
    }
}

/// Builds an agent's models of its partner. Learned models see
/// `learn_pairs` random samples of each partner transform; unseen entries
/// fall back to the agent's own transforms.
pub fn make_agent(cfg: &AgentConfig, own: &AgentTransforms, partner: &AgentTransforms, seed: u64) -> CommAgent {
    match cfg.binding {
        BindingConfig::SelfAsOther => CommAgent::self_as_other(own.clone()),
        BindingConfig::Learned => {
            let mut rng = stream_rng(seed, 0);
            let g_hat = learn(&partner.g, &own.g, cfg.learn_pairs, &mut rng);
            let h_hat = learn(&partner.h, &own.h, cfg.learn_pairs, &mut rng);
            CommAgent::learned(own.clone(), g_hat, h_hat)
        }
    }
}

fn learn(map: &SymbolMap, fallback: &SymbolMap, pairs: usize, rng: &mut impl Rng) -> SymbolMap {
    let domain: Vec<Symbol> = map.inputs().copied().collect();
    let mut log = ExperienceLog::new();
    for t in 0..pairs {
        let x = domain[rng.random_range(0..domain.len())];
        log.record(x, map.predict(&x).expect("domain drawn from the map"), t as u64);
    }
    let mut fitted = TabularModel::fit(&log).unwrap_or_default();
    for (x, y) in fallback.entries() {
        if fitted.get(x).is_none() {
            fitted.insert(*x, *y);
        }
    }
    fitted
}

fn plan_vs_greedy(
    config: &ScenarioConfig,
    world: &WorldTransform,
    scope: &str,
    max_run: Option<usize>,
    corruption: &[(usize, f64)],
    out: &mut SeedOutput,
) -> Result<(), HarnessError> {
    let WorldTransform::Landscape(land) = world else { unreachable!() };
    let moves: Vec<Action> = LandscapeWorld::MOVES.iter().map(|m| Action::Discrete(*m)).collect();
    let error_of = |s: &pct_core::WorldState| world.observe(s).real("error").expect("landscape exposes error");
    let world_steps = Cell::new(0usize);
    let step = |s: &pct_core::WorldState, a: &Action| {
        world_steps.set(world_steps.get() + 1);
        world.step(s, a)
    };

    // Greedy: probe each move in the world, commit to the best while it helps.
    let greedy_scope = format!("{scope}/greedy");
    let mut state = world.initial_state();
    out.row(0, &greedy_scope, "position", land.start as f64);
    out.row(0, &greedy_scope, "error", error_of(&state));
    for t in 1..=config.ticks as u64 {
        let here = error_of(&state);
        let best = {
            let here_state = &state;
            let mut obj =
                Objective::new(|a: &Action| error_of(&step(here_state, a).expect("move from the world's space")));
            argmin_exhaustive(&moves, &mut obj, &SearchBudget::evaluations(moves.len()))?
        };
        if best.best_error >= here {
            break;
        }
        state = step(&state, &best.best_candidate)?;
        out.row(t, &greedy_scope, "position", state.real("position").unwrap_or(f64::NAN));
        out.row(t, &greedy_scope, "error", error_of(&state));
    }
    out.metric("greedy_final_error", error_of(&state));
    out.metric("greedy_final_position", state.real("position").unwrap_or(f64::NAN));
    let greedy_steps = world_steps.get();
    out.metric("greedy_world_steps", greedy_steps as f64);

    // Planning: search constant-direction runs through the forward model.
    let positions: Vec<i64> = (0..land.error_table.len() as i64).collect();
    let transition = TabularModel::from_fn(
        positions
            .iter()
            .flat_map(|p| LandscapeWorld::MOVES.iter().map(move |m| (*p, *m))),
        |(p, m)| land.moved(*p, *m),
    );
    let mut observation = TabularModel::from_fn(positions.iter().copied(), |p| land.error_at(*p));
    for (i, v) in corruption {
        observation.insert(*i as i64, *v);
    }
    let rollout = RolloutModel {
        transition: &transition,
        observation: &observation,
        start: land.start as i64,
    };
    let longest = max_run.unwrap_or(land.error_table.len());
    let mut plans: Vec<Vec<i64>> = vec![vec![]];
    for d in [-1i64, 1] {
        plans.extend((1..=longest).map(|n| vec![d; n]));
    }
    let plan = plan_with_forward_model(
        &rollout,
        &0.0,
        &plans,
        &SearchBudget::evaluations(plans.len()),
        Strategy::Exhaustive,
    )?;
    let predicted = rollout.predict(&plan.best_candidate)?;
    out.metric("planning_world_steps", (world_steps.get() - greedy_steps) as f64);
    out.metric("planning_evaluations", plan.evaluations as f64);
    out.metric("planned_predicted_error", predicted);

    let plan_scope = format!("{scope}/planned");
    let mut state = world.initial_state();
    out.row(0, &plan_scope, "position", land.start as f64);
    out.row(0, &plan_scope, "error", error_of(&state));
    for (t, m) in plan.best_candidate.iter().enumerate() {
        state = step(&state, &Action::Discrete(*m))?;
        out.row(t as u64 + 1, &plan_scope, "position", state.real("position").unwrap_or(f64::NAN));
        out.row(t as u64 + 1, &plan_scope, "error", error_of(&state));
    }
    out.metric("planned_final_error", error_of(&state));
    out.metric("planned_final_position", state.real("position").unwrap_or(f64::NAN));
    out.metric("plan_length", plan.best_candidate.len() as f64);
    Ok(())
}
