use pct_core::control::{closed_loop_gain, pid_step, simulate_closed_loop};
use pct_core::world::{DisturbanceSchedule, ThermostatWorld};
use pct_core::{ClosedLoopSpec, FirstOrderPlant, PidParams, PidState};
use proptest::prelude::*;

const TICKS: usize = 400;

fn thermostat(d: f64) -> ThermostatWorld {
    ThermostatWorld::new(10.0, 0.1, 0.1)
        .unwrap()
        .with_disturbance(DisturbanceSchedule::step_at(150, d))
}

fn run_thermostat(params: PidParams, d: f64) -> pct_core::LoopTrace {
    let world = thermostat(d);
    let r = vec![20.0; TICKS];
    let ds = world.disturbance.series(TICKS);
    simulate_closed_loop(&params, world.plant(), 1.0, &r, &ds, 1.0, TICKS).unwrap()
}

#[test]
fn rectangle_rule_sequence_by_hand() {
    // kp=2, ki=1, dt=1, e=1: u_k = 2 + k
    let p = PidParams::new(2.0, 1.0, 0.0).unwrap();
    let mut s = PidState::default();
    let mut us = vec![];
    for _ in 0..3 {
        let (u, next) = pid_step(&p, &s, 1.0, 1.0).unwrap();
        us.push(u);
        s = next;
    }
    assert_eq!(us, vec![3.0, 4.0, 5.0]);
}

#[test]
fn closed_loop_examples() {
    let g = |g1, g2, h| closed_loop_gain(&ClosedLoopSpec { g1, g2, h }).unwrap();
    assert!((g(1000.0, 1.0, 1.0) - 1000.0 / 1001.0).abs() < 1e-15);
    assert_eq!(g(0.0, 1.0, 1.0), 0.0);
    assert_eq!(g(7.0, 1.0, 0.0), 7.0);
    assert!(closed_loop_gain(&ClosedLoopSpec { g1: -1.0, g2: 1.0, h: 1.0 }).is_err());
}

#[test]
fn steady_state_ratio_matches_closed_form() {
    for kp in [10.0, 100.0, 1000.0] {
        let plant = FirstOrderPlant::new(0.0, 0.999, 0.001).unwrap();
        let g2 = plant.dc_gain();
        let ticks = 4000;
        let r = vec![1.0; ticks];
        let d = vec![0.0; ticks];
        let trace = simulate_closed_loop(&PidParams::proportional(kp), plant, 1.0, &r, &d, 1.0, ticks).unwrap();
        let last = trace.signals.last().unwrap();
        // DC gain of c' = a·c + b·u is b/(1−a); fixed point c = g2·kp(r − c)
        let oracle = g2 * kp / (1.0 + g2 * kp);
        let expected = closed_loop_gain(&ClosedLoopSpec { g1: kp, g2, h: 1.0 }).unwrap();
        assert!((expected - oracle).abs() < 1e-12);
        assert!((last.c / last.r - expected).abs() < 1e-6, "kp={kp}: {}", last.c / last.r);
    }
}

#[test]
fn tracking_without_disturbance() {
    let trace = run_thermostat(PidParams::new(2.0, 0.5, 0.0).unwrap(), 0.0);
    assert!(!trace.diverged());
    assert!(trace.final_error().unwrap().abs() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn comparator_identity(kp in -5.0..5.0f64, ki in 0.0..1.0f64, kd in 0.0..0.5f64, d in -100.0..100.0f64) {
        let trace = run_thermostat(PidParams::new(kp, ki, kd).unwrap(), d);
        for s in &trace.signals {
            prop_assert_eq!(s.e, s.r - s.b);
        }
    }

    #[test]
    fn integral_action_rejects_any_constant_disturbance(d in -1000.0..1000.0f64) {
        let trace = run_thermostat(PidParams::new(2.0, 0.5, 0.0).unwrap(), d);
        prop_assert!(!trace.diverged());
        prop_assert_eq!(trace.signals.len(), TICKS);
        prop_assert!(trace.final_error().unwrap().abs() < 1e-3);
    }

    #[test]
    fn flipped_gain_diverges(d in -1000.0..1000.0f64) {
        let trace = run_thermostat(PidParams::new(2.0, 0.5, 0.0).unwrap().with_flipped_kp(), d);
        prop_assert!(trace.diverged());
        let div = trace.divergence.unwrap();
        prop_assert!(div.value.abs() > 1e6 || !div.value.is_finite());
    }

    #[test]
    fn traces_are_bit_identical(kp in 0.1..3.0f64, ki in 0.0..1.0f64, d in -50.0..50.0f64) {
        let p = PidParams::new(kp, ki, 0.0).unwrap();
        let a = run_thermostat(p, d);
        let b = run_thermostat(p, d);
        prop_assert_eq!(a, b);
    }
}
