//! Single-loop negative-feedback control.
//!
//! A discrete PID controller, the steady-state closed-loop ratio, and a
//! tick-by-tick loop simulator. The simulator wires the loop as
//!
//! ```text
//!   r ──►(+)── e ──► PID ── u ──► plant ◄── d
//!         ▲−                        │
//!         └──────── b = h·c ◄───────┘ c
//! ```
//!
//! The disturbance `d` is handed only to the plant; the controller sees
//! nothing but the error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Any loop signal whose magnitude exceeds this is treated as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

const SINGULAR_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular loop: 1 + h·g2·g1 = {denominator:e}")]
    SingularLoop { denominator: f64 },
    #[error("{name} series has {len} samples, need {ticks}")]
    SeriesTooShort {
        name: &'static str,
        len: usize,
        ticks: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidParams {
    pub fn new(kp: f64, ki: f64, kd: f64) -> Result<Self, ControlError> {
        let params = Self { kp, ki, kd };
        params.validate()?;
        Ok(params)
    }

    pub fn proportional(kp: f64) -> Self {
        Self { kp, ki: 0.0, kd: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if self.kp.is_finite() && self.ki.is_finite() && self.kd.is_finite() {
            Ok(())
        } else {
            Err(ControlError::InvalidInput(format!(
                "non-finite PID gains {self:?}"
            )))
        }
    }

    /// Same gains with the proportional term negated.
    pub fn with_flipped_kp(self) -> Self {
        Self {
            kp: -self.kp,
            ..self
        }
    }
}

/// Integrator and differentiator memory of a PID controller.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub integral_accum: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One PID update using a rectangle-rule integral and a backward-difference
/// derivative. The derivative term is zero on the first tick after reset.
pub fn pid_step(
    params: &PidParams,
    state: &PidState,
    e: f64,
    dt: f64,
) -> Result<(f64, PidState), ControlError> {
    if !e.is_finite() {
        return Err(ControlError::InvalidInput(format!("non-finite error {e}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let integral_accum = state.integral_accum + e * dt;
    let derivative = if state.initialized {
        (e - state.prev_error) / dt
    } else {
        0.0
    };
    let u = params.kp * e + params.ki * integral_accum + params.kd * derivative;
    Ok((
        u,
        PidState {
            integral_accum,
            prev_error: e,
            initialized: true,
        },
    ))
}

/// Scalar gains of the classic loop: forward element, plant, feedback path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSpec {
    pub g1: f64,
    pub g2: f64,
    pub h: f64,
}

impl ClosedLoopSpec {
    pub fn loop_gain(&self) -> f64 {
        self.h * self.g2 * self.g1
    }
}

/// Steady-state output/reference ratio `g2·g1 / (1 + h·g2·g1)`.
pub fn closed_loop_gain(spec: &ClosedLoopSpec) -> Result<f64, ControlError> {
    let forward = spec.g2 * spec.g1;
    let denominator = 1.0 + spec.h * forward;
    if !denominator.is_finite() || denominator.abs() <= SINGULAR_EPS {
        return Err(ControlError::SingularLoop { denominator });
    }
    Ok(forward / denominator)
}

/// Anything the loop can drive. `advance` is the only place a disturbance
/// enters.
pub trait Plant {
    fn output(&self) -> f64;
    fn advance(&mut self, u: f64, d: f64);
}

/// `c[k+1] = pole·c[k] + input_gain·(u[k] + d[k])`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderPlant {
    pub state: f64,
    pub pole: f64,
    pub input_gain: f64,
}

impl FirstOrderPlant {
    pub fn new(state: f64, pole: f64, input_gain: f64) -> Result<Self, ControlError> {
        if !(state.is_finite() && pole.is_finite() && input_gain.is_finite()) {
            return Err(ControlError::InvalidInput(
                "plant parameters must be finite".into(),
            ));
        }
        if pole.abs() >= 1.0 {
            return Err(ControlError::InvalidInput(format!(
                "plant pole must satisfy |pole| < 1, got {pole}"
            )));
        }
        Ok(Self {
            state,
            pole,
            input_gain,
        })
    }

    /// Static (DC) gain from drive to output.
    pub fn dc_gain(&self) -> f64 {
        self.input_gain / (1.0 - self.pole)
    }
}

impl Plant for FirstOrderPlant {
    fn output(&self) -> f64 {
        self.state
    }

    fn advance(&mut self, u: f64, d: f64) {
        self.state = self.pole * self.state + self.input_gain * (u + d);
    }
}

/// Signals observed during one tick. `c` and `b` are sensed before the
/// plant advances, so `e = r − b` holds inside every record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopSignals {
    pub r: f64,
    pub e: f64,
    pub u: f64,
    pub c: f64,
    pub b: f64,
    pub d: f64,
}

impl LoopSignals {
    pub const NAMES: [&'static str; 6] = ["r", "e", "u", "c", "b", "d"];

    pub fn values(&self) -> [f64; 6] {
        [self.r, self.e, self.u, self.c, self.b, self.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub tick: usize,
    pub signal: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub signals: Vec<LoopSignals>,
    /// Set when the run stopped early because a signal blew up. The record
    /// for the offending tick is the last one in `signals`.
    pub divergence: Option<Divergence>,
}

impl LoopTrace {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.signals.last().map(|s| s.e)
    }
}

/// Runs the loop for `ticks` ticks against `plant` with feedback gain `h`.
pub fn simulate_closed_loop<P: Plant>(
    params: &PidParams,
    mut plant: P,
    h: f64,
    r_series: &[f64],
    d_series: &[f64],
    dt: f64,
    ticks: usize,
) -> Result<LoopTrace, ControlError> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ControlError::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    if !h.is_finite() {
        return Err(ControlError::InvalidInput("feedback gain must be finite".into()));
    }
    for (name, series) in [("reference", r_series), ("disturbance", d_series)] {
        if series.len() < ticks {
            return Err(ControlError::SeriesTooShort {
                name,
                len: series.len(),
                ticks,
            });
        }
    }

    let mut pid = PidState::default();
    let mut signals = Vec::with_capacity(ticks);
    for tick in 0..ticks {
        let r = r_series[tick];
        let d = d_series[tick];
        let c = plant.output();
        let b = h * c;
        let e = r - b;
        let u = if e.is_finite() {
            let (u, next) = pid_step(params, &pid, e, dt)?;
            pid = next;
            u
        } else {
            f64::NAN
        };
        let record = LoopSignals { r, e, u, c, b, d };
        signals.push(record);
        if let Some(divergence) = check_divergence(tick, &record) {
            return Ok(LoopTrace {
                signals,
                divergence: Some(divergence),
            });
        }
        plant.advance(u, d);
    }
    Ok(LoopTrace {
        signals,
        divergence: None,
    })
}

fn check_divergence(tick: usize, record: &LoopSignals) -> Option<Divergence> {
    LoopSignals::NAMES
        .iter()
        .zip(record.values())
        .find(|(_, v)| !v.is_finite() || v.abs() > DIVERGENCE_THRESHOLD)
        .map(|(signal, value)| Divergence {
            tick,
            signal,
            value,
        })
}
