//! The bundled scenario suite.

/// A scenario shipped with the binary.
#[derive(Debug, Clone, Copy)]
pub struct Bundled {
    pub name: &'static str,
    pub text: &'static str,
}

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        &[$(Bundled {
            name: $name,
            text: include_str!(concat!("../scenarios/", $name, ".toml")),
        }),*]
    };
}

/// Listing order.
pub const ALL: &[Bundled] = bundled!(
    "thermostat_tracking",
    "disturbance_rejection",
    "positive_feedback_divergence",
    "light_switch",
    "plan_vs_greedy",
    "hpct_modes",
    "hpct_cascade",
    "reorganisation_recovery",
    "infer_cause_noisy",
    "comm_self_as_other",
    "comm_noise_sweep",
    "comm_model_mismatch",
    "needs_driven_agent",
);

pub fn get(name: &str) -> Option<&'static Bundled> {
    ALL.iter().find(|b| b.name == name)
}

/// `(name, description)` in listing order.
pub fn list() -> Vec<(&'static str, String)> {
    ALL.iter()
        .map(|b| {
            let description = crate::ScenarioConfig::parse(b.text)
                .map(|c| c.description)
                .unwrap_or_else(|e| format!("(invalid: {e})"));
            (b.name, description)
        })
        .collect()
}
