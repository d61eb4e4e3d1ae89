//! Scenario runner for `pct-core`: TOML configs in, CSV traces and JSON
//! summaries out.

// `!(x > 0.0)` style checks are intended: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod scenarios;
pub mod summary;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{override_param, ScenarioConfig, SeedRange};
pub use summary::{MetricStats, SummaryReport};
pub use trace::TraceRecord;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Runtime(e.to_string())
            }
        })*
    };
}

runtime_from!(
    pct_core::ControlError,
    pct_core::WorldError,
    pct_core::HpctError,
    pct_core::SearchError,
    pct_core::ModelError,
    pct_core::CommError,
    pct_core::motivation::MotivationError
);

/// A finished scenario: the rendered trace and the summary computed from it.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub trace: String,
    pub summary: SummaryReport,
}

/// Runs every seed (in parallel), then renders the trace in seed order and
/// summarises the rendered text.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, HarnessError> {
    config.validate()?;
    let seeds: Vec<u64> = config.seeds.iter().collect();
    let outputs = seeds
        .par_iter()
        .map(|&s| experiments::run_seed(config, s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut records = Vec::new();
    for (seed, out) in seeds.iter().zip(outputs) {
        records.extend(out.records);
        records.extend(
            out.metrics
                .into_iter()
                .map(|(name, v)| TraceRecord::new(*seed, trace::METRICS_SCOPE, name, v)),
        );
    }
    let text = trace::render(&records)?;
    let parsed = trace::parse(&text)?;
    let summary = SummaryReport::from_trace(&config.name, &parsed, &config.expect);
    Ok(ScenarioRun { trace: text, summary })
}

/// One summary per value of the parameter at `path`.
pub fn sweep(text: &str, path: &str, values: &[String]) -> Result<Vec<(String, SummaryReport)>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    values
        .iter()
        .map(|v| {
            let config = override_param(text, path, v)?;
            Ok((v.clone(), run_scenario(&config)?.summary))
        })
        .collect()
}

/// `value,metric,mean,stddev,min,max,pass` with one row per value and metric.
pub fn render_sweep(param: &str, results: &[(String, SummaryReport)]) -> String {
    let mut out = format!("{param},metric,mean,stddev,min,max,pass\n");
    for (value, summary) in results {
        for (name, m) in &summary.metrics {
            out.push_str(&format!(
                "{value},{name},{},{},{},{},{}\n",
                trace::format_value(m.mean),
                trace::format_value(m.stddev),
                trace::format_value(m.min),
                trace::format_value(m.max),
                u8::from(summary.pass),
            ));
        }
    }
    out
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let io = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Trace and summary paths for a scenario under `dir`.
pub fn output_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.trace.csv")), dir.join(format!("{name}.summary.json")))
}

pub fn write_run(dir: &Path, name: &str, run: &ScenarioRun) -> Result<(PathBuf, PathBuf), HarnessError> {
    let (trace_path, summary_path) = output_paths(dir, name);
    let json = run.summary.to_json()?;
    write_atomic(&trace_path, &run.trace)?;
    write_atomic(&summary_path, &json)?;
    Ok((trace_path, summary_path))
}

/// Reads a config from a file path, or from the bundled suite by name.
pub fn load_config_text(source: &str) -> Result<String, HarnessError> {
    let path = Path::new(source);
    if path.exists() {
        return fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        });
    }
    scenarios::get(source)
        .map(|s| s.text.to_string())
        .ok_or_else(|| HarnessError::Config(format!("{source} is neither a file nor a bundled scenario")))
}
