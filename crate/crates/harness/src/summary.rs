//! Per-metric statistics over seeds, and expectation checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::{Comparison, Expectation, Stat};
use crate::trace::{TraceRecord, METRICS_SCOPE};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            stddev: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn get(&self, stat: Stat) -> f64 {
        match stat {
            Stat::Mean => self.mean,
            Stat::Stddev => self.stddev,
            Stat::Min => self.min,
            Stat::Max => self.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub metric: String,
    pub stat: Stat,
    pub op: Comparison,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub actual: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub scenario: String,
    pub seeds: usize,
    pub metrics: BTreeMap<String, MetricStats>,
    pub expectations: Vec<ExpectationResult>,
    pub pass: bool,
}

impl SummaryReport {
    /// Builds the report from the `metrics` rows of a trace.
    pub fn from_trace(scenario: &str, records: &[TraceRecord], expect: &[Expectation]) -> Self {
        let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut seeds = std::collections::BTreeSet::new();
        for r in records.iter().filter(|r| r.scope == METRICS_SCOPE) {
            values.entry(r.signal.clone()).or_default().push(r.value);
            seeds.insert(r.tick);
        }
        let metrics: BTreeMap<String, MetricStats> = values
            .into_iter()
            .map(|(k, v)| (k, MetricStats::from_values(&v)))
            .collect();
        let expectations: Vec<ExpectationResult> = expect
            .iter()
            .map(|e| {
                let actual = metrics.get(&e.metric).map(|m| m.get(e.stat));
                ExpectationResult {
                    metric: e.metric.clone(),
                    stat: e.stat,
                    op: e.op,
                    value: e.value,
                    tolerance: e.tolerance,
                    actual,
                    pass: actual.is_some_and(|a| check(a, e)),
                }
            })
            .collect();
        Self {
            scenario: scenario.to_string(),
            seeds: seeds.len(),
            pass: expectations.iter().all(|e| e.pass),
            metrics,
            expectations,
        }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Trace(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn metric(&self, name: &str) -> Result<&MetricStats, HarnessError> {
        self.metrics
            .get(name)
            .ok_or_else(|| HarnessError::Runtime(format!("scenario {} has no metric {name}", self.scenario)))
    }
}

fn check(actual: f64, e: &Expectation) -> bool {
    match e.op {
        Comparison::Lt => actual < e.value,
        Comparison::Le => actual <= e.value,
        Comparison::Gt => actual > e.value,
        Comparison::Ge => actual >= e.value,
        Comparison::Eq => actual == e.value,
        Comparison::Within => (actual - e.value).abs() <= e.tolerance.unwrap_or(0.0),
    }
}
