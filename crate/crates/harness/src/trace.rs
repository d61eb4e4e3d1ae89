//! `tick,scope,signal,value` CSV traces.

use crate::HarnessError;

pub const HEADER: &str = "tick,scope,signal,value";

/// Scope holding one row per seed and metric; the summary is computed from
/// these rows alone.
pub const METRICS_SCOPE: &str = "metrics";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub scope: String,
    pub signal: String,
    pub value: f64,
}

impl TraceRecord {
    pub fn new(tick: u64, scope: impl Into<String>, signal: impl Into<String>, value: f64) -> Self {
        Self {
            tick,
            scope: scope.into(),
            signal: signal.into(),
            value,
        }
    }
}

/// Nine significant digits, C `%.9g` style.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn check_field(field: &str) -> Result<(), HarnessError> {
    if field.contains([',', '\n', '"']) {
        return Err(HarnessError::Trace(format!("field {field:?} would break the CSV")));
    }
    Ok(())
}

pub fn render(records: &[TraceRecord]) -> Result<String, HarnessError> {
    let mut out = String::with_capacity(32 * records.len() + HEADER.len() + 1);
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        check_field(&r.scope)?;
        check_field(&r.signal)?;
        out.push_str(&format!("{},{},{},{}\n", r.tick, r.scope, r.signal, format_value(r.value)));
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<Vec<TraceRecord>, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(HarnessError::Trace(format!("missing header {HEADER:?}"))),
    }
    lines
        .map(|(n, line)| {
            let bad = || HarnessError::Trace(format!("line {}: malformed row {line:?}", n + 1));
            let mut parts = line.split(',');
            let (Some(tick), Some(scope), Some(signal), Some(value), None) =
                (parts.next(), parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            Ok(TraceRecord {
                tick: tick.parse().map_err(|_| bad())?,
                scope: scope.to_string(),
                signal: signal.to_string(),
                value: value.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Ticks never decrease within a scope.
pub fn ticks_monotone(records: &[TraceRecord]) -> bool {
    let mut last = std::collections::BTreeMap::new();
    records.iter().all(|r| {
        let prev = last.insert(r.scope.as_str(), r.tick);
        prev.is_none_or(|p| p <= r.tick)
    })
}
