use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RuntimeError, Tag};
use crate::model::{Value, ValueType};

/// Periodic events on a pure input, `offset + k * period` for k = 0, 1, ...
/// A zero period fires once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimerSpec {
    pub offset_ms: u64,
    pub period_ms: u64,
    #[serde(default = "start_port")]
    pub port: String,
}

fn start_port() -> String {
    "start".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub time_ms: u64,
    pub port: String,
    pub value: serde_json::Value,
}

/// Inputs for one run: timers, injected values and where to stop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub timers: Vec<TimerSpec>,
    #[serde(default)]
    pub injections: Vec<Injection>,
    /// Exclusive bound on tag time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_ms: Option<u64>,
    /// Maximum number of tags processed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_ticks: Option<usize>,
}

/// Everything that happens at one tag: `None` is a pure event.
pub type TagInputs = Vec<(String, Option<Value>)>;

impl Scenario {
    /// A single `start` timer ticking every `period_ms` from 0.
    pub fn ticking(period_ms: u64, horizon_ms: u64) -> Scenario {
        Scenario {
            timers: vec![TimerSpec { offset_ms: 0, period_ms, port: start_port() }],
            injections: Vec::new(),
            horizon_ms: Some(horizon_ms),
            horizon_ticks: None,
        }
    }

    pub fn inject(mut self, time_ms: u64, port: &str, value: &Value) -> Scenario {
        let value = match value {
            Value::Bool(b) => serde_json::json!(b),
            Value::Int(i) => serde_json::json!(i),
            Value::Float(x) => serde_json::json!(x),
            Value::String(s) => serde_json::json!(s),
        };
        self.injections.push(Injection { time_ms, port: port.into(), value });
        self
    }

    pub fn from_json(text: &str) -> Result<Scenario, RuntimeError> {
        serde_json::from_str(text).map_err(|e| RuntimeError::Scenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Scenario, RuntimeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RuntimeError::Scenario(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Expands timers and injections into the ordered list of tags to
    /// process. `inputs` lists the tree's declared input ports.
    pub fn schedule(&self, inputs: &[(String, ValueType)]) -> Result<Vec<(Tag, TagInputs)>, RuntimeError> {
        if self.horizon_ms.is_none() && self.horizon_ticks.is_none() {
            return Err(RuntimeError::Scenario("scenario needs horizon_ms or horizon_ticks".into()));
        }
        let mut injected: BTreeMap<u64, TagInputs> = BTreeMap::new();
        for inj in &self.injections {
            let ty = inputs
                .iter()
                .find(|(n, _)| *n == inj.port)
                .map(|(_, t)| *t)
                .ok_or_else(|| RuntimeError::UnknownPort(inj.port.clone()))?;
            let value = Value::from_json(&inj.value, ty).ok_or_else(|| {
                RuntimeError::Scenario(format!("injection at {} ms: `{}` expects {ty}, got {}", inj.time_ms, inj.port, inj.value))
            })?;
            let at = injected.entry(inj.time_ms).or_default();
            if at.iter().any(|(p, _)| *p == inj.port) {
                return Err(RuntimeError::Scenario(format!(
                    "two injections on `{}` at {} ms",
                    inj.port, inj.time_ms
                )));
            }
            at.push((inj.port.clone(), Some(value)));
        }
        for timer in &self.timers {
            if timer.port != "start" {
                let known = inputs.iter().any(|(n, _)| *n == timer.port);
                return Err(if known {
                    RuntimeError::Scenario(format!("timer on `{}`: timers can only drive `start`", timer.port))
                } else {
                    RuntimeError::UnknownPort(timer.port.clone())
                });
            }
        }
        let within = |t: u64| self.horizon_ms.map_or(true, |h| t < h);
        let mut next: Vec<Option<u64>> = self.timers.iter().map(|t| Some(t.offset_ms)).collect();
        let mut injections = injected.into_iter().peekable();
        let mut out = Vec::new();
        loop {
            if self.horizon_ticks.is_some_and(|n| out.len() >= n) {
                break;
            }
            let timer_time = next.iter().flatten().min().copied();
            let inj_time = injections.peek().map(|(t, _)| *t);
            let Some(time) = [timer_time, inj_time].into_iter().flatten().min() else { break };
            if !within(time) {
                break;
            }
            let mut events = Vec::new();
            let mut fired = false;
            for (slot, timer) in next.iter_mut().zip(&self.timers) {
                if *slot == Some(time) {
                    fired = true;
                    *slot = (timer.period_ms > 0).then(|| time + timer.period_ms);
                }
            }
            if fired {
                events.push(("start".to_string(), None));
            }
            if inj_time == Some(time) {
                let (_, mut values) = injections.next().expect("peeked");
                // Declared order keeps the per-tag inputs canonical.
                values.sort_by_key(|(p, _)| inputs.iter().position(|(n, _)| n == p));
                events.extend(values);
            }
            out.push((Tag::at(time), events));
        }
        Ok(out)
    }
}
