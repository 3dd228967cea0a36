use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Status, Value};

/// A point in logical time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub time: u64,
    pub microstep: u32,
}

impl Tag {
    pub fn at(time: u64) -> Tag {
        Tag { time, microstep: 0 }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} ms, {})", self.time, self.microstep)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    NodeInvoked,
    StatusEmitted,
    PortEvent,
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub tag: Tag,
    pub kind: EventKind,
    /// Node path for node events, port name for port events.
    pub subject: String,
    pub payload: serde_json::Value,
    /// Port events on ports inside the network rather than on the tree.
    pub internal: bool,
}

#[derive(Serialize, Deserialize)]
struct Line {
    time: u64,
    microstep: u32,
    kind: EventKind,
    subject: String,
    payload: serde_json::Value,
}

impl TraceEvent {
    pub fn invoked(tag: Tag, node: impl fmt::Display, label: &str) -> Self {
        Self::new(tag, EventKind::NodeInvoked, node.to_string(), label.into())
    }

    pub fn status(tag: Tag, node: impl fmt::Display, status: Status) -> Self {
        Self::new(tag, EventKind::StatusEmitted, node.to_string(), status.as_str().into())
    }

    pub fn port(tag: Tag, port: &str, value: Option<&Value>) -> Self {
        let payload = value.map_or(serde_json::Value::Null, Value::to_trace_json);
        Self::new(tag, EventKind::PortEvent, port.to_string(), payload)
    }

    pub fn warning(tag: Tag, subject: impl fmt::Display, message: &str) -> Self {
        Self::new(tag, EventKind::Warning, subject.to_string(), message.into())
    }

    pub fn error(tag: Tag, subject: impl fmt::Display, message: &str) -> Self {
        Self::new(tag, EventKind::Error, subject.to_string(), message.into())
    }

    fn new(tag: Tag, kind: EventKind, subject: String, payload: serde_json::Value) -> Self {
        TraceEvent { tag, kind, subject, payload, internal: false }
    }

    pub fn to_json_line(&self) -> String {
        let line = Line {
            time: self.tag.time,
            microstep: self.tag.microstep,
            kind: self.kind,
            subject: self.subject.clone(),
            payload: self.payload.clone(),
        };
        serde_json::to_string(&line).expect("trace events serialize")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// The events both executors agree on: everything except ports internal
    /// to the compiled network.
    pub fn comparable(&self) -> Trace {
        Trace { events: self.events.iter().filter(|e| !e.internal).cloned().collect() }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Parses a trace file. Every event read back is treated as comparable.
    pub fn from_jsonl(text: &str) -> Result<Trace, serde_json::Error> {
        let mut events = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let l: Line = serde_json::from_str(line)?;
            events.push(TraceEvent {
                tag: Tag { time: l.time, microstep: l.microstep },
                kind: l.kind,
                subject: l.subject,
                payload: l.payload,
                internal: false,
            });
        }
        Ok(Trace { events })
    }

    pub fn statuses_of<'a>(&'a self, node: &'a str) -> impl Iterator<Item = (Tag, &'a str)> + 'a {
        self.events
            .iter()
            .filter(move |e| e.kind == EventKind::StatusEmitted && e.subject == node)
            .map(|e| (e.tag, e.payload.as_str().unwrap_or_default()))
    }

    pub fn tags(&self) -> Vec<Tag> {
        let mut tags: Vec<Tag> = self.events.iter().map(|e| e.tag).collect();
        tags.dedup();
        tags
    }
}
