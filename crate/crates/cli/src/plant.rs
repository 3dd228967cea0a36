//! The bundled AGV plant: one behavior tree, the host callbacks standing in
//! for the robot, and a scripted arbiter handing out jobs.
//!
//! Machines A and B sit at positions 10 and 11, the buffer at 20. Driving
//! to a new target takes [`MOVE_TICKS`] invocations and loading or
//! unloading takes [`TRANSFER_TICKS`].

use std::path::PathBuf;

use btflow_core::body::{ExternOutcome, Sources, States};
use btflow_core::runtime::{EventKind, Scenario, Trace};
use btflow_core::{ExternRegistry, Status, Value};

pub const AGV_BT: &str = include_str!("../fixtures/plant/agv.btlf");
pub const SCENARIO: &str = include_str!("../fixtures/plant/scenario.json");

pub const MOVE_TICKS: i64 = 3;
pub const TRANSFER_TICKS: i64 = 2;
pub const BUFFER: i64 = 20;

pub const MOVEMENT_TASKS: [&str; 3] = ["Move to waiting position", "Move to pickup", "Move to dropoff"];

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn scenario() -> Scenario {
    Scenario::from_json(SCENARIO).expect("bundled scenario parses")
}

pub fn pickup_of(job: i64) -> i64 {
    if job % 2 == 1 {
        10
    } else {
        11
    }
}

fn int_source(sources: &Sources, name: &str) -> Result<Option<i64>, String> {
    match sources.get(name) {
        Some(Some(Value::Int(v))) => Ok(Some(*v)),
        Some(None) => Ok(None),
        Some(Some(other)) => Err(format!("`{name}` holds {other}, expected an int")),
        None => Err(format!("no source named `{name}`")),
    }
}

fn int_state(states: &States, name: &str) -> i64 {
    match states.get(name) {
        Some(Value::Int(v)) => *v,
        _ => 0,
    }
}

/// Accepts new jobs into a queue and reports the one being worked on.
fn has_job(sources: &Sources, states: &mut States) -> Result<ExternOutcome, String> {
    let mut current = int_state(states, "currentJob");
    let mut queue: Vec<i64> = match states.get("queue") {
        Some(Value::String(s)) => s.split(',').filter(|p| !p.is_empty()).map(|p| p.parse().unwrap_or(0)).collect(),
        _ => Vec::new(),
    };
    if let Some(job) = int_source(sources, "newJob")? {
        if job != current && !queue.contains(&job) {
            queue.push(job);
        }
    }
    if current != 0 && int_source(sources, "finished")? == Some(current) {
        current = 0;
    }
    if current == 0 && !queue.is_empty() {
        current = queue.remove(0);
    }
    let queue = queue.iter().map(i64::to_string).collect::<Vec<_>>().join(",");
    states.insert("currentJob".into(), Value::Int(current));
    states.insert("queue".into(), Value::String(queue));
    if current == 0 {
        return Ok(ExternOutcome::status(Status::Failure));
    }
    Ok(ExternOutcome::status(Status::Success)
        .emit("job", Value::Int(current))
        .emit("pickup", Value::Int(pickup_of(current)))
        .emit("dropoff", Value::Int(BUFFER)))
}

/// Counts down `ticks` invocations per job; returns the remaining count.
fn countdown(job: i64, ticks: i64, states: &mut States) -> i64 {
    if int_state(states, "job") != job {
        states.insert("job".into(), Value::Int(job));
        states.insert("remaining".into(), Value::Int(ticks));
    }
    let remaining = (int_state(states, "remaining") - 1).max(0);
    states.insert("remaining".into(), Value::Int(remaining));
    remaining
}

fn move_to(sources: &Sources, states: &mut States) -> Result<ExternOutcome, String> {
    let job = int_source(sources, "job")?.ok_or("no job to move for")?;
    let (target_name, _) = sources.iter().find(|(name, _)| *name != "job").ok_or("no target source")?;
    let target = int_source(sources, target_name)?.ok_or_else(|| format!("`{target_name}` is absent"))?;
    if countdown(job, MOVE_TICKS, states) > 0 {
        return Ok(ExternOutcome::running().emit("motion", Value::String(format!("to {target}"))));
    }
    Ok(ExternOutcome::status(Status::Success).emit("motion", Value::String(format!("at {target}"))))
}

fn transfer(effect: &'static str) -> impl Fn(&Sources, &mut States) -> Result<ExternOutcome, String> {
    move |sources, states| {
        let job = int_source(sources, "job")?.ok_or("no job to transfer")?;
        if countdown(job, TRANSFER_TICKS, states) > 0 {
            return Ok(ExternOutcome::running());
        }
        Ok(ExternOutcome::status(Status::Success).emit(effect, Value::Int(job)))
    }
}

/// Host callbacks used by the plant tree. Also available to `btflow run`.
pub fn externs() -> ExternRegistry {
    let mut reg = ExternRegistry::new();
    reg.register("hasJob", has_job).expect("fresh registry");
    reg.register("moveTo", move_to).expect("fresh registry");
    reg.register("load", transfer("loaded")).expect("fresh registry");
    reg.register("unload", transfer("delivered")).expect("fresh registry");
    reg
}

/// Facts about a plant run read back from its trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlantSummary {
    pub jobs_completed: usize,
    pub ticks: usize,
    /// Times (ms) at which a safety input was raised.
    pub safety_tags: Vec<u64>,
    /// Movement tasks invoked at any of `safety_tags`.
    pub movement_during_safety: usize,
    pub stops: usize,
}

pub fn summarize(trace: &Trace) -> PlantSummary {
    let events = &trace.events;
    let labels_at = |t: u64| {
        events
            .iter()
            .filter(move |e| e.tag.time == t && e.kind == EventKind::NodeInvoked)
            .filter_map(|e| e.payload.as_str())
    };
    let safety_tags: Vec<u64> = events
        .iter()
        .filter(|e| {
            e.kind == EventKind::PortEvent
                && (e.subject == "humanDetected" || e.subject == "agvDetected")
                && e.payload == serde_json::json!({"bool": true})
        })
        .map(|e| e.tag.time)
        .collect();
    PlantSummary {
        jobs_completed: events.iter().filter(|e| e.kind == EventKind::PortEvent && e.subject == "jobDone").count(),
        ticks: events.iter().filter(|e| e.kind == EventKind::PortEvent && e.subject == "start").count(),
        movement_during_safety: safety_tags
            .iter()
            .map(|t| labels_at(*t).filter(|l| MOVEMENT_TASKS.contains(l)).count())
            .sum(),
        stops: events.iter().filter(|e| e.kind == EventKind::NodeInvoked && e.payload == "Stop").count(),
        safety_tags,
    }
}
