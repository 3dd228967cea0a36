use super::*;
use crate::body::ExternOutcome;
use crate::parser::{gen_random_def, parse};
use crate::translate::translate;

fn runtime(text: &str) -> Runtime {
    Runtime::new(translate(&parse(text).unwrap()).unwrap(), ExternRegistry::new()).unwrap()
}

fn lines(trace: &Trace) -> Vec<String> {
    trace.events.iter().map(TraceEvent::to_json_line).collect()
}

const SUCCEED: &str = "{= @script step { status success } loop =}";

#[test]
fn timer_ticks_the_tree_every_period() {
    let rt = runtime(&format!("behaviortree T {{ sequence {{ task \"A\" {SUCCEED} task \"B\" {SUCCEED} }} }}"));
    let trace = rt.run(&Scenario::ticking(250, 600)).unwrap();
    let root: Vec<_> = trace.statuses_of("/").collect();
    assert_eq!(root, vec![(Tag::at(0), "SUCCESS"), (Tag::at(250), "SUCCESS"), (Tag::at(500), "SUCCESS")]);
    assert_eq!(
        lines(&trace)[..3],
        [
            r#"{"time":0,"microstep":0,"kind":"port-event","subject":"start","payload":null}"#,
            r#"{"time":0,"microstep":0,"kind":"node-invoked","subject":"/","payload":"sequence"}"#,
            r#"{"time":0,"microstep":0,"kind":"node-invoked","subject":"/0","payload":"A"}"#,
        ]
    );
}

#[test]
fn running_task_emits_no_status() {
    let rt = runtime("behaviortree T { task \"A\" {= @script step { status running } loop =} }");
    let trace = rt.run(&Scenario::ticking(250, 250)).unwrap();
    let kinds: Vec<_> = trace.events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds, vec![EventKind::PortEvent, EventKind::NodeInvoked]);
}

#[test]
fn double_status_aborts_at_the_first_tick() {
    let rt = runtime(
        "behaviortree T { sequence { task \"A\" {SUCCEED} task \"B\" {= @script step { status success, failure } loop =} } }"
            .replace("{SUCCEED}", SUCCEED)
            .as_str(),
    );
    let err = rt.run(&Scenario::ticking(250, 1000)).unwrap_err();
    assert_eq!(err.error, RuntimeError::DoubleStatus { node: "/1".parse().unwrap(), tag: Tag::at(0) });
    let last = err.trace.events.last().unwrap();
    assert_eq!(last.kind, EventKind::Error);
    assert_eq!(last.subject, "/1");
    assert!(err.trace.events.iter().all(|e| e.tag == Tag::at(0)));
}

#[test]
fn condition_yielding_running_is_a_warning() {
    let rt = runtime(
        "behaviortree T { condition \"C\" {= @script step { status running } loop =} }",
    );
    let trace = rt.run(&Scenario::ticking(100, 100)).unwrap();
    assert_eq!(trace.events.last().unwrap().kind, EventKind::Warning);
    assert_eq!(trace.events.last().unwrap().payload, RUNNING_CONDITION_WARNING);
}

const BACKWARD: &str = "behaviortree T {
    output seen: int
    sequence {
        channel x: int
        task \"R\" (x) -> (seen) {= @script step { emit seen = if(present(x), x, -1); status success } loop =}
        task \"W\" {
            state n: int = 0
            reaction () -> (x) {= @script step { emit x = n * 10; state n = n + 1; status success } loop =}
        }
    }
}";

#[test]
fn backward_reader_sees_previous_tick() {
    let rt = runtime(BACKWARD);
    let trace = rt.run(&Scenario::ticking(10, 40)).unwrap();
    let seen: Vec<_> = trace
        .events
        .iter()
        .filter(|e| e.subject == "seen")
        .map(|e| e.payload["int"].as_i64().unwrap())
        .collect();
    assert_eq!(seen, vec![-1, 0, 10, 20]);
}

#[test]
fn pre_buffer_is_emitted_on_start() {
    let rt = runtime(BACKWARD).with_full_trace(true);
    let mut state = rt.initial_state();
    state.pre.insert("Pre_x".into(), Some(Value::Int(7)));
    let (next, events) = rt.step(&state, Tag::at(0), &[("start".into(), None)]).unwrap();
    let pre_out = events.iter().find(|e| e.subject == "Pre_x.out").unwrap();
    assert_eq!(pre_out.payload, serde_json::json!({"int": 7}));
    let seen = events.iter().find(|e| e.subject == "seen").unwrap();
    assert_eq!(seen.payload, serde_json::json!({"int": 7}));
    assert_eq!(next.pre["Pre_x"], Some(Value::Int(0)));
}

#[test]
fn empty_tag_changes_nothing() {
    let rt = runtime(BACKWARD);
    let state = rt.initial_state();
    let (next, events) = rt.step(&state, Tag::at(5), &[]).unwrap();
    assert!(events.is_empty());
    assert_eq!(State { last: None, ..next }, state);
}

#[test]
fn step_is_pure_in_its_state() {
    let rt = runtime(BACKWARD);
    let state = rt.initial_state();
    let start = [("start".to_string(), None)];
    let a = rt.step(&state, Tag::at(0), &start).unwrap();
    let b = rt.step(&state, Tag::at(0), &start).unwrap();
    assert_eq!(a, b);
    let err = rt.step(&a.0, Tag::at(0), &start).unwrap_err();
    assert!(matches!(err.error, RuntimeError::TagOrder { .. }));
}

#[test]
fn unknown_ports_are_rejected() {
    let rt = runtime(BACKWARD);
    let err = rt.run(&Scenario::ticking(10, 40).inject(0, "nope", &Value::Int(1))).unwrap_err();
    assert_eq!(err.error, RuntimeError::UnknownPort("nope".into()));
    let err = rt.step(&rt.initial_state(), Tag::at(0), &[("nope".into(), Some(Value::Int(1)))]).unwrap_err();
    assert_eq!(err.error, RuntimeError::UnknownPort("nope".into()));
}

#[test]
fn scenario_validation() {
    let inputs = [("a".to_string(), ValueType::Int)];
    let dup = Scenario::ticking(10, 40).inject(0, "a", &Value::Int(1)).inject(0, "a", &Value::Int(2));
    assert!(matches!(dup.schedule(&inputs), Err(RuntimeError::Scenario(_))));
    let wrong = Scenario::ticking(10, 40).inject(0, "a", &Value::Bool(true));
    assert!(matches!(wrong.schedule(&inputs), Err(RuntimeError::Scenario(_))));
    let s = Scenario::from_json(
        r#"{"timers":[{"offset_ms":5,"period_ms":0,"port":"start"}],"injections":[{"time_ms":3,"port":"a","value":4}],"horizon_ms":100}"#,
    )
    .unwrap();
    let tags: Vec<_> = s.schedule(&inputs).unwrap().into_iter().map(|(t, e)| (t.time, e.len())).collect();
    assert_eq!(tags, vec![(3, 1), (5, 1)]);
    let ticks = Scenario { horizon_ms: None, horizon_ticks: Some(3), ..Scenario::ticking(7, 0) };
    let times: Vec<_> = ticks.schedule(&inputs).unwrap().into_iter().map(|(t, _)| t.time).collect();
    assert_eq!(times, vec![0, 7, 14]);
}

#[test]
fn externs_behave_like_scripts() {
    let def = parse("behaviortree T { task \"A\" {= @extern ok =} }").unwrap();
    let graph = translate(&def).unwrap();
    match Runtime::new(graph.clone(), ExternRegistry::new()) {
        Err(RuntimeError::MissingExtern { name, label }) => assert_eq!((name.as_str(), label.as_str()), ("ok", "A")),
        other => panic!("{:?}", other.map(|_| ())),
    }
    let mut reg = ExternRegistry::new();
    reg.register("ok", |_, _| Ok(ExternOutcome::status(Status::Success))).unwrap();
    let via_extern = Runtime::new(graph, reg).unwrap().run(&Scenario::ticking(10, 30)).unwrap();
    let via_script = runtime(&format!("behaviortree T {{ task \"A\" {SUCCEED} }}")).run(&Scenario::ticking(10, 30)).unwrap();
    assert_eq!(via_extern, via_script);

    let mut reg = ExternRegistry::new();
    reg.register("ok", |_, _| Ok(ExternOutcome { emits: vec![], success: true, failure: true })).unwrap();
    let rt = Runtime::new(translate(&def).unwrap(), reg).unwrap();
    assert!(matches!(rt.run(&Scenario::ticking(10, 30)).unwrap_err().error, RuntimeError::DoubleStatus { .. }));
}

#[test]
fn any_topological_order_gives_the_same_trace() {
    for seed in 0..100 {
        let def = gen_random_def(seed, 4, 4);
        let base = Runtime::new(translate(&def).unwrap(), ExternRegistry::new()).unwrap().with_full_trace(true);
        let other = Runtime::new(translate(&def).unwrap(), ExternRegistry::new())
            .unwrap()
            .with_full_trace(true)
            .with_random_order(seed ^ 0x5eed);
        let scenario = Scenario::ticking(10, 200).inject(20, "in0", &Value::Int(3)).inject(30, "flag", &Value::Bool(true));
        let a = base.run(&scenario).map_err(|e| e.trace.to_jsonl());
        let b = other.run(&scenario).map_err(|e| e.trace.to_jsonl());
        assert_eq!(a.map(|t| t.to_jsonl()), b.map(|t| t.to_jsonl()), "seed {seed}");
    }
}

#[test]
fn runs_are_deterministic() {
    let rt = runtime(BACKWARD);
    let s = Scenario::ticking(10, 100);
    assert_eq!(rt.run(&s).unwrap().to_jsonl(), rt.run(&s).unwrap().to_jsonl());
}
