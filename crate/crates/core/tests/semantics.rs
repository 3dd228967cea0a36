use btflow_core::body::ExternRegistry;
use btflow_core::expr::{Expr, UnOp};
use btflow_core::model::{BtDef, BtNode, CompositeKind, NodeKind, Status, TaskBody};
use btflow_core::oracle::run_oracle;
use btflow_core::parser::{gen_random_def, parse};
use btflow_core::runtime::{Runtime, Scenario, Trace};
use btflow_core::translate::translate;

fn leaf(status: Status) -> String {
    let s = status.as_str().to_lowercase();
    format!("task \"{s}\" {{= @script step {{ status {s} }} loop =}}")
}

fn root_status(trace: &Trace) -> Option<String> {
    trace.statuses_of("/").next().map(|(_, s)| s.to_string())
}

/// Root status after one tick, compiled and interpreted.
fn both(text: &str) -> (Option<String>, Option<String>) {
    let def = parse(text).unwrap();
    let scenario = Scenario::ticking(10, 10);
    let rt = Runtime::new(translate(&def).unwrap(), ExternRegistry::new()).unwrap();
    let compiled = rt.run(&scenario).unwrap();
    let oracle = run_oracle(&def, &scenario, &ExternRegistry::new()).unwrap();
    (root_status(&compiled), root_status(&oracle))
}

fn vectors(n: usize) -> Vec<Vec<Status>> {
    (0..3usize.pow(n as u32))
        .map(|mut k| {
            (0..n)
                .map(|_| {
                    let s = Status::ALL[k % 3];
                    k /= 3;
                    s
                })
                .collect()
        })
        .collect()
}

fn composite(head: &str, children: &[Status]) -> String {
    let body: Vec<String> = children.iter().map(|s| leaf(*s)).collect();
    format!("behaviortree T {{ {head} {{ {} }} }}", body.join(" "))
}

fn name(s: Option<Status>) -> Option<String> {
    s.filter(|s| *s != Status::Running).map(|s| s.as_str().to_string())
}

#[test]
fn parallel_matches_the_threshold_formula_exhaustively() {
    let mut cases = 0;
    for n in 1..=4 {
        for m in 1..=n {
            for v in vectors(n) {
                let s = v.iter().filter(|x| **x == Status::Success).count();
                let f = v.iter().filter(|x| **x == Status::Failure).count();
                let expected = if s >= m {
                    Some(Status::Success)
                } else if f > n - m {
                    Some(Status::Failure)
                } else {
                    None
                };
                let (compiled, oracle) = both(&composite(&format!("parallel({m})"), &v));
                assert_eq!(compiled, name(expected), "N={n} M={m} {v:?}");
                assert_eq!(oracle, compiled, "N={n} M={m} {v:?}");
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 3 + 2 * 9 + 3 * 27 + 4 * 81);
}

#[test]
fn sequence_and_fallback_truth_tables() {
    for n in 1..=3 {
        for v in vectors(n) {
            let seq = v.iter().find(|s| **s != Status::Success).copied().unwrap_or(Status::Success);
            let fb = v.iter().find(|s| **s != Status::Failure).copied().unwrap_or(Status::Failure);
            let (compiled, oracle) = both(&composite("sequence", &v));
            assert_eq!((compiled.clone(), oracle), (name(Some(seq)), name(Some(seq))), "{v:?}");
            let (compiled_fb, oracle_fb) = both(&composite("fallback", &v));
            assert_eq!((compiled_fb.clone(), oracle_fb), (name(Some(fb)), name(Some(fb))), "{v:?}");
            // Fallback over the inverted children is the inverted sequence.
            let inverted: Vec<Status> = v.iter().map(|s| s.invert()).collect();
            let (dual, _) = both(&composite("fallback", &inverted));
            assert_eq!(dual, name(Some(seq.invert())), "{v:?}");
        }
    }
}

/// Swaps sequence and fallback, mirrors parallel thresholds and inverts
/// every leaf outcome.
fn dual(node: &mut BtNode) {
    match &mut node.kind {
        NodeKind::Leaf(l) => match &mut l.body {
            TaskBody::Script(script) => {
                for step in &mut script.steps {
                    std::mem::swap(&mut step.status.success, &mut step.status.failure);
                }
            }
            TaskBody::Expr(e) => *e = Expr::Unary(UnOp::Not, Box::new(e.clone())),
            TaskBody::Extern(_) => unreachable!("generated trees use no externs"),
        },
        NodeKind::Composite(c) => {
            let n = c.children.len();
            c.kind = match c.kind {
                CompositeKind::Sequence => CompositeKind::Fallback,
                CompositeKind::Fallback => CompositeKind::Sequence,
                CompositeKind::Parallel { threshold } => CompositeKind::Parallel { threshold: n - threshold + 1 },
            };
            c.children.iter_mut().for_each(dual);
        }
    }
}

fn statuses(def: &BtDef, scenario: &Scenario) -> Vec<(u64, String, String)> {
    let trace = match run_oracle(def, scenario, &ExternRegistry::new()) {
        Ok(t) => t,
        Err(e) => e.trace,
    };
    trace
        .events
        .iter()
        .filter(|e| e.kind == btflow_core::runtime::EventKind::StatusEmitted)
        .map(|e| (e.tag.time, e.subject.clone(), e.payload.as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn every_generated_tree_has_an_inverted_dual() {
    for seed in 0..150 {
        let def = gen_random_def(seed, 4, 4);
        let mut flipped = def.clone();
        dual(&mut flipped.root);
        let scenario = btflow_core::difftest::fuzz_scenario(&def, seed, 20);
        let expected: Vec<_> = statuses(&def, &scenario)
            .into_iter()
            .map(|(t, n, s)| (t, n, if s == "SUCCESS" { "FAILURE".into() } else { "SUCCESS".into() }))
            .collect();
        assert_eq!(statuses(&flipped, &scenario), expected, "seed {seed}");
    }
}
