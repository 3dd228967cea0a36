use super::*;
use crate::check::validate;
use crate::model::{CompositeKind, NodeKind, TaskBody};

pub(crate) const AGV_EXCERPT: &str = r#"
behaviortree AGVBehavior {
  input newJob: int
  input humanDetected: bool
  output jobDone: int
  sequence {
    channel pickup: int
    channel dropoff: int
    fallback {
      condition "Has Job?" {
        state currentJob: int = 0
        reaction (newJob) -> (pickup, dropoff) {= @extern hasJob =}
      }
      task "Move to waiting position" {= @extern moveToWaiting =}
    }
    fallback {
      condition "No human nearby?" (humanDetected) {= @expr !(present(humanDetected) && humanDetected) =}
      task "Stop" {= @extern stop =}
    }
    task "Move to pickup" (pickup) {= @extern moveTo =}
    task "Move to dropoff" (dropoff) {= @extern moveTo =}
    task "Finish job" () -> (jobDone) {= @extern finishJob =}
  }
}
"#;

fn first_error(text: &str) -> Diagnostic {
    parse(text).expect_err("should not parse").remove(0)
}

#[test]
fn agv_excerpt_parses_with_nested_fallback() {
    let def = parse(AGV_EXCERPT).unwrap();
    assert_eq!(def.name, "AGVBehavior");
    assert_eq!(def.ports.len(), 3);
    let root = def.root.as_composite().unwrap();
    assert_eq!(root.kind, CompositeKind::Sequence);
    assert_eq!(root.channels.len(), 2);
    let first = root.children[0].as_composite().unwrap();
    assert_eq!(first.kind, CompositeKind::Fallback);
    let has_job = first.children[0].as_leaf().unwrap();
    assert!(has_job.is_condition());
    assert_eq!(has_job.states[0].name, "currentJob");
    assert_eq!(has_job.sources, vec!["newJob"]);
    assert_eq!(has_job.effects, vec!["pickup", "dropoff"]);
    assert_eq!(has_job.body, TaskBody::Extern("hasJob".into()));
    assert!(validate(&def).is_empty(), "{:?}", validate(&def));
}

#[test]
fn empty_composite_is_reported() {
    let d = first_error("behaviortree T { sequence { } }");
    assert_eq!(d.message, "sequence requires at least one child");
    assert_eq!((d.span.start_line, d.span.start_col), (1, 18));
}

#[test]
fn unterminated_body_is_reported() {
    let d = first_error("behaviortree T {\n  task \"A\" {= @extern foo\n}\n");
    assert_eq!(d.message, "unterminated `{=` block");
    assert_eq!((d.span.start_line, d.span.start_col), (2, 12));
}

#[test]
fn duplicate_and_reserved_ports_are_reported() {
    let errs = parse(
        "behaviortree T { input a: int output a: int input start: bool task \"A\" {= @extern f =} }",
    )
    .unwrap_err();
    let messages: Vec<_> = errs.iter().map(|d| d.message.as_str()).collect();
    assert_eq!(
        messages,
        vec!["duplicate port `a`", "`start` is an implicit port and cannot be declared"]
    );
}

#[test]
fn recovery_reports_errors_in_several_nodes() {
    let text = r#"behaviortree T {
  sequence {
    task "A" (x y) {= @extern f =}
    task "B" {= @extern g =}
    task "C" {= @bogus =}
    task "D" {= @expr 1 + =}
  }
}"#;
    let errs = parse(text).unwrap_err();
    let lines: Vec<u32> = errs.iter().map(|d| d.span.start_line).collect();
    assert_eq!(lines, vec![3, 5, 6], "{errs:?}");
}

#[test]
fn parallel_threshold_defaults_to_child_count() {
    let def = parse(
        "behaviortree T { parallel { task \"A\" {= @extern f =} task \"B\" {= @extern f =} } }",
    )
    .unwrap();
    match &def.root.kind {
        NodeKind::Composite(c) => assert_eq!(c.kind, CompositeKind::Parallel { threshold: 2 }),
        _ => panic!("expected composite"),
    }
    let text = pretty_print(&def);
    assert!(text.contains("parallel(2) {"), "{text}");
}

#[test]
fn empty_interface_prints_without_parentheses() {
    let def = parse("behaviortree T { task \"A\" () {= @extern f =} }").unwrap();
    let text = pretty_print(&def);
    assert!(text.contains("  task \"A\" {= @extern f =}\n"), "{text}");
}

#[test]
fn canonical_form_of_a_script() {
    let src = r#"behaviortree T { output o: int
      task "A" { state n: int = -3 reaction () -> (o) {= @script
        step { state n = n + 1; emit o = n * 2; status running }
        step { emit o = -(1); status success, failure } hold =} } }"#;
    let def = parse(src).unwrap();
    let expected = r#"behaviortree T {
  output o: int
  task "A" {
    state n: int = -3
    reaction () -> (o) {=
      @script
      step { emit o = n * 2; state n = n + 1; status running }
      step { emit o = -(1); status success, failure }
      hold
    =}
  }
}
"#;
    assert_eq!(pretty_print(&def), expected);
    assert!(parse(expected).unwrap().same_ast(&def));
}

#[test]
fn diagnostics_render_with_location() {
    let errs = parse_file("plant.btlf", "behaviortree T {\n  sequence { }\n}").unwrap_err();
    assert_eq!(errs[0].to_string(), "plant.btlf:2:3: error: sequence requires at least one child");
}

#[test]
fn invalid_utf8_is_a_diagnostic() {
    let errs = parse_bytes("x", b"behaviortree \xff").unwrap_err();
    assert_eq!(errs[0].message, "input is not valid UTF-8");
    assert_eq!((errs[0].span.start_line, errs[0].span.start_col), (1, 14));
}

#[test]
fn depth_one_generates_a_single_task() {
    let def = gen_random_def(1, 1, 1);
    let leaf = def.root.as_leaf().expect("a leaf root");
    assert_eq!(leaf.kind, crate::model::LeafKind::Task);
}

#[test]
fn generation_is_deterministic() {
    for seed in [0, 7, 42] {
        assert_eq!(pretty_print(&gen_random_def(seed, 4, 5)), pretty_print(&gen_random_def(seed, 4, 5)));
    }
}

#[test]
fn generated_corpus_roundtrips_through_text() {
    for seed in 0..50 {
        let def = gen_random_def(seed, 4, 4);
        let text = pretty_print(&def);
        let reparsed = parse(&text).unwrap_or_else(|e| panic!("seed {seed}: {e:?}\n{text}"));
        assert!(reparsed.same_ast(&def), "seed {seed}");
        let again = parse(&pretty_print(&reparsed)).unwrap();
        assert!(again.same_ast(&reparsed), "seed {seed}");
        assert_eq!(pretty_print(&reparsed), text, "printing is stable");
    }
}

#[test]
fn generated_defs_validate() {
    for seed in 0..500 {
        let def = gen_random_def(seed, 4, 5);
        let report = validate(&def);
        assert!(report.is_empty(), "seed {seed}: {:?}", report.items);
    }
}

mod props {
    use proptest::prelude::*;

    use super::super::*;

    fn line_lengths(text: &str) -> Vec<usize> {
        text.split('\n').map(|l| l.chars().count()).collect()
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            if let Err(diags) = parse_bytes("fuzz", &bytes) {
                prop_assert!(!diags.is_empty());
            }
        }

        #[test]
        fn diagnostics_stay_inside_the_input(text in "[a-z{}()=@\"; \n:>-]{0,120}") {
            let text = format!("behaviortree T {{ {text}");
            let lines = line_lengths(&text);
            if let Err(diags) = parse(&text) {
                for d in diags {
                    let line = d.span.start_line as usize;
                    prop_assert!(line >= 1 && line <= lines.len(), "{d}");
                    prop_assert!(d.span.start_col as usize <= lines[line - 1] + 1, "{d}");
                }
            }
        }

        #[test]
        fn generated_ast_print_parse_identity(seed in any::<u64>(), depth in 1usize..5, children in 1usize..5) {
            let def = gen_random_def(seed, depth, children);
            let text = pretty_print(&def);
            let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
            prop_assert!(back.same_ast(&def));
        }
    }
}
