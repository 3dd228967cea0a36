use btflow_core::body::ExternRegistry;
use btflow_core::difftest::{compare, fuzz, fuzz_scenario, FuzzConfig};
use btflow_core::parser::{gen_random_def, pretty_print};
use btflow_core::runtime::Runtime;
use btflow_core::translate::{translate, TranslateOptions};

#[test]
fn compiled_and_interpreted_traces_agree() {
    let report = fuzz(&FuzzConfig { count: 200, seed: 1000, ticks: 60, ..FuzzConfig::default() });
    if let Some(f) = report.failure {
        panic!("seed {}:\n{}\n{}", f.case_seed, pretty_print(&f.minimized), f.divergence);
    }
}

#[test]
fn full_traces_are_stable_across_reaction_orders() {
    for seed in 0..30 {
        let def = gen_random_def(seed, 4, 5);
        let scenario = fuzz_scenario(&def, seed, 40);
        let run = |order: Option<u64>| {
            let mut rt = Runtime::new(translate(&def).unwrap(), ExternRegistry::new()).unwrap().with_full_trace(true);
            if let Some(s) = order {
                rt = rt.with_random_order(s);
            }
            match rt.run(&scenario) {
                Ok(t) => t.to_jsonl(),
                Err(e) => e.trace.to_jsonl(),
            }
        };
        assert_eq!(run(None), run(Some(seed + 1)), "seed {seed}");
    }
}

#[test]
fn pretty_printed_trees_behave_identically() {
    for seed in 0..40 {
        let def = gen_random_def(seed, 3, 4);
        let reparsed = btflow_core::parse(&pretty_print(&def)).unwrap();
        let scenario = fuzz_scenario(&def, seed, 30);
        let a = Runtime::new(translate(&def).unwrap(), ExternRegistry::new()).unwrap().run(&scenario);
        let b = Runtime::new(translate(&reparsed).unwrap(), ExternRegistry::new()).unwrap().run(&scenario);
        assert_eq!(a.map(|t| t.to_jsonl()).ok(), b.map(|t| t.to_jsonl()).ok());
        assert!(compare(&reparsed, &scenario, &ExternRegistry::new(), &TranslateOptions::default()).is_ok());
    }
}
