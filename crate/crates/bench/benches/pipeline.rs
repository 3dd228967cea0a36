use std::hint::black_box;

use btflow_cli::plant;
use btflow_core::body::ExternRegistry;
use btflow_core::difftest::fuzz_scenario;
use btflow_core::oracle::run_oracle;
use btflow_core::parser::gen_random_def;
use btflow_core::runtime::Runtime;
use btflow_core::translate::translate;
use btflow_core::{parse, pretty_print};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn front_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("front-end");
    for depth in [2, 4, 6] {
        let def = (0..50).map(|seed| gen_random_def(seed, depth, 4)).max_by_key(|d| d.node_count()).unwrap();
        let text = pretty_print(&def);
        let id = format!("d{depth}-n{}", def.node_count());
        group.bench_with_input(BenchmarkId::new("parse", &id), &text, |b, t| {
            b.iter(|| parse(black_box(t)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("translate", &id), &def, |b, d| {
            b.iter(|| translate(black_box(d)).unwrap())
        });
    }
    group.finish();
}

fn execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("execution");
    let def = parse(plant::AGV_BT).unwrap();
    let scenario = plant::scenario();
    let runtime = Runtime::new(translate(&def).unwrap(), plant::externs()).unwrap();
    group.bench_function("plant/compiled", |b| b.iter(|| runtime.run(black_box(&scenario)).unwrap()));
    group.bench_function("plant/oracle", |b| {
        b.iter(|| run_oracle(black_box(&def), &scenario, &plant::externs()).unwrap())
    });

    let generated = gen_random_def(11, 5, 4);
    let scenario = fuzz_scenario(&generated, 11, 100);
    let runtime = Runtime::new(translate(&generated).unwrap(), ExternRegistry::new()).unwrap();
    group.bench_function("generated/compiled", |b| b.iter(|| runtime.run(black_box(&scenario))));
    group.bench_function("generated/oracle", |b| {
        b.iter(|| run_oracle(black_box(&generated), &scenario, &ExternRegistry::new()))
    });
    group.finish();
}

criterion_group!(benches, front_end, execution);
criterion_main!(benches);
