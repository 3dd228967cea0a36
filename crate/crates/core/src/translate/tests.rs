use super::*;
use crate::parser::{gen_random_def, parse};

fn compile(text: &str) -> ReactorGraph {
    translate(&parse(text).unwrap()).unwrap()
}

fn connected(g: &ReactorGraph, from: PortId, to: PortId) -> bool {
    g.connections.iter().any(|c| c.from == from && c.to == to)
}

fn node_boundary(g: &ReactorGraph, path: &str) -> Boundary {
    let id: crate::model::NodeId = path.parse().unwrap();
    g.blocks.iter().find_map(|b| b.node().filter(|(n, ..)| **n == id).map(|(_, _, bd)| bd)).unwrap()
}

#[test]
fn single_task_is_wired_to_the_tree_boundary() {
    let g = compile("behaviortree T { task \"A\" {= @script step { status success } loop =} }");
    let (tree, ..) = g.tree();
    let a = node_boundary(&g, "/");
    assert_eq!(g.connections.len(), 3);
    assert!(connected(&g, tree.start, a.start));
    assert!(connected(&g, a.success, tree.success));
    assert!(connected(&g, a.failure, tree.failure));
    assert_eq!(g.reactions.len(), 1);
}

#[test]
fn sequence_chains_on_success_and_collects_failures() {
    let g = compile(
        "behaviortree T { sequence {
            task \"A\" {= @script step { status success } loop =}
            task \"B\" {= @script step { status success } loop =}
        } }",
    );
    let seq = node_boundary(&g, "/");
    let a = node_boundary(&g, "/0");
    let b = node_boundary(&g, "/1");
    assert!(connected(&g, seq.start, a.start));
    assert!(connected(&g, a.success, b.start));
    assert!(connected(&g, b.success, seq.success));
    assert!(!connected(&g, a.failure, seq.failure));
    let merge = g.blocks_named("merge_status").next().unwrap();
    let BlockKind::Merge { mode, inputs, output } = &merge.kind else { panic!() };
    assert_eq!(*mode, MergeMode::AtMostOne);
    assert!(connected(&g, a.failure, inputs[0]) && connected(&g, b.failure, inputs[1]));
    assert!(connected(&g, *output, seq.failure));
}

#[test]
fn fallback_mutation_changes_the_wiring() {
    let text = "behaviortree T { fallback {
        task \"A\" {= @script step { status failure } loop =}
        task \"B\" {= @script step { status success } loop =}
    } }";
    let def = parse(text).unwrap();
    let good = translate(&def).unwrap();
    let bad = translate_with(&def, &TranslateOptions { mutation: Some(Mutation::SwapFallbackWiring) }).unwrap();
    let a = node_boundary(&good, "/0");
    let b = node_boundary(&good, "/1");
    assert!(connected(&good, a.failure, b.start));
    assert!(connected(&bad, a.success, b.start));
}

#[test]
fn backward_channel_read_gets_one_pre_block() {
    let g = compile(
        "behaviortree T { sequence {
            channel x: int
            task \"R\" (x) {= @script step { status success } loop =}
            task \"W\" () -> (x) {= @script step { emit x = 7; status success } loop =}
        } }",
    );
    assert_eq!(g.count_blocks(|k| matches!(k, BlockKind::Pre { .. })), 1);
    let pre = g.blocks_named("Pre_x").next().unwrap();
    let BlockKind::Pre { input, start, output, .. } = pre.kind else { panic!() };
    assert!(connected(&g, node_boundary(&g, "/").start, start));
    let BlockKind::Task { sources, effects, .. } = &g.blocks.iter().find(|b| b.label() == "R").unwrap().kind else {
        panic!()
    };
    assert!(connected(&g, output, sources[0].1));
    let BlockKind::Task { effects: w, .. } = &g.blocks.iter().find(|b| b.label() == "W").unwrap().kind else {
        panic!()
    };
    assert!(effects.is_empty());
    assert!(connected(&g, w[0].1, input));
}

#[test]
fn forward_channel_read_needs_no_pre() {
    let g = compile(
        "behaviortree T { sequence {
            channel x: int
            task \"W\" () -> (x) {= @script step { emit x = 7; status success } loop =}
            task \"R\" (x) {= @script step { status success } loop =}
        } }",
    );
    assert_eq!(g.count_blocks(|k| matches!(k, BlockKind::Pre { .. })), 0);
}

#[test]
fn nested_readers_use_forwarding_ports() {
    let g = compile(
        "behaviortree T { input a: int sequence { sequence {
            task \"R1\" (a) {= @script step { status success } loop =}
            task \"R2\" (a) {= @script step { status success } loop =}
        } } }",
    );
    let inner = g.blocks_named("sequence_n_0").next().unwrap();
    let forwarded: Vec<_> = inner.ports.iter().filter(|p| g.port(**p).name == "a").collect();
    assert_eq!(forwarded.len(), 1);
    assert_eq!(g.fanout()[forwarded[0].0].len(), 2);
}

#[test]
fn invalid_definitions_are_rejected() {
    let def = parse("behaviortree T { task \"A\" (nope) {= @extern f =} }").unwrap();
    assert!(matches!(translate(&def), Err(TranslateError::Invalid(_))));
}

#[test]
fn generated_trees_compile_to_well_formed_graphs() {
    for seed in 0..200 {
        let def = gen_random_def(seed, 4, 3);
        let g = translate(&def).unwrap();
        // Every input port has at most one incoming connection.
        let mut incoming = vec![0; g.ports.len()];
        for c in &g.connections {
            incoming[c.to.0] += 1;
        }
        assert!(incoming.iter().all(|n| *n <= 1), "seed {seed}");
        // The order covers every reaction once and respects dependencies.
        let mut pos = vec![usize::MAX; g.reactions.len()];
        for (i, r) in g.top_order.iter().enumerate() {
            pos[r.0] = i;
        }
        assert!(pos.iter().all(|p| *p != usize::MAX));
        for (from, targets) in order::dependencies(&g).iter().enumerate() {
            for t in targets {
                assert!(pos[from] < pos[t.0], "seed {seed}");
            }
        }
        // Block count grows linearly with the tree.
        assert!(g.blocks.len() <= 1 + 4 * def.node_count() + def.leaves().len() * 4, "seed {seed}");
    }
}

#[test]
fn translation_and_dot_are_deterministic() {
    for seed in [1, 7, 42] {
        let def = gen_random_def(seed, 4, 3);
        let a = translate(&def).unwrap();
        let b = translate(&def).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(dot::graph_to_dot(&a), dot::graph_to_dot(&b));
        assert_eq!(dot::bt_to_dot(&def), dot::bt_to_dot(&def));
    }
}

#[test]
fn dot_views_name_the_expected_shapes() {
    let text = "behaviortree T { sequence {
        channel x: int
        condition \"C\" (x) {= @expr present(x) =}
        task \"W\" () -> (x) {= @script step { emit x = 1; status success } loop =}
    } }";
    let def = parse(text).unwrap();
    let bt = dot::bt_to_dot(&def);
    assert!(bt.contains("n_0 [shape=ellipse, label=\"C\"]"));
    assert!(bt.contains("n_1 [shape=box, label=\"W\"]"));
    assert!(bt.contains("label=\"→\""));
    let net = dot::graph_to_dot(&translate(&def).unwrap());
    assert!(net.contains("subgraph cluster_T"));
    assert!(net.contains("Pre_x"));
}
