//! Differential testing: the compiled network against the interpreter.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::ExternRegistry;
use crate::check::validate;
use crate::model::{BtDef, BtNode, CompositeKind, Direction, NodeKind, Value, ValueType};
use crate::oracle::run_oracle;
use crate::parser::gen_random_def;
use crate::runtime::{RunError, Runtime, Scenario, Tag, Trace};
use crate::translate::{translate_with, TranslateOptions};

/// First point where the two traces disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    /// Index of the first differing trace line.
    pub index: usize,
    pub tag: Option<Tag>,
    pub oracle: Option<String>,
    pub compiled: Option<String>,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |l: &Option<String>| l.clone().unwrap_or_else(|| "<end of trace>".into());
        match self.tag {
            Some(tag) => writeln!(f, "traces diverge at event {} (tag {tag})", self.index)?,
            None => writeln!(f, "traces diverge at event {}", self.index)?,
        }
        writeln!(f, "- oracle:   {}", show(&self.oracle))?;
        write!(f, "+ compiled: {}", show(&self.compiled))
    }
}

/// Both traces, whether or not the runs ended in an error.
fn outcome(result: Result<Trace, RunError>) -> (Trace, Option<String>) {
    match result {
        Ok(t) => (t.comparable(), None),
        Err(e) => (e.trace.comparable(), Some(e.error.to_string())),
    }
}

/// Runs `def` both ways and reports the first difference, if any.
pub fn compare(
    def: &BtDef,
    scenario: &Scenario,
    externs: &ExternRegistry,
    options: &TranslateOptions,
) -> Result<(), Divergence> {
    let graph = translate_with(def, options).expect("compare needs a valid definition");
    let compiled = Runtime::new(graph, externs.clone()).map(|rt| rt.run(scenario));
    let compiled = match compiled {
        Ok(result) => outcome(result),
        Err(e) => (Trace::default(), Some(e.to_string())),
    };
    let oracle = outcome(run_oracle(def, scenario, externs));
    let a: Vec<String> = oracle.0.events.iter().map(|e| e.to_json_line()).collect();
    let b: Vec<String> = compiled.0.events.iter().map(|e| e.to_json_line()).collect();
    let index = match a.iter().zip(&b).position(|(x, y)| x != y) {
        Some(i) => i,
        None if a.len() != b.len() => a.len().min(b.len()),
        None if oracle.1 != compiled.1 => {
            return Err(Divergence { index: a.len(), tag: None, oracle: oracle.1, compiled: compiled.1 })
        }
        None => return Ok(()),
    };
    let tag = oracle.0.events.get(index).or(compiled.0.events.get(index)).map(|e| e.tag);
    Err(Divergence { index, tag, oracle: a.get(index).cloned(), compiled: b.get(index).cloned() })
}

/// A scenario for generated trees: `start` every 10 ms for `ticks` ticks,
/// with random values injected on the generated input ports.
pub fn fuzz_scenario(def: &BtDef, seed: u64, ticks: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut scenario = Scenario::ticking(10, ticks * 10);
    for port in def.ports.iter().filter(|p| p.direction == Direction::Input) {
        for tick in 0..ticks {
            if !rng.random_bool(0.3) {
                continue;
            }
            let value = match port.ty {
                ValueType::Int => Value::Int(rng.random_range(-50..50)),
                ValueType::Bool => Value::Bool(rng.random_bool(0.5)),
                ValueType::Float => Value::Float(rng.random_range(-4..4) as f64 * 0.5),
                ValueType::String => Value::String(format!("s{}", rng.random_range(0..3))),
            };
            scenario = scenario.inject(tick * 10, &port.name, &value);
        }
    }
    scenario
}

/// Greedily removes subtrees while `fails` keeps holding, so the result
/// is a smaller definition showing the same problem.
pub fn minimize(def: &BtDef, fails: impl Fn(&BtDef) -> bool) -> BtDef {
    let mut best = def.clone();
    'outer: loop {
        for candidate in shrink_candidates(&best) {
            if validate(&candidate).is_empty() && fails(&candidate) {
                best = candidate;
                continue 'outer;
            }
        }
        return best;
    }
}

fn shrink_candidates(def: &BtDef) -> Vec<BtDef> {
    let mut out = Vec::new();
    for i in 0..def.ports.len() {
        let mut d = def.clone();
        d.ports.remove(i);
        out.push(d);
    }
    let mut paths = Vec::new();
    def.walk(|id, node| {
        if let Some(c) = node.as_composite() {
            paths.push((id.clone(), c.children.len()));
        }
    });
    for (path, n) in paths {
        let channels = def.node(&path).and_then(BtNode::as_composite).map_or(0, |c| c.channels.len());
        for i in 0..channels {
            let mut d = def.clone();
            composite_mut(&mut d.root, &path.0).channels.remove(i);
            out.push(d);
        }
        for i in 0..n {
            if n > 1 {
                let mut d = def.clone();
                let c = composite_mut(&mut d.root, &path.0);
                c.children.remove(i);
                if let CompositeKind::Parallel { threshold } = &mut c.kind {
                    *threshold = (*threshold).min(c.children.len());
                }
                out.push(d);
            }
        }
        // Replace a composite by one of its children when that child
        // declares nothing the composite provided.
        let mut d = def.clone();
        let node = node_mut(&mut d.root, &path.0);
        if let NodeKind::Composite(c) = &node.kind {
            if c.channels.is_empty() {
                *node = c.children[0].clone();
                out.push(d);
            }
        }
    }
    out
}

fn node_mut<'a>(mut node: &'a mut BtNode, path: &[u32]) -> &'a mut BtNode {
    for &i in path {
        node = match &mut node.kind {
            NodeKind::Composite(c) => &mut c.children[i as usize],
            NodeKind::Leaf(_) => unreachable!("paths lead through composites"),
        };
    }
    node
}

fn composite_mut<'a>(root: &'a mut BtNode, path: &[u32]) -> &'a mut crate::model::Composite {
    match &mut node_mut(root, path).kind {
        NodeKind::Composite(c) => c,
        NodeKind::Leaf(_) => unreachable!("path names a composite"),
    }
}

#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub count: u64,
    pub seed: u64,
    pub depth: usize,
    pub children: usize,
    pub ticks: u64,
    pub options: TranslateOptions,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { count: 100, seed: 0, depth: 4, children: 5, ticks: 100, options: TranslateOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FuzzFailure {
    pub case_seed: u64,
    pub def: BtDef,
    pub minimized: BtDef,
    pub scenario: Scenario,
    pub divergence: Divergence,
}

#[derive(Clone, Debug)]
pub struct FuzzReport {
    pub runs: u64,
    pub failure: Option<FuzzFailure>,
}

/// Generates and compares `count` trees, stopping at the first divergence.
/// Case `i` uses seed `seed + i`, so any case can be replayed alone.
pub fn fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let externs = ExternRegistry::new();
    for i in 0..cfg.count {
        let case_seed = cfg.seed.wrapping_add(i);
        let def = gen_random_def(case_seed, cfg.depth, cfg.children);
        let scenario = fuzz_scenario(&def, case_seed, cfg.ticks);
        if let Err(divergence) = compare(&def, &scenario, &externs, &cfg.options) {
            let minimized = minimize(&def, |d| compare(d, &scenario, &externs, &cfg.options).is_err());
            let divergence = compare(&minimized, &scenario, &externs, &cfg.options).err().unwrap_or(divergence);
            return FuzzReport {
                runs: i + 1,
                failure: Some(FuzzFailure { case_seed, def, minimized, scenario, divergence }),
            };
        }
    }
    FuzzReport { runs: cfg.count, failure: None }
}
