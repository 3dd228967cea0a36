use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::check::validate;
use crate::expr::{BinOp, Expr, UnOp};
use crate::model::{
    BtDef, BtNode, ChannelDecl, CompositeKind, Direction, Leaf, LeafKind, PortDecl, Script, ScriptStep, ScriptTail,
    Span, StateDecl, Status, StepStatus, TaskBody, Value, ValueType,
};

/// Knobs for [`gen_random_def`]. The defaults keep generated runs mostly
/// error-free while still exercising the failure paths now and then.
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_depth: usize,
    pub max_children: usize,
    /// Probability a composite declares channels.
    pub channel_rate: f64,
    /// Probability a source read is not guarded by `present`.
    pub unguarded_read_rate: f64,
    /// Probability a script step reports both success and failure.
    pub double_status_rate: f64,
}

impl GenConfig {
    pub fn new(max_depth: usize, max_children: usize) -> Self {
        GenConfig {
            max_depth: max_depth.max(1),
            max_children: max_children.max(1),
            channel_rate: 0.6,
            unguarded_read_rate: 0.003,
            double_status_rate: 0.002,
        }
    }
}

/// Generates a definition that passes [`validate`]; the same seed always
/// yields the same definition.
pub fn gen_random_def(seed: u64, max_depth: usize, max_children: usize) -> BtDef {
    GenConfig::new(max_depth, max_children).generate(seed)
}

impl GenConfig {
    pub fn generate(&self, seed: u64) -> BtDef {
        let mut gen = Gen { rng: ChaCha8Rng::seed_from_u64(seed), cfg: self, channels: 0, labels: 0 };
        loop {
            let def = gen.def();
            if validate(&def).is_empty() {
                return def;
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Access {
    Full,
    ReadOnly,
    None,
}

#[derive(Clone)]
struct Item {
    name: String,
    ty: ValueType,
    readable: bool,
    access: Access,
}

impl Item {
    fn can_read(&self) -> bool {
        self.readable && self.access != Access::None
    }

    fn can_write(&self) -> bool {
        self.access == Access::Full
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    cfg: &'a GenConfig,
    channels: usize,
    labels: usize,
}

struct Locals<'a> {
    ints: Vec<(&'a str, bool)>,
    bools: Vec<(&'a str, bool)>,
}

impl Gen<'_> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p.clamp(0.0, 1.0))
    }

    fn pick<T: Clone>(&mut self, items: &[T]) -> Option<T> {
        if items.is_empty() {
            None
        } else {
            Some(items[self.rng.random_range(0..items.len())].clone())
        }
    }

    fn def(&mut self) -> BtDef {
        self.channels = 0;
        self.labels = 0;
        let ports = vec![
            port("in0", Direction::Input, ValueType::Int),
            port("flag", Direction::Input, ValueType::Bool),
            port("out0", Direction::Output, ValueType::Int),
        ];
        let scope = vec![
            Item { name: "in0".into(), ty: ValueType::Int, readable: true, access: Access::ReadOnly },
            Item { name: "flag".into(), ty: ValueType::Bool, readable: true, access: Access::ReadOnly },
            Item { name: "out0".into(), ty: ValueType::Int, readable: false, access: Access::Full },
        ];
        let root = if self.cfg.max_depth == 1 {
            self.leaf(&scope, LeafKind::Task)
        } else {
            self.composite(self.cfg.max_depth, scope)
        };
        BtDef { name: "Generated".into(), ports, root, span: Span::default() }
    }

    fn node(&mut self, depth: usize, scope: Vec<Item>) -> BtNode {
        if depth <= 1 || self.chance(0.35) {
            let kind = if self.chance(0.3) { LeafKind::Condition } else { LeafKind::Task };
            self.leaf(&scope, kind)
        } else {
            self.composite(depth, scope)
        }
    }

    fn composite(&mut self, depth: usize, mut scope: Vec<Item>) -> BtNode {
        let n = self.rng.random_range(1..=self.cfg.max_children);
        let kind = match self.rng.random_range(0..20) {
            0..=7 => CompositeKind::Sequence,
            8..=14 => CompositeKind::Fallback,
            _ => CompositeKind::Parallel { threshold: self.rng.random_range(1..=n) },
        };
        let mut channels = Vec::new();
        if self.chance(self.cfg.channel_rate) {
            for _ in 0..self.rng.random_range(1..=2) {
                let name = format!("c{}", self.channels);
                self.channels += 1;
                let ty = if self.chance(0.7) { ValueType::Int } else { ValueType::Bool };
                scope.push(Item { name: name.clone(), ty, readable: true, access: Access::Full });
                channels.push(ChannelDecl { name, ty, span: Span::default() });
            }
        }
        let mut branch_scopes = vec![scope.clone(); n];
        if matches!(kind, CompositeKind::Parallel { .. }) && n > 1 {
            // Concurrent branches may share read-only items; anything written
            // belongs to exactly one branch.
            for (i, item) in scope.iter().enumerate() {
                if item.access != Access::Full {
                    continue;
                }
                if item.readable && self.chance(0.3) {
                    branch_scopes.iter_mut().for_each(|s| s[i].access = Access::ReadOnly);
                } else {
                    let owner = self.rng.random_range(0..n);
                    for (b, s) in branch_scopes.iter_mut().enumerate() {
                        if b != owner {
                            s[i].access = Access::None;
                        }
                    }
                }
            }
        }
        let children = branch_scopes.into_iter().map(|s| self.node(depth - 1, s)).collect();
        BtNode::composite(kind, channels, children)
    }

    fn subset(&mut self, items: &[&Item], max: usize) -> Vec<Item> {
        let mut pool: Vec<Item> = items.iter().map(|i| (*i).clone()).collect();
        let k = self.rng.random_range(0..=max.min(pool.len()));
        let mut out = Vec::new();
        for _ in 0..k {
            let i = self.rng.random_range(0..pool.len());
            out.push(pool.remove(i));
        }
        out
    }

    fn leaf(&mut self, scope: &[Item], kind: LeafKind) -> BtNode {
        let readable: Vec<&Item> = scope.iter().filter(|i| i.can_read()).collect();
        let writable: Vec<&Item> = scope.iter().filter(|i| i.can_write()).collect();
        let sources = self.subset(&readable, 2);
        let effects = if kind == LeafKind::Task { self.subset(&writable, 2) } else { Vec::new() };
        let states = if self.chance(0.3) {
            vec![StateDecl {
                name: "s0".into(),
                ty: ValueType::Int,
                initial: Value::Int(self.rng.random_range(0..10)),
                span: Span::default(),
            }]
        } else {
            Vec::new()
        };
        let mut locals = Locals { ints: Vec::new(), bools: Vec::new() };
        for s in &sources {
            match s.ty {
                ValueType::Bool => locals.bools.push((s.name.as_str(), true)),
                _ => locals.ints.push((s.name.as_str(), true)),
            }
        }
        for s in &states {
            locals.ints.push((s.name.as_str(), false));
        }
        let body = if kind == LeafKind::Condition && self.chance(0.5) {
            TaskBody::Expr(self.bool_expr(&locals, 2))
        } else {
            let steps = (0..self.rng.random_range(1..=3))
                .map(|_| self.step(kind, &effects, &states, &locals))
                .collect();
            let tail = if self.chance(0.7) { ScriptTail::Loop } else { ScriptTail::Hold };
            TaskBody::Script(Script { steps, tail })
        };
        self.labels += 1;
        let label = match kind {
            LeafKind::Task => format!("T{}", self.labels),
            LeafKind::Condition => format!("C{}", self.labels),
        };
        BtNode::leaf(Leaf {
            kind,
            label,
            sources: sources.into_iter().map(|s| s.name).collect(),
            effects: effects.iter().map(|s| s.name.clone()).collect(),
            states,
            body,
        })
    }

    fn step(&mut self, kind: LeafKind, effects: &[Item], states: &[StateDecl], locals: &Locals<'_>) -> ScriptStep {
        let mut emits = Vec::new();
        for e in effects {
            if self.chance(0.8) {
                let value = match e.ty {
                    ValueType::Bool => self.bool_expr(locals, 2),
                    _ => self.bounded_int(locals),
                };
                emits.push((e.name.clone(), value));
            }
        }
        let mut state_updates = Vec::new();
        for s in states {
            if self.chance(0.7) {
                state_updates.push((s.name.clone(), self.bounded_int(locals)));
            }
        }
        let status = if self.chance(self.cfg.double_status_rate) {
            StepStatus { success: true, failure: true }
        } else {
            let roll = self.rng.random_range(0..100);
            let running_cut = if kind == LeafKind::Condition { 97 } else { 75 };
            StepStatus::of(match roll {
                r if r < 50 => Status::Success,
                r if r < running_cut => Status::Failure,
                _ => Status::Running,
            })
        };
        ScriptStep { emits, state_updates, status }
    }

    fn read(&mut self, name: &str, is_source: bool, fallback: Expr) -> Expr {
        if is_source && !self.chance(self.cfg.unguarded_read_rate) {
            Expr::If(Box::new(Expr::Present(name.into())), Box::new(Expr::var(name)), Box::new(fallback))
        } else {
            Expr::var(name)
        }
    }

    /// Integer expression whose value stays within a few thousand in magnitude.
    fn bounded_int(&mut self, locals: &Locals<'_>) -> Expr {
        let e = self.int_expr(locals, 2);
        Expr::bin(BinOp::Rem, e, Expr::lit(Value::Int(1000)))
    }

    fn int_expr(&mut self, locals: &Locals<'_>, depth: usize) -> Expr {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=2 => Expr::lit(Value::Int(self.rng.random_range(-20..=100))),
            3..=5 if !locals.ints.is_empty() => {
                let (name, is_source) = self.pick(&locals.ints).expect("non-empty");
                let fallback = Expr::lit(Value::Int(self.rng.random_range(0..5)));
                let read = self.read(name, is_source, fallback);
                Expr::bin(BinOp::Rem, read, Expr::lit(Value::Int(1000)))
            }
            6..=8 if depth > 0 => {
                let op = if self.chance(0.6) { BinOp::Add } else { BinOp::Sub };
                Expr::bin(op, self.int_expr(locals, depth - 1), self.int_expr(locals, depth - 1))
            }
            9 if depth > 0 => {
                let c = self.bool_expr(locals, depth - 1);
                Expr::If(
                    Box::new(c),
                    Box::new(self.int_expr(locals, depth - 1)),
                    Box::new(self.int_expr(locals, depth - 1)),
                )
            }
            _ => Expr::lit(Value::Int(self.rng.random_range(0..10))),
        }
    }

    fn bool_expr(&mut self, locals: &Locals<'_>, depth: usize) -> Expr {
        let roll = self.rng.random_range(0..10);
        let all: Vec<&str> = locals.ints.iter().chain(&locals.bools).filter(|(_, s)| *s).map(|(n, _)| *n).collect();
        match roll {
            0..=1 if !all.is_empty() => Expr::Present(self.pick(&all).expect("non-empty").into()),
            2..=3 if !locals.bools.is_empty() => {
                let (name, is_source) = self.pick(&locals.bools).expect("non-empty");
                self.read(name, is_source, Expr::lit(Value::Bool(false)))
            }
            4..=6 => {
                let op = self.pick(&[BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne]).expect("ops");
                let lhs = self.int_expr(locals, depth.min(1));
                Expr::bin(op, lhs, Expr::lit(Value::Int(self.rng.random_range(0..50))))
            }
            7..=8 if depth > 0 => {
                let op = if self.chance(0.5) { BinOp::And } else { BinOp::Or };
                Expr::bin(op, self.bool_expr(locals, depth - 1), self.bool_expr(locals, depth - 1))
            }
            9 if depth > 0 => Expr::Unary(UnOp::Not, Box::new(self.bool_expr(locals, depth - 1))),
            _ => Expr::lit(Value::Bool(self.chance(0.6))),
        }
    }
}

fn port(name: &str, direction: Direction, ty: ValueType) -> PortDecl {
    PortDecl { name: name.into(), direction, ty, span: Span::default() }
}
