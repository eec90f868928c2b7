#![allow(dead_code)]

use std::path::PathBuf;

use cepml::document::parse_model;
use cepml::engine::{OutputRow, TimedEvent, Value};
use cepml::model::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> RuleModel {
    let text = std::fs::read_to_string(fixture_path(&format!("{name}.ceprule.json"))).unwrap();
    parse_model(&text).unwrap().0
}

pub fn rows_match(a: &[OutputRow], b: &[OutputRow]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y, 1e-9))
}

pub fn column(row: &OutputRow, name: &str) -> Value {
    row.values
        .get(name)
        .cloned()
        .unwrap_or_else(|| panic!("no column {name} in {row:?}"))
}

/// Reference queries keyed by fixture name, spacing kept as published.
pub const GOLDEN_EPL: [(&str, &str); 4] = [
    ("keepall", "select * from MyEvent.win:keepall()"),
    (
        "fraud",
        "select fraud.accountNumber as accntNum,
fraud.warning as warn,
withdraw.amount as amount,
MAX(fraud.timestamp, withdraw.timestamp) as timestamp,
'withdrawlFraud' as desc
from FraudWarningEvent. win:keepall() as fraud,
WithdrawalEvent. win:keepall() as withdraw
where fraud.accountNumber = withdraw.accountNumber",
    ),
    (
        "withdrawal",
        "select * from Withdrawal.win:time(10 sec ) where amount >= 200",
    ),
    ("avg", "select avg(price) from stockTickEvent.win:time(30 sec)"),
];

pub fn defect_fixture(code: &str) -> (RuleModel, String) {
    let path = fixture_path(&format!("defects/{}.ceprule.json", code.to_lowercase()));
    let text = std::fs::read_to_string(path).unwrap();
    (parse_model(&text).unwrap().0, text)
}

/// Follows a diagnostic path such as `bring[0].column.expr` through the
/// serialized rule.
pub fn lookup<'a>(rule: &'a serde_json::Value, path: &str) -> Option<&'a serde_json::Value> {
    let mut cur = rule;
    for part in path.split('.') {
        let (key, indices) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        cur = cur.get(key)?;
        for idx in indices.split(['[', ']']).filter(|s| !s.is_empty()) {
            cur = cur.get(idx.parse::<usize>().ok()?)?;
        }
    }
    Some(cur)
}

/// Schema shared by the generated event types E0..E3.
fn event_type(i: usize) -> EventType {
    EventType::new(
        format!("E{i}"),
        vec![
            Attribute::new("k", AttrKind::String),
            Attribute::new("x", AttrKind::Integer),
            Attribute::new("y", AttrKind::Float),
        ],
    )
}

pub struct Case {
    pub model: RuleModel,
    pub events: Vec<TimedEvent>,
}

/// Deterministic random (model, stream) pairs inside the engine subset.
pub struct Gen {
    rng: ChaCha8Rng,
    everies: u32,
    bounded: bool,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            everies: 0,
            bounded: false,
        }
    }

    /// Only timer and counter windows, never `keep_all` or an absent window.
    pub fn bounded(seed: u64) -> Self {
        Self {
            bounded: true,
            ..Self::new(seed)
        }
    }

    pub fn case(&mut self) -> Case {
        let types = self.rng.gen_range(1..=4);
        if self.rng.gen_bool(0.35) {
            let types = types.min(3);
            let model = self.pattern_model(types);
            let n = self.rng.gen_range(0..=60);
            let events = self.stream(types, n, 2500);
            Case { model, events }
        } else {
            let targets = self.rng.gen_range(1..=3);
            let model = self.stream_model(types, targets);
            let n = match targets {
                1 => self.rng.gen_range(0..=200),
                2 => self.rng.gen_range(0..=120),
                _ => self.rng.gen_range(0..=70),
            };
            let events = self.stream(types, n, 3000);
            Case { model, events }
        }
    }

    pub fn stream(&mut self, types: usize, n: usize, max_gap: i64) -> Vec<TimedEvent> {
        let mut ts = self.rng.gen_range(0..1000);
        (0..n)
            .map(|_| {
                if self.rng.gen_bool(0.8) {
                    ts += self.rng.gen_range(0..=max_gap);
                }
                let ty = self.rng.gen_range(0..types);
                let y = if self.rng.gen_bool(0.05) {
                    Value::Null
                } else {
                    Value::Float(self.rng.gen_range(0..1000) as f64 / 10.0)
                };
                TimedEvent::new(format!("E{ty}"), ts)
                    .with("k", *["a", "b", "c"].choose(&mut self.rng).unwrap())
                    .with("x", self.rng.gen_range(0..10i64))
                    .with("y", y)
            })
            .collect()
    }

    fn window(&mut self, targets: usize) -> Option<Window> {
        let (max_secs, max_count) = match targets {
            1 => (60, 20),
            2 => (20, 10),
            _ => (5, 4),
        };
        match self.rng.gen_range(0..10) {
            0..=3 => {
                let secs = if self.rng.gen_bool(0.2) {
                    self.rng.gen_range(1..=2 * max_secs) as f64 / 2.0
                } else {
                    self.rng.gen_range(1..=max_secs) as f64
                };
                Some(Window::timer(secs))
            }
            4..=6 => Some(Window::counter(self.rng.gen_range(1..=max_count))),
            7 if targets == 1 && !self.bounded => Some(Window::keep_all()),
            8 if targets == 1 && !self.bounded => None,
            _ => Some(Window::counter(self.rng.gen_range(1..=max_count))),
        }
    }

    pub fn stream_model(&mut self, types: usize, targets: usize) -> RuleModel {
        let mut m = RuleModel::new(&format!("R{}", self.rng.gen_range(0..1000))).unwrap();
        for i in 0..types {
            m = m.with_event(event_type(i));
        }
        let aliases: Vec<String> = (0..targets).map(|i| format!("t{i}")).collect();
        for alias in &aliases {
            let mut t = TargetBinding::new(format!("E{}", self.rng.gen_range(0..types))).alias(alias);
            if let Some(w) = self.window(targets) {
                t = t.window(w);
            }
            if self.rng.gen_bool(0.25) {
                t = t.group_win(vec!["k".into()]);
            }
            m = m.with_target(t);
        }
        if self.rng.gen_bool(0.7) {
            m = m.when(self.condition(&aliases, 2));
        }
        match self.rng.gen_range(0..6) {
            0 => m.select(SelectItem::Star),
            1 => {
                let n = self.rng.gen_range(1..=3);
                for c in 0..n {
                    let op = self.plain_operand(&aliases);
                    m = m.select(SelectItem::aliased(op, format!("c{c}")));
                }
                m
            }
            2 => {
                let n = self.rng.gen_range(1..=3);
                for c in 0..n {
                    let op = self.aggregate(&aliases);
                    m = m.select(SelectItem::aliased(op, format!("c{c}")));
                }
                m
            }
            3 => {
                let alias = aliases.choose(&mut self.rng).unwrap().clone();
                let agg = self.aggregate(&aliases);
                m.select(SelectItem::aliased(Operand::attr(alias, "x"), "c0"))
                    .select(SelectItem::aliased(agg, "c1"))
            }
            _ => {
                let alias = aliases.choose(&mut self.rng).unwrap().clone();
                let agg = self.aggregate(&aliases);
                let mut m = m
                    .group_by(vec![AttrRef::new(&alias, "k")])
                    .select(SelectItem::aliased(Operand::attr(&alias, "k"), "key"))
                    .select(SelectItem::aliased(agg, "c0"));
                if self.rng.gen_bool(0.5) {
                    m = m.select(SelectItem::aliased(Operand::agg(AggFn::Count, None), "n"));
                }
                m
            }
        }
    }

    fn aggregate(&mut self, aliases: &[String]) -> Operand {
        let alias = aliases.choose(&mut self.rng).unwrap().clone();
        let attr = if self.rng.gen_bool(0.5) { "x" } else { "y" };
        match self.rng.gen_range(0..7) {
            0 => Operand::agg(AggFn::Count, None),
            1 => Operand::agg(AggFn::Count, Some(AttrRef::new(alias, "y"))),
            2 => Operand::agg(AggFn::Avg, Some(AttrRef::new(alias, attr))),
            3 => Operand::agg(AggFn::Sum, Some(AttrRef::new(alias, attr))),
            4 => Operand::agg(AggFn::Min, Some(AttrRef::new(alias, attr))),
            5 => Operand::agg(AggFn::Max, Some(AttrRef::new(alias, attr))),
            _ => Operand::arith(
                ArithOp::Div,
                Operand::agg(AggFn::Sum, Some(AttrRef::new(alias, "x"))),
                Operand::agg(AggFn::Count, None),
            ),
        }
    }

    fn plain_operand(&mut self, aliases: &[String]) -> Operand {
        let alias = aliases.choose(&mut self.rng).unwrap().clone();
        match self.rng.gen_range(0..6) {
            0 => Operand::attr(alias, "k"),
            1 => Operand::attr(alias, "x"),
            2 => Operand::attr(alias, "y"),
            3 => Operand::arith(ArithOp::Mul, Operand::attr(alias, "x"), Operand::float(1.5)),
            4 => {
                let other = aliases.choose(&mut self.rng).unwrap().clone();
                Operand::scalar(
                    ScalarFn::Max2,
                    vec![Operand::attr(alias, "y"), Operand::attr(other, "x")],
                )
            }
            _ => Operand::string("tag"),
        }
    }

    fn condition(&mut self, aliases: &[String], depth: u32) -> Expression {
        let alias = aliases.choose(&mut self.rng).unwrap().clone();
        let ops = [
            CompareOp::Eq,
            CompareOp::Ne,
            CompareOp::Lt,
            CompareOp::Le,
            CompareOp::Gt,
            CompareOp::Ge,
        ];
        let op = *ops.choose(&mut self.rng).unwrap();
        let pick = if depth == 0 {
            self.rng.gen_range(0..4)
        } else {
            self.rng.gen_range(0..7)
        };
        match pick {
            0 => Expression::compare(op, Operand::attr(alias, "x"), Operand::int(self.rng.gen_range(0..10))),
            1 => Expression::compare(
                op,
                Operand::attr(alias, "y"),
                Operand::float(self.rng.gen_range(0..100) as f64),
            ),
            2 => {
                let other = aliases.choose(&mut self.rng).unwrap().clone();
                Expression::compare(CompareOp::Eq, Operand::attr(alias, "k"), Operand::attr(other, "k"))
            }
            3 => Expression::compare(
                op,
                Operand::arith(ArithOp::Add, Operand::attr(&alias, "x"), Operand::attr(&alias, "y")),
                Operand::int(50),
            ),
            4 => Expression::and(vec![
                self.condition(aliases, depth - 1),
                self.condition(aliases, depth - 1),
            ]),
            5 => Expression::or(vec![
                self.condition(aliases, depth - 1),
                self.condition(aliases, depth - 1),
            ]),
            _ => Expression::not(self.condition(aliases, depth - 1)),
        }
    }

    pub fn pattern_model(&mut self, types: usize) -> RuleModel {
        let mut m = RuleModel::new("P").unwrap();
        for i in 0..types {
            m = m
                .with_event(event_type(i))
                .with_target(TargetBinding::new(format!("E{i}")).alias(format!("a{i}")));
        }
        let mut tags = 0;
        self.everies = 0;
        let root = self.pattern_node(types, 3, true, &mut tags);
        m = m.with_pattern(root);
        let tag_names: Vec<String> = (0..tags).map(|i| format!("p{i}")).collect();
        if tag_names.is_empty() || self.rng.gen_bool(0.4) {
            m = m.select(SelectItem::Star);
            if tag_names.is_empty() {
                return m;
            }
        } else {
            let n = self.rng.gen_range(1..=3);
            for c in 0..n {
                let tag = tag_names.choose(&mut self.rng).unwrap().clone();
                let attr = *["k", "x", "y"].choose(&mut self.rng).unwrap();
                m = m.select(SelectItem::aliased(Operand::attr(tag, attr), format!("c{c}")));
            }
        }
        if self.rng.gen_bool(0.3) {
            let tag = tag_names.choose(&mut self.rng).unwrap().clone();
            m = m.when(Expression::compare(
                CompareOp::Ge,
                Operand::attr(tag, "x"),
                Operand::int(3),
            ));
        }
        m
    }

    fn leaf(&mut self, types: usize, tags: &mut usize) -> PatternNode {
        let alias = format!("a{}", self.rng.gen_range(0..types));
        let mut node = if self.rng.gen_bool(0.8) {
            *tags += 1;
            PatternNode::tagged(alias.clone(), format!("p{}", *tags - 1))
        } else {
            PatternNode::event(alias.clone())
        };
        if self.rng.gen_bool(0.3) {
            let op = *[CompareOp::Lt, CompareOp::Ge].choose(&mut self.rng).unwrap();
            node = node.with_filter(Expression::compare(
                op,
                Operand::attr(alias, "x"),
                Operand::int(self.rng.gen_range(1..9)),
            ));
        }
        node
    }

    /// `allow_every`: an `every` may still appear in this subtree.
    fn pattern_node(&mut self, types: usize, depth: u32, allow_every: bool, tags: &mut usize) -> PatternNode {
        let mut node = if depth == 0 || self.rng.gen_bool(0.3) {
            self.leaf(types, tags)
        } else {
            match self.rng.gen_range(0..3) {
                0 => {
                    let n = self.rng.gen_range(2..=3);
                    let kids = (0..n)
                        .map(|_| self.pattern_node(types, depth - 1, allow_every, tags))
                        .collect();
                    PatternNode::followed_by(kids)
                }
                1 => {
                    let n = self.rng.gen_range(1..=2);
                    let mut kids: Vec<PatternNode> = (0..n)
                        .map(|_| self.pattern_node(types, depth - 1, allow_every, tags))
                        .collect();
                    if n == 1 || self.rng.gen_bool(0.5) {
                        kids.push(PatternNode::not(self.leaf(types, tags)));
                    }
                    PatternNode::and(kids)
                }
                _ => {
                    let kids = (0..2)
                        .map(|_| self.pattern_node(types, depth - 1, false, tags))
                        .collect();
                    PatternNode::or(kids)
                }
            }
        };
        let contains_every = has_every(&node);
        if self.rng.gen_bool(0.3) {
            node = node.within(self.rng.gen_range(1..=8) as f64);
        }
        // Each `every` multiplies the live instances, so keep at most two.
        if allow_every && !contains_every && self.everies < 2 && self.rng.gen_bool(0.35) {
            self.everies += 1;
            node = node.every();
        }
        node
    }
}

pub fn has_every(n: &PatternNode) -> bool {
    n.repetition.as_ref().is_some_and(|r| r.kind == RepetitionKind::Every) || n.children().into_iter().any(has_every)
}

fn abc_model(pattern: PatternNode) -> RuleModel {
    let mut m = RuleModel::new("Seq").unwrap();
    for name in ["A", "B", "C"] {
        m = m
            .with_event(EventType::new(name, vec![Attribute::new("id", AttrKind::Integer)]))
            .with_target(TargetBinding::new(name).alias(name.to_lowercase()));
    }
    m.with_pattern(pattern)
        .select(SelectItem::aliased(Operand::attr("x", "id"), "a"))
        .select(SelectItem::aliased(Operand::attr("y", "id"), "b"))
}

/// `every ((x=A -> y=B) within 5 s)`
pub fn every_within_model() -> RuleModel {
    abc_model(
        PatternNode::followed_by(vec![PatternNode::tagged("a", "x"), PatternNode::tagged("b", "y")])
            .within(5.0)
            .every(),
    )
}

/// `every x=A -> (y=B and not C)`
pub fn absence_model() -> RuleModel {
    abc_model(PatternNode::followed_by(vec![
        PatternNode::tagged("a", "x").every(),
        PatternNode::and(vec![
            PatternNode::tagged("b", "y"),
            PatternNode::not(PatternNode::event("c")),
        ]),
    ]))
}

pub struct Suite {
    pub name: &'static str,
    pub events: Vec<TimedEvent>,
    /// `(x.id, y.id, emitted_at)` per match.
    pub expected: Vec<(i64, i64, i64)>,
}

/// Parses `"A1@0 B1@1000"` into events; the digits after the letter are the id.
pub fn script(text: &str) -> Vec<TimedEvent> {
    text.split_whitespace()
        .map(|tok| {
            let (ev, ts) = tok.split_once('@').unwrap();
            let (ty, id) = ev.split_at(1);
            TimedEvent::new(ty, ts.parse().unwrap()).with("id", id.parse::<i64>().unwrap_or(0))
        })
        .collect()
}

fn suite(name: &'static str, text: &str, expected: &[(i64, i64, i64)]) -> Suite {
    Suite {
        name,
        events: script(text),
        expected: expected.to_vec(),
    }
}

pub fn every_within_suites() -> Vec<Suite> {
    vec![
        suite("pair inside the guard", "A1@0 B1@1000", &[(1, 1, 1000)]),
        suite("pair past the guard", "A1@0 B1@6000", &[]),
        suite("guard boundary is exclusive", "A1@0 B1@5000", &[]),
        suite("just inside the boundary", "A1@0 B1@4999", &[(1, 1, 4999)]),
        suite(
            "second A while waiting is ignored",
            "A1@0 A2@1000 B1@2000",
            &[(1, 1, 2000)],
        ),
        suite("expiry restarts on the next A", "A1@0 A2@6000 B1@7000", &[(2, 1, 7000)]),
        suite("one B per instance", "A1@0 B1@1000 B2@2000", &[(1, 1, 1000)]),
        suite(
            "restart after a match",
            "A1@0 B1@1000 A2@2000 B2@3000",
            &[(1, 1, 1000), (2, 2, 3000)],
        ),
        suite("leading B is skipped", "B1@0 A1@100 B2@200", &[(1, 2, 200)]),
        suite("unrelated events interleave", "A1@0 C1@1000 B1@2000", &[(1, 1, 2000)]),
        suite("waiting instance expires", "A1@0 A2@3000 B1@5500", &[]),
        suite(
            "equal timestamps keep arrival order",
            "A1@0 B1@1000 A2@1000 B2@1000",
            &[(1, 1, 1000), (2, 2, 1000)],
        ),
        suite("empty stream", "", &[]),
    ]
}

pub fn absence_suites() -> Vec<Suite> {
    vec![
        suite("no C", "A1@0 B1@10", &[(1, 1, 10)]),
        suite("C before B kills the match", "A1@0 C1@5 B1@10", &[]),
        suite("C after B is too late", "A1@0 B1@10 C1@20", &[(1, 1, 10)]),
        suite("C kills every waiting A", "A1@0 A2@1 C1@2 B1@3", &[]),
        suite("C before A is irrelevant", "C1@0 A1@5 B1@10", &[(1, 1, 10)]),
        suite(
            "one B completes every waiting A",
            "A1@0 A2@1 B1@2",
            &[(1, 1, 2), (2, 1, 2)],
        ),
        suite("A after C survives", "A1@0 C1@1 A2@2 B1@3", &[(2, 1, 3)]),
        suite("same instant, C first", "A1@0 C1@10 B1@10", &[]),
        suite("same instant, B first", "A1@0 B1@10 C1@10", &[(1, 1, 10)]),
    ]
}

/// Runs a suite through engine and oracle; returns a description of the
/// first disagreement.
pub fn check_suite(model: &RuleModel, s: &Suite) -> Result<(), String> {
    let rows = cepml::engine::run_stream(model, &s.events).map_err(|e| e.to_string())?;
    let got: Vec<(i64, i64, i64)> = rows
        .iter()
        .map(|r| match (column(r, "a"), column(r, "b")) {
            (Value::Int(a), Value::Int(b)) => (a, b, r.emitted_at),
            other => panic!("{other:?}"),
        })
        .collect();
    if got != s.expected {
        return Err(format!("{}: engine {got:?}, expected {:?}", s.name, s.expected));
    }
    let slow = cepml::engine::oracle(model, &s.events).map_err(|e| e.to_string())?;
    if !rows_match(&rows, &slow) {
        return Err(format!("{}: oracle disagrees", s.name));
    }
    Ok(())
}
