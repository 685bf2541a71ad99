//! Reference evaluator: interprets a query AST directly over the token
//! table of a vertical document, enumerating intervals longest first.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use cqk_core::encoder::VerticalDocument;
use cqk_core::query::{BoolExpr, CmpOp, Node, Query, ValueExpr};
use regex::Regex;

#[derive(Debug, Clone, PartialEq)]
pub enum V {
    S(String),
    I(i64),
}

pub type DynFn = fn(&[V]) -> V;

pub struct Oracle<'a> {
    doc: &'a VerticalDocument,
    dynamic: HashMap<&'static str, DynFn>,
    regexes: std::cell::RefCell<HashMap<String, Regex>>,
    pub max_len: usize,
}

type Env = BTreeMap<String, usize>;

fn region_index(regions: &[(u32, u32)], pos: usize) -> Option<usize> {
    regions
        .iter()
        .position(|&(s, e)| s as usize <= pos && pos <= e as usize)
}

impl<'a> Oracle<'a> {
    pub fn new(doc: &'a VerticalDocument) -> Self {
        Oracle {
            doc,
            dynamic: HashMap::new(),
            regexes: Default::default(),
            max_len: 1024,
        }
    }

    pub fn with_dynamic(mut self, name: &'static str, f: DynFn) -> Self {
        self.dynamic.insert(name, f);
        self
    }

    fn column(&self, attr: &str) -> usize {
        self.doc
            .positional
            .iter()
            .position(|a| a == attr)
            .unwrap_or_else(|| panic!("oracle: no attribute {attr}"))
    }

    fn regions(&self, name: &str) -> &[(u32, u32)] {
        let i = self.doc.structural.iter().position(|s| s == name).unwrap();
        &self.doc.regions[i]
    }

    fn full_match(&self, pattern: &str, value: &str) -> bool {
        let mut cache = self.regexes.borrow_mut();
        let re = cache
            .entry(pattern.to_owned())
            .or_insert_with(|| Regex::new(&format!("^(?:{pattern})$")).unwrap());
        re.is_match(value)
    }

    fn value(&self, v: &ValueExpr, pos: usize, env: &Env) -> V {
        match v {
            ValueExpr::Attr(a) => V::S(self.doc.tokens[pos][self.column(a)].clone()),
            ValueExpr::LabelPath { label, attr } => {
                V::S(self.doc.tokens[env[label]][self.column(attr)].clone())
            }
            ValueExpr::Str(s) => V::S(s.clone()),
            ValueExpr::Int(i) => V::I(*i),
            ValueExpr::Call { name, args } => {
                let args: Vec<V> = args.iter().map(|a| self.value(a, pos, env)).collect();
                self.dynamic[name.as_str()](&args)
            }
            ValueExpr::Freq(arg) => {
                let attr = match arg.as_ref() {
                    ValueExpr::Attr(a) | ValueExpr::LabelPath { attr: a, .. } => a.as_str(),
                    _ => "word",
                };
                let V::S(s) = self.value(arg, pos, env) else { panic!() };
                let col = self.column(attr);
                V::I(self.doc.tokens.iter().filter(|row| row[col] == s).count() as i64)
            }
        }
    }

    fn test(&self, e: &BoolExpr, pos: usize, env: &Env) -> bool {
        match e {
            BoolExpr::And(a, b) => self.test(a, pos, env) && self.test(b, pos, env),
            BoolExpr::Or(a, b) => self.test(a, pos, env) || self.test(b, pos, env),
            BoolExpr::Not(a) => !self.test(a, pos, env),
            BoolExpr::Truth(v) => self.value(v, pos, env) != V::I(0),
            BoolExpr::Compare { lhs, op, rhs } => {
                let (l, r) = (self.value(lhs, pos, env), self.value(rhs, pos, env));
                match (l, r) {
                    (V::I(a), V::I(b)) => match op {
                        CmpOp::Eq => a == b,
                        CmpOp::Ne => a != b,
                        CmpOp::Lt => a < b,
                        CmpOp::Le => a <= b,
                        CmpOp::Gt => a > b,
                        CmpOp::Ge => a >= b,
                    },
                    (V::S(a), V::S(b)) => {
                        let eq = match (lhs, rhs) {
                            (_, ValueExpr::Str(p)) => self.full_match(p, &a),
                            (ValueExpr::Str(p), _) => self.full_match(p, &b),
                            _ => a == b,
                        };
                        if *op == CmpOp::Ne {
                            !eq
                        } else {
                            eq
                        }
                    }
                    _ => panic!("oracle: ill-typed comparison"),
                }
            }
        }
    }

    /// All (next position, env) pairs reachable by matching `node` from
    /// `pos` without consuming positions beyond `last`.
    fn step(&self, node: &Node, pos: usize, env: &Env, last: usize) -> BTreeSet<(usize, Env)> {
        let mut out = BTreeSet::new();
        match node {
            Node::Condition { label, expr } => {
                if pos <= last && self.test(expr, pos, env) {
                    let mut env = env.clone();
                    if let Some(l) = label {
                        env.insert(l.clone(), pos);
                    }
                    out.insert((pos + 1, env));
                }
            }
            Node::Wildcard { label } => {
                if pos <= last {
                    let mut env = env.clone();
                    if let Some(l) = label {
                        env.insert(l.clone(), pos);
                    }
                    out.insert((pos + 1, env));
                }
            }
            Node::StructTag { name, close } => {
                let regions = self.regions(name);
                let ok = if *close {
                    pos > 0 && regions.iter().any(|&(_, e)| e as usize == pos - 1)
                } else {
                    regions.iter().any(|&(s, _)| s as usize == pos)
                };
                if ok {
                    out.insert((pos, env.clone()));
                }
            }
            Node::Concat(items) => {
                let mut states: BTreeSet<(usize, Env)> = [(pos, env.clone())].into();
                for item in items {
                    states = states
                        .iter()
                        .flat_map(|(p, e)| self.step(item, *p, e, last))
                        .collect();
                }
                out = states;
            }
            Node::Alternation(alts) => {
                for alt in alts {
                    out.extend(self.step(alt, pos, env, last));
                }
            }
            Node::Repeat { child, min, max } => {
                let mut frontier: BTreeSet<(usize, Env)> = [(pos, env.clone())].into();
                let mut k = 0u32;
                let mut seen_after_min: BTreeSet<(usize, Env)> = BTreeSet::new();
                loop {
                    if k >= *min {
                        let fresh: Vec<_> = frontier
                            .iter()
                            .filter(|s| !seen_after_min.contains(*s))
                            .cloned()
                            .collect();
                        if fresh.is_empty() {
                            break;
                        }
                        seen_after_min.extend(fresh);
                    }
                    if max.is_some_and(|m| k >= m) {
                        break;
                    }
                    frontier = frontier
                        .iter()
                        .flat_map(|(p, e)| self.step(child, *p, e, last))
                        .collect();
                    k += 1;
                    if frontier.is_empty() {
                        break;
                    }
                }
                out = seen_after_min;
            }
        }
        out
    }

    fn accepts(&self, q: &Query, start: usize, end: usize) -> bool {
        if let Some(w) = &q.within {
            let regions = self.regions(&w.structure);
            let idx: Option<Vec<usize>> = (start..=end).map(|p| region_index(regions, p)).collect();
            match idx {
                Some(idx) if idx[idx.len() - 1] - idx[0] < w.count as usize => {}
                _ => return false,
            }
        }
        self.step(&q.pattern, start, &Env::new(), end)
            .iter()
            .any(|(p, _)| *p == end + 1)
    }

    /// Longest interval per start position.
    pub fn eval(&self, q: &Query) -> Vec<(usize, usize)> {
        let n = self.doc.tokens.len();
        let mut out = Vec::new();
        for start in 0..n {
            let longest = (start..n.min(start + self.max_len))
                .rev()
                .find(|&end| self.accepts(q, start, end));
            if let Some(end) = longest {
                out.push((start, end));
            }
        }
        out
    }
}

pub fn isshort(args: &[V]) -> V {
    let V::S(w) = &args[0] else { panic!() };
    V::I((w.chars().count() <= 3) as i64)
}

pub fn ishuman(args: &[V]) -> V {
    let V::S(w) = &args[0] else { panic!() };
    const HUMAN: &[&str] = &[
        "soldiers", "farmers", "Farmers", "children", "teachers", "women", "men", "man", "girl",
        "president", "Reporters", "People", "sources",
    ];
    V::I(HUMAN.contains(&w.as_str()) as i64)
}
