//! Query evaluation: compilation of a query to an NFA over conditions and
//! longest-match-per-start simulation over a corpus.

mod condition;

use std::collections::{BTreeMap, HashSet};

pub use condition::anchored_regex;
use condition::{Cond, CondCompiler, EvalContext};

use crate::error::{Error, Result};
use crate::physical::Corpus;
use crate::query::{BoolExpr, Node, Query};
use crate::results::MatchSet;

pub const DEFAULT_MAX_MATCH_LENGTH: usize = 1024;
const MAX_STATES: usize = 1 << 20;

#[derive(Debug, Clone)]
enum Edge {
    Eps(usize),
    /// Consumes one position. `cond: None` is the wildcard.
    Consume {
        cond: Option<usize>,
        label: Option<usize>,
        to: usize,
    },
    /// Zero-width: `<s>` requires a region of `structure` to start at the
    /// next position, `</s>` requires one to end at the previous position.
    Assert {
        structure: usize,
        close: bool,
        to: usize,
    },
}

/// A query compiled against one corpus.
#[derive(Debug, Clone)]
pub struct Program {
    corpus_id: String,
    states: Vec<Vec<Edge>>,
    start: usize,
    accept: usize,
    conditions: Vec<Cond>,
    /// Conditions that read no label can be memoized per position.
    label_free: Vec<bool>,
    labels: Vec<String>,
    within: Option<(u32, usize)>,
    max_match_length: usize,
    /// Condition that every match's first position must satisfy.
    seed: Option<usize>,
}

struct Builder<'a> {
    compiler: CondCompiler<'a>,
    states: Vec<Vec<Edge>>,
    conditions: Vec<Cond>,
}

impl Builder<'_> {
    fn state(&mut self) -> Result<usize> {
        if self.states.len() >= MAX_STATES {
            return Err(Error::Type("query expands to too many automaton states".into()));
        }
        self.states.push(Vec::new());
        Ok(self.states.len() - 1)
    }

    fn label_slot(&self, label: &Option<String>) -> Option<usize> {
        label
            .as_ref()
            .and_then(|l| self.compiler.labels.iter().position(|x| x == l))
    }

    /// Adds `node` starting at state `from`; returns the state it ends in.
    fn emit(&mut self, node: &Node, from: usize) -> Result<usize> {
        match node {
            Node::Condition { label, expr } => {
                let cond = self.compiler.condition(expr)?;
                self.conditions.push(cond);
                let to = self.state()?;
                let edge = Edge::Consume {
                    cond: Some(self.conditions.len() - 1),
                    label: self.label_slot(label),
                    to,
                };
                self.states[from].push(edge);
                Ok(to)
            }
            Node::Wildcard { label } => {
                let to = self.state()?;
                let edge = Edge::Consume {
                    cond: None,
                    label: self.label_slot(label),
                    to,
                };
                self.states[from].push(edge);
                Ok(to)
            }
            Node::StructTag { name, close } => {
                let structure = self.compiler.corpus.structure_index(name)?;
                let to = self.state()?;
                self.states[from].push(Edge::Assert {
                    structure,
                    close: *close,
                    to,
                });
                Ok(to)
            }
            Node::Concat(items) => items.iter().try_fold(from, |at, item| self.emit(item, at)),
            Node::Alternation(alts) => {
                let to = self.state()?;
                for alt in alts {
                    let s = self.state()?;
                    self.states[from].push(Edge::Eps(s));
                    let e = self.emit(alt, s)?;
                    self.states[e].push(Edge::Eps(to));
                }
                Ok(to)
            }
            Node::Repeat { child, min, max } => {
                let mut at = from;
                for _ in 0..*min {
                    at = self.emit(child, at)?;
                }
                match max {
                    None => {
                        let head = self.state()?;
                        self.states[at].push(Edge::Eps(head));
                        let e = self.emit(child, head)?;
                        self.states[e].push(Edge::Eps(head));
                        Ok(head)
                    }
                    Some(max) => {
                        for _ in *min..*max {
                            let e = self.emit(child, at)?;
                            let join = self.state()?;
                            self.states[at].push(Edge::Eps(join));
                            self.states[e].push(Edge::Eps(join));
                            at = join;
                        }
                        Ok(at)
                    }
                }
            }
        }
    }
}

fn collect_labels(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Condition { label: Some(l), .. } | Node::Wildcard { label: Some(l) } => {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        Node::Concat(items) | Node::Alternation(items) => {
            items.iter().for_each(|n| collect_labels(n, out))
        }
        Node::Repeat { child, .. } => collect_labels(child, out),
        _ => {}
    }
}

/// The first consuming atom every match must begin with, looking through
/// leading zero-width tags.
fn leading_condition(node: &Node) -> Option<&Node> {
    match node {
        Node::Condition { .. } => Some(node),
        Node::Concat(items) => items
            .iter()
            .find(|n| !matches!(n, Node::StructTag { .. }))
            .and_then(leading_condition),
        Node::Repeat { child, min, .. } if *min >= 1 => leading_condition(child),
        _ => None,
    }
}

/// Compiles `query` for `corpus` with the default maximum match length.
pub fn compile(query: &Query, corpus: &Corpus) -> Result<Program> {
    let mut labels = Vec::new();
    collect_labels(&query.pattern, &mut labels);
    let within = match &query.within {
        Some(w) => Some((w.count, corpus.structure_index(&w.structure)?)),
        None => None,
    };
    let mut b = Builder {
        compiler: CondCompiler {
            corpus,
            labels: &labels,
        },
        states: Vec::new(),
        conditions: Vec::new(),
    };
    let start = b.state()?;
    let accept = b.emit(&query.pattern, start)?;

    let seed = match leading_condition(&query.pattern) {
        Some(Node::Condition { expr, .. }) => {
            let cond = b.compiler.condition(expr)?;
            cond.seed().is_some().then(|| {
                b.conditions.push(cond);
                b.conditions.len() - 1
            })
        }
        _ => None,
    };
    let label_free = b.conditions.iter().map(|c| !c.uses_labels()).collect();
    Ok(Program {
        corpus_id: corpus.id().to_owned(),
        states: b.states,
        start,
        accept,
        conditions: b.conditions,
        label_free,
        labels,
        within,
        max_match_length: DEFAULT_MAX_MATCH_LENGTH,
        seed,
    })
}

type Env = Vec<Option<u32>>;

impl Program {
    pub fn with_max_match_length(mut self, n: usize) -> Self {
        self.max_match_length = n.max(1);
        self
    }

    pub fn max_match_length(&self) -> usize {
        self.max_match_length
    }

    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Number of condition edges (wildcards excluded).
    pub fn condition_edges(&self) -> usize {
        self.states
            .iter()
            .flatten()
            .filter(|e| matches!(e, Edge::Consume { cond: Some(_), .. }))
            .count()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Last position a match starting at `p` may reach under the `within`
    /// constraint, or `None` if `p` lies in no region.
    fn within_limit(&self, corpus: &Corpus, p: usize) -> Option<usize> {
        let Some((count, s)) = self.within else {
            return Some(usize::MAX);
        };
        let regions = corpus.structural()[s].regions();
        let first = corpus.structural()[s].region_containing(p)?;
        let mut last = first;
        while last + 1 < regions.len()
            && (last - first + 1) < count as usize
            && regions[last + 1].0 == regions[last].1 + 1
        {
            last += 1;
        }
        Some(regions[last].1 as usize)
    }

    fn closure(
        &self,
        corpus: &Corpus,
        seeds: Vec<(usize, Env)>,
        cur: usize,
    ) -> Vec<(usize, Env)> {
        let mut seen: HashSet<(usize, Env)> = HashSet::new();
        let mut stack = seeds;
        let mut out = Vec::new();
        while let Some((state, env)) = stack.pop() {
            if !seen.insert((state, env.clone())) {
                continue;
            }
            for edge in &self.states[state] {
                match edge {
                    Edge::Eps(to) => stack.push((*to, env.clone())),
                    Edge::Assert {
                        structure,
                        close,
                        to,
                    } => {
                        let regions = &corpus.structural()[*structure];
                        let holds = if *close {
                            cur > 0 && regions.ends_at(cur - 1)
                        } else {
                            cur < corpus.size() && regions.starts_at(cur)
                        };
                        if holds {
                            stack.push((*to, env.clone()));
                        }
                    }
                    Edge::Consume { .. } => {}
                }
            }
            out.push((state, env));
        }
        out
    }

    /// End of the longest non-empty match starting at `p` and ending no
    /// later than `limit`.
    fn longest_from(&self, ctx: &EvalContext, p: usize, limit: usize) -> Result<Option<usize>> {
        let corpus = ctx.corpus;
        let mut current = self.closure(corpus, vec![(self.start, vec![None; self.labels.len()])], p);
        let mut cur = p;
        let mut best = None;
        let mut memo: Vec<Option<bool>> = vec![None; self.conditions.len()];
        loop {
            if cur > p && current.iter().any(|(s, _)| *s == self.accept) {
                best = Some(cur - 1);
            }
            if cur >= corpus.size() || cur > limit {
                break;
            }
            memo.iter_mut().for_each(|m| *m = None);
            let mut next = Vec::new();
            for (state, env) in &current {
                for edge in &self.states[*state] {
                    let Edge::Consume { cond, label, to } = edge else { continue };
                    let ok = match cond {
                        None => true,
                        Some(c) if self.label_free[*c] => match memo[*c] {
                            Some(v) => v,
                            None => {
                                let v = ctx.test(&self.conditions[*c], cur, env)?;
                                memo[*c] = Some(v);
                                v
                            }
                        },
                        Some(c) => ctx.test(&self.conditions[*c], cur, env)?,
                    };
                    if ok {
                        let mut env = env.clone();
                        if let Some(slot) = label {
                            env[*slot] = Some(cur as u32);
                        }
                        next.push((*to, env));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            cur += 1;
            current = self.closure(corpus, next, cur);
        }
        Ok(best)
    }
}

/// For each start, the largest end among subcorpus intervals containing it;
/// a match is inside the subcorpus iff its end does not exceed this.
struct SubcorpusBounds {
    starts: Vec<usize>,
    prefix_max_end: Vec<usize>,
}

impl SubcorpusBounds {
    fn new(sub: &MatchSet) -> Self {
        let mut starts = Vec::with_capacity(sub.len());
        let mut prefix_max_end = Vec::with_capacity(sub.len());
        let mut m = 0;
        for &(s, e) in sub.intervals() {
            m = m.max(e);
            starts.push(s);
            prefix_max_end.push(m);
        }
        SubcorpusBounds {
            starts,
            prefix_max_end,
        }
    }

    fn limit(&self, p: usize) -> Option<usize> {
        let k = self.starts.partition_point(|&s| s <= p);
        let m = *self.prefix_max_end.get(k.checked_sub(1)?)?;
        (m >= p).then_some(m)
    }
}

/// Evaluates a compiled query, reporting the longest match for every start
/// position at which one exists. With `subcorpus`, only those matches that
/// lie inside a single subcorpus interval are kept.
pub fn eval_query(program: &Program, corpus: &Corpus, subcorpus: Option<&MatchSet>) -> Result<MatchSet> {
    if program.corpus_id != corpus.id() {
        return Err(Error::CorpusMismatch {
            expected: program.corpus_id.clone(),
            found: corpus.id().to_owned(),
        });
    }
    if let Some(sub) = subcorpus {
        sub.ensure_corpus(corpus.id())?;
    }
    let ctx = EvalContext::new(corpus);
    let size = corpus.size();
    let bounds = subcorpus.map(SubcorpusBounds::new);

    let candidates: Box<dyn Iterator<Item = usize>> = match program.seed {
        Some(c) => {
            let (attr, hits) = program.conditions[c].seed().expect("seed condition");
            let attribute = &corpus.positional()[attr];
            let mut positions = Vec::new();
            for (id, _) in hits.iter().enumerate().filter(|(_, &h)| h) {
                positions.extend_from_slice(&attribute.positions(id as u32)?);
            }
            positions.sort_unstable();
            Box::new(positions.into_iter().map(|p| p as usize))
        }
        None => match subcorpus {
            Some(sub) => {
                let mut starts: Vec<usize> = Vec::new();
                let mut covered = 0usize;
                for &(s, e) in sub.intervals() {
                    let from = s.max(covered);
                    if from <= e {
                        starts.extend(from..=e);
                        covered = e + 1;
                    }
                }
                Box::new(starts.into_iter())
            }
            None => Box::new(0..size),
        },
    };

    let mut found = Vec::new();
    for p in candidates {
        if p >= size {
            continue;
        }
        let bound = match &bounds {
            Some(b) => match b.limit(p) {
                Some(l) => l,
                None => continue,
            },
            None => usize::MAX,
        };
        let mut limit = p.saturating_add(program.max_match_length - 1).min(size - 1);
        match program.within_limit(corpus, p) {
            Some(l) => limit = limit.min(l),
            None => continue,
        }
        if let Some(end) = program.longest_from(&ctx, p, limit)? {
            if end <= bound {
                found.push((p, end));
            }
        }
    }
    Ok(MatchSet::from_sorted(corpus.id(), found))
}

/// Label bindings for evaluating a single condition.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelEnv {
    pub slots: BTreeMap<String, usize>,
}

impl LabelEnv {
    pub fn bind(mut self, label: &str, pos: usize) -> Self {
        self.slots.insert(label.to_owned(), pos);
        self
    }
}

/// Tests one condition at `pos`.
pub fn eval_condition(expr: &BoolExpr, pos: usize, env: &LabelEnv, corpus: &Corpus) -> Result<bool> {
    if pos >= corpus.size() {
        return Err(Error::PositionOutOfRange {
            pos,
            size: corpus.size(),
        });
    }
    let labels: Vec<String> = env.slots.keys().cloned().collect();
    let slots: Env = env.slots.values().map(|&p| Some(p as u32)).collect();
    let cond = CondCompiler {
        corpus,
        labels: &labels,
    }
    .condition(expr)?;
    EvalContext::new(corpus).test(&cond, pos, &slots)
}
