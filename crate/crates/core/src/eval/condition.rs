use std::cell::RefCell;
use std::collections::HashMap;

use regex::Regex;

use crate::error::{Error, Result};
use crate::physical::{Corpus, Value, ValueType};
use crate::query::{BoolExpr, CmpOp, ValueExpr};

/// Compiles a value-level pattern with full-string anchoring.
pub fn anchored_regex(pattern: &str) -> Result<Regex> {
    Regex::new(&format!("^(?:{pattern})$")).map_err(|e| Error::InvalidRegex {
        pattern: pattern.to_owned(),
        reason: e.to_string(),
    })
}

/// Where an attribute value comes from: the position under test or the
/// position bound to a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Source {
    Current,
    Label(usize),
}

#[derive(Debug, Clone)]
pub(crate) enum Val {
    Attr { source: Source, attr: usize },
    Str(String),
    Int(i64),
    Dyn { decl: usize, args: Vec<Val> },
    Freq { attr: usize, arg: Box<Val> },
}

#[derive(Debug, Clone)]
pub(crate) enum Cond {
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
    /// Attribute value matches a regex; precomputed per lexicon id.
    IdIn {
        source: Source,
        attr: usize,
        hits: Vec<bool>,
        negate: bool,
    },
    Regex {
        value: Val,
        regex: Regex,
        negate: bool,
    },
    StrEq {
        lhs: Val,
        rhs: Val,
        negate: bool,
    },
    IntCmp {
        lhs: Val,
        op: CmpOp,
        rhs: Val,
    },
    Truth(Val),
}

impl Cond {
    pub(crate) fn uses_labels(&self) -> bool {
        match self {
            Cond::And(a, b) | Cond::Or(a, b) => a.uses_labels() || b.uses_labels(),
            Cond::Not(a) => a.uses_labels(),
            Cond::IdIn { source, .. } => *source != Source::Current,
            Cond::Regex { value, .. } | Cond::Truth(value) => value.uses_labels(),
            Cond::StrEq { lhs, rhs, .. } | Cond::IntCmp { lhs, rhs, .. } => {
                lhs.uses_labels() || rhs.uses_labels()
            }
        }
    }

    /// A top-level conjunct restricting the current position's value of an
    /// attribute to a set of ids, if there is one.
    pub(crate) fn seed(&self) -> Option<(usize, &[bool])> {
        match self {
            Cond::IdIn {
                source: Source::Current,
                attr,
                hits,
                negate: false,
            } => Some((*attr, hits)),
            Cond::And(a, b) => a.seed().or_else(|| b.seed()),
            _ => None,
        }
    }
}

impl Val {
    fn uses_labels(&self) -> bool {
        match self {
            Val::Attr { source, .. } => *source != Source::Current,
            Val::Str(_) | Val::Int(_) => false,
            Val::Dyn { args, .. } => args.iter().any(Val::uses_labels),
            Val::Freq { arg, .. } => arg.uses_labels(),
        }
    }
}

/// Resolves names in a condition against a corpus.
pub(crate) struct CondCompiler<'a> {
    pub corpus: &'a Corpus,
    pub labels: &'a [String],
}

impl CondCompiler<'_> {
    fn value_type(&self, v: &Val) -> ValueType {
        match v {
            Val::Attr { .. } | Val::Str(_) => ValueType::Str,
            Val::Int(_) | Val::Freq { .. } => ValueType::Int,
            Val::Dyn { decl, .. } => self.corpus.dynamic()[*decl].return_type,
        }
    }

    fn label_slot(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Type(format!("label `{label}` is not bound")))
    }

    pub fn value(&self, v: &ValueExpr) -> Result<Val> {
        Ok(match v {
            ValueExpr::Attr(name) => Val::Attr {
                source: Source::Current,
                attr: self.corpus.attribute_index(name)?,
            },
            ValueExpr::LabelPath { label, attr } => Val::Attr {
                source: Source::Label(self.label_slot(label)?),
                attr: self.corpus.attribute_index(attr)?,
            },
            ValueExpr::Str(s) => Val::Str(s.clone()),
            ValueExpr::Int(i) => Val::Int(*i),
            ValueExpr::Call { name, args } => {
                let decl_idx = self.corpus.dynamic_index(name)?;
                let decl = &self.corpus.dynamic()[decl_idx];
                if decl.arity() != args.len() {
                    return Err(Error::ArityMismatch {
                        name: name.clone(),
                        expected: decl.arity(),
                        got: args.len(),
                    });
                }
                let args = args.iter().map(|a| self.value(a)).collect::<Result<Vec<_>>>()?;
                for (i, (arg, ty)) in args.iter().zip(&decl.arg_types).enumerate() {
                    if self.value_type(arg) != *ty {
                        return Err(Error::Type(format!(
                            "argument {} of `{name}` must be {ty}",
                            i + 1
                        )));
                    }
                }
                Val::Dyn {
                    decl: decl_idx,
                    args,
                }
            }
            ValueExpr::Freq(arg) => {
                let attr_name = match arg.as_ref() {
                    ValueExpr::Attr(a) | ValueExpr::LabelPath { attr: a, .. } => a.as_str(),
                    _ => "word",
                };
                let attr = self.corpus.attribute_index(attr_name)?;
                let arg = self.value(arg)?;
                if self.value_type(&arg) != ValueType::Str {
                    return Err(Error::Type("`f` requires a string argument".into()));
                }
                Val::Freq {
                    attr,
                    arg: Box::new(arg),
                }
            }
        })
    }

    pub fn condition(&self, e: &BoolExpr) -> Result<Cond> {
        Ok(match e {
            BoolExpr::And(a, b) => Cond::And(Box::new(self.condition(a)?), Box::new(self.condition(b)?)),
            BoolExpr::Or(a, b) => Cond::Or(Box::new(self.condition(a)?), Box::new(self.condition(b)?)),
            BoolExpr::Not(a) => Cond::Not(Box::new(self.condition(a)?)),
            BoolExpr::Truth(v) => {
                let v = self.value(v)?;
                if self.value_type(&v) != ValueType::Int {
                    return Err(Error::Type(
                        "a bare call used as a condition must return INT".into(),
                    ));
                }
                Cond::Truth(v)
            }
            BoolExpr::Compare { lhs, op, rhs } => self.compare(lhs, *op, rhs)?,
        })
    }

    fn compare(&self, lhs: &ValueExpr, op: CmpOp, rhs: &ValueExpr) -> Result<Cond> {
        let l = self.value(lhs)?;
        let r = self.value(rhs)?;
        let (lt, rt) = (self.value_type(&l), self.value_type(&r));
        if op.is_order() {
            if lt != ValueType::Int || rt != ValueType::Int {
                return Err(Error::Type(format!(
                    "`{}` requires integer operands",
                    op.symbol()
                )));
            }
            return Ok(Cond::IntCmp { lhs: l, op, rhs: r });
        }
        if lt != rt {
            return Err(Error::Type(format!(
                "cannot compare {lt} with {rt} using `{}`",
                op.symbol()
            )));
        }
        let negate = op == CmpOp::Ne;
        if lt == ValueType::Int {
            return Ok(Cond::IntCmp { lhs: l, op, rhs: r });
        }
        // a string literal on either side is a pattern
        let (value, pattern) = match (l, r) {
            (value, Val::Str(p)) => (value, p),
            (Val::Str(p), value) => (value, p),
            (l, r) => return Ok(Cond::StrEq { lhs: l, rhs: r, negate }),
        };
        let regex = anchored_regex(&pattern)?;
        if let Val::Attr { source, attr } = value {
            let lexicon = self.corpus.positional()[attr].lexicon()?;
            let hits = lexicon.iter().map(|s| regex.is_match(s)).collect();
            return Ok(Cond::IdIn {
                source,
                attr,
                hits,
                negate,
            });
        }
        Ok(Cond::Regex {
            value,
            regex,
            negate,
        })
    }
}

/// Per-query evaluation state: the corpus and the dynamic-call cache.
pub(crate) struct EvalContext<'c> {
    pub corpus: &'c Corpus,
    cache: RefCell<HashMap<(usize, Vec<Value>), Value>>,
}

impl<'c> EvalContext<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        EvalContext {
            corpus,
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn resolve(&self, source: Source, pos: usize, env: &[Option<u32>]) -> Result<usize> {
        match source {
            Source::Current => Ok(pos),
            Source::Label(slot) => env
                .get(slot)
                .copied()
                .flatten()
                .map(|p| p as usize)
                .ok_or_else(|| Error::Type(format!("label slot {slot} read before being bound"))),
        }
    }

    fn id(&self, source: Source, attr: usize, pos: usize, env: &[Option<u32>]) -> Result<u32> {
        let p = self.resolve(source, pos, env)?;
        self.corpus.positional()[attr].id_at(p)
    }

    pub fn value(&self, v: &Val, pos: usize, env: &[Option<u32>]) -> Result<Value> {
        Ok(match v {
            Val::Attr { source, attr } => {
                let p = self.resolve(*source, pos, env)?;
                Value::Str(self.corpus.positional()[*attr].value_at(p)?.into_owned())
            }
            Val::Str(s) => Value::Str(s.clone()),
            Val::Int(i) => Value::Int(*i),
            Val::Dyn { decl, args } => {
                let args = args
                    .iter()
                    .map(|a| self.value(a, pos, env))
                    .collect::<Result<Vec<_>>>()?;
                let key = (*decl, args);
                if let Some(v) = self.cache.borrow().get(&key) {
                    return Ok(v.clone());
                }
                let value = self.corpus.dynamic()[*decl].eval(&key.1)?;
                self.cache.borrow_mut().insert(key, value.clone());
                value
            }
            Val::Freq { attr, arg } => {
                let attribute = &self.corpus.positional()[*attr];
                let id = match arg.as_ref() {
                    Val::Attr { source, attr: a } if a == attr => {
                        Some(self.id(*source, *a, pos, env)?)
                    }
                    other => match self.value(other, pos, env)? {
                        Value::Str(s) => attribute.str_to_id(&s)?,
                        Value::Int(_) => return Err(Error::Type("`f` of an integer".into())),
                    },
                };
                let freq = match id {
                    Some(id) => attribute.freq(id)?,
                    None => 0,
                };
                Value::Int(freq as i64)
            }
        })
    }

    fn int(&self, v: &Val, pos: usize, env: &[Option<u32>]) -> Result<i64> {
        match self.value(v, pos, env)? {
            Value::Int(i) => Ok(i),
            Value::Str(s) => Err(Error::Type(format!("expected an integer, got {s:?}"))),
        }
    }

    pub fn test(&self, c: &Cond, pos: usize, env: &[Option<u32>]) -> Result<bool> {
        Ok(match c {
            Cond::And(a, b) => self.test(a, pos, env)? && self.test(b, pos, env)?,
            Cond::Or(a, b) => self.test(a, pos, env)? || self.test(b, pos, env)?,
            Cond::Not(a) => !self.test(a, pos, env)?,
            Cond::IdIn {
                source,
                attr,
                hits,
                negate,
            } => {
                let id = self.id(*source, *attr, pos, env)?;
                hits[id as usize] != *negate
            }
            Cond::Regex {
                value,
                regex,
                negate,
            } => {
                let v = self.value(value, pos, env)?;
                regex.is_match(&v.to_string()) != *negate
            }
            Cond::StrEq { lhs, rhs, negate } => {
                let equal = match (lhs, rhs) {
                    (
                        Val::Attr { source: s1, attr: a1 },
                        Val::Attr { source: s2, attr: a2 },
                    ) if a1 == a2 => self.id(*s1, *a1, pos, env)? == self.id(*s2, *a2, pos, env)?,
                    _ => self.value(lhs, pos, env)? == self.value(rhs, pos, env)?,
                };
                equal != *negate
            }
            Cond::IntCmp { lhs, op, rhs } => {
                let (l, r) = (self.int(lhs, pos, env)?, self.int(rhs, pos, env)?);
                match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                    CmpOp::Lt => l < r,
                    CmpOp::Le => l <= r,
                    CmpOp::Gt => l > r,
                    CmpOp::Ge => l >= r,
                }
            }
            Cond::Truth(v) => self.int(v, pos, env)? != 0,
        })
    }
}
